import datetime

import pytest

from ctivalidator import schema
from ctivalidator.errors import ContractError, UnknownAttributeError
from ctivalidator.schema import CtiRecord


def test_attribute_slots_cover_fourteen_fields():
    assert len(schema.ATTRIBUTE_SLOTS) == 14
    assert "dataset_id" not in schema.ATTRIBUTE_SLOTS
    assert "attack" not in schema.ATTRIBUTE_SLOTS


def test_canonical_attribute_aliases():
    assert schema.canonical_attribute("IP") == "ip_src"
    assert schema.canonical_attribute("ip destination") == "ip_dst"
    assert schema.canonical_attribute("File Hash") == "file_hash"
    assert schema.canonical_attribute("threat-level") == "threat_level"
    assert schema.canonical_attribute("domain") == "domain"
    assert schema.canonical_attribute(" Port ") == "port"


def test_canonical_attribute_rejects_unknown():
    with pytest.raises(UnknownAttributeError):
        schema.canonical_attribute("severity")
    with pytest.raises(UnknownAttributeError):
        schema.canonical_attribute("")


def test_observed_set_aliases_are_canonical():
    assert schema.OBSERVED_SET_ALIASES["ob3"] == ("ip_src", "asn", "owner", "country")
    for name, fields in schema.OBSERVED_SET_ALIASES.items():
        assert fields, name
        assert len(set(fields)) == len(fields), name
        for field in fields:
            assert field in schema.REQUIREMENT_FIELDS, (name, field)


def test_parse_date_formats():
    assert schema.parse_date("2017-03-29") == datetime.date(2017, 3, 29)
    assert schema.parse_date("2017/12/04 18:50") == datetime.date(2017, 12, 4)
    assert schema.parse_date("2017-12-04T08:01:02") == datetime.date(2017, 12, 4)
    with pytest.raises(ContractError):
        schema.parse_date("yesterday")


def test_coerce_field_blank_and_dash_mean_missing():
    assert schema.coerce_field("domain", "") is None
    assert schema.coerce_field("domain", "-") is None
    assert schema.coerce_field("port", " 443 ") == 443
    assert schema.coerce_field("threat_level", "2") == 2
    assert schema.coerce_field("date", "2017-03-29") == datetime.date(2017, 3, 29)


def test_coerce_field_rejects_non_integers():
    with pytest.raises(ContractError):
        schema.coerce_field("port", "not-a-number")


def test_record_validates_ranges():
    with pytest.raises(ContractError):
        CtiRecord(port=70000)
    with pytest.raises(ContractError):
        CtiRecord(threat_level=9)
    with pytest.raises(ContractError):
        CtiRecord(timestamp=-5)


def test_record_round_trip_through_plain():
    rec = CtiRecord(event="e", threat_level=2, date=datetime.date(2017, 3, 29),
                    timestamp=1490817600, ip_dst="1.2.3.4", port=40,
                    domain="x.example.org", attack="phishing", dataset_id="d")
    plain = schema.record_to_plain(rec)
    assert plain["date"] == "2017-03-29"
    assert "filename" not in plain  # missing fields are omitted
    assert schema.record_from_plain(plain) == rec


def test_record_from_mapping_rejects_unknown_field():
    with pytest.raises(UnknownAttributeError):
        schema.record_from_mapping({"nonsense": "x"})


def test_has_content_requires_an_attribute_slot():
    assert not schema.has_content(CtiRecord(dataset_id="d"))
    assert not schema.has_content(CtiRecord(attack="phishing", dataset_id="d"))
    assert schema.has_content(CtiRecord(domain="x.org"))
