import datetime
import json

import pytest

from ctivalidator import ingest
from ctivalidator.errors import (
    ConfigurationError,
    DataUnavailableError,
    FormatError,
    StorageError,
)
from ctivalidator.schema import CtiRecord

FEED_HEADER = "date,domain,IP,reverse lookup,description,ASN"
FEED_MAP = {
    "date": "date",
    "domain": "domain",
    "IP": "ip_src",
    "reverse lookup": "owner",
    "description": "attack",
    "ASN": "asn",
}


def feed_text(rows):
    return "\n".join([FEED_HEADER, *rows]) + "\n"


def parse_and_map(text):
    raw = ingest.parse_csv_feed(text, "feed", FEED_MAP)
    mapped = ingest.map_feed_records(raw.records, FEED_MAP)
    mapped.reports = raw.reports + mapped.reports
    return mapped


class TestCsvFeed:
    def test_columns_route_to_schema_fields(self):
        text = feed_text([
            "2017-03-29,textspeier.de,104.27.163.228,cloudflare,phishing,13335",
        ])
        result = parse_and_map(text)
        assert result.reports == []
        (rec,) = result.records
        assert rec.date == datetime.date(2017, 3, 29)
        assert rec.domain == "textspeier.de"
        assert rec.ip_src == "104.27.163.228"
        assert rec.owner == "cloudflare"
        assert rec.attack == "phishing"
        assert rec.asn == 13335

    def test_raw_rows_keep_source_strings(self):
        text = feed_text(["2017-03-29,a.example,1.2.3.4,x,phishing,13335"])
        (raw,) = ingest.parse_csv_feed(text, "feed", FEED_MAP).records
        assert raw.get("ASN") == "13335"
        assert raw.get("no-such-column") is None
        assert raw.row_number == 2

    def test_blank_and_dash_cells_become_none(self):
        text = feed_text(["2017-03-29,a.example,,-,phishing,"])
        (rec,) = parse_and_map(text).records
        assert rec.ip_src is None and rec.owner is None and rec.asn is None

    def test_short_row_reported_and_skipped(self):
        text = feed_text([
            "2017-03-29,a.example,1.2.3.4,x,phishing,1",
            "2017-03-30,b.example",
        ])
        result = parse_and_map(text)
        assert len(result.records) == 1
        (report,) = result.reports
        assert report.reason == "column-count-mismatch"
        assert report.row_number == 3  # header is physical row 1

    def test_uncoercible_cell_reported(self):
        text = feed_text(["2017-03-29,a.example,1.2.3.4,x,phishing,not-an-asn"])
        result = parse_and_map(text)
        assert result.records == []
        assert result.reports[0].reason == "uncoercible-value"

    def test_duplicate_header_rejected(self):
        text = "date,domain,domain\n2017-03-29,a.example,b.example\n"
        with pytest.raises(FormatError):
            ingest.parse_csv_feed(text, "feed", {"date": "date", "domain": "domain"})

    def test_mapped_column_missing_from_header_rejected(self):
        text = "date,domain\n2017-03-29,a.example\n"
        with pytest.raises(ConfigurationError):
            ingest.parse_csv_feed(text, "feed", {"IP": "ip_src"})

    def test_unknown_target_field_rejected(self):
        bad = dict(FEED_MAP, date="not_a_field")
        text = feed_text(["2017-03-29,a.example,1.2.3.4,x,phishing,1"])
        with pytest.raises(ConfigurationError):
            ingest.parse_csv_feed(text, "feed", bad)

    def test_empty_input_is_empty_result(self):
        result = ingest.parse_csv_feed("", "feed", FEED_MAP)
        assert result.records == [] and result.reports == []


MISP_ROUTES = [
    ("domain", "evil.example", "domain", "evil.example"),
    ("hostname", "host.evil.example", "domain", "host.evil.example"),
    ("url", "http://evil.example/x", "domain", "http://evil.example/x"),
    ("ip-src", "1.2.3.4", "ip_src", "1.2.3.4"),
    ("ip", "5.6.7.8", "ip_src", "5.6.7.8"),
    ("ip-dst", "9.9.9.9", "ip_dst", "9.9.9.9"),
    ("sha256", "aa" * 32, "file_hash", "aa" * 32),
    ("sha1", "bb" * 20, "file_hash", "bb" * 20),
    ("md5", "cc" * 16, "file_hash", "cc" * 16),
    ("filename", "dropper.exe", "filename", "dropper.exe"),
    ("comment", "observed in campaign", "description", "observed in campaign"),
    ("text", "free text", "description", "free text"),
    ("port", "8080", "port", 8080),
]


def misp_doc(events):
    return json.dumps(events)


class TestMispEvents:
    @pytest.mark.parametrize("attr_type,value,field,expected", MISP_ROUTES)
    def test_attribute_routing(self, attr_type, value, field, expected):
        event = {"Event": {"uuid": "u1", "info": "campaign",
                           "Attribute": [{"type": attr_type, "value": value}]}}
        result = ingest.parse_misp_events(misp_doc([event]))
        (rec,) = result.records
        assert getattr(rec, field) == expected
        assert rec.event == "campaign"

    def test_composite_filename_md5(self):
        event = {"Event": {"uuid": "u1", "info": "c", "Attribute": [
            {"type": "filename|md5", "value": "a.exe|" + "dd" * 16}]}}
        (rec,) = ingest.parse_misp_events(misp_doc([event])).records
        assert rec.filename == "a.exe"
        assert rec.file_hash == "dd" * 16

    def test_composite_ip_port(self):
        event = {"Event": {"uuid": "u1", "info": "c", "Attribute": [
            {"type": "ip-dst|port", "value": "9.9.9.9|443"}]}}
        (rec,) = ingest.parse_misp_events(misp_doc([event])).records
        assert rec.ip_dst == "9.9.9.9"
        assert rec.port == 443

    def test_event_base_fields(self):
        event = {"Event": {"uuid": "u1", "info": "Operation X",
                           "threat_level_id": "2", "date": "2017-03-29",
                           "Attribute": [{"type": "domain", "value": "a.example"}]}}
        (rec,) = ingest.parse_misp_events(misp_doc([event])).records
        assert rec.event == "Operation X"
        assert rec.threat_level == 2
        assert rec.date == datetime.date(2017, 3, 29)

    def test_out_of_range_threat_level_dropped(self):
        event = {"Event": {"uuid": "u1", "info": "c", "threat_level_id": "4",
                           "Attribute": [{"type": "domain", "value": "a.example"}]}}
        (rec,) = ingest.parse_misp_events(misp_doc([event])).records
        assert rec.threat_level is None

    def test_galaxy_tag_supplies_threat_type_and_name(self):
        event = {"Event": {"uuid": "u1", "info": "c",
                           "Tag": [{"name": 'misp-galaxy:tool="KHRAT"'}],
                           "Attribute": [{"type": "domain", "value": "a.example"}]}}
        (rec,) = ingest.parse_misp_events(misp_doc([event])).records
        assert rec.threat_type == "tool"
        assert rec.name == "KHRAT"

    def test_event_without_attributes_keeps_base_record(self):
        event = {"Event": {"uuid": "u1", "info": "bare", "threat_level_id": "1",
                           "Attribute": []}}
        result = ingest.parse_misp_events(misp_doc([event]))
        assert len(result.records) == 1
        assert result.records[0].event == "bare"

    def test_unsupported_type_reported(self):
        event = {"Event": {"uuid": "u1", "info": "c", "Attribute": [
            {"type": "yara", "value": "rule x {}"}]}}
        result = ingest.parse_misp_events(misp_doc([event]))
        assert result.records == []
        (report,) = result.reports
        assert report.reason == "unsupported-attribute-type"
        assert report.detail == "yara"

    def test_response_wrapper_unwrapped(self):
        event = {"Event": {"uuid": "u1", "info": "c", "Attribute": [
            {"type": "domain", "value": "a.example"}]}}
        result = ingest.parse_misp_events(json.dumps({"response": [event]}))
        assert len(result.records) == 1

    def test_single_event_document(self):
        event = {"Event": {"uuid": "u1", "info": "c", "Attribute": [
            {"type": "domain", "value": "a.example"}]}}
        result = ingest.parse_misp_events(json.dumps(event))
        assert len(result.records) == 1

    def test_garbage_document_rejected(self):
        with pytest.raises(FormatError):
            ingest.parse_misp_events("this is not json")


ENRICH_CSV = (
    "ip,asn,owner,country\n"
    "104.27.163.228,13335,cloudflare,US\n"
    "80.82.67.217,29073,quasi networks,SC\n"
)


class TestEnrichment:
    def provider(self):
        return ingest.OfflineEnrichmentTable(
            ENRICH_CSV, resolutions={"textspeier.de": "104.27.163.228"})

    def test_ip_hit_fills_whois_fields(self):
        rec, report = ingest.enrich(CtiRecord(ip_src="80.82.67.217"), self.provider())
        assert report is None
        assert rec.owner == "quasi networks"
        assert rec.country == "SC"
        assert rec.asn == 29073

    def test_domain_resolves_then_enriches(self):
        rec, report = ingest.enrich(CtiRecord(domain="textspeier.de"), self.provider())
        assert report is None
        assert rec.ip_src == "104.27.163.228"
        assert rec.owner == "cloudflare"

    def test_miss_reported_and_record_unchanged(self):
        before = CtiRecord(ip_src="198.51.100.7")
        rec, report = ingest.enrich(before, self.provider())
        assert rec == before
        assert report is not None

    def test_no_query_fields_is_silent(self):
        before = CtiRecord(description="no network indicators")
        rec, report = ingest.enrich(before, self.provider())
        assert rec == before
        assert report is None

    def test_existing_values_not_overwritten(self):
        before = CtiRecord(ip_src="80.82.67.217", owner="already-known")
        rec, _ = ingest.enrich(before, self.provider())
        assert rec.owner == "already-known"
        assert rec.asn == 29073

    def test_enrich_all_counts(self):
        records = [CtiRecord(ip_src="80.82.67.217"), CtiRecord(ip_src="0.0.0.1")]
        out, reports = ingest.enrich_all(records, self.provider())
        assert len(out) == 2
        assert len(reports) == 1


class TestNormalize:
    def test_timestamps_round_to_nearest_hour(self):
        ds = ingest.normalize(
            [CtiRecord(domain="a.example", attack="x1", timestamp=1490818721),
             CtiRecord(domain="b.example", attack="x1", timestamp=1490818721)],
            "t")
        assert {r.timestamp for r in ds.records} == {1490817600}

    def test_duplicates_collapse(self):
        rec = CtiRecord(domain="a.example", attack="seen", port=80)
        ds = ingest.normalize([rec, rec, rec], "t")
        assert len(ds.records) == 1
        assert ds.n_deduplicated == 2

    def test_empty_records_dropped(self):
        ds = ingest.normalize(
            [CtiRecord(), CtiRecord(domain="a.example", attack="x")], "t")
        assert ds.n_dropped_empty == 1
        assert len(ds.records) == 1

    def test_label_cleaning_and_aliases(self):
        recs = [CtiRecord(domain=f"h{i}.example", attack="Ransomware!!")
                for i in range(3)]
        ds = ingest.normalize(recs, "t")
        assert {r.attack for r in ds.records} == {"ransom"}

    def test_singleton_labels_group_to_other(self):
        recs = [CtiRecord(domain=f"h{i}.example", attack="ransom", port=80)
                for i in range(3)]
        recs.append(CtiRecord(domain="x.example", attack="phishing", port=443))
        ds = ingest.normalize(recs, "t")
        labels = sorted(r.attack for r in ds.records)
        assert labels == ["other", "ransom", "ransom", "ransom"]

    def test_idempotent(self):
        recs = [CtiRecord(domain=f"h{i % 5}.example", attack=f"a{i % 3}",
                          port=80, timestamp=1490818721 + i * 917)
                for i in range(40)]
        once = ingest.normalize(recs, "t")
        twice = ingest.normalize(once.records, "t")
        assert twice.records == once.records
        assert twice.fingerprint == once.fingerprint

    def test_fingerprint_order_invariant(self):
        recs = [CtiRecord(domain=f"h{i}.example", attack=f"a{i % 2}", port=80)
                for i in range(10)]
        forward = ingest.normalize(recs, "t")
        backward = ingest.normalize(list(reversed(recs)), "t")
        assert forward.fingerprint == backward.fingerprint
        assert forward.records == backward.records

    def test_fingerprint_tracks_content(self):
        a = ingest.normalize([CtiRecord(domain="a.example", attack="x")], "t")
        b = ingest.normalize([CtiRecord(domain="b.example", attack="x")], "t")
        assert a.fingerprint != b.fingerprint

    def test_row_accounting(self):
        rec = CtiRecord(domain="a.example", attack="x")
        ds = ingest.normalize([rec, rec, CtiRecord()], "t")
        assert ds.n_input == 3
        assert ds.n_input - ds.n_dropped_empty - ds.n_deduplicated == len(ds.records)


class PlainReq:
    def __init__(self, observed, label):
        self.observed = observed
        self.label = label


class TestSelectColumns:
    def dataset(self):
        recs = [CtiRecord(domain=f"h{i}.example", attack="ransom" if i % 2 else
                          "phishing", port=80 + i % 2) for i in range(6)]
        return ingest.normalize(recs, "sel")

    def test_returns_observed_and_labels(self):
        table = ingest.select_columns(self.dataset(), PlainReq(("domain", "port"),
                                                               "attack"))
        assert sorted(table.observed) == ["domain", "port"]
        assert len(table.labels) == 6
        assert set(table.labels) == {"ransom", "phishing"}
        assert table.label_name == "attack"
        assert table.n_source_rows == 6

    def test_missing_observed_column_unavailable(self):
        with pytest.raises(DataUnavailableError):
            ingest.select_columns(self.dataset(), PlainReq(("asn",), "attack"))

    def test_missing_label_column_unavailable(self):
        with pytest.raises(DataUnavailableError):
            ingest.select_columns(self.dataset(), PlainReq(("domain",), "name"))


class TestDatasetStorage:
    def dataset(self):
        recs = [CtiRecord(domain=f"h{i}.example", attack=f"a{i % 2}", port=80,
                          date=datetime.date(2017, 3, 29)) for i in range(8)]
        return ingest.normalize(recs, "store")

    def test_round_trip(self, tmp_path):
        ds = self.dataset()
        path = tmp_path / "ds.json"
        ingest.save_dataset(ds, path)
        back = ingest.load_dataset(path)
        assert back.records == ds.records
        assert back.fingerprint == ds.fingerprint
        assert back.dataset_id == ds.dataset_id

    def test_tampered_file_rejected(self, tmp_path):
        ds = self.dataset()
        path = tmp_path / "ds.json"
        ingest.save_dataset(ds, path)
        doc = json.loads(path.read_text())
        doc["records"][0]["domain"] = "tampered.example"
        path.write_text(json.dumps(doc))
        with pytest.raises(StorageError):
            ingest.load_dataset(path)

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(StorageError):
            ingest.load_dataset(tmp_path / "absent.json")
