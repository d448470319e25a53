"""Record schema for threat-intelligence data.

A :class:`CtiRecord` is the normalized unit every other module works on.
Fourteen attribute slots describe one sighting (event title, threat level,
threat type/name, date, timestamp, addresses, port, domain, file hash,
filename and two free-text slots), ``attack`` carries the label used by the
incident feeds, and ``asn``/``owner``/``country`` are filled in by
enrichment.  All slots are optional; a record is useful as soon as one
attribute slot besides ``dataset_id`` is present.

The module also owns the naming layer: canonical field names, the
human-friendly aliases accepted in requirement documents ("IP source",
"File hash", ...) and the ``ob1`` .. ``ob18`` shorthand for the observed
attribute sets that SOC requirements commonly use.
"""

from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass, fields as _dc_fields

from .errors import ContractError, UnknownAttributeError

# Feature-encoding kinds.  Every field is statically assigned exactly one.
KIND_CATEGORICAL = "categorical"
KIND_FREE_TEXT = "free-text"
KIND_STRUCTURED = "structured-string"
KIND_DATE = "date"
KIND_TIMESTAMP = "timestamp"
KIND_IP = "ip"


@dataclass(frozen=True)
class CtiRecord:
    """One normalized threat-intelligence sighting."""

    event: str | None = None
    threat_level: int | None = None
    threat_type: str | None = None
    name: str | None = None
    date: _dt.date | None = None
    timestamp: int | None = None
    ip_dst: str | None = None
    ip_src: str | None = None
    port: int | None = None
    domain: str | None = None
    file_hash: str | None = None
    filename: str | None = None
    description: str | None = None
    comment: str | None = None
    attack: str | None = None
    asn: int | None = None
    owner: str | None = None
    country: str | None = None
    dataset_id: str | None = None

    def __post_init__(self):
        if self.threat_level is not None and self.threat_level not in (1, 2, 3):
            raise ContractError(f"threat_level must be 1-3, got {self.threat_level}")
        if self.port is not None and not 0 <= self.port <= 65535:
            raise ContractError(f"port out of range: {self.port}")
        if self.timestamp is not None and self.timestamp < 0:
            raise ContractError(f"timestamp cannot be negative: {self.timestamp}")


# The fourteen attribute slots of the sighting itself (excludes the label,
# enrichment results and the dataset tag).
ATTRIBUTE_SLOTS: tuple[str, ...] = (
    "event",
    "threat_level",
    "threat_type",
    "name",
    "date",
    "timestamp",
    "ip_dst",
    "ip_src",
    "port",
    "domain",
    "file_hash",
    "filename",
    "description",
    "comment",
)

ALL_FIELDS: tuple[str, ...] = tuple(f.name for f in _dc_fields(CtiRecord))

# Fields that may legally appear in a requirement (everything but the
# dataset tag, which addresses a corpus rather than an attribute).
REQUIREMENT_FIELDS: tuple[str, ...] = tuple(
    f for f in ALL_FIELDS if f != "dataset_id"
)

INT_FIELDS: frozenset[str] = frozenset({"threat_level", "timestamp", "port", "asn"})

FIELD_KINDS: dict[str, str] = {
    "event": KIND_FREE_TEXT,
    "threat_level": KIND_CATEGORICAL,
    "threat_type": KIND_CATEGORICAL,
    "name": KIND_CATEGORICAL,
    "date": KIND_DATE,
    "timestamp": KIND_TIMESTAMP,
    "ip_dst": KIND_IP,
    "ip_src": KIND_IP,
    "port": KIND_CATEGORICAL,
    "domain": KIND_STRUCTURED,
    "file_hash": KIND_STRUCTURED,
    "filename": KIND_STRUCTURED,
    "description": KIND_FREE_TEXT,
    "comment": KIND_FREE_TEXT,
    "attack": KIND_CATEGORICAL,
    "asn": KIND_CATEGORICAL,
    "owner": KIND_CATEGORICAL,
    "country": KIND_CATEGORICAL,
}

# Split rules for structured strings.  Hashes are opaque: one whole-value
# token.  Domains/URLs split on scheme and path separators, filenames on
# their usual joiners.
STRUCTURED_DELIMITERS: dict[str, tuple[str, ...]] = {
    "domain": ("//", ".", "/"),
    "filename": (".", "_", "-"),
    "file_hash": (),
}

# Requirement documents use prose names; map them onto schema fields.  A
# bare "IP" is the attacker-side address: incident feeds publish the host
# serving the malicious resource, which lands in ip_src.
_ATTRIBUTE_ALIASES: dict[str, str] = {
    "ip": "ip_src",
    "ip source": "ip_src",
    "ip src": "ip_src",
    "source ip": "ip_src",
    "ip destination": "ip_dst",
    "ip dst": "ip_dst",
    "destination ip": "ip_dst",
    "file hash": "file_hash",
    "hash": "file_hash",
    "threat level": "threat_level",
    "threat type": "threat_type",
    "file name": "filename",
}


def canonical_attribute(name: str) -> str:
    """Resolve a requirement-document attribute name to a schema field.

    Accepts canonical field names, common prose aliases and arbitrary
    case/underscore/hyphen spelling.  Raises UnknownAttributeError for
    anything that is not a record field.
    """
    cleaned = " ".join(str(name).strip().lower().replace("-", " ").replace("_", " ").split())
    if not cleaned:
        raise UnknownAttributeError(name)
    field = _ATTRIBUTE_ALIASES.get(cleaned, cleaned.replace(" ", "_"))
    if field not in REQUIREMENT_FIELDS:
        raise UnknownAttributeError(name)
    return field


# Named observed-attribute sets.  SOC requirements overwhelmingly reuse a
# small catalogue of attribute combinations; ob1..ob18 name the ones seen
# in practice so a requirement document can say "ob: ob3".
OBSERVED_SET_ALIASES: dict[str, tuple[str, ...]] = {
    "ob1": ("date",),
    "ob2": ("domain",),
    "ob3": ("ip_src", "asn", "owner", "country"),
    "ob4": ("date", "domain"),
    "ob5": ("ip_src", "asn", "owner", "country", "domain"),
    "ob6": ("ip_src", "asn", "owner", "country", "date"),
    "ob7": ("ip_src", "asn", "owner", "country", "domain", "date"),
    "ob8": ("ip_dst", "port", "ip_src", "asn", "owner", "country", "domain",
            "file_hash", "filename"),
    "ob9": ("ip_dst", "port", "ip_src", "asn", "owner", "country", "domain",
            "file_hash", "filename", "description", "comment"),
    "ob10": ("ip_dst", "port", "ip_src", "asn", "owner", "country", "domain",
             "description", "comment"),
    "ob11": ("ip_dst", "port", "ip_src", "asn", "owner", "country", "domain",
             "file_hash", "filename", "date", "timestamp"),
    "ob12": ("ip_dst", "port", "ip_src", "asn", "owner", "country", "domain",
             "file_hash", "filename", "description", "comment", "date",
             "timestamp"),
    "ob13": ("ip_dst", "port", "ip_src", "asn", "owner", "country", "domain",
             "description", "comment", "date", "timestamp"),
    "ob14": ("ip_dst", "port", "ip_src", "asn", "owner", "country", "domain",
             "date", "timestamp"),
    "ob15": ("description", "comment", "file_hash", "filename"),
    "ob16": ("date", "timestamp", "file_hash", "filename"),
    "ob17": ("date", "timestamp", "file_hash", "filename", "description",
             "comment"),
    "ob18": ("date", "timestamp", "description", "comment"),
}

_DATE_FORMATS = (
    "%Y-%m-%d",
    "%Y/%m/%d",
    "%Y-%m-%d %H:%M",
    "%Y/%m/%d %H:%M",
    "%Y-%m-%d %H:%M:%S",
    "%Y/%m/%d %H:%M:%S",
    "%Y-%m-%dT%H:%M:%S",
)


def parse_date(value: str) -> _dt.date:
    """Parse a feed date string; time parts are accepted and discarded."""
    text = str(value).strip()
    for fmt in _DATE_FORMATS:
        try:
            return _dt.datetime.strptime(text, fmt).date()
        except ValueError:
            continue
    raise ContractError(f"unparseable date value: {value!r}")


def coerce_field(field: str, value) -> object | None:
    """Coerce a raw (usually string) value into the field's native type.

    Empty strings and the conventional "-" null marker become None.
    """
    if field not in FIELD_KINDS and field != "dataset_id":
        raise UnknownAttributeError(field)
    if value is None:
        return None
    if isinstance(value, str):
        value = value.strip()
        if value in ("", "-"):
            return None
    if field == "date":
        if isinstance(value, _dt.date):
            return value
        return parse_date(value)
    if field in INT_FIELDS:
        try:
            return int(value)
        except (TypeError, ValueError) as exc:
            raise ContractError(f"field {field!r} expects an integer, got {value!r}") from exc
    return str(value)


def record_from_mapping(mapping: dict, *, dataset_id: str | None = None) -> CtiRecord:
    """Build a CtiRecord from a field->raw-value mapping, coercing types."""
    kwargs: dict[str, object] = {}
    for field, raw in mapping.items():
        if field not in ALL_FIELDS:
            raise UnknownAttributeError(field)
        coerced = coerce_field(field, raw) if field != "dataset_id" else raw
        if coerced is not None:
            kwargs[field] = coerced
    if dataset_id is not None:
        kwargs["dataset_id"] = dataset_id
    return CtiRecord(**kwargs)


def record_to_plain(record: CtiRecord) -> dict[str, object]:
    """Serialize a record to JSON-ready primitives, omitting empty slots."""
    out: dict[str, object] = {}
    for field in ALL_FIELDS:
        value = getattr(record, field)
        if value is None:
            continue
        out[field] = value.isoformat() if isinstance(value, _dt.date) else value
    return out


def record_from_plain(data: dict) -> CtiRecord:
    """Inverse of :func:`record_to_plain`."""
    return record_from_mapping(dict(data))


def has_content(record: CtiRecord) -> bool:
    """True when at least one of the fourteen attribute slots is filled."""
    return any(getattr(record, f) is not None for f in ATTRIBUTE_SLOTS)
