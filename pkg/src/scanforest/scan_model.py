"""Scan records, service catalogs, labels and their on-disk formats.

Scan files are JSON Lines, one record per line::

    {"ip": "192.0.2.5", "ports": [80, 21], "services": ["HTTP", "FTP"]}

Label files are CSV with header ``ip,label,anomaly_type``.
"""

from __future__ import annotations

import csv
import io
import ipaddress
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

NORMAL = "normal"
ANOMALOUS = "anomalous"


class DataError(ValueError):
    """Malformed scan data, labels or catalog lookups."""


class CatalogMissError(DataError):
    def __init__(self, service: str):
        super().__init__(f"service {service!r} is not in the catalog")
        self.service = service


@dataclass(frozen=True)
class ScanRecord:
    ip: str
    ports: tuple[int, ...]
    services: tuple[str, ...]

    def __post_init__(self):
        # accept lists but store tuples so records stay hashable/immutable
        object.__setattr__(self, "ports", tuple(self.ports))
        object.__setattr__(self, "services", tuple(self.services))

    @property
    def pairs(self) -> list[tuple[int, str]]:
        return list(zip(self.ports, self.services))

    def violations(self) -> list[str]:
        out = []
        try:
            addr = ipaddress.IPv4Address(self.ip)
            if str(addr) != self.ip:
                out.append("ip not in canonical dotted-quad form")
        except (ipaddress.AddressValueError, ValueError, TypeError):
            out.append("invalid IPv4 address")
        if len(self.ports) != len(self.services):
            out.append("length mismatch")
        if len(self.ports) == 0:
            out.append("empty ports list")
        for p in self.ports:
            if isinstance(p, bool) or not isinstance(p, int):
                out.append("port not an integer")
                break
            if not 0 <= p <= 65535:
                out.append("port out of range")
                break
        for s in self.services:
            if not isinstance(s, str) or not s:
                out.append("empty service name")
                break
        return out


@dataclass(frozen=True)
class ScanDataset:
    records: tuple[ScanRecord, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[ScanRecord]:
        return iter(self.records)

    def ips(self) -> list[str]:
        """Distinct IPs in first-appearance order."""
        return list(dict.fromkeys(r.ip for r in self.records))

    def records_per_ip(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for r in self.records:
            counts[r.ip] = counts.get(r.ip, 0) + 1
        return counts

    def pairs_by_ip(self) -> dict[str, list[tuple[int, str]]]:
        out: dict[str, list[tuple[int, str]]] = {}
        for r in self.records:
            out.setdefault(r.ip, []).extend(r.pairs)
        return out

    def n_pairs(self) -> int:
        return sum(len(r.ports) for r in self.records)


@dataclass(frozen=True)
class ServiceCatalog:
    names: tuple[str, ...] = ()
    _ids: dict[str, int] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        ids = {n: i for i, n in enumerate(self.names)}
        if len(ids) != len(self.names):
            raise DataError("duplicate service names in catalog")
        object.__setattr__(self, "_ids", ids)

    def __len__(self) -> int:
        return len(self.names)

    def __contains__(self, name: str) -> bool:
        return name in self._ids

    def id_of(self, name: str) -> int:
        try:
            return self._ids[name]
        except KeyError:
            raise CatalogMissError(name) from None

    def name_of(self, service_id: int) -> str:
        return self.names[service_id]

    def as_dict(self) -> dict[str, int]:
        return dict(self._ids)


@dataclass(frozen=True)
class Label:
    label: str
    anomaly_type: int | None = None

    @property
    def is_anomalous(self) -> bool:
        return self.label == ANOMALOUS


@dataclass(frozen=True)
class GroundTruth:
    labels: dict[str, Label] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.labels)

    def __contains__(self, ip: str) -> bool:
        return ip in self.labels

    def __getitem__(self, ip: str) -> Label:
        return self.labels[ip]

    def anomalous(self) -> set[str]:
        return {ip for ip, lab in self.labels.items() if lab.is_anomalous}

    def normal(self) -> set[str]:
        return {ip for ip, lab in self.labels.items() if not lab.is_anomalous}

    def with_labels(self, ips: Iterable[str], anomaly_type: int) -> "GroundTruth":
        labels = dict(self.labels)
        for ip in ips:
            labels[ip] = Label(ANOMALOUS, anomaly_type)
        return GroundTruth(labels)

    @classmethod
    def all_normal(cls, ips: Iterable[str]) -> "GroundTruth":
        return cls({ip: Label(NORMAL) for ip in ips})


def build_catalog(ds: ScanDataset) -> ServiceCatalog:
    names: dict[str, None] = {}
    for rec in ds.records:
        for s in rec.services:
            names.setdefault(s, None)
    return ServiceCatalog(tuple(names))


def validate_dataset(ds: ScanDataset) -> list[str]:
    """Return one message per broken record rule; empty means valid."""
    out = []
    for k, rec in enumerate(ds.records):
        for rule in rec.violations():
            out.append(f"{rule} at record {k}")
    return out


def validate_truth(ds: ScanDataset, truth: GroundTruth) -> list[str]:
    out = [f"missing label for ip {ip}" for ip in ds.ips() if ip not in truth]
    for ip, lab in truth.labels.items():
        if lab.label not in (NORMAL, ANOMALOUS):
            out.append(f"unknown label {lab.label!r} for ip {ip}")
        elif lab.is_anomalous and lab.anomaly_type not in (1, 2):
            out.append(f"anomalous ip {ip} lacks anomaly type 1 or 2")
        elif not lab.is_anomalous and lab.anomaly_type is not None:
            out.append(f"normal ip {ip} carries an anomaly type")
    return out


# -- serialization ----------------------------------------------------------


def record_to_json(rec: ScanRecord) -> str:
    return json.dumps(
        {"ip": rec.ip, "ports": list(rec.ports), "services": list(rec.services)},
        separators=(", ", ": "),
        ensure_ascii=False,
    )


def dumps_scans(ds: ScanDataset) -> str:
    return "".join(record_to_json(r) + "\n" for r in ds.records)


def loads_scans(text: str) -> ScanDataset:
    records = []
    for lineno, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            rec = ScanRecord(obj["ip"], obj["ports"], obj["services"])
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DataError(f"line {lineno}: malformed scan record ({exc})") from None
        records.append(rec)
    return ScanDataset(tuple(records))


def write_scans(ds: ScanDataset, path: str | Path) -> None:
    Path(path).write_text(dumps_scans(ds), encoding="utf-8", newline="\n")


def read_scans(path: str | Path, validate: bool = True) -> ScanDataset:
    ds = loads_scans(Path(path).read_text(encoding="utf-8"))
    if validate:
        problems = validate_dataset(ds)
        if problems:
            more = f" (+{len(problems) - 1} more)" if len(problems) > 1 else ""
            raise DataError(f"{path}: {problems[0]}{more}")
    return ds


def dumps_labels(truth: GroundTruth) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["ip", "label", "anomaly_type"])
    for ip, lab in truth.labels.items():
        w.writerow([ip, lab.label, "" if lab.anomaly_type is None else lab.anomaly_type])
    return buf.getvalue()


def loads_labels(text: str) -> GroundTruth:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != ["ip", "label", "anomaly_type"]:
        raise DataError(f"labels header must be ip,label,anomaly_type, got {reader.fieldnames}")
    labels = {}
    for row in reader:
        kind = row["label"]
        if kind not in (NORMAL, ANOMALOUS):
            raise DataError(f"unknown label {kind!r} for ip {row['ip']}")
        atype = row["anomaly_type"]
        if atype not in ("", "1", "2"):
            raise DataError(f"bad anomaly_type {atype!r} for ip {row['ip']}")
        labels[row["ip"]] = Label(kind, int(atype) if atype else None)
    return GroundTruth(labels)


def write_labels(truth: GroundTruth, path: str | Path) -> None:
    Path(path).write_text(dumps_labels(truth), encoding="utf-8", newline="\n")


def read_labels(path: str | Path) -> GroundTruth:
    return loads_labels(Path(path).read_text(encoding="utf-8"))


def ip_to_int(ip: str) -> int:
    """Big-endian 32-bit value of a dotted quad."""
    return int(ipaddress.IPv4Address(ip))
