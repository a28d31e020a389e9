"""Flattening and summarization of scan datasets into numeric tables."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from scanforest.scan_model import ScanDataset, ServiceCatalog, build_catalog, ip_to_int


@dataclass(frozen=True)
class GroupedTable:
    """Numeric feature rows with a parallel group key per row."""

    features: np.ndarray
    groups: np.ndarray

    def __post_init__(self):
        if len(self.features) != len(self.groups):
            raise ValueError(
                f"features and groups differ in length ({len(self.features)} != {len(self.groups)})"
            )

    def __len__(self) -> int:
        return len(self.features)


@dataclass(frozen=True)
class FlatTable:
    """One row per (record, pair index): group key plus (port, service_id)."""

    ips: np.ndarray
    ports: np.ndarray
    service_ids: np.ndarray
    catalog: ServiceCatalog

    def __len__(self) -> int:
        return len(self.ips)

    def features(self, include_ip: bool = False) -> np.ndarray:
        cols = [self.ports, self.service_ids]
        if include_ip:
            cols.insert(0, np.array([ip_to_int(ip) for ip in self.ips], dtype=np.int64))
        return np.column_stack(cols).astype(float) if len(self) else np.empty((0, len(cols)))

    def grouped(self, include_ip: bool = False) -> GroupedTable:
        return GroupedTable(self.features(include_ip), self.ips)

    def regroup(self) -> dict[str, list[tuple[int, str]]]:
        """Per-IP (port, service) pairs decoded back through the catalog."""
        out: dict[str, list[tuple[int, str]]] = {}
        for ip, port, sid in zip(self.ips, self.ports, self.service_ids):
            out.setdefault(str(ip), []).append((int(port), self.catalog.name_of(int(sid))))
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["ip", "port", "service_id"])
        w.writerows(zip(self.ips, self.ports.tolist(), self.service_ids.tolist()))
        return buf.getvalue()


@dataclass(frozen=True)
class SummaryTable:
    """Per-IP occurrence counts; columns are ports ascending, then services by catalog id."""

    ips: tuple[str, ...]
    port_columns: tuple[int, ...]
    service_columns: tuple[str, ...]
    counts: np.ndarray

    def __len__(self) -> int:
        return len(self.ips)

    @property
    def column_names(self) -> list[str]:
        return [f"port_{p}" for p in self.port_columns] + [f"svc_{s}" for s in self.service_columns]

    def port_counts(self) -> np.ndarray:
        return self.counts[:, : len(self.port_columns)]

    def service_counts(self) -> np.ndarray:
        return self.counts[:, len(self.port_columns) :]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["ip", *self.column_names])
        for ip, row in zip(self.ips, self.counts.tolist()):
            w.writerow([ip, *row])
        return buf.getvalue()


def flatten(ds: ScanDataset, catalog: ServiceCatalog | None = None) -> FlatTable:
    if catalog is None:
        catalog = build_catalog(ds)
    ips, ports, sids = [], [], []
    for rec in ds.records:
        for port, svc in zip(rec.ports, rec.services):
            ips.append(rec.ip)
            ports.append(port)
            sids.append(catalog.id_of(svc))
    return FlatTable(
        np.array(ips, dtype=object),
        np.array(ports, dtype=np.int64),
        np.array(sids, dtype=np.int64),
        catalog,
    )


def summarize(ds: ScanDataset, catalog: ServiceCatalog | None = None) -> SummaryTable:
    flat = flatten(ds, catalog)
    ips = tuple(ds.ips())
    port_cols = np.unique(flat.ports)
    used_sids = np.unique(flat.service_ids)
    row_of = {ip: i for i, ip in enumerate(ips)}
    rows = np.fromiter((row_of[ip] for ip in flat.ips), dtype=np.int64, count=len(flat))
    counts = np.zeros((len(ips), port_cols.size + used_sids.size), dtype=np.int64)
    np.add.at(counts, (rows, np.searchsorted(port_cols, flat.ports)), 1)
    np.add.at(counts, (rows, port_cols.size + np.searchsorted(used_sids, flat.service_ids)), 1)
    return SummaryTable(
        ips,
        tuple(int(p) for p in port_cols),
        tuple(flat.catalog.name_of(int(s)) for s in used_sids),
        counts,
    )


def write_table(table: FlatTable | SummaryTable, path: str | Path) -> None:
    Path(path).write_text(table.to_csv(), encoding="utf-8", newline="\n")
