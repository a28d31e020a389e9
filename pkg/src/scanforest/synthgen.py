"""Seeded synthetic scan data with planted usage-spike and port-mismatch anomalies.

Normal traffic places every service on its standard port. Two injectors plant
anomalous IPs on top of a normal dataset:

* type 1 multiplies an IP's scan volume, concentrating the extra records on a
  handful of (still standard) service/port pairs;
* type 2 appends a single record that runs standard services on ports no
  standard service uses.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

import numpy as np

from scanforest.scan_model import GroundTruth, ScanDataset, ScanRecord


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class GenerationError(RuntimeError):
    pass


_STANDARD = {
    "HTTP": 80,
    "HTTPS": 443,
    "FTP": 21,
    "SSH": 22,
    "SMTP": 25,
    "DNS": 53,
    "POP3": 110,
    "IMAP": 143,
    "TELNET": 23,
    "RDP": 3389,
    "MYSQL": 3306,
    "NTP": 123,
}


def standard_service_map() -> Mapping[str, int]:
    """Read-only default service -> standard port table."""
    return MappingProxyType(dict(_STANDARD))


def is_standard_pair(port: int, service: str, smap: Mapping[str, int] | None = None) -> bool:
    smap = standard_service_map() if smap is None else smap
    return smap.get(service) == port


@dataclass(frozen=True)
class GeneratorConfig:
    n_ips: int = 1000
    scans_per_ip: float = 20
    pairs_per_scan: tuple[int, int] = (1, 10)
    anomaly_rate: float = 0.05
    type1_spike_factor: int = 10
    type2_mismatch_pairs: int = 3
    seed: int = 0
    # "poisson": per-IP scan counts ~ Poisson(scans_per_ip), floor 1; "fixed": exactly scans_per_ip
    scan_count: str = "poisson"

    def validate(self, anomalies: bool = False) -> None:
        if not isinstance(self.n_ips, int) or self.n_ips < 1:
            raise ConfigError("n_ips", f"must be an integer >= 1, got {self.n_ips!r}")
        if self.scans_per_ip <= 0:
            raise ConfigError("scans_per_ip", f"must be > 0, got {self.scans_per_ip!r}")
        lo, hi = self.pairs_per_scan
        if lo < 1 or lo > hi:
            raise ConfigError("pairs_per_scan", f"need 1 <= min <= max, got {self.pairs_per_scan!r}")
        if not 0 <= self.anomaly_rate < 1:
            raise ConfigError("anomaly_rate", f"must lie in [0, 1), got {self.anomaly_rate!r}")
        if self.type1_spike_factor < 2:
            raise ConfigError("type1_spike_factor", f"must be >= 2, got {self.type1_spike_factor!r}")
        if self.type2_mismatch_pairs < 1:
            raise ConfigError("type2_mismatch_pairs", f"must be >= 1, got {self.type2_mismatch_pairs!r}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed", f"must be a non-negative 64-bit integer, got {self.seed!r}")
        if self.scan_count not in ("poisson", "fixed"):
            raise ConfigError("scan_count", f"must be 'poisson' or 'fixed', got {self.scan_count!r}")
        if anomalies and self.n_anomalies() < 1:
            raise ConfigError("anomaly_rate", "anomaly_rate * n_ips must be >= 1 to plant anomalies")

    def n_anomalies(self) -> int:
        # round away float noise before the ceiling: 0.05 * 100 is 5.000000000000001
        return math.ceil(round(self.anomaly_rate * self.n_ips, 9))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pairs_per_scan"] = list(self.pairs_per_scan)
        return d


def load_config(path: str | Path, **overrides) -> GeneratorConfig:
    """Read a flat ``key=value`` file; blank lines and ``#`` comments are skipped."""
    known = {f.name: f for f in fields(GeneratorConfig)}
    values: dict = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", "expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ConfigError(key, "unknown configuration key")
        values[key] = _parse_value(key, val)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return GeneratorConfig(**values)


def _parse_value(key: str, val: str):
    try:
        if key == "pairs_per_scan":
            lo, hi = (int(x) for x in val.replace("(", "").replace(")", "").split(","))
            return (lo, hi)
        if key in ("anomaly_rate", "scans_per_ip"):
            return float(val)
        if key == "scan_count":
            return val
        return int(val)
    except ValueError:
        raise ConfigError(key, f"cannot parse {val!r}") from None


def _ip_for(index: int) -> str:
    # 10.0.0.1 upward; index 0 -> 10.0.0.1
    n = index + 1
    return f"10.{(n >> 16) & 255}.{(n >> 8) & 255}.{n & 255}"


def _rng(cfg: GeneratorConfig, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(stream,)))


def _draw_record(rng, ip, services, smap, lo, hi) -> ScanRecord:
    k = int(rng.integers(lo, hi + 1))
    picks = rng.integers(0, len(services), size=k)
    svc = [services[i] for i in picks]
    return ScanRecord(ip, tuple(smap[s] for s in svc), tuple(svc))


def generate_normal(cfg: GeneratorConfig) -> tuple[ScanDataset, GroundTruth]:
    cfg.validate()
    if cfg.n_ips > 2**24 - 2:
        raise ConfigError("n_ips", "too many IPs for the 10.0.0.0/8 range")
    smap = standard_service_map()
    services = list(smap)
    rng = _rng(cfg, 0)
    lo, hi = cfg.pairs_per_scan
    ips = [_ip_for(i) for i in range(cfg.n_ips)]
    if cfg.scan_count == "fixed":
        counts = np.full(cfg.n_ips, max(1, int(round(cfg.scans_per_ip))))
    else:
        counts = np.maximum(rng.poisson(cfg.scans_per_ip, size=cfg.n_ips), 1)
    records = []
    for ip, n in zip(ips, counts):
        for _ in range(int(n)):
            records.append(_draw_record(rng, ip, services, smap, lo, hi))
    return ScanDataset(tuple(records)), GroundTruth.all_normal(ips)


def _pick_targets(rng, truth: GroundTruth, cfg: GeneratorConfig) -> list[str]:
    candidates = sorted(truth.normal())
    k = cfg.n_anomalies()
    if k > len(candidates):
        raise GenerationError(f"cannot plant {k} anomalies among {len(candidates)} normal IPs")
    idx = rng.choice(len(candidates), size=k, replace=False)
    return [candidates[i] for i in sorted(idx)]


def inject_type1(
    ds: ScanDataset, truth: GroundTruth, cfg: GeneratorConfig
) -> tuple[ScanDataset, GroundTruth]:
    """Plant usage spikes.

    Each chosen IP ends with ``type1_spike_factor`` times its base record count.
    The base is the IP's own count, floored at half the median count of normal
    IPs so that a spike on an unusually quiet IP still stands out in volume.
    Added records repeat standard pairs drawn from 1-3 services picked per IP.
    """
    cfg.validate(anomalies=True)
    smap = standard_service_map()
    services = list(smap)
    rng = _rng(cfg, 1)
    targets = _pick_targets(rng, truth, cfg)
    per_ip = ds.records_per_ip()
    normal_counts = [per_ip.get(ip, 0) for ip in truth.normal()]
    floor = 0.5 * float(np.median(normal_counts)) if normal_counts else 0.0
    lo, hi = cfg.pairs_per_scan
    extra = []
    for ip in targets:
        have = per_ip.get(ip, 0)
        base = max(have, math.ceil(floor))
        n_new = cfg.type1_spike_factor * base - have
        n_focus = int(rng.integers(1, 4))
        focus = [services[i] for i in rng.choice(len(services), size=n_focus, replace=False)]
        for _ in range(n_new):
            extra.append(_draw_record(rng, ip, focus, smap, lo, hi))
    return ScanDataset(ds.records + tuple(extra)), truth.with_labels(targets, 1)


def inject_type2(
    ds: ScanDataset, truth: GroundTruth, cfg: GeneratorConfig
) -> tuple[ScanDataset, GroundTruth]:
    """Plant service/port mismatches: one extra record per chosen IP."""
    cfg.validate(anomalies=True)
    smap = standard_service_map()
    services = list(smap)
    taken = np.zeros(65536, dtype=bool)
    taken[list(smap.values())] = True
    free = np.flatnonzero(~taken)
    if free.size == 0:
        raise GenerationError("standard map covers every port; no mismatch port available")
    rng = _rng(cfg, 2)
    targets = _pick_targets(rng, truth, cfg)
    extra = []
    for ip in targets:
        svc = [services[i] for i in rng.integers(0, len(services), size=cfg.type2_mismatch_pairs)]
        ports = free[rng.integers(0, free.size, size=cfg.type2_mismatch_pairs)]
        extra.append(ScanRecord(ip, tuple(int(p) for p in ports), tuple(svc)))
    return ScanDataset(ds.records + tuple(extra)), truth.with_labels(targets, 2)


def generate_experiment(anomaly_type: int, cfg: GeneratorConfig) -> tuple[ScanDataset, GroundTruth]:
    if anomaly_type not in (1, 2):
        raise ConfigError("anomaly_type", f"must be 1 or 2, got {anomaly_type!r}")
    cfg.validate(anomalies=True)
    ds, truth = generate_normal(cfg)
    inject = inject_type1 if anomaly_type == 1 else inject_type2
    return inject(ds, truth, cfg)


def with_seed(cfg: GeneratorConfig, seed: int) -> GeneratorConfig:
    return replace(cfg, seed=seed)
