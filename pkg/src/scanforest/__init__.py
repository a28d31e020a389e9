"""Isolation forests for set-structured internet scan data."""

from scanforest.scan_model import GroundTruth, ScanDataset, ScanRecord, ServiceCatalog
from scanforest.isoforest import Forest, ForestConfig, fit_forest, expected_path_c
from scanforest.siforest import SiForestConfig, fit_si_forest, aggregate_by_ip, detect_ips

__all__ = [
    "GroundTruth",
    "ScanDataset",
    "ScanRecord",
    "ServiceCatalog",
    "Forest",
    "ForestConfig",
    "fit_forest",
    "expected_path_c",
    "SiForestConfig",
    "fit_si_forest",
    "aggregate_by_ip",
    "detect_ips",
]

__version__ = "0.1.0"
