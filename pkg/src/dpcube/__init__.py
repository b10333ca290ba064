"""Differentially private release of datacube marginals over binary attributes."""

__version__ = "0.1.0"

from .core import (AttributeSchema, Attribute, BitMask, ContingencyVector, Workload, all_kway,
                   load_workload)
from .mechanism import PrivacySpec, PrivacyViolation, check_privacy, release
from .pipeline import PipelineConfig, Plan, make_plan, run_release
from .strategy import NotGroupable, build_strategy
from .recovery import NotReconstructible

__all__ = [
    "Attribute", "AttributeSchema", "BitMask", "ContingencyVector", "Workload", "all_kway",
    "load_workload", "PrivacySpec", "PrivacyViolation", "check_privacy", "release",
    "PipelineConfig", "Plan", "make_plan", "run_release", "NotGroupable", "build_strategy",
    "NotReconstructible", "__version__",
]
