"""Learned space partitioning for high-dimensional path planning."""

from .core import (METHODS, ObjectiveOracle, RunRecord, Sample, SearchBudget, record_best,
                   seeded_rng)
from .search import VARIANTS, run_plalam

__all__ = ["METHODS", "ObjectiveOracle", "RunRecord", "Sample", "SearchBudget",
           "record_best", "seeded_rng", "VARIANTS", "run_plalam"]
__version__ = "0.1.0"
