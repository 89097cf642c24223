"""Cosparse analysis operator learning and multi-focus image fusion."""

from .fuse import FusionConfig, FusionResult, fuse, global_reconstruct, local_fuse
from .learn import (
    AdmmState,
    AnalysisOperator,
    NumericalFailure,
    TrainConfig,
    TrainReport,
    cosparse_code,
    init_operator,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "AdmmState",
    "AnalysisOperator",
    "FusionConfig",
    "FusionResult",
    "NumericalFailure",
    "TrainConfig",
    "TrainReport",
    "cosparse_code",
    "fuse",
    "global_reconstruct",
    "init_operator",
    "local_fuse",
    "train",
    "__version__",
]
