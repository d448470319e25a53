"""On-demand validation of CTI alerts with automatically built models.

The package turns threat-intelligence feeds into normalized datasets,
derives feature encodings and candidate classifiers per SOC requirement,
and serves predictions through a persistent model registry — building a
model only when a requirement actually needs one.
"""

from . import bench, evaluation, features, ingest, learners, orchestrator, schema
from .errors import (
    BudgetExceededError,
    ConfigurationError,
    ContractError,
    CtiValidatorError,
    DataUnavailableError,
    FormatError,
    NoModelFoundError,
    SchemaError,
    SpecMismatchError,
    StorageError,
    UnknownAttributeError,
)
from .ingest import Dataset, normalize, select_columns
from .learners import BuildBudget, TrainedModel, build_candidates, select_optimal
from .orchestrator import (
    ModelRegistry,
    NotApplicable,
    Notifier,
    Orchestrator,
    Predicted,
    Requirement,
    interpret,
    requirement_key,
)
from .schema import CtiRecord

__version__ = "0.1.0"

__all__ = [
    "BudgetExceededError",
    "BuildBudget",
    "ConfigurationError",
    "ContractError",
    "CtiRecord",
    "CtiValidatorError",
    "DataUnavailableError",
    "Dataset",
    "FormatError",
    "ModelRegistry",
    "NoModelFoundError",
    "NotApplicable",
    "Notifier",
    "Orchestrator",
    "Predicted",
    "Requirement",
    "SchemaError",
    "SpecMismatchError",
    "StorageError",
    "TrainedModel",
    "UnknownAttributeError",
    "__version__",
    "bench",
    "build_candidates",
    "evaluation",
    "features",
    "ingest",
    "interpret",
    "learners",
    "normalize",
    "orchestrator",
    "requirement_key",
    "schema",
    "select_columns",
    "select_optimal",
]
