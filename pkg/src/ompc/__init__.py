"""Online bounded-frequency mixed packing/covering solver and its Steiner forest application."""

from .core import (
    DEFAULT_PARAMS,
    CoveringConstraint,
    OnlineSolver,
    PackingSystem,
    PlantedCertificate,
    PotentialParams,
    binarize,
    delta,
    phi,
    satisfies,
    tau,
    violation_profile,
)
from .errors import (
    CapacityError,
    CertificateError,
    InfeasibleError,
    InfeasibleStep,
    InstanceError,
    InstanceFormatError,
    LoadLimitExceeded,
    OmpcError,
    OracleCapacityError,
    SizeError,
    StreamEnd,
)
from .graphs import WeightedGraph
from .oracles import BranchAndBoundOracle, ExactEnumerationOracle

__version__ = "0.1.0"
