"""Physical-constraint-preserving solvers for general relativistic hydrodynamics."""

import os as _os

# honour the thread-count variable before numpy loads its BLAS
_threads = _os.environ.get("PCPGRHD_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from .eos import EosKind, EosParams, IdealEOS, UserEOS, make_eos  # noqa: E402
from .errors import (  # noqa: E402
    ConfigError,
    ContractError,
    DomainError,
    EosAdmissibilityError,
    EosDomainError,
    InadmissibleStateError,
    MetricError,
    PCPError,
    SolverError,
    UnsupportedEosError,
)

__version__ = "0.1.0"

__all__ = [
    "EosKind",
    "EosParams",
    "IdealEOS",
    "UserEOS",
    "make_eos",
    "ConfigError",
    "ContractError",
    "DomainError",
    "EosAdmissibilityError",
    "EosDomainError",
    "InadmissibleStateError",
    "MetricError",
    "PCPError",
    "SolverError",
    "UnsupportedEosError",
]
