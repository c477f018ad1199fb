"""Certificates, pencil spectra, witness constructions and recovery for sensing under unknown linear maps."""

__version__ = "0.1.0"

from .errors import (
    ConstructionError,
    DomainError,
    FamilySizeError,
    HomsenseError,
    InputError,
    NotApplicableError,
    NumericalInstabilityError,
    PreconditionError,
    UnsupportedMapError,
)
from .numkit import DEFAULT_TOL, Subspace, SubspaceArrangement, Tolerance
from .maps import LinearMap, MapFamily, parse_family, parse_map
from .certify import Certificate, hsp_arrangement, hsp_ksparse, hsp_pair, hsp_set
from .pencil import audit_dimension_bound, check_condition_1, dim_U, spectrum
from .filtration import construct_witness, run_filtration
from .recover import solve_mle, solve_sparse, solve_unlabeled, stability_report
