"""Martingale optimal transport on finitely supported measures."""

from .constants import ConstantsResult, admissibility_residual, figure1_table, k_rho, sup_f_rho
from .convex_order import CxReport, check_cx, check_cx_1d, check_cx_nd
from .errors import (
    ConditionalMeanViolation,
    DegeneratePair,
    DegenerateSupport,
    DimensionMismatch,
    DomainError,
    EqualMeasures,
    MarginalMismatch,
    MartwassError,
    NotInConvexOrder,
)
from .itm import PiecewiseLinearFn, QMeasure, build_itm, itm_coupling, psi_pair, q_comonotone, q_conditioned_product
from .lp import LpSolution, lp_solve
from .measures import (
    EUCLIDEAN,
    DiscreteMeasure1D,
    DiscreteMeasureND,
    NormSpec,
    cdf,
    centred_moment,
    mean,
    quantile,
)
from .mot import compose_coupling, m2_closed_form, m_rho_lp, mot_lp
from .transport import Coupling, coupling_cost, w_rho_1d, w_rho_nd, wasserstein
from .verify import InequalityReport, SweepConfig, exponent_ratio, sweep, verify_pair

__version__ = "0.1.0"
