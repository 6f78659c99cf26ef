"""Structure-preserving model order reduction by parameter optimization."""

from .baselines import balanced_truncation, lyap_solve, ph_bt, ph_irka, so_bt
from .benchmarks import msd_ph_chain, triple_chain_sso
from .driver import GammaSchedule, ReductionReport, init_greedy, init_lsq, init_random, sobmor_reduce
from .estimators import (
    PHIRKA,
    SOBMOR,
    BalancedTruncation,
    PHBalancedTruncation,
    SOBalancedTruncation,
)
from .metrics import GridSpec, h2_error, hinf_error, make_grid, sample_fom
from .models import FrequencySampleSet, PHModel, SSOModel, StateSpaceModel, freqresp
from .param import Layout, ParamVector, assemble, extract_theta

__all__ = [
    "BalancedTruncation",
    "FrequencySampleSet",
    "GammaSchedule",
    "GridSpec",
    "Layout",
    "PHBalancedTruncation",
    "PHIRKA",
    "PHModel",
    "ParamVector",
    "ReductionReport",
    "SOBMOR",
    "SOBalancedTruncation",
    "SSOModel",
    "StateSpaceModel",
    "assemble",
    "balanced_truncation",
    "extract_theta",
    "freqresp",
    "h2_error",
    "hinf_error",
    "init_greedy",
    "init_lsq",
    "init_random",
    "lyap_solve",
    "make_grid",
    "msd_ph_chain",
    "ph_bt",
    "ph_irka",
    "sample_fom",
    "so_bt",
    "sobmor_reduce",
    "triple_chain_sso",
]
