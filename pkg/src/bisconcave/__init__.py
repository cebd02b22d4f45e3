"""Confidence bands for distribution functions under bi-s*-concavity."""

from .bands import (
    CACHE_SCHEMA_VERSION,
    Band,
    QuantileCache,
    QuantileEstimate,
    build_band,
    ks_band,
    ks_quantile,
    massart_bound,
    wks_band,
    wks_quantile,
)
from .concint import ConcIntResult, conc_int, least_concave_majorant
from .errors import *  # noqa: F401,F403
from .families import DistributionModel, make_family, parse_family, sample
from .grid import KnotFunction, SampleData, empirical_cdf, evaluate, left_limit
from .inference import SstarEstimate, estimate_sstar, omega, sstar_upper
from .refine import RefinementResult, ShapeParam, inverse_h, refine, refine_once, transform_g
from .shape import (
    CRReport,
    GridSpec,
    ShapeReport,
    check_bi_sstar,
    cr_constants,
    global_envelopes,
    max_sstar,
    moment_exponent_bound,
    tail_bounds,
)

__version__ = "0.1.0"
