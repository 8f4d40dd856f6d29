"""Numerical toolkit for slow-fast transitions past a cusp point.

The planar slow-fast system a' = eps (1 + f1), b' = eps f2,
z' = -(z^3 + b z + a + eps f3) has the cusp surface z^3 + b z + a = 0 as
critical manifold. The modules cover the vector field and its critical set
(:mod:`cusp_core`), integration to sections (:mod:`odeflow`), the weighted
blow-up charts (:mod:`blowup_atlas`), the slow divergence integral
(:mod:`sdi`), exponential-type transition maps (:mod:`exp_maps`) and the
numerical experiments built on them (:mod:`transition_lab`).
"""

from .blowup_atlas import ChartId, ChartPoint, blow_down, blow_up, chart_field, matching_map
from .config import RunConfig, load_config
from .cusp_core import (
    A3System,
    StatePoint,
    classify_point,
    critical_branches,
    principal_system,
    stock_flat_system,
)
from .errors import CuspLabError
from .exp_maps import ExpTypeMap, compose_chain, compose_exp, extract_components
from .odeflow import Section, integrate, integrate_to_section
from .sdi import sdi_closed, sdi_quadrature, sdi_slow_path, sdi_target
from .transition_lab import (
    estimate_transition,
    flatness_robustness,
    fold_exponent_fit,
    layer_study,
    sweep_eps,
)

__version__ = "0.1.0"

__all__ = [
    "A3System", "StatePoint", "classify_point", "critical_branches", "principal_system",
    "stock_flat_system", "Section", "integrate", "integrate_to_section", "ChartId",
    "ChartPoint", "blow_down", "blow_up", "chart_field", "matching_map", "sdi_closed",
    "sdi_quadrature", "sdi_slow_path", "sdi_target", "ExpTypeMap", "compose_exp",
    "compose_chain", "extract_components", "estimate_transition", "sweep_eps", "layer_study",
    "fold_exponent_fit", "flatness_robustness", "RunConfig", "load_config", "CuspLabError",
]
