"""Coherent germs of distributions, their reconstruction, and gluing on manifolds."""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    ConstructionError,
    DomainError,
    GermlabError,
    GlueError,
    NonConvergenceError,
)
from .testfn import (
    QuadratureSpec,
    TestFunction,
    bump_ensemble,
    convolve,
    cr_norm,
    integral,
    linear_combination,
    moment,
    polynomial_bump,
    rescale,
    standard_bump,
    unit_bump,
)
from .distribution import (
    Density,
    Diffeo,
    DiracComb,
    Lacunary,
    OpenSetDomain,
    PairingOracle,
    pullback_chart,
    pushforward_chart,
)
from .germ import (
    SmoothFunction,
    builtin_young,
    germ_pair,
    make_constant,
    make_taylor,
    make_young,
)
from .coherence import (
    ScanGrid,
    coherence_scan,
    enhanced_check,
    fit_exponents,
    homogeneity_scan,
    recenter,
    restrict,
)
from .reconstruct import (
    LocalReconstruction,
    build_mollifier,
    reconstruct_local,
    residual_scan,
    widened_bump,
)
from .manifold import (
    Atlas,
    ManifoldGerm,
    atlas_compare,
    build_pou,
    glue_check,
    global_reconstruct,
    transition,
)
