"""Circle and torus atlases, partitions of unity, gluing and global assembly.

Points of the circle are angles in ``[0, 2 pi)``; a chart is an arc
``(lo, hi)`` of the angle lift with coordinate ``y = a * theta + b``. The
torus is the product of two circles and uses product charts. All
transition maps are affine, so every transport of test functions and
distributions stays algebraic.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .distribution import (
    Diffeo,
    OpenSetDomain,
    PairingOracle,
    pullback_chart,
    pushforward_chart,
)
from .errors import ConfigError, ConstructionError, DomainError, GlueError
from .germ import Germ, PushforwardGerm
from .reconstruct import LocalReconstruction, MollifierFamily
from .testfn import (
    DEFAULT_QUADRATURE,
    QuadratureSpec,
    TestFunction,
    composite,
    rescale,
    standard_bump,
)

__all__ = [
    "TWO_PI",
    "Manifold",
    "CIRCLE",
    "TORUS",
    "Chart",
    "Transition",
    "Atlas",
    "PartitionOfUnity",
    "ManifoldGerm",
    "GlueReport",
    "GlobalReconstruction",
    "CompareReport",
    "transition",
    "cocycle_error",
    "build_pou",
    "overlap_ensemble",
    "glue_check",
    "chart_locals",
    "global_reconstruct",
    "atlas_compare",
    "circle_test_functions",
]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Manifold:
    """Flat ``d``-torus ``(R / 2 pi Z)^d``; ``d = 1`` is the circle."""

    name: str
    dim: int

    def sample_points(self, n: int = 1000) -> np.ndarray:
        """``n`` points uniformly spaced in each angle (``n`` total for the
        circle, ``round(sqrt(n))^2`` for the torus)."""
        if self.dim == 1:
            return (np.arange(n) * TWO_PI / n)[:, None]
        k = int(round(n ** (1.0 / self.dim)))
        axes = [np.arange(k) * TWO_PI / k] * self.dim
        return np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)

    def wrap(self, theta) -> np.ndarray:
        return np.mod(theta, TWO_PI)


CIRCLE = Manifold("circle", 1)
TORUS = Manifold("torus", 2)


@dataclass(frozen=True)
class Chart:
    """Arc (or product of arcs) ``(lo, hi)`` of the angle lift, with
    coordinates ``y = a * theta + b``."""

    lo: tuple
    hi: tuple
    a: float = 1.0
    b: tuple = None
    label: str = "chart"

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        if any(h - l >= TWO_PI or h <= l for l, h in zip(lo, hi)):
            raise ConfigError("each arc must be non-empty and shorter than a full turn")
        if self.a <= 0:
            raise ConfigError("charts use a positive coordinate scale")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        b = (0.0,) * len(lo) if self.b is None else tuple(float(v) for v in np.atleast_1d(self.b))
        object.__setattr__(self, "b", b)

    @property
    def dim(self) -> int:
        return len(self.lo)

    def lift(self, theta) -> np.ndarray:
        """Representative of ``theta`` in ``[lo, lo + 2 pi)``."""
        theta = np.asarray(theta, dtype=float).reshape(-1, self.dim)
        lo = np.asarray(self.lo)
        return lo + np.mod(theta - lo, TWO_PI)

    def contains(self, theta) -> np.ndarray:
        t = self.lift(theta)
        return np.all((t > np.asarray(self.lo)) & (t < np.asarray(self.hi)), axis=1)

    def forward(self, theta) -> np.ndarray:
        return self.a * self.lift(theta) + np.asarray(self.b)

    def inverse(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float).reshape(-1, self.dim)
        return np.mod((y - np.asarray(self.b)) / self.a, TWO_PI)

    def to_lift(self, y) -> np.ndarray:
        """Chart coordinate back to the lift angle inside ``(lo, hi)``."""
        y = np.asarray(y, dtype=float)
        b = np.asarray(self.b) if self.dim > 1 else self.b[0]
        return (y - b) / self.a

    @property
    def image(self) -> OpenSetDomain:
        lo = self.a * np.asarray(self.lo) + np.asarray(self.b)
        hi = self.a * np.asarray(self.hi) + np.asarray(self.b)
        return OpenSetDomain.box(lo, hi)

    def lift_map(self) -> Diffeo:
        """The affine map ``theta -> a theta + b`` on the lift."""
        b = np.asarray(self.b) if self.dim > 1 else self.b[0]
        return Diffeo.affine(self.a, b, self.dim)


@dataclass
class Transition:
    """``tau_ij = phi_j o phi_i^{-1}`` on ``phi_i(U_i cap U_j)``, one affine
    map per connected component of the overlap."""

    i: int
    j: int
    components: list  # (OpenSetDomain in chart-i coordinates, Diffeo)

    def component_at(self, y) -> int:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        for k, (dom, _) in enumerate(self.components):
            if dom.contains(y)[0]:
                return k
        raise DomainError(f"point {y} is not in the overlap of charts {self.i} and {self.j}")

    def __call__(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        pts = y.reshape(-1, self.components[0][0].dim)
        out = np.full(pts.shape, np.nan)
        for dom, tau in self.components:
            mask = dom.contains(pts)
            if np.any(mask):
                arg = pts[mask][:, 0] if pts.shape[1] == 1 else pts[mask]
                out[mask] = np.asarray(tau(arg)).reshape(-1, pts.shape[1])
        return out.reshape(y.shape) if y.ndim else out[0, 0]


class Atlas:
    """A finite atlas of arc charts on a built-in manifold."""

    def __init__(self, manifold: Manifold, charts: Sequence[Chart], label: str = "atlas"):
        self.manifold, self.charts, self.label = manifold, list(charts), label
        if any(c.dim != manifold.dim for c in self.charts):
            raise ConfigError("chart dimension does not match the manifold")

    def __len__(self) -> int:
        return len(self.charts)

    def check_cover(self, n: int = 1000) -> bool:
        pts = self.manifold.sample_points(n)
        covered = np.zeros(len(pts), dtype=bool)
        for c in self.charts:
            covered |= c.contains(pts)
        return bool(np.all(covered))

    def overlapping_pairs(self) -> list:
        out = []
        for i, j in itertools.combinations(range(len(self)), 2):
            try:
                transition(self, i, j)
                out.append((i, j))
            except DomainError:
                pass
        return out

    def chart_of(self, theta) -> int:
        for k, c in enumerate(self.charts):
            if c.contains(theta)[0]:
                return k
        raise DomainError("point not covered by the atlas")

    # -- built-ins -------------------------------------------------------
    @classmethod
    def circle_two_arc(cls, scale: float = 1.0) -> "Atlas":
        """Arcs ``(-pi/8, pi + pi/8)`` and ``(pi - pi/8, 2 pi + pi/8)``;
        ``scale != 1`` uses rescaled angle coordinates on the second arc."""
        e = math.pi / 8
        return cls(CIRCLE, [Chart((-e,), (math.pi + e,), label="arc0"),
                            Chart((math.pi - e,), (TWO_PI + e,), a=scale, label="arc1")],
                   "two-arc" if scale == 1.0 else f"two-arc(scale={scale})")

    @classmethod
    def circle_three_arc(cls, half_width: float = math.pi / 2) -> "Atlas":
        """Three arcs centred at ``0, 2 pi/3, 4 pi/3``."""
        charts = [Chart((c - half_width,), (c + half_width,), label=f"arc{k}")
                  for k, c in enumerate((0.0, TWO_PI / 3, 2 * TWO_PI / 3))]
        return cls(CIRCLE, charts, "three-arc")

    @classmethod
    def circle_single(cls, lo: float = 0.1, hi: float = 3.0) -> "Atlas":
        """One chart on an open arc (an open interval, not a cover of the circle)."""
        return cls(CIRCLE, [Chart((lo,), (hi,), label="interval")], "single")

    @classmethod
    def torus_four_patch(cls) -> "Atlas":
        e = math.pi / 8
        arcs = [(-e, math.pi + e), (math.pi - e, TWO_PI + e)]
        charts = [Chart((a0[0], a1[0]), (a0[1], a1[1]), label=f"patch{k}")
                  for k, (a0, a1) in enumerate(itertools.product(arcs, arcs))]
        return cls(TORUS, charts, "four-patch")


def transition(A: Atlas, i: int, j: int) -> Transition:
    """Affine transition maps on each overlap component.

    Raises :class:`DomainError` when the charts do not overlap.
    """
    ci, cj = A.charts[i], A.charts[j]
    d = ci.dim
    if i == j:
        ident = Diffeo.identity(d)
        return Transition(i, j, [(ci.image, ident)])
    comps = []
    for shift in itertools.product((-1, 0, 1), repeat=d):
        k = np.asarray(shift, dtype=float) * TWO_PI
        lo = np.maximum(np.asarray(ci.lo), np.asarray(cj.lo) + k)
        hi = np.minimum(np.asarray(ci.hi), np.asarray(cj.hi) + k)
        if np.all(hi > lo):
            # theta in the i-lift equals theta - k in the j-lift
            slope = cj.a / ci.a
            bi, bj = np.asarray(ci.b), np.asarray(cj.b)
            off = bj - cj.a * (bi / ci.a + k)
            dom = OpenSetDomain.box(ci.a * lo + bi, ci.a * hi + bi)
            comps.append((dom, Diffeo.affine(slope, off if d > 1 else float(off[0]), d)))
    if not comps:
        raise DomainError(f"charts {i} and {j} do not overlap")
    return Transition(i, j, comps)


def cocycle_error(A: Atlas, i: int, j: int, k: int, n: int = 1000) -> float:
    """Largest ``|tau_ik - tau_jk o tau_ij|`` over sample points in the triple overlap."""
    pts = A.manifold.sample_points(n)
    ci, cj, ck = (A.charts[t] for t in (i, j, k))
    mask = ci.contains(pts) & cj.contains(pts) & ck.contains(pts)
    if not np.any(mask):
        return 0.0
    y = ci.forward(pts[mask])
    arg = y[:, 0] if A.manifold.dim == 1 else y
    t_ij, t_jk, t_ik = transition(A, i, j), transition(A, j, k), transition(A, i, k)
    lhs = np.asarray(t_ik(arg)).reshape(len(y), -1)
    mid = np.asarray(t_ij(arg))
    rhs = np.asarray(t_jk(mid)).reshape(len(y), -1)
    return float(np.max(np.abs(lhs - rhs)))


# ---------------------------------------------------------------------------
# partitions of unity
# ---------------------------------------------------------------------------


def _bump_profile(t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t)
    inside = np.abs(t) < 1
    out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
    return out


class PartitionOfUnity:
    """``rho_j = b_j / sum_k b_k`` with ``b_j`` a bump on (a sub-arc of) ``U_j``.

    ``centers``/``half_widths`` are in lift angles, one row per chart.
    """

    def __init__(self, atlas: Atlas, centers: np.ndarray, half_widths: np.ndarray,
                 label: str = "pou", constant: bool = False):
        self.atlas, self.label, self.constant = atlas, label, constant
        self.centers = np.asarray(centers, dtype=float).reshape(len(atlas), -1)
        self.half_widths = np.asarray(half_widths, dtype=float).reshape(len(atlas), -1)

    def raw(self, j: int, theta) -> np.ndarray:
        c = self.atlas.charts[j]
        if self.constant:
            return c.contains(theta).astype(float)
        t = (c.lift(theta) - self.centers[j]) / self.half_widths[j]
        return np.prod(_bump_profile(t), axis=1)

    def total(self, theta) -> np.ndarray:
        return sum(self.raw(j, theta) for j in range(len(self.atlas)))

    def weight(self, j: int, theta) -> np.ndarray:
        tot = self.total(theta)
        num = self.raw(j, theta)
        return np.divide(num, tot, out=np.zeros_like(num), where=tot > 0)

    def support_lift(self, j: int) -> tuple:
        """Support box of ``rho_j`` in the lift of chart ``j``."""
        c = self.atlas.charts[j]
        if self.constant:
            return np.asarray(c.lo), np.asarray(c.hi)
        return self.centers[j] - self.half_widths[j], self.centers[j] + self.half_widths[j]

    def support_chart(self, j: int) -> tuple:
        c = self.atlas.charts[j]
        lo, hi = self.support_lift(j)
        return c.a * lo + np.asarray(c.b), c.a * hi + np.asarray(c.b)

    def check(self, n: int = 1000) -> dict:
        """Sum-to-one error, minimum weight and support containment."""
        pts = self.atlas.manifold.sample_points(n)
        s = sum(self.weight(j, pts) for j in range(len(self.atlas)))
        contained = True
        if not self.constant:
            for j, c in enumerate(self.atlas.charts):
                lo, hi = self.support_lift(j)
                contained &= bool(np.all(lo > np.asarray(c.lo)) and np.all(hi < np.asarray(c.hi)))
        return {"sum_error": float(np.max(np.abs(s - 1.0))),
                "min_weight": float(min(np.min(self.weight(j, pts)) for j in range(len(self.atlas)))),
                "supports_inside": contained}


def build_pou(A: Atlas, seed: Optional[int] = None, shrink: float = 0.9, jitter: float = 0.08,
              n_check: int = 1000) -> PartitionOfUnity:
    """Partition of unity subordinate to ``A``.

    With ``seed=None`` each ``b_j`` is the bump on the arc shrunk about its
    centre by ``shrink``; a seed draws a shifted centre and a shrink factor
    in ``[shrink - jitter, shrink]`` for each distinct arc on each axis,
    giving a different valid partition (product atlases get product
    partitions); draws that leave a gap are redrawn. A one-chart atlas gets
    ``rho = 1``.
    Raises :class:`ConstructionError` on a cover gap.
    """
    if len(A) == 1:
        return PartitionOfUnity(A, np.zeros((1, A.manifold.dim)), np.ones((1, A.manifold.dim)),
                                "single", constant=True)
    lo = np.array([c.lo for c in A.charts])
    hi = np.array([c.hi for c in A.charts])
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    pts = A.manifold.sample_points(n_check)
    if seed is None:
        P = PartitionOfUnity(A, mid, shrink * half, "pou")
        if np.any(P.total(pts) <= 0):
            raise ConstructionError("the bumps leave part of the manifold uncovered")
        return P
    # one draw per distinct (axis, arc), so product atlases get product partitions
    rng = np.random.Generator(np.random.Philox(key=seed))
    arcs = sorted({(ax, lo[j, ax], hi[j, ax]) for j in range(len(A)) for ax in range(A.manifold.dim)})
    for _ in range(32):
        draws = {}
        for arc in arcs:
            factor = rng.uniform(shrink - jitter, shrink)
            draws[arc] = (factor, rng.uniform(-0.7, 0.7) * (1.0 - factor))
        factor = np.array([[draws[(ax, lo[j, ax], hi[j, ax])][0] for ax in range(lo.shape[1])]
                           for j in range(len(A))])
        shift = np.array([[draws[(ax, lo[j, ax], hi[j, ax])][1] for ax in range(lo.shape[1])]
                          for j in range(len(A))]) * half
        P = PartitionOfUnity(A, mid + shift, factor * half, f"pou(seed={seed})")
        if np.all(P.total(pts) > 0):
            return P
    raise ConstructionError("no seeded draw covers the manifold")


# ---------------------------------------------------------------------------
# germs on the manifold
# ---------------------------------------------------------------------------


class ManifoldGerm:
    """A germ on the circle or torus, given by a ``2 pi``-periodic germ on
    the angle lift; chart germs are its affine pushforwards."""

    def __init__(self, manifold: Manifold, lift: Germ, label: str | None = None):
        self.manifold, self.lift = manifold, lift
        self.label = label or f"{manifold.name}:{lift.label}"
        self.nominal_gamma = lift.nominal_gamma
        self.nominal_alpha = lift.nominal_alpha

    def chart_germ(self, chart: Chart) -> Germ:
        phi = chart.lift_map()
        b = chart.b[0] if chart.dim == 1 else np.asarray(chart.b)
        return PushforwardGerm(self.lift, phi, chart.image, affine=(chart.a, b))

    def at(self, theta, chart: Chart) -> PairingOracle:
        """``phi_*(F_theta)`` in the coordinates of ``chart``."""
        t = chart.lift(theta)[0]
        return pushforward_chart(self.lift.at(t[0] if chart.dim == 1 else t), chart.lift_map())


# ---------------------------------------------------------------------------
# gluing
# ---------------------------------------------------------------------------


@dataclass
class GlueReport:
    passed: bool
    max_discrepancy: float
    witness: dict
    rows: list  # (chart_i, chart_j, g_id, lhs, rhs, abs_diff)
    tol: float

    def summary(self) -> str:
        state = "PASS" if self.passed else "FAIL"
        return f"glue: {state} max_discrepancy={self.max_discrepancy:.3g} tol={self.tol:.3g} witness={self.witness}"


def overlap_ensemble(A: Atlas, i: int, j: int, n: int = 20, seed: int = 0) -> list:
    """``n`` bumps per overlap component, in chart-``i`` coordinates, with
    seeded centres and scales at most a eighth of the component width."""
    tr = transition(A, i, j)
    rng = np.random.Generator(np.random.Philox(key=seed * 1_000_003 + 1000 * i + j))
    out = []
    d = A.manifold.dim
    base = standard_bump(d)
    for dom, _ in tr.components:
        lo, hi = np.asarray(dom.lo), np.asarray(dom.hi)
        width = float(np.min(hi - lo))
        for _ in range(n):
            scale = rng.uniform(0.25, 1.0) * width / 8
            center = rng.uniform(lo + scale + width / 16, hi - scale - width / 16)
            out.append(rescale(base, center, scale))
    return out


def _ordered_map(fn, items, workers: int):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def glue_check(locals_: Sequence[PairingOracle], A: Atlas, tol: float, ensemble: Optional[dict] = None,
               n_per_overlap: int = 20, seed: int = 0, q: QuadratureSpec | None = None,
               workers: int = 1) -> GlueReport:
    """Compare ``T_i(g)`` with ``(tau_ij^* T_j)(g)`` for bumps ``g`` in each overlap.

    ``ensemble`` maps ``(i, j)`` to a list of chart-``i`` test functions; by
    default :func:`overlap_ensemble` supplies them.
    """
    if q is None:
        q = DEFAULT_QUADRATURE if A.manifold.dim == 1 else QuadratureSpec(panels_per_unit=8)
    pairs = A.overlapping_pairs()
    if ensemble is None:
        ensemble = {(i, j): overlap_ensemble(A, i, j, n_per_overlap, seed) for i, j in pairs}
    if not any(len(v) for v in ensemble.values()):
        raise ConfigError("glue check needs a non-empty ensemble")
    jobs = []
    for (i, j), gs in sorted(ensemble.items()):
        tr = transition(A, i, j)
        for g_id, g in enumerate(gs):
            jobs.append((i, j, g_id, g, tr))

    def one(job):
        i, j, g_id, g, tr = job
        k = tr.component_at(g.x)
        tau = tr.components[k][1]
        lhs = locals_[i].pair(g, q)
        rhs = pullback_chart(locals_[j], tau).pair(g, q)
        return (i, j, g_id, float(lhs), float(rhs), float(abs(lhs - rhs)))

    rows = _ordered_map(one, jobs, workers)
    worst = max(rows, key=lambda r: r[5])
    witness = {"chart_i": worst[0], "chart_j": worst[1], "g_id": worst[2]}
    return GlueReport(worst[5] <= tol, worst[5], witness, rows, tol)


# ---------------------------------------------------------------------------
# global assembly
# ---------------------------------------------------------------------------


def _chart_test(P: PartitionOfUnity, j: int, h: TestFunction) -> TestFunction:
    """``(rho_j h) o phi_j^{-1}`` in chart coordinates (d = 1).

    ``h`` is a test function on the angle lift, read periodically.
    """
    c = P.atlas.charts[j]
    lo, hi = P.support_chart(j)

    def fn(y):
        theta = c.to_lift(np.asarray(y, dtype=float))
        hv = sum(h(theta + TWO_PI * k) for k in (-2, -1, 0, 1, 2))
        return P.weight(j, theta[:, None] if np.ndim(theta) == 1 else theta) * hv

    return composite(fn, lo, hi, label=f"rho_{j} h")


class GlobalReconstruction(PairingOracle):
    """``RF(h) = sum_j T_j((rho_j h) o phi_j^{-1})`` over the charts, in order."""

    def __init__(self, locals_: Sequence[PairingOracle], P: PartitionOfUnity, label: str = "RF",
                 glue: Optional[GlueReport] = None):
        self.locals, self.P, self.label, self.glue = list(locals_), P, label, glue
        self.domain = OpenSetDomain.line(P.atlas.manifold.dim)

    def chart_terms(self, h: TestFunction) -> list:
        terms = []
        for j, T in enumerate(self.locals):
            lo, hi = self.P.support_chart(j)
            if self._misses(j, h):
                terms.append(0.0)
                continue
            terms.append(float(T.pair(_chart_test(self.P, j, h))))
        return terms

    def _misses(self, j: int, h: TestFunction) -> bool:
        # support of h (periodised) does not meet supp rho_j
        lo, hi = self.P.support_lift(j)
        hlo, hhi = h.support_box()
        for k in (-2, -1, 0, 1, 2):
            if hhi[0] + TWO_PI * k > lo[0] and hlo[0] + TWO_PI * k < hi[0]:
                return False
        return True

    def pair(self, h, q=None):
        return float(sum(self.chart_terms(h)))


def chart_locals(F: ManifoldGerm, A: Atlas, m, n_max: int = 12, fixed_level: Optional[int] = None,
                 q: QuadratureSpec = DEFAULT_QUADRATURE) -> list:
    """Per-chart reconstructions; ``m`` is one mollifier family or one per chart."""
    families = list(m) if isinstance(m, (list, tuple)) else [m] * len(A)
    if len(families) != len(A):
        raise ConfigError("need one mollifier family per chart")
    return [LocalReconstruction(F.chart_germ(c), families[j], n_max, q, fixed_level=fixed_level,
                                label=f"R_{j}")
            for j, c in enumerate(A.charts)]


def global_reconstruct(F: ManifoldGerm, A: Atlas, P: PartitionOfUnity, m, gamma_hat: Optional[float] = None,
                       n_max: int = 12, glue_tol: float = 1e-5, fixed_level: Optional[int] = None,
                       seed: int = 0, check_glue: bool = True,
                       q: QuadratureSpec = DEFAULT_QUADRATURE) -> GlobalReconstruction:
    """Assemble per-chart reconstructions through the partition of unity.

    For ``gamma_hat > 0`` the locals must glue (tolerance ``glue_tol``)
    before assembly, otherwise :class:`GlueError` is raised. For
    ``gamma_hat <= 0`` no limit exists, so each local is ``R_n`` at the
    fixed level ``fixed_level`` (default ``n_max``) and no glue is required.
    """
    if A.manifold.dim != 1:
        raise DomainError("global reconstruction is implemented on the circle only")
    if gamma_hat is None:
        gamma_hat = F.nominal_gamma
    positive = gamma_hat is not None and gamma_hat > 0
    level = fixed_level if fixed_level is not None else (None if positive else n_max)
    locals_ = chart_locals(F, A, m, n_max, level, q)
    report = None
    if positive and check_glue and len(A) > 1:
        report = glue_check(locals_, A, glue_tol, seed=seed)
        if not report.passed:
            raise GlueError(report.summary())
    return GlobalReconstruction(locals_, P, f"R[{F.label}]", report)


@dataclass
class CompareReport:
    max_rel_discrepancy: float
    rows: list  # (h_id, rf_a, rf_b, rel_diff)

    def summary(self) -> str:
        return f"atlas compare: max relative discrepancy {self.max_rel_discrepancy:.3g}"


def atlas_compare(F: ManifoldGerm, A: Atlas, B: Atlas, ensemble: Sequence[TestFunction], m,
                  m_b=None, P_a: Optional[PartitionOfUnity] = None, P_b: Optional[PartitionOfUnity] = None,
                  gamma_hat: Optional[float] = None, n_max: int = 12, fixed_level: Optional[int] = None,
                  workers: int = 1) -> CompareReport:
    """``max_h |RF_A(h) - RF_B(h)| / (1 + |RF_A(h)|)``."""
    RA = global_reconstruct(F, A, P_a or build_pou(A), m, gamma_hat, n_max, fixed_level=fixed_level,
                            check_glue=False)
    if B is A and P_b is None and m_b is None:
        RB = RA
    else:
        RB = global_reconstruct(F, B, P_b or build_pou(B), m if m_b is None else m_b, gamma_hat, n_max,
                                fixed_level=fixed_level, check_glue=False)

    def one(k):
        a = RA.pair(ensemble[k])
        b = a if RB is RA else RB.pair(ensemble[k])
        return (k, a, b, abs(a - b) / (1.0 + abs(a)))

    rows = _ordered_map(one, range(len(ensemble)), workers)
    return CompareReport(max(r[3] for r in rows) if rows else 0.0, rows)


def circle_test_functions(n: int, seed: int = 0, max_scale: float = 1.2) -> list:
    """Seeded polynomial-times-bump test functions on the circle's angle lift."""
    from .testfn import bump_ensemble

    rng = np.random.Generator(np.random.Philox(key=seed + 7))
    shapes = bump_ensemble(n, seed)
    centers = rng.uniform(0.0, TWO_PI, n)
    scales = rng.uniform(0.3, max_scale, n)
    return [rescale(s, [c], sc) for s, c, sc in zip(shapes, centers, scales)]
