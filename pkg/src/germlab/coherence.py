"""Empirical coherence, enhanced coherence and homogeneity exponents.

Scans evaluate ``|(F_p - F_q)(f^lam_q)|`` over a deterministic set of point
pairs and dyadic scales. Fits are ordinary least squares on log-log
envelopes: the largest value at each scale (or each scale/separation bin)
is what a bound of the form ``C lam^alpha (|p-q| + lam)^(gamma-alpha)`` has
to dominate, so fitting the envelope rather than every row keeps the slope
from being dragged down by accidental cancellations.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.stats import qmc

from .distribution import OpenSetDomain
from .errors import ConfigError, DomainError
from .germ import Germ
from .testfn import (
    DEFAULT_QUADRATURE,
    QuadratureSpec,
    TestFunction,
    bump_ensemble,
    cr_norm,
    integral,
    rescale,
)

__all__ = [
    "ZERO_THRESHOLD",
    "ScanGrid",
    "ScanTable",
    "CoherenceReport",
    "HomogeneityReport",
    "EnhancedReport",
    "coherence_scan",
    "fit_exponents",
    "enhanced_check",
    "homogeneity_scan",
    "recenter",
    "restrict",
    "format_float",
]

ZERO_THRESHOLD = 1e-13
NEAR, FAR = "NEAR", "FAR"


def format_float(x: float) -> str:
    """17 significant digits, the CSV number format."""
    return f"{float(x):.17g}"


@dataclass(frozen=True)
class ScanGrid:
    """Compact box ``K``, point pairs and dyadic scales ``lam = 2^-m``.

    Pairs are built from scrambled Halton base points ``q`` in ``K`` and a
    geometric ladder of separations (``separation_levels`` values between
    ``2^-(m_max+2)`` and half the diameter of ``K``), so every scale sees
    both regimes. ``points`` pins explicit base points, paired with every
    separation level; when empty and ``pin_center`` is set, the centre of
    ``K`` is pinned.
    """

    k_lo: tuple = (-0.5,)
    k_hi: tuple = (0.5,)
    m_min: int = 3
    m_max: int = 10
    n_pairs: int = 256
    seed: int = 0
    domain: Optional[OpenSetDomain] = None
    separation_levels: int = 16
    points: tuple = ()
    pin_center: bool = True

    def __post_init__(self):
        object.__setattr__(self, "k_lo", tuple(float(v) for v in np.atleast_1d(self.k_lo)))
        object.__setattr__(self, "k_hi", tuple(float(v) for v in np.atleast_1d(self.k_hi)))
        if len(self.k_lo) != len(self.k_hi) or any(a >= b for a, b in zip(self.k_lo, self.k_hi)):
            raise ConfigError("K must be a non-degenerate box")
        if self.m_min > self.m_max:
            raise ConfigError("m_min must not exceed m_max")
        pts = tuple(tuple(float(v) for v in np.atleast_1d(x)) for x in self.points)
        if not pts and self.pin_center:
            pts = (tuple(0.5 * (a + b) for a, b in zip(self.k_lo, self.k_hi)),)
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return len(self.k_lo)

    def d_k(self, domain: Optional[OpenSetDomain] = None) -> float:
        dom = self.domain or domain
        if dom is None:
            return math.inf
        return dom.d_k(self.k_lo, self.k_hi)

    def scales(self, domain: Optional[OpenSetDomain] = None) -> np.ndarray:
        """Dyadic scales intersected with ``(0, D_K/4]``."""
        lams = 2.0 ** -np.arange(self.m_min, self.m_max + 1, dtype=float)
        dk = self.d_k(domain)
        lams = lams[lams <= dk / 4]
        if lams.size == 0:
            raise ConfigError("no dyadic scale fits inside (0, D_K/4]")
        return lams

    def base_points(self, n: int) -> np.ndarray:
        """``n`` points in ``K``: pinned points first, then scrambled Halton."""
        lo, hi = np.asarray(self.k_lo), np.asarray(self.k_hi)
        pinned = np.asarray(self.points, dtype=float).reshape(-1, self.dim)[:n]
        extra = max(0, n - len(pinned))
        if extra:
            sampler = qmc.Halton(d=self.dim, scramble=True, seed=np.random.default_rng(self.seed))
            halton = lo + (hi - lo) * sampler.random(extra)
            pinned = np.vstack([pinned, halton])
        return pinned[:n]

    def pairs(self) -> tuple:
        """Arrays ``(p, q)`` of shape ``(n_pairs, d)``, all inside ``K``."""
        if self.n_pairs <= 0:
            raise ConfigError("the scan grid has no point pairs")
        lo, hi = np.asarray(self.k_lo), np.asarray(self.k_hi)
        half_diam = 0.5 * float(np.min(hi - lo))
        seps = np.geomspace(2.0 ** -(self.m_max + 2), half_diam, self.separation_levels)
        qs = self.base_points(self.n_pairs)
        rng = np.random.Generator(np.random.Philox(key=self.seed + 1))
        dirs = rng.normal(size=(self.n_pairs, self.dim))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        # pinned points are paired with every separation level
        n_pin = min(len(self.points), self.n_pairs // len(seps))
        if n_pin:
            pinned = np.repeat(qs[:n_pin], len(seps), axis=0)
            qs = np.vstack([pinned, qs[n_pin:]])[: self.n_pairs]
        s = seps[np.arange(self.n_pairs) % len(seps)]
        ps = qs + s[:, None] * dirs
        outside = np.any((ps < lo) | (ps > hi), axis=1)
        ps[outside] = qs[outside] - s[outside, None] * dirs[outside]
        ps = np.clip(ps, lo, hi)
        return ps, qs


@dataclass
class ScanTable:
    """Rows of a scan; ``q`` and ``regime`` are empty for one-point scans."""

    kind: str
    p: np.ndarray
    lam: np.ndarray
    value: np.ndarray
    q: Optional[np.ndarray] = None
    regime: Optional[np.ndarray] = None
    extra: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.value)

    @property
    def separation(self) -> np.ndarray:
        return np.linalg.norm(self.p - self.q, axis=1)

    def subset(self, mask) -> "ScanTable":
        mask = np.asarray(mask)
        return ScanTable(
            self.kind, self.p[mask], self.lam[mask], self.value[mask],
            None if self.q is None else self.q[mask],
            None if self.regime is None else self.regime[mask],
            {k: np.asarray(v)[mask] for k, v in self.extra.items()},
        )

    def rows(self) -> list:
        """CSV rows as strings, points joined with ``;`` when ``d > 1``."""
        pt = lambda x: ";".join(format_float(v) for v in x)
        out = []
        for i in range(len(self)):
            if self.kind == "coherence":
                out.append([pt(self.p[i]), pt(self.q[i]), format_float(self.lam[i]),
                            format_float(self.value[i]), str(self.regime[i])])
            elif self.kind == "enhanced":
                out.append([pt(self.p[i]), pt(self.q[i]), format_float(self.lam[i]),
                            str(int(self.extra["psi_id"][i])), format_float(self.value[i])])
            else:
                out.append([pt(self.p[i]), format_float(self.lam[i]), format_float(self.value[i])])
        return out

    @property
    def columns(self) -> list:
        return {
            "coherence": ["p", "q", "lambda", "value", "regime"],
            "enhanced": ["p", "q", "lambda", "psi_id", "ratio"],
            "residual": ["p", "lambda", "residual"],
        }.get(self.kind, ["p", "lambda", "value"])

    def to_csv(self, path, header: str = "") -> None:
        with open(path, "w", newline="\n") as fh:
            if header:
                fh.write(f"# {header}\n")
            fh.write(",".join(self.columns) + "\n")
            for row in self.rows():
                fh.write(",".join(row) + "\n")


@dataclass
class CoherenceReport:
    """Fitted ``gamma``, ``alpha`` and constant of a coherence table.

    ``gamma_far`` is the exponent sum ``alpha + beta_sep`` from the FAR fit,
    which should agree with ``gamma`` for a genuinely coherent germ.
    """

    gamma: float
    alpha: float
    constant: float
    rms_near: float = 0.0
    rms_far: float = 0.0
    gamma_far: float = math.nan
    alpha_unconstrained: float = math.nan
    exact: bool = False
    split_rule: str = "NEAR if |p-q| <= lambda else FAR"
    table: Optional[ScanTable] = None

    @property
    def flag(self) -> str:
        return "EXACT" if self.exact else "FITTED"

    def bound(self, lam, sep) -> np.ndarray:
        lam, sep = np.asarray(lam, dtype=float), np.asarray(sep, dtype=float)
        if self.exact:
            return np.zeros(np.broadcast(lam, sep).shape)
        return self.constant * lam ** self.alpha * (sep + lam) ** (self.gamma - self.alpha)

    def summary(self) -> str:
        if self.exact:
            return "coherence: EXACT (all values below threshold)"
        return (f"coherence: gamma={self.gamma:.4f} alpha={self.alpha:.4f} C={self.constant:.4g} "
                f"gamma_far={self.gamma_far:.4f} rms_near={self.rms_near:.3g} rms_far={self.rms_far:.3g}")


@dataclass
class HomogeneityReport:
    beta: float
    constant: float
    rms: float = 0.0
    exact: bool = False
    table: Optional[ScanTable] = None

    def summary(self) -> str:
        if self.exact:
            return "homogeneity: EXACT (all values below threshold)"
        return f"homogeneity: beta={self.beta:.4f} C={self.constant:.4g} rms={self.rms:.3g}"


@dataclass
class EnhancedReport:
    max_ratio: float
    witness: dict
    r: int
    table: Optional[ScanTable] = None

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.max_ratio))

    def summary(self) -> str:
        return f"enhanced: r={self.r} max_ratio={self.max_ratio:.6g} witness={self.witness}"


def _ordered_map(fn, items, workers: int):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _check_integral(f: TestFunction, q: QuadratureSpec):
    if abs(integral(f, q)) <= 1e-6:
        raise DomainError("the scan test function must have non-zero integral")


def _check_points(F: Germ, pts: np.ndarray):
    if not np.all(F.domain.contains(pts)):
        raise DomainError("scan points lie outside the germ's domain")


def coherence_scan(F: Germ, grid: ScanGrid, f: TestFunction, q: QuadratureSpec = DEFAULT_QUADRATURE,
                   workers: int = 1) -> ScanTable:
    """One row ``(p, q, lam, |(F_p - F_q)(f^lam_q)|, regime)`` per pair and scale.

    ``f`` is rescaled about its own centre, so a test function centred at
    the origin gives exactly ``f^lam_q``. Rows are computed per scale and
    concatenated in scale order, independent of ``workers``.
    """
    _check_integral(f, q)
    ps, qs = grid.pairs()
    _check_points(F, ps)
    _check_points(F, qs)
    lams = grid.scales(F.domain)

    def one(lam):
        return np.abs(F.pair_difference_translates(ps, qs, rescale(f, np.zeros(F.dim), lam), q))

    vals = _ordered_map(one, lams, workers)
    n = len(qs)
    lam_col = np.repeat(lams, n)
    p_col, q_col = np.tile(ps, (len(lams), 1)), np.tile(qs, (len(lams), 1))
    sep = np.linalg.norm(p_col - q_col, axis=1)
    regime = np.where(sep <= lam_col, NEAR, FAR)
    return ScanTable("coherence", p_col, lam_col, np.concatenate(vals), q_col, regime)


def _ols(x: np.ndarray, y: np.ndarray):
    coef, *_ = np.linalg.lstsq(x, y, rcond=None)
    resid = y - x @ coef
    return coef, float(np.sqrt(np.mean(resid ** 2))) if len(y) else 0.0


def _near_envelope(table: ScanTable, mask):
    lam, val = table.lam[mask], table.value[mask]
    levels = np.unique(lam)
    env = np.array([val[lam == l].max() for l in levels])
    return levels, env


def _far_envelope(table: ScanTable, mask):
    lam, val, sep = table.lam[mask], table.value[mask], table.separation[mask]
    # bin separations on a fine geometric ladder so nearby pairs share a bin
    sep_bin = np.round(np.log2(sep) * 4)
    keys = np.stack([lam, sep_bin], axis=1)
    uniq, inv = np.unique(keys, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    env = np.zeros(len(uniq))
    rep_sep = np.zeros(len(uniq))
    np.maximum.at(env, inv, val)
    for b in range(len(uniq)):
        rep_sep[b] = np.exp(np.mean(np.log(sep[inv == b])))
    return uniq[:, 0], rep_sep, env


def fit_exponents(table: ScanTable, alpha_cap: bool = True) -> CoherenceReport:
    """Fit ``gamma`` (NEAR rows) and ``alpha`` (FAR rows) by log-log least squares.

    NEAR: the largest value at each scale against ``lam`` gives ``gamma``.
    FAR: the largest value in each (scale, separation) bin is fitted jointly
    as ``alpha log lam + b log|p-q| + c``; ``gamma_far = alpha + b``. With
    ``alpha_cap`` the reported ``alpha`` is ``min(alpha_fit, 0, gamma)``:
    lowering ``alpha`` only weakens the bound, so the cap never invalidates
    the fitted constant, which is computed after it.
    """
    if table.kind != "coherence":
        raise ConfigError("fit_exponents expects a coherence table")
    nonzero = table.value > ZERO_THRESHOLD
    if not np.any(nonzero):
        return CoherenceReport(math.inf, 0.0, 0.0, exact=True, table=table)
    near = nonzero & (table.regime == NEAR)
    far = nonzero & (table.regime == FAR)
    if near.sum() < 8 or far.sum() < 8:
        raise ConfigError(f"need >= 8 nonzero rows per regime, got NEAR={near.sum()} FAR={far.sum()}")

    levels, env = _near_envelope(table, near)
    if len(levels) < 2:
        raise ConfigError("NEAR rows span fewer than two scales")
    x = np.stack([np.log(levels), np.ones_like(levels)], axis=1)
    (gamma, _), rms_near = _ols(x, np.log(env))

    lam_b, sep_b, env_b = _far_envelope(table, far)
    x = np.stack([np.log(lam_b), np.log(sep_b), np.ones_like(lam_b)], axis=1)
    (alpha_fit, b, _), rms_far = _ols(x, np.log(env_b))

    alpha = min(alpha_fit, 0.0, gamma) if alpha_cap else alpha_fit
    lam, sep, val = table.lam[nonzero], table.separation[nonzero], table.value[nonzero]
    const = float(np.max(val / (lam ** alpha * (sep + lam) ** (gamma - alpha))))
    return CoherenceReport(float(gamma), float(alpha), const, rms_near, rms_far,
                           float(alpha_fit + b), float(alpha_fit), table=table)


def enhanced_check(F: Germ, grid: ScanGrid, r: int, report: CoherenceReport, n_psi: int = 100,
                   seed: int = 0, ensemble: Optional[Sequence[TestFunction]] = None,
                   q: QuadratureSpec = DEFAULT_QUADRATURE, workers: int = 1) -> EnhancedReport:
    """Largest ``|(F_p - F_q)(psi^lam_q)| / (|psi|_{C^r} lam^alpha (|p-q|+lam)^(gamma-alpha))``.

    The ratio is homogeneous of degree zero in ``psi``, so each ensemble
    member is evaluated with its weight stripped; this makes the result
    bit-for-bit invariant under ``psi -> c psi``.
    """
    if ensemble is None:
        ensemble = bump_ensemble(n_psi, seed, grid.dim)
    ensemble = list(ensemble)
    if not ensemble:
        raise ConfigError("enhanced check needs a non-empty ensemble")
    if not report.exact and r <= -report.alpha:
        raise DomainError(f"r={r} must exceed -alpha={-report.alpha:.4g}")
    ps, qs = grid.pairs()
    _check_points(F, ps)
    _check_points(F, qs)
    lams = grid.scales(F.domain)
    sep = np.linalg.norm(ps - qs, axis=1)
    unit = [replace(psi, weight=1.0) for psi in ensemble]
    norms = [cr_norm(psi, r) for psi in unit]

    def one(i):
        psi, nrm = unit[i], norms[i]
        blocks = []
        for lam in lams:
            delta = np.abs(F.pair_difference_translates(ps, qs, rescale(psi, np.zeros(F.dim), lam), q))
            if report.exact:
                ratio = np.where(delta > ZERO_THRESHOLD, np.inf, 0.0)
            else:
                ratio = delta / (nrm * lam ** report.alpha * (sep + lam) ** (report.gamma - report.alpha))
            blocks.append(ratio)
        return np.concatenate(blocks)

    ratios = _ordered_map(one, range(len(unit)), workers)
    n, m = len(qs), len(lams)
    all_r = np.concatenate(ratios)
    psi_id = np.repeat(np.arange(len(unit)), n * m)
    lam_col = np.tile(np.repeat(lams, n), len(unit))
    p_col, q_col = np.tile(ps, (m * len(unit), 1)), np.tile(qs, (m * len(unit), 1))
    table = ScanTable("enhanced", p_col, lam_col, all_r, q_col, extra={"psi_id": psi_id})
    k = int(np.argmax(all_r))
    witness = {"psi_id": int(psi_id[k]), "p": p_col[k].tolist(), "q": q_col[k].tolist(),
               "lambda": float(lam_col[k])}
    return EnhancedReport(float(all_r[k]), witness, int(r), table)


def homogeneity_scan(F: Germ, grid: ScanGrid, f: TestFunction, q: QuadratureSpec = DEFAULT_QUADRATURE,
                     workers: int = 1) -> HomogeneityReport:
    """Fit ``beta`` from the per-scale maximum of ``|F_p(f^lam_p)|`` over ``p`` in ``K``."""
    _check_integral(f, q)
    if grid.n_pairs <= 0:
        raise ConfigError("the scan grid has no points")
    ps = grid.base_points(grid.n_pairs)
    _check_points(F, ps)
    lams = grid.scales(F.domain)
    zs = ps[:, 0] if F.dim == 1 else ps

    def one(lam):
        return np.abs(F.pair_diagonal(rescale(f, np.zeros(F.dim), lam), zs, q))

    vals = np.concatenate(_ordered_map(one, lams, workers))
    lam_col = np.repeat(lams, len(ps))
    table = ScanTable("homogeneity", np.tile(ps, (len(lams), 1)), lam_col, vals)
    nonzero = vals > ZERO_THRESHOLD
    if not np.any(nonzero):
        return HomogeneityReport(math.inf, 0.0, exact=True, table=table)
    levels, env = _near_envelope(table, nonzero)
    if len(levels) < 2:
        raise ConfigError("nonzero values span fewer than two scales")
    x = np.stack([np.log(levels), np.ones_like(levels)], axis=1)
    (beta, c), rms = _ols(x, np.log(env))
    return HomogeneityReport(float(beta), float(np.exp(c)), rms, table=table)


def recenter(u: TestFunction, q, a, lam: float) -> tuple:
    """Rewrite ``u^lam_q`` as ``u_tilde^lam1_a`` with ``u_tilde = u^lam2_w``.

    ``lam1 = |q-a| + lam``, ``lam2 = lam/lam1`` and ``w = (q-a)/lam1``; since
    ``|w| + lam2 = 1`` the new function is still supported in the unit ball.
    """
    if lam <= 0:
        raise DomainError("lam must be positive")
    q, a = np.atleast_1d(np.asarray(q, dtype=float)), np.atleast_1d(np.asarray(a, dtype=float))
    lam1 = float(np.linalg.norm(q - a)) + lam
    w = (q - a) / lam1
    return rescale(u, w, lam / lam1), lam1


def restrict(F: Germ, V: OpenSetDomain) -> Germ:
    """The same germ viewed on a smaller open set ``V``."""
    if not F.domain.contains_domain(V):
        raise ConfigError("V is not contained in the germ's domain")
    if V == F.domain:
        return F
    return F.with_domain(V)
