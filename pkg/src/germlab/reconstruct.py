"""Local reconstruction by dyadic mollification.

``R_n F(psi) = int F_z(rho^{eps_n}_z) psi(z) dz`` with ``eps_n = 2^-n``.
The kernel ``rho`` is built from a moment-corrected mollifier ``phi_hat`` so
that consecutive levels telescope through ``phi_check``, a kernel with
vanishing moments up to order ``r - 1``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .distribution import PairingOracle
from .errors import ConstructionError, DomainError, NonConvergenceError
from .germ import Germ
from .testfn import (
    CONVOLUTION_QUADRATURE,
    DEFAULT_QUADRATURE,
    QuadratureSpec,
    TestFunction,
    convolve,
    integral,
    linear_combination,
    moment,
    polynomial_bump,
    rescale,
    standard_bump,
)

__all__ = [
    "TOL_CONV",
    "KERNEL_RADIUS",
    "MollifierFamily",
    "ReconstructionResult",
    "LocalReconstruction",
    "ResidualReport",
    "build_mollifier",
    "default_order",
    "reconstruct_local",
    "residual_scan",
    "widened_bump",
]

TOL_CONV = 1e-7
KERNEL_RADIUS = 1.5  # supp rho in units of eps


@dataclass(frozen=True, eq=False)
class MollifierFamily:
    """Moment-corrected mollifier ``phi_hat``, difference kernel ``phi_check``
    and smoothing kernel ``rho = phi_hat^2 * phi_hat``."""

    phi: TestFunction
    r: int
    radius: float
    integral_phi: float
    lambdas: np.ndarray
    coeffs: np.ndarray
    phi_hat: TestFunction
    phi_check: TestFunction
    rho: TestFunction
    q: QuadratureSpec = DEFAULT_QUADRATURE
    checks: dict = field(default_factory=dict)

    @staticmethod
    def eps(n: int) -> float:
        return 2.0 ** -n

    def rho_at(self, eps: float) -> TestFunction:
        return rescale(self.rho, np.zeros(self.phi.dim), eps)

    def moments_rho(self, order: int) -> np.ndarray:
        """``int rho(u) u^j du`` for ``j <= order`` (d = 1), from the factors."""
        a = np.array([moment(self.phi_hat, j, self.q) for j in range(order + 1)])
        two = a * 2.0 ** np.arange(order + 1)
        return np.array([sum(math.comb(j, i) * two[i] * a[j - i] for i in range(j + 1))
                         for j in range(order + 1)])


def _telescoping_gap(m_hat: TestFunction, m_check: TestFunction, rho: TestFunction,
                     eps: float, h: TestFunction, q: QuadratureSpec) -> float:
    """``|(rho^{eps/2} - rho^eps)(h) - (phi_hat^eps * phi_check^eps)(h)|``.

    The left side pairs the convolution shape directly; the right side is a
    double quadrature over the two factors, so the routes share no values.
    """
    d = h.dim
    zero = np.zeros(d)
    lhs = 0.0
    for s, sign in ((eps / 2, 1.0), (eps, -1.0)):
        pts, w = rescale(rho, zero, s).quadrature(q)
        lhs += sign * float(np.sum(w * h(pts[:, 0] if d == 1 else pts)))
    pa, wa = rescale(m_hat, zero, eps).quadrature(CONVOLUTION_QUADRATURE)
    pb, wb = rescale(m_check, zero, eps).quadrature(CONVOLUTION_QUADRATURE)
    if d == 1:
        grid = pa[:, 0][:, None] + pb[:, 0][None, :]
        rhs = float(wa @ h(grid.ravel()).reshape(grid.shape) @ wb)
    else:
        rhs = float(sum(wa[i] * np.sum(wb * h(pa[i] + pb)) for i in range(len(wa))))
    return abs(lhs - rhs)


def build_mollifier(phi: TestFunction, r: int, q: QuadratureSpec = DEFAULT_QUADRATURE) -> MollifierFamily:
    """Build and verify the mollifier family of order ``r`` from a base ``phi``.

    Raises :class:`DomainError` when ``int phi`` vanishes and
    :class:`ConstructionError` when an invariant fails.
    """
    if r < 1:
        raise DomainError("mollifier order r must be >= 1")
    iphi = integral(phi, q)
    if abs(iphi) < 1e-12:
        raise DomainError("the base function must have non-zero integral")
    d = phi.dim
    zero = np.zeros(d)
    radius = phi.support_radius
    lambdas = 2.0 ** -(np.arange(r) + 1.0) / (1.0 + radius)
    coeffs = np.array([np.prod([lambdas[k] / (lambdas[k] - lambdas[i]) for k in range(r) if k != i])
                       for i in range(r)])
    # recentre so that phi's own centre is not carried through the rescaling
    phi0 = TestFunction(phi.shape, tuple(zero), phi.scale, phi.weight) if np.any(phi.x) else phi
    phi_hat = linear_combination([(c / iphi, rescale(phi0, zero, lam)) for c, lam in zip(coeffs, lambdas)])
    phi_check = linear_combination([(1.0, rescale(phi_hat, zero, 0.5)), (-1.0, rescale(phi_hat, zero, 2.0))])
    rho = convolve(rescale(phi_hat, zero, 2.0), phi_hat)

    checks = {}
    checks["int_phi_hat"] = abs(integral(phi_hat, q) - 1.0)
    if checks["int_phi_hat"] > 1e-10:
        raise ConstructionError(f"int phi_hat deviates from 1 by {checks['int_phi_hat']:.3g}")
    checks["support_phi_hat"] = phi_hat.support_radius
    if phi_hat.support_radius > 0.5 + 1e-12:
        raise ConstructionError(f"phi_hat support radius {phi_hat.support_radius} exceeds 1/2")
    fine = q.refined()
    for j in range(r):
        k = (j,) + (0,) * (d - 1)
        mj = abs(moment(phi_check, k, fine))
        checks[f"moment_{j}"] = mj
        if mj > 1e-8:
            raise ConstructionError(f"phi_check moment of order {j} is {mj:.3g}, not below 1e-8")
    if d == 1:
        probe = rescale(polynomial_bump([1.0, 0.6, -0.3]), [0.05], 0.8)
        gap = _telescoping_gap(phi_hat, phi_check, rho, 0.5, probe, q)
        checks["telescoping"] = gap
        if gap > 1e-8:
            raise ConstructionError(f"telescoping identity off by {gap:.3g}")
    return MollifierFamily(phi, int(r), radius, iphi, lambdas, coeffs, phi_hat, phi_check, rho, q, checks)


def widened_bump() -> TestFunction:
    """Alternative base: ``bump(y) (1 + y^2/4)``."""
    return polynomial_bump([1.0, 0.0, 0.25])


def default_order(alpha_hat: float) -> int:
    """``r = max(1, ceil(-alpha) + 1)``."""
    return max(1, int(math.ceil(-alpha_hat)) + 1)


@dataclass
class ReconstructionResult:
    value: float
    flag: str
    n_star: int
    levels: np.ndarray
    sequence: np.ndarray
    increments: np.ndarray
    rate: float
    richardson: float

    @property
    def converged(self) -> bool:
        return self.flag == "CONVERGED"


def _z_refinement(F: Germ, psi: TestFunction, q: QuadratureSpec) -> int:
    # about 8 nodes per period of the fastest oscillation in the germ
    freq = F.frequency_bound
    if not freq:
        return 1
    lo, hi = psi.support_box()
    length = float(np.max(hi - lo))
    base_nodes = 0
    for _, t in psi.atoms():
        blo, bhi = t.shape.box()
        base_nodes = max(base_nodes, q.panels_for(float(np.max(bhi - blo))) * q.nodes_per_panel)
    need = 8.0 * freq * length / (2 * math.pi)
    return max(1, int(math.ceil(need / base_nodes)))


def _start_level(F: Germ, psi: TestFunction, n_min: int, n_max: int) -> int:
    lo, hi = psi.support_box()
    margin = F.domain.d_k(lo, hi)
    for n in range(n_min, n_max + 1):
        if margin >= KERNEL_RADIUS * 2.0 ** -n:
            return n
    raise DomainError(f"support margin {margin:.4g} is below the kernel radius at n_max={n_max}")


def level_value(F: Germ, m: MollifierFamily, psi: TestFunction, n: int,
                q: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """``R_n F(psi)``."""
    zs, w = psi.quadrature(q, refine=_z_refinement(F, psi, q))
    pts = zs[:, 0] if F.dim == 1 else zs
    vals = F.pair_diagonal(m.rho_at(2.0 ** -n), pts, q)
    return float(np.sum(w * vals))


def reconstruct_local(F: Germ, m: MollifierFamily, psi: TestFunction, n_max: int = 12,
                      q: QuadratureSpec = DEFAULT_QUADRATURE, n_min: int = 2, tol: float = TOL_CONV,
                      gamma_hat: Optional[float] = None, workers: int = 1,
                      raise_nonconv: bool = False) -> ReconstructionResult:
    """Run ``R_n F(psi)`` over ``n`` until two levels agree to ``tol``.

    The accepted value is ``R_{n*}`` for the first ``n*`` with
    ``|R_{n*+1} - R_{n*}| < tol``, otherwise ``R_{n_max}`` flagged NONCONV.
    ``raise_nonconv`` turns a NONCONV outcome into an exception when
    ``gamma_hat`` is positive (or unknown).
    """
    start = _start_level(F, psi, n_min, n_max)
    if workers > 1:
        levels = list(range(start, n_max + 1))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            seq = list(pool.map(lambda n: level_value(F, m, psi, n, q), levels))
    else:
        levels, seq = [], []
        for n in range(start, n_max + 1):
            levels.append(n)
            seq.append(level_value(F, m, psi, n, q))
            if len(seq) >= 2 and abs(seq[-1] - seq[-2]) < tol:
                break
    seq = np.asarray(seq)
    inc = np.abs(np.diff(seq))
    hit = np.nonzero(inc < tol)[0]
    if hit.size:
        k = int(hit[0])
        flag = "CONVERGED"
    else:
        k = len(seq) - 1
        flag = "NONCONV"
    # cut the reported sequence at the accepted level + 1 for determinism across worker counts
    cut = min(len(seq), k + 2)
    seq, inc = seq[:cut], inc[: cut - 1]
    levels = np.asarray(levels[:cut])
    ratios = inc[1:] / inc[:-1] if inc.size >= 2 and np.all(inc[:-1] > 0) else np.array([])
    rate = float(ratios[-1]) if ratios.size else math.nan
    richardson = float(seq[-1] + inc[-1] * np.sign(seq[-1] - seq[-2]) * rate / (1 - rate)) \
        if ratios.size and 0 < rate < 1 else float(seq[-1])
    result = ReconstructionResult(float(seq[k]), flag, int(levels[k]), levels, seq, inc, rate, richardson)
    if flag == "NONCONV" and raise_nonconv and (gamma_hat is None or gamma_hat > 0):
        raise NonConvergenceError(f"no two levels within {tol} up to n_max={n_max}")
    return result


class LocalReconstruction(PairingOracle):
    """``psi -> reconstruct_local(F, m, psi).value`` as a pairing oracle.

    With ``fixed_level`` the oracle is ``R_n`` at that single level, which is
    the object used when no limit exists.
    """

    def __init__(self, F: Germ, m: MollifierFamily, n_max: int = 12, q: QuadratureSpec = DEFAULT_QUADRATURE,
                 tol: float = TOL_CONV, fixed_level: Optional[int] = None, label: str | None = None):
        self.F, self.m, self.n_max, self.q, self.tol = F, m, n_max, q, tol
        self.fixed_level = fixed_level
        self.domain = F.domain
        self.frequency_bound = F.frequency_bound
        self.label = label or f"R[{F.label}]"
        self._cache: dict = {}
        self.results: dict = {}

    def pair(self, f, q=None):
        try:
            key = (f, self.fixed_level)
            if key in self._cache:
                return self._cache[key]
        except TypeError:
            key = None
        if self.fixed_level is not None:
            _start_level(self.F, f, self.fixed_level, self.fixed_level)
            val = level_value(self.F, self.m, f, self.fixed_level, self.q)
        else:
            res = reconstruct_local(self.F, self.m, f, self.n_max, self.q, tol=self.tol)
            val = res.value
            if key is not None:
                self.results[key] = res
        if key is not None:
            self._cache[key] = val
        return val


@dataclass
class ResidualReport:
    slope: float
    constant: float
    log_constant: float
    log_rms: float
    table: object
    envelope: np.ndarray
    scales: np.ndarray

    def summary(self) -> str:
        return (f"residual: slope={self.slope:.4f} C={self.constant:.4g} "
                f"log-envelope C={self.log_constant:.4g} (rel rms {self.log_rms:.3g})")


def residual_scan(F: Germ, RF: PairingOracle, grid, h: TestFunction,
                  q: QuadratureSpec = DEFAULT_QUADRATURE, workers: int = 1) -> ResidualReport:
    """``|(RF - F_p)(h^lam_p)|`` over base points and scales, with two fits.

    ``slope`` comes from log-log least squares on the per-scale maximum.
    ``log_constant`` is the least-squares ``C`` in ``max ~ C (1 + |log lam|)``,
    the envelope that replaces ``lam^gamma`` when ``gamma = 0``.
    """
    from .coherence import ScanTable, _ordered_map

    ps = grid.base_points(grid.n_pairs)
    lams = grid.scales(F.domain)
    zero = np.zeros(F.dim)

    def one(lam):
        f = rescale(h, zero, lam)
        out = np.empty(len(ps))
        local = F.pair_diagonal(f, ps[:, 0] if F.dim == 1 else ps, q)
        for i, p in enumerate(ps):
            out[i] = abs(RF.pair(f.translated(p), q) - local[i])
        return out

    vals = np.concatenate(_ordered_map(one, lams, workers))
    lam_col = np.repeat(lams, len(ps))
    table = ScanTable("residual", np.tile(ps, (len(lams), 1)), lam_col, vals)
    env = np.array([vals[lam_col == l].max() for l in lams])
    pos = env > 0
    if pos.sum() >= 2:
        slope, c = np.polyfit(np.log(lams[pos]), np.log(env[pos]), 1)
        const = float(np.exp(c))
    else:
        slope, const = math.inf, 0.0
    basis = 1.0 + np.abs(np.log(lams))
    log_c = float(np.dot(env, basis) / np.dot(basis, basis))
    log_rms = float(np.sqrt(np.mean((env - log_c * basis) ** 2)) / max(np.mean(env), 1e-300))
    return ResidualReport(float(slope), const, log_c, log_rms, table, env, lams)
