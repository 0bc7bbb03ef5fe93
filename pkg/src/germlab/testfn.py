"""Smooth compactly supported test functions.

A :class:`TestFunction` is an analytic descriptor: a unit-scale *shape*
(standard bump, polynomial times bump, linear combination, convolution or an
arbitrary callable) placed at a center with a scale and an amplitude,

    f(y) = weight * scale**(-d) * shape((y - center) / scale).

Rescaling never samples: ``rescale(f, x, lam)`` composes the (center, scale)
pair algebraically, so nested rescalings are exact up to float rounding.

All integrals go through composite Gauss-Legendre quadrature described by a
:class:`QuadratureSpec`. Linear combinations are integrated term by term on
each term's own support, which keeps narrow components resolved.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import DomainError

__all__ = [
    "QuadratureSpec",
    "TestFunction",
    "Bump",
    "PolyBump",
    "Combo",
    "Convolution",
    "Composite",
    "standard_bump",
    "polynomial_bump",
    "unit_bump",
    "linear_combination",
    "convolve",
    "composite",
    "rescale",
    "integral",
    "moment",
    "cr_norm",
    "multi_indices",
    "bump_ensemble",
    "BUMP_INTEGRAL_1D",
]

# integral of exp(-1/(1-u^2)) over (-1, 1)
BUMP_INTEGRAL_1D = 0.44399381616807943


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureSpec:
    """Composite Gauss-Legendre rule.

    ``panels_per_unit`` panels are laid per unit length of a shape's support
    box (in unit-scale coordinates), each panel carrying ``nodes_per_panel``
    Gauss nodes. Tensor products are used in two dimensions.
    """

    panels_per_unit: int = 64
    nodes_per_panel: int = 16
    absolute_tolerance: float = 1e-9

    def __post_init__(self):
        p = self.panels_per_unit
        if p < 1 or p & (p - 1):
            raise DomainError(f"panels_per_unit must be a power of two, got {p}")
        if self.nodes_per_panel < 1:
            raise DomainError("nodes_per_panel must be positive")

    def refined(self, factor: int = 2) -> "QuadratureSpec":
        return QuadratureSpec(self.panels_per_unit * factor, self.nodes_per_panel,
                              self.absolute_tolerance)

    def panels_for(self, length: float) -> int:
        return max(1, int(math.ceil(self.panels_per_unit * length - 1e-9)))


DEFAULT_QUADRATURE = QuadratureSpec()
# inner rule for convolution values; smooth compactly supported factors need far fewer panels
CONVOLUTION_QUADRATURE = QuadratureSpec(panels_per_unit=16)


@lru_cache(maxsize=None)
def _gauss(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=512)
def composite_nodes(lo: float, hi: float, panels: int, nodes: int):
    """Nodes and weights of the composite rule on ``[lo, hi]``."""
    gx, gw = _gauss(nodes)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = (mid[:, None] + half[:, None] * gx[None, :]).ravel()
    w = (half[:, None] * gw[None, :]).ravel()
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def box_nodes(lo, hi, q: QuadratureSpec, panels=None):
    """Tensor-product nodes on a box. Returns points ``(n, d)`` and weights."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    axes = []
    for a in range(lo.size):
        n_pan = panels if panels is not None else q.panels_for(hi[a] - lo[a])
        axes.append(composite_nodes(float(lo[a]), float(hi[a]), int(n_pan),
                                    q.nodes_per_panel))
    if len(axes) == 1:
        x, w = axes[0]
        return x[:, None], np.array(w)
    grids = np.meshgrid(*[ax[0] for ax in axes], indexing="ij")
    wgrid = np.meshgrid(*[ax[1] for ax in axes], indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    w = np.prod(np.stack([g.ravel() for g in wgrid], axis=1), axis=1)
    return pts, w


def _as_points(y, d: int) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if d == 1:
        return y.reshape(-1, 1)
    return y.reshape(-1, d)


def _out_shape(y, d: int):
    y = np.asarray(y)
    return y.shape if d == 1 else y.shape[:-1]


def multi_indices(d: int, order: int):
    """All multi-indices ``k`` in ``d`` variables with ``|k| <= order``."""
    return [k for k in itertools.product(range(order + 1), repeat=d) if sum(k) <= order]


# ---------------------------------------------------------------------------
# shapes (unit-scale representatives)
# ---------------------------------------------------------------------------


def _fd_step(order: int) -> float:
    return 10.0 ** (-5 + (order - 1))


_FD4 = ((-2, 1.0 / 12), (-1, -8.0 / 12), (1, 8.0 / 12), (2, -1.0 / 12))


def _finite_difference(func, u: np.ndarray, k: tuple, h: float) -> np.ndarray:
    # nested fourth-order central stencil, one axis at a time
    if sum(k) == 0:
        return func(u)
    axis = next(a for a, ka in enumerate(k) if ka > 0)
    rest = tuple(ka - (a == axis) for a, ka in enumerate(k))
    out = np.zeros(u.shape[0])
    for m, c in _FD4:
        shifted = u.copy()
        shifted[:, axis] += m * h
        out += c * _finite_difference(func, shifted, rest, h)
    return out / h


class Shape:
    """Unit-scale representative of a test function (points are ``(n, d)``)."""

    dim: int = 1
    analytic_order: int = 0
    kind: str = "shape"

    def box(self):
        raise NotImplementedError

    def radius(self) -> float:
        lo, hi = self.box()
        return float(np.sqrt(np.sum(np.maximum(np.abs(lo), np.abs(hi)) ** 2)))

    def values(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _analytic(self, u, k):
        raise NotImplementedError

    def deriv(self, u: np.ndarray, k: tuple) -> np.ndarray:
        if sum(k) == 0:
            return self.values(u)
        if sum(k) <= self.analytic_order:
            return self._analytic(u, k)
        return _finite_difference(self.values, u, k, _fd_step(sum(k)))


@lru_cache(maxsize=None)
def _bump_poly(n: int) -> np.ndarray:
    # psi^(n)(u) = P_n(u) (1-u^2)^(-2n) psi(u)
    if n == 0:
        return np.array([1.0])
    p = _bump_poly(n - 1)
    m = n - 1
    qq = np.array([1.0, 0.0, -1.0])
    t1 = npoly.polymul(npoly.polyder(p), npoly.polymul(qq, qq))
    t2 = npoly.polymul([0.0, 4.0 * m], npoly.polymul(p, qq))
    t3 = npoly.polymul([0.0, -2.0], p)
    return npoly.polyadd(npoly.polyadd(t1, t2), t3)


def bump_derivative_1d(u: np.ndarray, n: int) -> np.ndarray:
    """n-th derivative of ``exp(-1/(1-u^2))`` (zero outside ``|u| < 1``)."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    ui = u[inside]
    qq = 1.0 - ui * ui
    logmag = -1.0 / qq - 2.0 * n * np.log(qq)
    out[inside] = npoly.polyval(ui, _bump_poly(n)) * np.exp(logmag)
    return out


@dataclass(frozen=True)
class Bump(Shape):
    """Standard bump ``exp(-1/(1-|u|^2))`` on the unit ball."""

    dim: int = 1
    kind = "standard-bump"

    @property
    def analytic_order(self) -> int:
        return 12 if self.dim == 1 else 0

    def box(self):
        return -np.ones(self.dim), np.ones(self.dim)

    def radius(self) -> float:
        return 1.0

    def values(self, u):
        r2 = np.sum(u * u, axis=1)
        out = np.zeros(r2.shape)
        inside = r2 < 1.0
        out[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
        return out

    def _analytic(self, u, k):
        return bump_derivative_1d(u[:, 0], k[0])


@dataclass(frozen=True)
class PolyBump(Shape):
    """Polynomial times the standard bump.

    ``terms`` is a tuple of ``(multi_index, coefficient)`` pairs.
    """

    terms: tuple = ((( 0,), 1.0),)
    dim: int = 1
    kind = "polynomial-times-bump"

    @property
    def analytic_order(self) -> int:
        return 12 if self.dim == 1 else 0

    def box(self):
        return -np.ones(self.dim), np.ones(self.dim)

    def radius(self) -> float:
        return 1.0

    def poly(self, u):
        if self.dim == 1:
            return np.polynomial.polynomial.polyval(u[:, 0], self._coeffs_1d())
        out = np.zeros(u.shape[0])
        for mi, c in self.terms:
            out += c * np.prod(u ** np.asarray(mi, dtype=float), axis=1)
        return out

    def values(self, u):
        return self.poly(u) * Bump(self.dim).values(u)

    def _coeffs_1d(self):
        deg = max(mi[0] for mi, _ in self.terms)
        c = np.zeros(deg + 1)
        for mi, v in self.terms:
            c[mi[0]] += v
        return c

    def _analytic(self, u, k):
        n = k[0]
        c = self._coeffs_1d()
        x = u[:, 0]
        out = np.zeros_like(x)
        for m in range(min(n, c.size - 1) + 1):
            dp = npoly.polyder(c, m) if m else c
            out += math.comb(n, m) * npoly.polyval(x, dp) * bump_derivative_1d(x, n - m)
        return out


@dataclass(frozen=True)
class Combo(Shape):
    """Finite linear combination ``sum c_i f_i`` of test functions."""

    terms: tuple = ()
    dim: int = 1
    kind = "linear-combination"

    @property
    def analytic_order(self) -> int:
        return min((t.shape.analytic_order for _, t in self.terms), default=0)

    def box(self):
        los, his = zip(*(t.support_box() for _, t in self.terms))
        return np.min(los, axis=0), np.max(his, axis=0)

    def values(self, u):
        out = np.zeros(u.shape[0])
        for c, t in self.terms:
            out += c * t(u if self.dim > 1 else u[:, 0])
        return out

    def deriv(self, u, k):
        out = np.zeros(u.shape[0])
        for c, t in self.terms:
            out += c * t.derivative(u if self.dim > 1 else u[:, 0], k)
        return out


@dataclass(frozen=True)
class Convolution(Shape):
    """Convolution ``a * b`` evaluated by quadrature on the narrower factor."""

    a: "TestFunction" = None
    b: "TestFunction" = None
    q: QuadratureSpec = DEFAULT_QUADRATURE
    kind = "convolution"

    @property
    def dim(self) -> int:
        return self.a.dim

    @property
    def analytic_order(self) -> int:
        return min(self.a.shape.analytic_order, self.b.shape.analytic_order)

    def box(self):
        la, ha = self.a.support_box()
        lb, hb = self.b.support_box()
        return la + lb, ha + hb

    def _eval(self, u, k):
        out = np.zeros(u.shape[0])
        d = self.dim
        for ca, ta in self.a.atoms():
            for cb, tb in self.b.atoms():
                wide, narrow = (ta, tb) if ta.scale * ta.shape.radius() >= tb.scale * tb.shape.radius() else (tb, ta)
                pts, wts = narrow.quadrature(self.q)
                # integral of wide(u - w) narrow(w) dw; derivatives land on ``wide``
                chunk = max(1, 400_000 // max(1, pts.shape[0]))
                for s in range(0, u.shape[0], chunk):
                    diff = u[s:s + chunk, None, :] - pts[None, :, :]
                    flat = diff.reshape(-1, d)
                    arg = flat[:, 0] if d == 1 else flat
                    vals = wide.derivative(arg, k) if sum(k) else wide(arg)
                    out[s:s + chunk] += ca * cb * (vals.reshape(-1, pts.shape[0]) @ wts)
        return out

    def values(self, u):
        return self._eval(u, (0,) * self.dim)

    def deriv(self, u, k):
        return self._eval(u, tuple(k))


@dataclass(frozen=True, eq=False)
class Composite(Shape):
    """Arbitrary smooth callable with a known support box (hashed by identity)."""

    fn: Callable = None
    lo: tuple = (-1.0,)
    hi: tuple = (1.0,)
    label: str = "composite"
    kind = "composite"

    @property
    def dim(self) -> int:
        return len(self.lo)

    def box(self):
        return np.asarray(self.lo, dtype=float), np.asarray(self.hi, dtype=float)

    def values(self, u):
        lo, hi = self.box()
        arg = u[:, 0] if self.dim == 1 else u
        out = np.asarray(self.fn(arg), dtype=float).reshape(-1)
        inside = np.all((u >= lo) & (u <= hi), axis=1)
        return np.where(inside, out, 0.0)


# ---------------------------------------------------------------------------
# test functions
# ---------------------------------------------------------------------------


@lru_cache(maxsize=256)
def _shape_quadrature(shape: Shape, q: QuadratureSpec, panels):
    lo, hi = shape.box()
    u, w = box_nodes(lo, hi, q, panels)
    fw = w * shape.values(u)
    u.setflags(write=False)
    fw.setflags(write=False)
    return u, fw


@lru_cache(maxsize=4096)
def _shape_fourier(shape: Shape, nu: float, q: QuadratureSpec) -> complex:
    if isinstance(shape, Convolution):
        return shape.a.fourier(nu, q) * shape.b.fourier(nu, q)
    if isinstance(shape, Combo):
        return sum(c * t.fourier(nu, q) for c, t in shape.terms)
    lo, hi = shape.box()
    length = float(hi[0] - lo[0])
    panels = max(q.panels_for(length), int(math.ceil(abs(nu) * length / (4 * math.pi))))
    u, fw = _shape_quadrature(shape, q, panels)
    return complex(np.sum(fw * np.exp(1j * nu * u[:, 0])))


@dataclass(frozen=True)
class TestFunction:
    """``weight * scale**(-d) * shape((y - center) / scale)``."""

    __test__ = False  # keep pytest from collecting this class

    shape: Shape
    center: tuple = (0.0,)
    scale: float = 1.0
    weight: float = 1.0

    def __post_init__(self):
        if not self.scale > 0:
            raise DomainError(f"scale must be positive, got {self.scale}")
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))

    # -- descriptors -----------------------------------------------------
    @property
    def kind(self) -> str:
        return self.shape.kind

    @property
    def dim(self) -> int:
        return self.shape.dim

    @property
    def x(self) -> np.ndarray:
        return np.asarray(self.center)

    @property
    def support_radius(self) -> float:
        """Radius ``R_f`` of the unit-scale representative's support ball."""
        return self.shape.radius()

    @property
    def derivative_order_available(self) -> int:
        return self.shape.analytic_order

    def support_box(self):
        lo, hi = self.shape.box()
        return self.x + self.scale * lo, self.x + self.scale * hi

    # -- evaluation ------------------------------------------------------
    def __call__(self, y):
        d = self.dim
        pts = _as_points(y, d)
        u = (pts - self.x) / self.scale
        vals = self.weight * self.scale ** (-d) * self.shape.values(u)
        return vals.reshape(_out_shape(y, d))

    def derivative(self, y, k):
        d = self.dim
        k = tuple(np.atleast_1d(k).astype(int))
        pts = _as_points(y, d)
        u = (pts - self.x) / self.scale
        vals = self.weight * self.scale ** (-d - sum(k)) * self.shape.deriv(u, k)
        return vals.reshape(_out_shape(y, d))

    # -- algebra ---------------------------------------------------------
    def rescale(self, x, lam: float) -> "TestFunction":
        return rescale(self, x, lam)

    def scaled(self, c: float) -> "TestFunction":
        return TestFunction(self.shape, self.center, self.scale, self.weight * c)

    def translated(self, shift) -> "TestFunction":
        return TestFunction(self.shape, tuple(self.x + np.atleast_1d(shift)), self.scale, self.weight)

    def atoms(self):
        """Flatten nested linear combinations into ``(coef, atomic function)`` pairs."""
        if isinstance(self.shape, Combo):
            out = []
            for c, t in self.shape.terms:
                for c2, t2 in t.atoms():
                    composed = TestFunction(t2.shape, tuple(self.x + self.scale * t2.x),
                                            self.scale * t2.scale, 1.0)
                    out.append((self.weight * c * c2 * t2.weight, composed))
            return out
        return [(self.weight, TestFunction(self.shape, self.center, self.scale, 1.0))]

    # -- quadrature ------------------------------------------------------
    def quadrature(self, q: QuadratureSpec = DEFAULT_QUADRATURE, refine: int = 1):
        """Points ``(n, d)`` and weights ``w_i f(y_i)`` such that
        ``sum w_i f(y_i) g(y_i)`` approximates ``int f g``."""
        pts_all, w_all = [], []
        for c, t in self.atoms():
            lo, hi = t.shape.box()
            panels = None if refine == 1 else q.panels_for(float(np.max(hi - lo))) * refine
            u, fw = _shape_quadrature(t.shape, q, panels)
            pts_all.append(t.x + t.scale * u)
            w_all.append(c * fw)
        return np.concatenate(pts_all), np.concatenate(w_all)

    def fourier(self, omega: float, q: QuadratureSpec = DEFAULT_QUADRATURE) -> complex:
        """``int f(y) exp(i omega y) dy`` (one dimension)."""
        if self.dim != 1:
            raise DomainError("Fourier transforms are only available in d = 1")
        return (self.weight * np.exp(1j * omega * self.center[0])
                * _shape_fourier(self.shape, float(omega * self.scale), q))


# ---------------------------------------------------------------------------
# constructors and operations
# ---------------------------------------------------------------------------


def standard_bump(d: int = 1) -> TestFunction:
    return TestFunction(Bump(d), (0.0,) * d)


def polynomial_bump(coeffs, d: int = 1) -> TestFunction:
    """``P(u) * bump(u)``; ``coeffs`` is a 1-d coefficient list (d = 1) or a
    mapping/sequence of ``(multi_index, coefficient)`` pairs."""
    if d == 1 and not (len(coeffs) and isinstance(coeffs[0], tuple)):
        terms = tuple(((i,), float(c)) for i, c in enumerate(coeffs) if c != 0)
    else:
        items = coeffs.items() if isinstance(coeffs, dict) else coeffs
        terms = tuple((tuple(mi), float(c)) for mi, c in items if c != 0)
    if not terms:
        terms = (((0,) * d, 0.0),)
    return TestFunction(PolyBump(terms, d), (0.0,) * d)


def unit_bump(d: int = 1, q: QuadratureSpec = DEFAULT_QUADRATURE) -> TestFunction:
    """Standard bump normalised to unit integral."""
    f = standard_bump(d)
    return f.scaled(1.0 / integral(f, q))


def linear_combination(terms: Sequence) -> TestFunction:
    terms = tuple((float(c), t) for c, t in terms)
    d = terms[0][1].dim
    return TestFunction(Combo(terms, d), (0.0,) * d)


def convolve(a: TestFunction, b: TestFunction, q: QuadratureSpec = CONVOLUTION_QUADRATURE) -> TestFunction:
    return TestFunction(Convolution(a, b, q), (0.0,) * a.dim)


def composite(fn: Callable, lo, hi, label: str = "composite") -> TestFunction:
    lo = tuple(float(v) for v in np.atleast_1d(lo))
    hi = tuple(float(v) for v in np.atleast_1d(hi))
    return TestFunction(Composite(fn, lo, hi, label), (0.0,) * len(lo))


def rescale(f: TestFunction, x, lam: float) -> TestFunction:
    """``f^lam_x(y) = lam**(-d) f((y - x) / lam)``, composed algebraically."""
    if not lam > 0:
        raise DomainError(f"rescale needs lam > 0, got {lam}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return TestFunction(f.shape, tuple(x + lam * f.x), lam * f.scale, f.weight)


def integral(f: TestFunction, q: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    _, w = f.quadrature(q)
    return float(np.sum(w))


def moment(f: TestFunction, k, q: QuadratureSpec = DEFAULT_QUADRATURE, about=None) -> float:
    """``int f(y) (y - about)^k dy`` for a multi-index (or integer in d = 1)."""
    pts, w = f.quadrature(q)
    k = np.atleast_1d(k)
    about = np.zeros(f.dim) if about is None else np.atleast_1d(about)
    return float(np.sum(w * np.prod((pts - about) ** k, axis=1)))


def cr_norm(f: TestFunction, r: int, grid_points: int = 10_000) -> float:
    """``max_{|k| <= r} sup |d^k f|`` over a dense grid of the support box.

    The grid has an odd number of points per axis so the box centre, where
    symmetric bumps peak, is always sampled.
    """
    if r < 0:
        raise DomainError("r must be non-negative")
    lo, hi = f.support_box()
    d = f.dim
    grid_points += 1 - grid_points % 2
    if d == 1:
        y = np.linspace(lo[0], hi[0], grid_points)
    else:
        n = int(round(grid_points ** (1.0 / d)))
        n += 1 - n % 2
        axes = [np.linspace(lo[a], hi[a], n) for a in range(d)]
        y = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    best = 0.0
    for k in multi_indices(d, r):
        best = max(best, float(np.max(np.abs(f.derivative(y, k)))))
    return best


def bump_ensemble(n: int, seed: int = 0, d: int = 1) -> list:
    """``n`` functions ``(c0 + c1.u + c2.u^2) * bump`` with coefficients drawn
    uniformly in ``[-1, 1]`` from a counter-based (Philox) generator."""
    if n <= 0:
        from .errors import ConfigError
        raise ConfigError("ensemble size must be positive")
    rng = np.random.Generator(np.random.Philox(key=seed))
    out = []
    monos = [mi for mi in multi_indices(d, 2)]
    for _ in range(n):
        c = rng.uniform(-1.0, 1.0, size=len(monos))
        out.append(polynomial_bump([(mi, ci) for mi, ci in zip(monos, c)], d))
    return out
