"""Distributions as pairing oracles, open sets, and changes of coordinates.

Transform convention used throughout the package::

    (phi_* T)(h) = T(h o phi),        chi^* S = (chi^{-1})_* S

so a density ``u`` pushes forward to ``(u o phi^{-1}) |det J phi^{-1}|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigError, DomainError
from .testfn import (
    DEFAULT_QUADRATURE,
    Combo,
    QuadratureSpec,
    TestFunction,
    composite,
    composite_nodes,
)

__all__ = [
    "OpenSetDomain",
    "Diffeo",
    "PairingOracle",
    "Density",
    "IndicatorDensity",
    "DiracComb",
    "Lacunary",
    "LinearCombination",
    "Pushforward",
    "ZERO",
    "pair",
    "compose_test",
    "pushforward_chart",
    "pullback_chart",
]


# ---------------------------------------------------------------------------
# open sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OpenSetDomain:
    """Open box (possibly unbounded) or open ball in R^d."""

    lo: tuple = (-math.inf,)
    hi: tuple = (math.inf,)
    kind: str = "box"
    radius: float = math.inf

    @classmethod
    def line(cls, d: int = 1) -> "OpenSetDomain":
        return cls((-math.inf,) * d, (math.inf,) * d)

    @classmethod
    def interval(cls, lo: float, hi: float) -> "OpenSetDomain":
        return cls((float(lo),), (float(hi),))

    @classmethod
    def box(cls, lo, hi) -> "OpenSetDomain":
        return cls(tuple(map(float, lo)), tuple(map(float, hi)))

    @classmethod
    def ball(cls, center, radius: float) -> "OpenSetDomain":
        c = np.atleast_1d(np.asarray(center, dtype=float))
        return cls(tuple(c - radius), tuple(c + radius), "ball", float(radius))

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.lo) + np.asarray(self.hi))

    def boundary_distance(self, points) -> np.ndarray:
        """Signed distance to the boundary (positive inside)."""
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        if self.kind == "ball":
            return self.radius - np.linalg.norm(pts - self.center, axis=1)
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        return np.min(np.minimum(pts - lo, hi - pts), axis=1)

    def contains(self, points) -> np.ndarray:
        return self.boundary_distance(points) > 0

    def contains_box(self, lo, hi) -> bool:
        lo, hi = np.atleast_1d(lo), np.atleast_1d(hi)
        if self.kind == "ball":
            corners = _corners(lo, hi)
            return bool(np.all(self.boundary_distance(corners) > 0))
        return bool(np.all(lo > np.asarray(self.lo)) and np.all(hi < np.asarray(self.hi)))

    def contains_domain(self, other: "OpenSetDomain") -> bool:
        if self.kind == "ball" and other.kind == "ball":
            return np.linalg.norm(self.center - other.center) + other.radius <= self.radius
        return bool(np.all(np.asarray(other.lo) >= np.asarray(self.lo))
                    and np.all(np.asarray(other.hi) <= np.asarray(self.hi)))

    def d_k(self, k_lo, k_hi) -> float:
        """``D_K = dist(boundary, K)`` for a compact box ``K`` inside the set."""
        k_lo, k_hi = np.atleast_1d(k_lo).astype(float), np.atleast_1d(k_hi).astype(float)
        if not self.contains_box(k_lo, k_hi):
            raise DomainError("compact set is not strictly inside the open set")
        if self.kind == "ball":
            return float(np.min(self.boundary_distance(_corners(k_lo, k_hi))))
        gaps = np.minimum(k_lo - np.asarray(self.lo), np.asarray(self.hi) - k_hi)
        return float(np.min(gaps))


def _corners(lo, hi) -> np.ndarray:
    lo, hi = np.atleast_1d(lo), np.atleast_1d(hi)
    grids = np.meshgrid(*[(a, b) for a, b in zip(lo, hi)], indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


# ---------------------------------------------------------------------------
# diffeomorphisms
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Diffeo:
    """A diffeomorphism with inverse and Jacobian determinant evaluators.

    ``local_affine(y)`` returns ``(a, b)`` with ``phi(z) = a z + b`` near
    ``y`` when the map is (piecewise) affine with a scalar linear part.
    """

    forward: Callable
    inverse: Optional[Callable] = None
    jacobian: Optional[Callable] = None
    local_affine: Optional[Callable] = None
    dim: int = 1
    label: str = "diffeo"

    def __call__(self, y):
        return self.forward(y)

    def inv(self) -> "Diffeo":
        self._require()
        la = None
        if self.local_affine is not None:
            def la(y, _self=self):
                a, b = _self.local_affine(_self.inverse(y))
                return 1.0 / a, -b / a
        jac = self.jacobian
        return Diffeo(self.inverse, self.forward,
                      lambda y: 1.0 / jac(self.inverse(y)), la, self.dim,
                      f"inv({self.label})")

    def compose(self, other: "Diffeo") -> "Diffeo":
        """``self o other``."""
        self._require()
        other._require()
        la = None
        if self.local_affine is not None and other.local_affine is not None:
            def la(y):
                a1, b1 = other.local_affine(y)
                a2, b2 = self.local_affine(other.forward(y))
                return a2 * a1, a2 * b1 + b2
        return Diffeo(
            lambda y: self.forward(other.forward(y)),
            lambda z: other.inverse(self.inverse(z)),
            lambda y: self.jacobian(other.forward(y)) * other.jacobian(y),
            la, self.dim, f"{self.label}o{other.label}")

    def _require(self):
        if self.inverse is None or self.jacobian is None:
            raise ConfigError(f"diffeomorphism {self.label!r} lacks inverse/Jacobian evaluators")

    # -- constructors ----------------------------------------------------
    @classmethod
    def identity(cls, d: int = 1) -> "Diffeo":
        return cls(lambda y: np.asarray(y, dtype=float), lambda y: np.asarray(y, dtype=float),
                   lambda y: np.ones(np.shape(y)[:1] if d > 1 else np.shape(y)),
                   lambda y: (1.0, np.zeros(d) if d > 1 else 0.0), d, "id")

    @classmethod
    def affine(cls, a: float, b, d: int = 1) -> "Diffeo":
        """``y -> a y + b`` with scalar ``a != 0``."""
        if a == 0:
            raise DomainError("affine map needs a nonzero slope")
        b = np.asarray(b, dtype=float) if d > 1 else float(b)
        return cls(lambda y: a * np.asarray(y, dtype=float) + b,
                   lambda z: (np.asarray(z, dtype=float) - b) / a,
                   lambda y: np.full(np.shape(y)[:1] if d > 1 else np.shape(y), abs(a) ** d),
                   lambda y: (a, b), d, f"affine({a},{b})")

    @classmethod
    def translation(cls, shift, d: int = 1) -> "Diffeo":
        return cls.affine(1.0, shift, d)

    @classmethod
    def trig(cls, c: float = 0.3, k: float = 1.0) -> "Diffeo":
        """``y -> y + c sin(k y)`` on R, a diffeomorphism for ``|c k| < 1``."""
        if abs(c * k) >= 1:
            raise DomainError("need |c k| < 1 for a diffeomorphism")

        def inverse(z):
            z = np.asarray(z, dtype=float)
            y = z.copy()
            for _ in range(60):
                step = (y + c * np.sin(k * y) - z) / (1.0 + c * k * np.cos(k * y))
                y = y - step
                if np.all(np.abs(step) < 1e-15 * (1 + np.abs(y))):
                    break
            return y

        return cls(lambda y: np.asarray(y, dtype=float) + c * np.sin(k * np.asarray(y, dtype=float)),
                   inverse, lambda y: 1.0 + c * k * np.cos(k * np.asarray(y, dtype=float)),
                   None, 1, f"trig({c},{k})")


def _image_box(phi_fn: Callable, lo, hi, d: int):
    lo, hi = np.atleast_1d(lo), np.atleast_1d(hi)
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        return lo, hi
    corners = _corners(lo, hi)
    img = np.asarray(phi_fn(corners[:, 0] if d == 1 else corners)).reshape(-1, d)
    return img.min(axis=0), img.max(axis=0)


def compose_test(h: TestFunction, phi: Diffeo) -> TestFunction:
    """The test function ``h o phi``.

    Affine pieces with positive slope compose algebraically (exact); other maps
    produce a composite whose support box is the preimage of ``h``'s box.
    """
    phi._require()
    d = h.dim
    y0 = phi.inverse(h.x[0] if d == 1 else h.x[None, :])
    y0 = np.atleast_1d(np.asarray(y0, dtype=float)).reshape(-1)
    if phi.local_affine is not None:
        a, b = phi.local_affine(y0[0] if d == 1 else y0)
        if np.isscalar(a) and a > 0:
            b = np.atleast_1d(b)
            new_center = (h.x - b) / a
            return TestFunction(h.shape, tuple(new_center), h.scale / a, h.weight * a ** (-d))
    lo, hi = h.support_box()
    plo, phi_hi = _image_box(phi.inverse, lo, hi, d)
    return composite(lambda y: h(phi.forward(y)), plo, phi_hi, label=f"h o {phi.label}")


# ---------------------------------------------------------------------------
# pairing oracles
# ---------------------------------------------------------------------------


class PairingOracle:
    """A distribution, known only through its pairings with test functions."""

    domain: OpenSetDomain = OpenSetDomain.line()
    frequency_bound: float = 0.0
    label: str = "oracle"

    def pair(self, f: TestFunction, q: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
        raise NotImplementedError

    def pair_checked(self, f: TestFunction, q: QuadratureSpec = DEFAULT_QUADRATURE):
        """Pairing plus a flag telling whether ``supp f`` leaves the domain."""
        lo, hi = f.support_box()
        return self.pair(f, q), not self.domain.contains_box(lo, hi)

    def pair_translates(self, f: TestFunction, zs, q: QuadratureSpec = DEFAULT_QUADRATURE) -> np.ndarray:
        """``T(f(. - z))`` for every ``z`` in ``zs``."""
        zs = np.asarray(zs, dtype=float)
        return np.array([self.pair(f.translated(z), q) for z in zs])

    def __add__(self, other: "PairingOracle") -> "LinearCombination":
        return LinearCombination(((1.0, self), (1.0, other)))

    def __sub__(self, other: "PairingOracle") -> "LinearCombination":
        return LinearCombination(((1.0, self), (-1.0, other)))

    def __rmul__(self, c: float) -> "LinearCombination":
        return LinearCombination(((float(c), self),))


def pair(T: PairingOracle, f: TestFunction, q: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    return T.pair(f, q)


def _eval_density(fn, pts: np.ndarray, d: int) -> np.ndarray:
    arg = pts[..., 0] if d == 1 else pts
    return np.asarray(fn(arg), dtype=float)


class Density(PairingOracle):
    """Locally integrable function acting by ``f -> int u f``."""

    def __init__(self, fn: Callable, domain: OpenSetDomain | None = None, label: str = "density",
                 dim: int = 1):
        self.fn = fn
        self.dim = dim if domain is None else domain.dim
        self.domain = domain or OpenSetDomain.line(dim)
        self.label = label

    def __call__(self, y):
        return self.fn(y)

    def pair(self, f, q=DEFAULT_QUADRATURE):
        pts, w = f.quadrature(q)
        return float(np.sum(w * _eval_density(self.fn, pts, f.dim)))

    def pair_translates(self, f, zs, q=DEFAULT_QUADRATURE):
        pts, w = f.quadrature(q)
        zs = np.asarray(zs, dtype=float).reshape(len(zs), -1)
        out = np.empty(zs.shape[0])
        chunk = max(1, 2_000_000 // max(1, pts.shape[0]))
        for s in range(0, zs.shape[0], chunk):
            shifted = zs[s:s + chunk, None, :] + pts[None, :, :]
            out[s:s + chunk] = _eval_density(self.fn, shifted, f.dim) @ w
        return out


class IndicatorDensity(PairingOracle):
    """``value * 1_[lo, hi]`` in one dimension, integrated exactly on the cut."""

    def __init__(self, lo: float, hi: float, value: float = 1.0, label: str = "indicator"):
        self.lo, self.hi, self.value = float(lo), float(hi), float(value)
        self.domain = OpenSetDomain.line(1)
        self.label = label

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        return np.where((y >= self.lo) & (y <= self.hi), self.value, 0.0)

    def pair(self, f, q=DEFAULT_QUADRATURE):
        total = 0.0
        for c, t in f.atoms():
            lo, hi = t.support_box()
            a, b = max(lo[0], self.lo), min(hi[0], self.hi)
            if b <= a:
                continue
            if a == lo[0] and b == hi[0]:
                _, w = t.quadrature(q)
                total += c * float(np.sum(w))
                continue
            panels = q.panels_for((b - a) / t.scale)
            x, w = composite_nodes(float(a), float(b), panels, q.nodes_per_panel)
            total += c * float(np.sum(w * t(x)))
        return self.value * total


class DiracComb(PairingOracle):
    """``sum_i w_i delta_{y_i}``."""

    def __init__(self, locations, weights=None, label: str = "dirac"):
        locs = np.asarray(locations, dtype=float)
        self.locations = locs.reshape(-1, 1) if locs.ndim <= 1 else locs
        n = self.locations.shape[0]
        self.weights = np.ones(n) if weights is None else np.asarray(weights, dtype=float).reshape(n)
        self.domain = OpenSetDomain.line(self.locations.shape[1])
        self.label = label

    def pair(self, f, q=DEFAULT_QUADRATURE):
        arg = self.locations[:, 0] if f.dim == 1 else self.locations
        return float(np.sum(self.weights * f(arg)))

    def pair_translates(self, f, zs, q=DEFAULT_QUADRATURE):
        zs = np.asarray(zs, dtype=float).reshape(len(zs), -1)
        pts = self.locations[None, :, :] - zs[:, None, :]
        vals = f(pts[..., 0] if f.dim == 1 else pts.reshape(-1, f.dim)).reshape(zs.shape[0], -1)
        return vals @ self.weights


class Lacunary(PairingOracle):
    """Truncated lacunary (Weierstrass-type) series on R.

    ``W_a(y) = amplitude * sum_{j=0}^J 2^{-ja} cos(2^j y + theta_j)``; with
    ``derivative=True`` the oracle is ``W_a'`` (regularity ``a - 1``).
    Pairings are computed term by term from the test function's Fourier
    transform, so they stay accurate at high frequency.
    """

    def __init__(self, a: float, terms: int = 12, derivative: bool = False,
                 amplitude: float = 1.0, phases=None, label: str | None = None):
        if not 0 < a < 1:
            raise DomainError(f"lacunary exponent must lie in (0, 1), got {a}")
        self.a, self.terms, self.derivative, self.amplitude = float(a), int(terms), bool(derivative), float(amplitude)
        self.phases = np.zeros(self.terms + 1) if phases is None else np.asarray(phases, dtype=float)
        self.freqs = 2.0 ** np.arange(self.terms + 1)
        self.domain = OpenSetDomain.line(1)
        self.frequency_bound = float(self.freqs[-1])
        self.label = label or (f"W'_{a}" if derivative else f"W_{a}")

    @classmethod
    def seeded(cls, a: float, seed: int, **kw) -> "Lacunary":
        rng = np.random.Generator(np.random.Philox(key=seed))
        terms = kw.get("terms", 12)
        return cls(a, phases=rng.uniform(0, 2 * np.pi, terms + 1), **kw)

    @property
    def regularity(self) -> float:
        return self.a - 1.0 if self.derivative else self.a

    @property
    def coefficients(self) -> np.ndarray:
        j = np.arange(self.terms + 1)
        if self.derivative:
            return -self.amplitude * 2.0 ** (j * (1.0 - self.a))
        return self.amplitude * 2.0 ** (-j * self.a)

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        arg = np.multiply.outer(y, self.freqs) + self.phases
        trig = np.sin(arg) if self.derivative else np.cos(arg)
        return trig @ self.coefficients

    def _transforms(self, f, q):
        return np.array([f.fourier(w, q) for w in self.freqs]) * np.exp(1j * self.phases)

    def pair(self, f, q=DEFAULT_QUADRATURE):
        ft = self._transforms(f, q)
        part = ft.imag if self.derivative else ft.real
        return float(np.dot(self.coefficients, part))

    def pair_translates(self, f, zs, q=DEFAULT_QUADRATURE):
        zs = np.asarray(zs, dtype=float).reshape(-1)
        ft = self._transforms(f, q)
        # shifting f by z multiplies its transform by exp(i w z)
        phase = np.exp(1j * np.multiply.outer(zs, self.freqs)) * ft
        part = phase.imag if self.derivative else phase.real
        return part @ self.coefficients


class LinearCombination(PairingOracle):
    def __init__(self, terms: Sequence, label: str = "combination"):
        self.terms = tuple((float(c), t) for c, t in terms)
        self.domain = self.terms[0][1].domain if self.terms else OpenSetDomain.line()
        self.frequency_bound = max((t.frequency_bound for _, t in self.terms), default=0.0)
        self.label = label

    def pair(self, f, q=DEFAULT_QUADRATURE):
        return float(sum(c * t.pair(f, q) for c, t in self.terms))

    def pair_translates(self, f, zs, q=DEFAULT_QUADRATURE):
        out = np.zeros(len(zs))
        for c, t in self.terms:
            out += c * t.pair_translates(f, zs, q)
        return out


class _Zero(PairingOracle):
    label = "zero"

    def pair(self, f, q=DEFAULT_QUADRATURE):
        return 0.0

    def pair_translates(self, f, zs, q=DEFAULT_QUADRATURE):
        return np.zeros(len(zs))


ZERO = _Zero()


class Pushforward(PairingOracle):
    """Generic ``phi_* T``: ``h -> T(h o phi)``."""

    def __init__(self, T: PairingOracle, phi: Diffeo, domain: OpenSetDomain | None = None):
        phi._require()
        self.T, self.phi = T, phi
        self.frequency_bound = T.frequency_bound
        if domain is None:
            lo, hi = _image_box(phi.forward, T.domain.lo, T.domain.hi, T.domain.dim)
            domain = OpenSetDomain(tuple(lo), tuple(hi))
        self.domain = domain
        self.label = f"{phi.label}_*({T.label})"

    def pair(self, f, q=DEFAULT_QUADRATURE):
        return self.T.pair(compose_test(f, self.phi), q)


def pushforward_chart(T: PairingOracle, phi: Diffeo) -> PairingOracle:
    """``phi_* T`` with ``(phi_* T)(h) = T(h o phi)``."""
    phi._require()
    lo, hi = _image_box(phi.forward, T.domain.lo, T.domain.hi, T.domain.dim)
    dom = OpenSetDomain(tuple(lo), tuple(hi))
    if isinstance(T, Density):
        u, inv, jac = T.fn, phi.inverse, phi.jacobian

        def fn(y):
            x = inv(y)
            return u(x) / np.abs(jac(x))

        return Density(fn, dom, f"{phi.label}_*({T.label})")
    if isinstance(T, DiracComb):
        locs = T.locations[:, 0] if T.locations.shape[1] == 1 else T.locations
        return DiracComb(np.asarray(phi.forward(locs)).reshape(T.locations.shape), T.weights,
                         f"{phi.label}_*({T.label})")
    if isinstance(T, IndicatorDensity) and phi.local_affine is not None:
        a, b = phi.local_affine(0.5 * (T.lo + T.hi))
        if a > 0:
            return IndicatorDensity(a * T.lo + b, a * T.hi + b, T.value / a)
    if isinstance(T, LinearCombination):
        return LinearCombination([(c, pushforward_chart(t, phi)) for c, t in T.terms])
    if T is ZERO:
        return ZERO
    return Pushforward(T, phi, dom)


def pullback_chart(S: PairingOracle, chi: Diffeo) -> PairingOracle:
    """``chi^* S = (chi^{-1})_* S``."""
    return pushforward_chart(S, chi.inv())
