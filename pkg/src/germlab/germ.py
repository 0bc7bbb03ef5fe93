"""Germs of distributions ``p -> F_p`` with nominal exponents as metadata."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .distribution import (
    Density,
    Diffeo,
    Lacunary,
    LinearCombination,
    OpenSetDomain,
    PairingOracle,
    pushforward_chart,
)
from .errors import ConfigError, DomainError
from .testfn import DEFAULT_QUADRATURE, QuadratureSpec, TestFunction

__all__ = [
    "SmoothFunction",
    "Germ",
    "ConstantGerm",
    "TaylorGerm",
    "YoungGerm",
    "SumGerm",
    "PushforwardGerm",
    "make_constant",
    "make_taylor",
    "make_young",
    "builtin_young",
    "germ_pair",
]


@dataclass(frozen=True, eq=False)
class SmoothFunction:
    """A smooth function given by its derivatives ``derivative(j, y)``."""

    derivative: Callable
    max_order: int = 64
    label: str = "g"

    def __call__(self, y):
        return self.derivative(0, np.asarray(y, dtype=float))

    @classmethod
    def trigonometric(cls, components: Sequence, label: str = "trig") -> "SmoothFunction":
        """``sum amp * sin(freq * y + phase)`` over ``(amp, freq, phase)`` triples."""
        comps = [tuple(map(float, c)) for c in components]

        def deriv(j, y):
            y = np.asarray(y, dtype=float)
            out = np.zeros_like(y)
            for amp, freq, phase in comps:
                out = out + amp * freq ** j * np.sin(freq * y + phase + 0.5 * j * np.pi)
            return out

        return cls(deriv, 64, label)

    @classmethod
    def sine(cls, freq: float = 1.0, phase: float = 0.0, amp: float = 1.0) -> "SmoothFunction":
        return cls.trigonometric([(amp, freq, phase)], label=f"sin({freq}y+{phase})")

    @classmethod
    def polynomial(cls, coeffs: Sequence) -> "SmoothFunction":
        c = np.asarray(coeffs, dtype=float)

        def deriv(j, y):
            dc = np.polynomial.polynomial.polyder(c, j) if j else c
            return np.polynomial.polynomial.polyval(np.asarray(y, dtype=float), dc)

        return cls(deriv, 64, f"poly{tuple(c)}")


class Germ:
    """Base class: ``at(p)`` returns the distribution ``F_p``."""

    domain: OpenSetDomain = OpenSetDomain.line()
    nominal_gamma: Optional[float] = None
    nominal_alpha: Optional[float] = None
    nominal_beta: Optional[float] = None
    label: str = "germ"
    frequency_bound: float = 0.0

    @property
    def dim(self) -> int:
        return self.domain.dim

    def _check(self, p):
        if not np.all(self.domain.contains(np.atleast_1d(p))):
            raise DomainError(f"base point {p} lies outside the germ's domain")

    def at(self, p) -> PairingOracle:
        raise NotImplementedError

    def pair(self, p, f: TestFunction, q: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
        self._check(p)
        return self.at(p).pair(f, q)

    def pair_difference(self, p, r, f: TestFunction, q: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
        """``(F_p - F_r)(f)``."""
        return self.pair(p, f, q) - self.pair(r, f, q)

    def pair_diagonal(self, f: TestFunction, zs, q: QuadratureSpec = DEFAULT_QUADRATURE) -> np.ndarray:
        """``F_z(f(. - z))`` for each ``z``; ``f`` is centred at the origin."""
        zs = np.asarray(zs, dtype=float)
        return np.array([self.at(z).pair(f.translated(z), q) for z in zs])

    def pair_difference_translates(self, ps, qs, f: TestFunction,
                                   q: QuadratureSpec = DEFAULT_QUADRATURE) -> np.ndarray:
        """``(F_p - F_q)(f(. - q))`` row by row; ``f`` is centred at the origin."""
        ps = np.asarray(ps, dtype=float).reshape(len(qs), -1)
        qs = np.asarray(qs, dtype=float).reshape(len(qs), -1)
        return np.array([self.pair_difference(_pt(p), _pt(r), f.translated(_pt(r)), q)
                         for p, r in zip(ps, qs)])

    def with_domain(self, domain: OpenSetDomain) -> "Germ":
        return _Restricted(self, domain)

    def __add__(self, other: "Germ") -> "SumGerm":
        return SumGerm(((1.0, self), (1.0, other)))

    def __rmul__(self, c: float) -> "SumGerm":
        return SumGerm(((float(c), self),))


def _pt(x):
    x = np.asarray(x, dtype=float).reshape(-1)
    return float(x[0]) if x.size == 1 else x


class _Restricted(Germ):
    def __init__(self, base: Germ, domain: OpenSetDomain):
        self.base, self.domain = base, domain
        self.nominal_gamma, self.nominal_alpha, self.nominal_beta = (
            base.nominal_gamma, base.nominal_alpha, base.nominal_beta)
        self.label = f"{base.label}|V"
        self.frequency_bound = base.frequency_bound

    def at(self, p):
        return self.base.at(p)

    def pair_difference(self, p, r, f, q=DEFAULT_QUADRATURE):
        self._check(p)
        self._check(r)
        return self.base.pair_difference(p, r, f, q)

    def pair_diagonal(self, f, zs, q=DEFAULT_QUADRATURE):
        return self.base.pair_diagonal(f, zs, q)

    def pair_difference_translates(self, ps, qs, f, q=DEFAULT_QUADRATURE):
        return self.base.pair_difference_translates(ps, qs, f, q)


class ConstantGerm(Germ):
    """``F_p = t`` for every ``p``: coherent with any parameters."""

    def __init__(self, t: PairingOracle, domain: OpenSetDomain | None = None, label: str | None = None):
        self.t = t
        self.domain = domain or t.domain
        self.label = label or f"constant({t.label})"
        self.frequency_bound = t.frequency_bound

    def at(self, p):
        return self.t

    def pair_difference(self, p, r, f, q=DEFAULT_QUADRATURE):
        self._check(p)
        self._check(r)
        return 0.0

    def pair_diagonal(self, f, zs, q=DEFAULT_QUADRATURE):
        return self.t.pair_translates(f, zs, q)

    def pair_difference_translates(self, ps, qs, f, q=DEFAULT_QUADRATURE):
        return np.zeros(len(qs))


class TaylorGerm(Germ):
    """``F_x(y) = sum_{j<=k} g^(j)(x) (y - x)^j / j!`` as a smooth density.

    With ``period`` set, ``y - x`` is wrapped into ``(-period/2, period/2]``
    which turns the family into a germ on the circle of that length.
    """

    def __init__(self, g: SmoothFunction, k: int, period: float | None = None,
                 domain: OpenSetDomain | None = None):
        if g.max_order < k + 1:
            raise ConfigError(f"{g.label} provides derivatives up to {g.max_order}, need {k + 1}")
        self.g, self.k, self.period = g, int(k), period
        self.domain = domain or OpenSetDomain.line(1)
        self.nominal_gamma, self.nominal_alpha, self.nominal_beta = k + 1.0, 0.0, 0.0
        self.label = f"taylor({g.label}, k={k})"

    def _offset(self, y, x):
        d = np.asarray(y, dtype=float) - x
        if self.period is not None:
            d = d - self.period * np.round(d / self.period)
        return d

    def density(self, x: float) -> Callable:
        x = float(x)
        coeffs = [float(self.g.derivative(j, x)) / math.factorial(j) for j in range(self.k + 1)]

        def fn(y):
            d = self._offset(y, x)
            out = np.zeros_like(d)
            for c in reversed(coeffs):
                out = out * d + c
            return out

        return fn

    def at(self, p):
        return Density(self.density(p), self.domain, f"T_{self.k}[{self.g.label}]@{float(p):.6g}")

    def pair_difference(self, p, r, f, q=DEFAULT_QUADRATURE):
        self._check(p)
        self._check(r)
        fp, fr = self.density(p), self.density(r)
        pts, w = f.quadrature(q)
        y = pts[:, 0]
        return float(np.sum(w * (fp(y) - fr(y))))

    def pair_diagonal(self, f, zs, q=DEFAULT_QUADRATURE):
        # F_z(f(. - z)) = sum_j g^(j)(z)/j! * int u^j f(u) du
        zs = np.asarray(zs, dtype=float)
        pts, w = f.quadrature(q)
        u = pts[:, 0]
        out = np.zeros_like(zs)
        for j in range(self.k + 1):
            mj = float(np.sum(w * u ** j))
            out += self.g.derivative(j, zs) * mj / math.factorial(j)
        return out

    def pair_difference_translates(self, ps, qs, f, q=DEFAULT_QUADRATURE):
        ps = np.asarray(ps, dtype=float).reshape(-1)
        qs = np.asarray(qs, dtype=float).reshape(-1)
        pts, w = f.quadrature(q)
        u = pts[:, 0]
        # the q-centred polynomial reduces to moments of f; the p-centred one
        # is evaluated on the node matrix y - p = (q - p) + u
        own = np.zeros_like(qs)
        for j in range(self.k + 1):
            own += self.g.derivative(j, qs) * float(np.sum(w * u ** j)) / math.factorial(j)
        d = self._offset(np.add.outer(qs - ps, u), 0.0)
        other = np.zeros_like(d)
        for j in reversed(range(self.k + 1)):
            other = other * d + (self.g.derivative(j, ps) / math.factorial(j))[:, None]
        return other @ w - own


class YoungGerm(Germ):
    """``F_x = g(x) xi`` with ``g`` Hoelder of order ``beta_g`` and ``xi`` of
    negative regularity ``beta_xi``; nominally ``gamma = beta_g + beta_xi``."""

    def __init__(self, g: Callable, xi: PairingOracle, beta_g: float, beta_xi: float,
                 domain: OpenSetDomain | None = None):
        self.g, self.xi = g, xi
        self.beta_g, self.beta_xi = float(beta_g), float(beta_xi)
        self.domain = domain or xi.domain
        self.nominal_gamma = self.beta_g + self.beta_xi
        self.nominal_alpha = self.beta_xi
        self.nominal_beta = self.beta_xi
        self.frequency_bound = max(xi.frequency_bound, getattr(g, "frequency_bound", 0.0))
        self.label = f"young({getattr(g, 'label', 'g')}, {xi.label})"

    def at(self, p):
        return LinearCombination(((float(self.g(np.asarray(p, dtype=float))), self.xi),))

    def pair_difference(self, p, r, f, q=DEFAULT_QUADRATURE):
        self._check(p)
        self._check(r)
        dg = float(self.g(np.asarray(p, dtype=float)) - self.g(np.asarray(r, dtype=float)))
        if dg == 0.0:
            return 0.0
        return dg * self.xi.pair(f, q)

    def pair_diagonal(self, f, zs, q=DEFAULT_QUADRATURE):
        zs = np.asarray(zs, dtype=float)
        return self.g(zs) * self.xi.pair_translates(f, zs, q)

    def pair_difference_translates(self, ps, qs, f, q=DEFAULT_QUADRATURE):
        ps = np.asarray(ps, dtype=float).reshape(-1)
        qs = np.asarray(qs, dtype=float).reshape(-1)
        return (self.g(ps) - self.g(qs)) * self.xi.pair_translates(f, qs, q)


class SumGerm(Germ):
    """Pointwise linear combination ``sum c_i F^i_p``."""

    def __init__(self, terms: Sequence):
        self.terms = tuple((float(c), g) for c, g in terms)
        self.domain = self.terms[0][1].domain
        self.frequency_bound = max(g.frequency_bound for _, g in self.terms)
        self.label = " + ".join(f"{c}*{g.label}" for c, g in self.terms)

    def at(self, p):
        return LinearCombination([(c, g.at(p)) for c, g in self.terms])

    def pair_difference(self, p, r, f, q=DEFAULT_QUADRATURE):
        return float(sum(c * g.pair_difference(p, r, f, q) for c, g in self.terms))

    def pair_diagonal(self, f, zs, q=DEFAULT_QUADRATURE):
        out = np.zeros(len(zs))
        for c, g in self.terms:
            out += c * g.pair_diagonal(f, zs, q)
        return out

    def pair_difference_translates(self, ps, qs, f, q=DEFAULT_QUADRATURE):
        out = np.zeros(len(qs))
        for c, g in self.terms:
            out += c * g.pair_difference_translates(ps, qs, f, q)
        return out


class PushforwardGerm(Germ):
    """The germ ``y -> phi_*(F_{phi^{-1}(y)})`` seen in the coordinates of ``phi``."""

    def __init__(self, base: Germ, phi: Diffeo, domain: OpenSetDomain | None = None,
                 affine: tuple | None = None):
        self.base, self.phi = base, phi
        self.domain = domain or OpenSetDomain.line(base.dim)
        self.nominal_gamma, self.nominal_alpha, self.nominal_beta = (
            base.nominal_gamma, base.nominal_alpha, base.nominal_beta)
        self.label = f"{phi.label}_*{base.label}"
        # phi(y) = a y + b everywhere: pairings reduce to the base germ's fast paths
        self.affine = affine if affine is not None and affine[0] > 0 else None
        scale = self.affine[0] if self.affine else 1.0
        self.frequency_bound = base.frequency_bound / scale

    def at(self, y):
        p = self.phi.inverse(np.asarray(y, dtype=float))
        return pushforward_chart(self.base.at(p), self.phi)

    def _pulled(self, f: TestFunction) -> TestFunction:
        # u -> f(a u), centred where f is
        a = self.affine[0]
        return TestFunction(f.shape, tuple(f.x / a), f.scale / a, f.weight * a ** (-f.dim))

    def _inv(self, pts):
        pts = np.asarray(pts, dtype=float)
        return self.phi.inverse(pts)

    def pair_diagonal(self, f, zs, q=DEFAULT_QUADRATURE):
        if self.affine is None:
            return super().pair_diagonal(f, zs, q)
        return self.base.pair_diagonal(self._pulled(f), self._inv(zs), q)

    def pair_difference_translates(self, ps, qs, f, q=DEFAULT_QUADRATURE):
        if self.affine is None:
            return super().pair_difference_translates(ps, qs, f, q)
        return self.base.pair_difference_translates(self._inv(ps), self._inv(qs), self._pulled(f), q)


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------


def make_constant(t: PairingOracle, domain: OpenSetDomain | None = None) -> ConstantGerm:
    return ConstantGerm(t, domain)


def make_taylor(g: SmoothFunction, k: int, period: float | None = None,
                domain: OpenSetDomain | None = None) -> TaylorGerm:
    return TaylorGerm(g, k, period, domain)


def make_young(g, xi: Lacunary, beta_g: float | None = None,
               domain: OpenSetDomain | None = None) -> YoungGerm:
    """Young-product germ ``F_x = g(x) xi``.

    ``g`` is typically a :class:`Lacunary` series used as a function (its
    exponent is read from it); ``xi`` must have negative regularity.
    """
    if beta_g is None:
        beta_g = getattr(g, "regularity", None)
        if beta_g is None:
            raise ConfigError("beta_g must be given for a plain callable g")
    if not 0 < beta_g < 1:
        raise DomainError(f"beta_g must lie in (0, 1), got {beta_g}")
    beta_xi = getattr(xi, "regularity", None)
    if beta_xi is None or beta_xi >= 0:
        raise DomainError("xi must have negative regularity")
    return YoungGerm(g, xi, beta_g, beta_xi, domain)


def builtin_young(beta_g: float = 0.7, a: float = 0.4, domain: OpenSetDomain | None = None,
                  terms: int = 12, aligned: bool | None = None) -> YoungGerm:
    """The surrogate Young germ ``W_{beta_g}(x) W'_a``.

    ``aligned`` sets every phase of ``W'_a`` to ``pi/2``, so that
    ``|g(0) - g(s)|`` and ``|xi(f^lam_0)|`` are sums of same-sign terms and
    both factors peak together at the origin. It also creates a resonant
    constant ``sum_j 2^{-j gamma} / 2`` in ``g xi``, which is harmless for
    ``gamma > 0`` but dominates everything when ``gamma <= 0``. The default
    is therefore aligned phases exactly when the nominal ``gamma`` is
    positive, and zero phases otherwise.
    """
    if aligned is None:
        aligned = beta_g + a - 1.0 > 0
    g = Lacunary(beta_g, terms=terms)
    phases = np.full(terms + 1, 0.5 * np.pi) if aligned else None
    xi = Lacunary(a, terms=terms, derivative=True, phases=phases)
    return make_young(g, xi, domain=domain)


def germ_pair(F: Germ, p, f: TestFunction, q: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """``F_p(f)``."""
    return F.pair(p, f, q)
