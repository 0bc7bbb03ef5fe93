"""Acceptance gate: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -s`` or ``python tests/test_acceptance.py``.
"""
import contextlib
import math
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from germlab.cli import main as cli_main
from germlab.coherence import (
    ScanGrid,
    coherence_scan,
    enhanced_check,
    fit_exponents,
    homogeneity_scan,
    recenter,
)
from germlab.distribution import Density, DiracComb, LinearCombination, pushforward_chart
from germlab.germ import SmoothFunction, builtin_young, make_constant, make_taylor
from germlab.manifold import (
    CIRCLE,
    TWO_PI,
    Atlas,
    ManifoldGerm,
    atlas_compare,
    build_pou,
    chart_locals,
    circle_test_functions,
    glue_check,
    overlap_ensemble,
)
from germlab.reconstruct import (
    LocalReconstruction,
    build_mollifier,
    reconstruct_local,
    residual_scan,
    widened_bump,
)
from germlab.testfn import (
    QuadratureSpec,
    bump_ensemble,
    cr_norm,
    integral,
    moment,
    polynomial_bump,
    rescale,
    standard_bump,
    unit_bump,
)

FINE = QuadratureSpec(panels_per_unit=128)
ASYM = polynomial_bump([1.0, 0.5])
TRIG2 = SmoothFunction.trigonometric([(1.0, 1.0, 0.0), (0.5, 2.0, 0.5 * math.pi)])
_MOLLIFIERS = {}


def mollifier(r, base="bump"):
    key = (base, r)
    if key not in _MOLLIFIERS:
        _MOLLIFIERS[key] = build_mollifier(standard_bump() if base == "bump" else widened_bump(), r)
    return _MOLLIFIERS[key]


def quad_oracle(fn, h):
    pts, w = h.quadrature(FINE)
    return float(np.sum(w * fn(pts[:, 0])))


class Checks:
    """Named sub-checks of one criterion."""

    def __init__(self):
        self.items = []

    def add(self, name, ok, value):
        self.items.append((name, bool(ok), value))

    @property
    def ok(self):
        return all(ok for _, ok, _ in self.items)

    def detail(self):
        return "; ".join(f"{n}={v}{'' if ok else ' (fail)'}" for n, ok, v in self.items)


def criterion_1():
    c = Checks()
    f = standard_bump()
    base = integral(f, FINE)
    err = max(abs(integral(rescale(f, x, lam)) - base) for x, lam in [(0.0, 1.0), (0.3, 0.1), (-2.0, 0.01), (4.0, 7.5)])
    c.add("integral err", err <= 1e-9, f"{err:.1e}")
    g = rescale(f, 0.5, 0.25)
    lo, hi = g.support_box()
    c.add("support", lo[0] == 0.25 and hi[0] == 0.75, f"[{lo[0]}, {hi[0]}]")
    u = np.linspace(-1, 1, 10_001)
    worst = 0.0
    for r in range(4):
        sups = [np.max(np.abs(f.derivative(u, k))) for k in range(r + 1)]
        for lam in (1.0, 0.5, 0.25):
            expected = max(lam ** (-k - 1) * s for k, s in enumerate(sups))
            worst = max(worst, abs(cr_norm(rescale(f, 0.0, lam), r) / expected - 1))
    c.add("C^r rel err", worst <= 0.01, f"{worst:.1e}")
    return c


def criterion_2():
    c = Checks()
    rng = np.random.default_rng(2)
    u = polynomial_bump([0.7, -0.4, 0.9])
    worst = 0.0
    for q, a, lam in zip(rng.uniform(-2, 2, 100), rng.uniform(-2, 2, 100), 10 ** rng.uniform(-3, 0, 100)):
        ut, lam1 = recenter(u, q, a, lam)
        y = np.linspace(q - lam, q + lam, 101)
        lhs = rescale(u, q, lam)(y)
        worst = max(worst, np.max(np.abs(lhs - rescale(ut, a, lam1)(y))) / max(1.0, np.max(np.abs(lhs))))
    c.add("max err", worst <= 1e-12, f"{worst:.1e}")
    return c


def criterion_3():
    c = Checks()
    rep = fit_exponents(coherence_scan(make_constant(Density(np.cos)), ScanGrid(n_pairs=64), standard_bump()))
    c.add("constant", rep.flag == "EXACT", rep.flag)
    for k in (0, 1, 2):
        g = fit_exponents(coherence_scan(make_taylor(SmoothFunction.sine(), k), ScanGrid(), standard_bump())).gamma
        c.add(f"sin k={k} gamma", abs(g - (k + 1)) <= 0.3, f"{g:.3f}")
    rep = fit_exponents(coherence_scan(builtin_young(0.7, 0.4), ScanGrid(), standard_bump()))
    c.add("young gamma", abs(rep.gamma - 0.1) <= 0.1, f"{rep.gamma:.3f}")
    c.add("young alpha", abs(rep.alpha + 0.6) <= 0.1, f"{rep.alpha:.3f}")
    return c


def criterion_4():
    c = Checks()
    F = builtin_young(0.7, 0.4)
    grid = ScanGrid(n_pairs=64)
    rep = fit_exponents(coherence_scan(F, grid, standard_bump()))
    enh = enhanced_check(F, grid, 1, rep, n_psi=100)
    c.add("young max ratio", enh.passed and np.isfinite(enh.max_ratio), f"{enh.max_ratio:.3g}")
    G = make_taylor(SmoothFunction.polynomial([0.0, 0.0, 1.0]), 1)
    small = ScanGrid(n_pairs=32, m_max=6)
    rep2 = fit_exponents(coherence_scan(G, ScanGrid(), unit_bump()))
    ens = bump_ensemble(10, seed=1)
    base = enhanced_check(G, small, 2, rep2, ensemble=ens)
    same = all(np.array_equal(enhanced_check(G, small, 2, rep2, ensemble=[p.scaled(s) for p in ens]).table.value,
                              base.table.value) for s in (-3.0, 0.5, 2.0))
    c.add("scaling invariance exact", same, same)
    return c


def criterion_5():
    c = Checks()
    dirac = homogeneity_scan(make_constant(DiracComb([[0.0]])), ScanGrid(n_pairs=1), standard_bump())
    c.add("dirac beta", abs(dirac.beta + 1) <= 0.05, f"{dirac.beta:.4f}")
    F = builtin_young(0.7, 0.4)
    coh = fit_exponents(coherence_scan(F, ScanGrid(), standard_bump()))
    hom = homogeneity_scan(F, ScanGrid(n_pairs=64), standard_bump())
    c.add("young beta", abs(hom.beta + 0.6) <= 0.1, f"{hom.beta:.3f}")
    c.add("beta < gamma", hom.beta < coh.gamma, f"{hom.beta:.3f} < {coh.gamma:.3f}")
    return c


def criterion_6():
    c = Checks()
    for r in (1, 2, 3):
        m = mollifier(r)
        mass = abs(integral(m.phi_hat) - 1.0)
        mom = max(abs(moment(m.phi_check, j, FINE)) for j in range(r))
        tel = m.checks["telescoping"]
        c.add(f"r={r} mass/moments/telescoping", mass <= 1e-10 and mom <= 1e-8 and tel <= 1e-8,
              f"{mass:.1e}/{mom:.1e}/{tel:.1e}")
    return c


def criterion_7():
    c = Checks()
    u = lambda y: np.cos(y) + 0.2 * y
    psi = rescale(polynomial_bump([1.0, 0.5, -0.3]), 0.3, 0.6)
    err = max(abs(reconstruct_local(make_constant(Density(u)), mollifier(r), psi).value - quad_oracle(u, psi))
              for r in (1, 3))
    c.add("constant err", err <= 1e-6, f"{err:.1e}")
    psi = rescale(polynomial_bump([1.0, -0.4]), -0.2, 0.5)
    err = max(abs(reconstruct_local(make_taylor(TRIG2, k), mollifier(r), psi).value - quad_oracle(TRIG2, psi))
              for k, r in ((0, 1), (1, 2), (2, 3)))
    c.add("taylor err", err <= 1e-6, f"{err:.1e}")
    F = make_taylor(SmoothFunction.sine(), 2)
    gamma = fit_exponents(coherence_scan(F, ScanGrid(), standard_bump())).gamma
    slope = residual_scan(F, LocalReconstruction(F, mollifier(3)), ScanGrid(n_pairs=16, m_min=3, m_max=8), ASYM).slope
    c.add("residual slope vs gamma", abs(slope - gamma) <= 0.3, f"{slope:.3f} vs {gamma:.3f}")
    F = make_taylor(SmoothFunction.sine(), 1)
    RA, RB = LocalReconstruction(F, mollifier(2)), LocalReconstruction(F, mollifier(2, "widened"))
    gap = max(abs(RA.pair(rescale(h, 0.1, 0.4)) - RB.pair(rescale(h, 0.1, 0.4))) for h in bump_ensemble(5, seed=9))
    c.add("two bases gap", gap <= 1e-5, f"{gap:.1e}")
    return c


def criterion_8():
    c = Checks()
    A = Atlas.circle_three_arc()
    t = Density(lambda y: np.cos(y) + 0.3 * np.sin(3 * y))
    rep = glue_check([pushforward_chart(t, ch.lift_map()) for ch in A.charts], A, 1e-9)
    c.add("pushforward", rep.passed, f"{rep.max_discrepancy:.1e}")
    A = Atlas.circle_two_arc()
    locals_ = [pushforward_chart(Density(np.cos), ch.lift_map()) for ch in A.charts]
    eps = 1e-3
    b = rescale(unit_bump(), [0.0], 0.2)
    bump = Density(lambda y: b(y))
    locals_[0] = LinearCombination([(1.0, locals_[0]), (eps, bump)])
    rep = glue_check(locals_, A, 1e-5)
    w = rep.witness
    g = overlap_ensemble(A, w["chart_i"], w["chart_j"], 20, 0)[w["g_id"]] if w else None
    expected = eps * abs(bump.pair(g)) if g is not None else math.nan
    c.add("perturbed", not rep.passed and abs(rep.max_discrepancy - expected) <= 1e-10,
          f"{rep.max_discrepancy:.3e} vs eps*|b(g)|={expected:.3e}")
    F = ManifoldGerm(CIRCLE, make_taylor(TRIG2, 2, period=TWO_PI))
    rep = glue_check(chart_locals(F, A, mollifier(3)), A, 1e-5)
    c.add("reconstructed taylor", rep.passed, f"{rep.max_discrepancy:.1e}")
    return c


def criterion_9():
    c = Checks()
    F = ManifoldGerm(CIRCLE, make_taylor(TRIG2, 2, period=TWO_PI))
    rep = atlas_compare(F, Atlas.circle_two_arc(), Atlas.circle_three_arc(), circle_test_functions(20), mollifier(3))
    c.add("two-arc vs three-arc", rep.max_rel_discrepancy <= 1e-5, f"{rep.max_rel_discrepancy:.1e}")
    return c


def criterion_10():
    c = Checks()
    F = ManifoldGerm(CIRCLE, builtin_young(0.6, 0.2, aligned=True))
    A = Atlas.circle_two_arc(scale=2.0)
    ens = circle_test_functions(20)
    gap, pair = 0.0, None
    for s in ((1, 2), (3, 4), (5, 6), (7, 8)):
        rep = atlas_compare(F, A, A, ens, mollifier(1), P_a=build_pou(A, s[0]), P_b=build_pou(A, s[1]),
                            fixed_level=10)
        gap, pair = max(abs(a - b) for _, a, b, _ in rep.rows), s
        if gap > 1e-3:
            break
    c.add(f"POU gap seeds {pair}", gap > 1e-3, f"{gap:.3g}")
    F0 = builtin_young(0.6, 0.4, terms=16)
    res = residual_scan(F0, LocalReconstruction(F0, mollifier(1), fixed_level=14),
                        ScanGrid(n_pairs=64, m_min=3, m_max=9), ASYM)
    c.add("gamma=0 log-envelope C", res.log_constant > 0, f"{res.log_constant:.3g}")
    return c


DETERMINISM_CONFIGS = {
    "coherence": "germ.kind = young\nscan.n_pairs = 64\nscan.m_max = 8\n",
    "homogeneity": "germ.kind = young\nscan.n_pairs = 32\n",
    "enhanced": "germ.kind = taylor\ngerm.g = square\nscan.n_pairs = 16\nscan.n_psi = 8\nscan.m_max = 6\n",
    "reconstruct": "germ.kind = taylor\ngerm.g = sin\ngerm.k = 1\nmollifier.r = 2\nensemble.n = 4\n",
    "residual": "germ.kind = taylor\ngerm.g = sin\ngerm.k = 2\nmollifier.r = 3\nscan.n_pairs = 8\nscan.m_max = 7\n",
    "glue": "germ.kind = taylor\ngerm.g = trig2\ngerm.k = 2\ndomain.kind = circle\nmollifier.r = 3\n",
    "atlas-compare": "germ.kind = taylor\ngerm.g = trig2\ngerm.k = 2\ndomain.kind = circle\n"
                     "atlas.compare = three-arc\nmollifier.r = 3\nensemble.n = 6\n",
}


def criterion_11():
    c = Checks()
    saved = {k: os.environ.get(k) for k in ("GERMLAB_OUTDIR", "GERMLAB_THREADS")}
    try:
        with tempfile.TemporaryDirectory() as tmp, contextlib.redirect_stdout(None):
            for kind, body in DETERMINISM_CONFIGS.items():
                cfg = Path(tmp) / f"{kind}.cfg"
                cfg.write_text(f"experiment.kind = {kind}\nscan.seed = 11\n{body}")
                outs, codes = [], []
                for threads in ("1", "4"):
                    d = Path(tmp) / f"{kind}-{threads}"
                    os.environ["GERMLAB_OUTDIR"], os.environ["GERMLAB_THREADS"] = str(d), threads
                    codes.append(cli_main(["run", str(cfg)]))
                    outs.append({p.name: p.read_bytes() for p in sorted(d.glob("*.csv"))})
                same = outs[0] == outs[1] and len(outs[0]) > 0
                c.add(kind, same and codes == [0, 0], "identical" if same else f"differ (exit {codes})")
    finally:
        for k, v in saved.items():
            if v is None:
                os.environ.pop(k, None)
            else:
                os.environ[k] = v
    return c


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10, criterion_11]


def run_criterion(fn):
    t0 = time.perf_counter()
    checks = fn()
    n = fn.__name__.split("_")[1]
    line = f"criterion {n:>2}: {'PASS' if checks.ok else 'FAIL'} ({time.perf_counter() - t0:.1f}s) {checks.detail()}"
    return checks.ok, line


@pytest.mark.parametrize("fn", CRITERIA, ids=[f.__name__ for f in CRITERIA])
def test_criterion(fn, capsys):
    ok, line = run_criterion(fn)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    results = [run_criterion(fn) for fn in CRITERIA]
    for _, line in results:
        print(line)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
