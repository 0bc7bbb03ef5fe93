"""Command-line experiment runner.

Configs are plain text, one ``section.key = value`` per line, ``#`` starts
a comment. Exit codes: 0 all checks passed, 1 a verification check
failed, 2 configuration error, 3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .coherence import (
    ScanGrid,
    ScanTable,
    coherence_scan,
    enhanced_check,
    fit_exponents,
    format_float,
    homogeneity_scan,
)
from .distribution import Density, DiracComb, LinearCombination, OpenSetDomain, pushforward_chart
from .errors import ConfigError, DomainError, GermlabError, GlueError, NonConvergenceError
from .germ import SmoothFunction, builtin_young, make_constant, make_taylor
from .manifold import (
    CIRCLE,
    TWO_PI,
    Atlas,
    ManifoldGerm,
    atlas_compare,
    build_pou,
    chart_locals,
    circle_test_functions,
    glue_check,
    global_reconstruct,
)
from .reconstruct import (
    LocalReconstruction,
    build_mollifier,
    default_order,
    reconstruct_local,
    residual_scan,
    widened_bump,
)
from .testfn import (
    DEFAULT_QUADRATURE,
    QuadratureSpec,
    bump_ensemble,
    polynomial_bump,
    rescale,
    standard_bump,
    unit_bump,
)

KINDS = ("coherence", "homogeneity", "enhanced", "reconstruct", "residual", "glue", "atlas-compare", "demo")
SECTIONS = ("experiment", "germ", "domain", "atlas", "scan", "mollifier", "quadrature", "output",
            "ensemble", "glue", "check", "demo")
GERM_KINDS = ("constant", "dirac", "taylor", "young")

FUNCTIONS = {
    "cos": (np.cos, SmoothFunction.trigonometric([(1.0, 1.0, 0.5 * math.pi)], "cos")),
    "sin": (np.sin, SmoothFunction.sine()),
    "one": (lambda y: np.ones_like(np.asarray(y, dtype=float)), SmoothFunction.polynomial([1.0])),
    "square": (lambda y: np.asarray(y, dtype=float) ** 2, SmoothFunction.polynomial([0.0, 0.0, 1.0])),
    "trig2": (lambda y: np.sin(y) + 0.5 * np.cos(2 * y),
              SmoothFunction.trigonometric([(1.0, 1.0, 0.0), (0.5, 2.0, 0.5 * math.pi)], "trig2")),
}


class Failure(Exception):
    """A verification check did not hold (exit 1)."""


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    values: dict
    source: str = "<config>"
    _used: set = field(default_factory=set)

    @classmethod
    def parse(cls, text: str, source: str = "<config>") -> "ExperimentConfig":
        values = {}
        for n, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{source}:{n}: expected 'section.key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            if key.count(".") != 1:
                raise ConfigError(f"{source}:{n}: key {key!r} must be 'section.key'")
            if key.split(".")[0] not in SECTIONS:
                raise ConfigError(f"{source}:{n}: unknown section in {key!r}")
            values[key] = value
        cfg = cls(values, source)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        return cls.parse(text, str(path))

    def validate(self):
        for key in ("experiment.kind", "germ.kind"):
            if key not in self.values:
                raise ConfigError(f"missing required key {key}")
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment.kind {self.kind!r}")
        if self.get("germ.kind") not in GERM_KINDS:
            raise ConfigError(f"unknown germ.kind {self.get('germ.kind')!r}")
        if self.kind in ("glue", "atlas-compare") and self.get("domain.kind", "circle") != "circle":
            raise ConfigError(f"{self.kind} experiments need domain.kind = circle")
        if self.kind == "demo" and self.get("demo.name") not in DEMOS:
            raise ConfigError("demo experiments need a known demo.name")

    @property
    def kind(self) -> str:
        return self.values["experiment.kind"]

    def get(self, key: str, default=None) -> Optional[str]:
        return self.values.get(key, default)

    def num(self, key: str, default=None, cast=float):
        raw = self.values.get(key)
        if raw is None:
            return default
        try:
            return cast(raw)
        except ValueError:
            raise ConfigError(f"{key} = {raw!r} is not a valid {cast.__name__}") from None

    def vec(self, key: str, default=None):
        raw = self.values.get(key)
        if raw is None:
            return default
        try:
            return tuple(float(v) for v in raw.replace(",", " ").split())
        except ValueError:
            raise ConfigError(f"{key} = {raw!r} is not a list of numbers") from None

    def flag(self, key: str, default: bool = False) -> bool:
        raw = self.values.get(key)
        if raw is None:
            return default
        if raw.lower() in ("true", "yes", "1", "on"):
            return True
        if raw.lower() in ("false", "no", "0", "off"):
            return False
        raise ConfigError(f"{key} = {raw!r} is not a boolean")

    @property
    def seed(self) -> int:
        return self.num("scan.seed", self.num("experiment.seed", 0, int), int)

    @property
    def digest(self) -> str:
        """Hash of the canonical config, ignoring output settings."""
        body = "\n".join(f"{k} = {v}" for k, v in sorted(self.values.items()) if not k.startswith("output."))
        return hashlib.sha256(body.encode()).hexdigest()[:16]

    def header(self) -> str:
        return f"germlab {__version__} config={self.digest} seed={self.seed}"


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------


def _quadrature(cfg: ExperimentConfig) -> QuadratureSpec:
    return QuadratureSpec(cfg.num("quadrature.panels_per_unit", 64, int),
                          cfg.num("quadrature.nodes_per_panel", 16, int))


def _on_circle(cfg: ExperimentConfig) -> bool:
    return cfg.get("domain.kind", "line") == "circle"


def _domain(cfg: ExperimentConfig) -> OpenSetDomain:
    kind = cfg.get("domain.kind", "line")
    if kind == "line":
        return OpenSetDomain.line(cfg.num("domain.dim", 1, int))
    if kind in ("interval", "box"):
        lo, hi = cfg.vec("domain.lo"), cfg.vec("domain.hi")
        if lo is None or hi is None:
            raise ConfigError(f"domain.kind = {kind} needs domain.lo and domain.hi")
        return OpenSetDomain.box(lo, hi)
    if kind == "circle":
        return OpenSetDomain.line(1)
    raise ConfigError(f"unknown domain.kind {kind!r}")


def _function(cfg: ExperimentConfig, key: str, default: str):
    name = cfg.get(key, default)
    if name in FUNCTIONS:
        return FUNCTIONS[name]
    if name.startswith("poly"):
        coeffs = [float(v) for v in name[4:].replace(",", " ").split()]
        sf = SmoothFunction.polynomial(coeffs)
        return (lambda y: sf(y)), sf
    raise ConfigError(f"{key} = {name!r}: use one of {sorted(FUNCTIONS)} or 'poly c0 c1 ...'")


def build_germ(cfg: ExperimentConfig):
    """The lift germ, plus the closed-form density its reconstruction should equal (or None)."""
    kind = cfg.get("germ.kind")
    dom = _domain(cfg)
    circle = _on_circle(cfg)
    if kind == "constant":
        fn, _ = _function(cfg, "germ.density", "cos")
        return make_constant(Density(fn, dom, cfg.get("germ.density", "cos")), dom), fn
    if kind == "dirac":
        return make_constant(DiracComb([[cfg.num("germ.location", 0.0)]]), dom), None
    if kind == "taylor":
        fn, sf = _function(cfg, "germ.g", "sin")
        k = cfg.num("germ.k", 1, int)
        period = TWO_PI if circle else cfg.num("germ.period", None)
        return make_taylor(sf, k, period, dom), fn
    aligned = cfg.get("germ.aligned", "auto")
    aligned = None if aligned == "auto" else cfg.flag("germ.aligned")
    F = builtin_young(cfg.num("germ.beta_g", 0.7), cfg.num("germ.a", 0.4), dom,
                      cfg.num("germ.terms", 12, int), aligned)
    return F, None


def _atlas(cfg: ExperimentConfig, key: str = "atlas.kind", default: str = "two-arc") -> Atlas:
    kind = cfg.get(key, default)
    if kind == "two-arc":
        return Atlas.circle_two_arc()
    if kind == "two-arc-rescaled":
        return Atlas.circle_two_arc(scale=cfg.num("atlas.scale", 2.0))
    if kind == "three-arc":
        return Atlas.circle_three_arc()
    raise ConfigError(f"{key} = {kind!r}: use two-arc, two-arc-rescaled or three-arc")


def _mollifier(cfg: ExperimentConfig, F, base: Optional[str] = None):
    raw = cfg.get("mollifier.r", "AUTO")
    if raw.upper() == "AUTO":
        alpha = F.nominal_alpha if F.nominal_alpha is not None else 0.0
        r = default_order(alpha)
    else:
        r = cfg.num("mollifier.r", cast=int)
    base = base or cfg.get("mollifier.base", "bump")
    phi = {"bump": standard_bump, "widened": widened_bump}.get(base)
    if phi is None:
        raise ConfigError(f"mollifier.base = {base!r}: use bump or widened")
    return build_mollifier(phi(), r)


def _grid(cfg: ExperimentConfig, dom: OpenSetDomain) -> ScanGrid:
    if _on_circle(cfg):
        c = float(np.mean(dom.center)) if np.all(np.isfinite(dom.lo)) else 0.0
        default_lo, default_hi = (c - 0.5,), (c + 0.5,)
    else:
        default_lo, default_hi = (-0.5,), (0.5,)
    return ScanGrid(cfg.vec("scan.k_lo", default_lo), cfg.vec("scan.k_hi", default_hi),
                    cfg.num("scan.m_min", 3, int), cfg.num("scan.m_max", 10, int),
                    cfg.num("scan.n_pairs", 256, int), cfg.seed, dom,
                    cfg.num("scan.separation_levels", 16, int))


def _scan_function(cfg: ExperimentConfig):
    name = cfg.get("scan.f", "bump")
    if name == "bump":
        return standard_bump()
    if name == "unit":
        return unit_bump()
    if name == "asymmetric":
        return polynomial_bump([1.0, 0.5])
    raise ConfigError(f"scan.f = {name!r}: use bump, unit or asymmetric")


def _workers() -> int:
    raw = os.environ.get("GERMLAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"GERMLAB_THREADS={raw!r} is not an integer") from None


def _ensemble_line(cfg: ExperimentConfig, grid: ScanGrid) -> list:
    n, seed = cfg.num("ensemble.n", 10, int), cfg.num("ensemble.seed", cfg.seed, int)
    shapes = bump_ensemble(n, seed)
    centers = grid.base_points(n)
    scale = cfg.num("ensemble.scale", 0.25)
    return [rescale(s, c, scale) for s, c in zip(shapes, centers)]


def _circle_ensemble(cfg: ExperimentConfig) -> list:
    return circle_test_functions(cfg.num("ensemble.n", 20, int), cfg.num("ensemble.seed", cfg.seed, int))


def _oracle(density, h, q) -> float:
    pts, w = h.quadrature(q)
    return float(np.sum(w * density(pts[:, 0])))


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


@dataclass
class Outcome:
    lines: list
    tables: dict  # file name -> (columns, rows)
    failed: list = field(default_factory=list)


def _check_close(out: Outcome, cfg: ExperimentConfig, key: str, value: float, tol_key: str, tol: float):
    target = cfg.num(key)
    if target is None:
        return
    tol = cfg.num(tol_key, tol)
    ok = abs(value - target) <= tol
    out.lines.append(f"check {key}: {format_float(value)} vs {target} +- {tol}: {'PASS' if ok else 'FAIL'}")
    if not ok:
        out.failed.append(key)


def _lift_and_scan_germ(cfg: ExperimentConfig):
    F, density = build_germ(cfg)
    if _on_circle(cfg):
        chart = _atlas(cfg).charts[cfg.num("atlas.chart", 0, int)]
        return ManifoldGerm(CIRCLE, F).chart_germ(chart), density
    return F, density


def run_coherence(cfg: ExperimentConfig) -> Outcome:
    F, _ = _lift_and_scan_germ(cfg)
    grid = _grid(cfg, F.domain)
    table = coherence_scan(F, grid, _scan_function(cfg), _quadrature(cfg), _workers())
    rep = fit_exponents(table)
    out = Outcome([rep.summary()], {"coherence.csv": (table.columns, table.rows())})
    if rep.exact:
        return out
    _check_close(out, cfg, "check.gamma", rep.gamma, "check.tol", 0.3)
    _check_close(out, cfg, "check.alpha", rep.alpha, "check.tol", 0.3)
    return out


def run_homogeneity(cfg: ExperimentConfig) -> Outcome:
    F, _ = _lift_and_scan_germ(cfg)
    grid = _grid(cfg, F.domain)
    rep = homogeneity_scan(F, grid, _scan_function(cfg), _quadrature(cfg), _workers())
    out = Outcome([rep.summary()], {"homogeneity.csv": (rep.table.columns, rep.table.rows())})
    if not rep.exact:
        _check_close(out, cfg, "check.beta", rep.beta, "check.tol", 0.1)
    return out


def run_enhanced(cfg: ExperimentConfig) -> Outcome:
    F, _ = _lift_and_scan_germ(cfg)
    grid = _grid(cfg, F.domain)
    q, workers = _quadrature(cfg), _workers()
    table = coherence_scan(F, grid, _scan_function(cfg), q, workers)
    rep = fit_exponents(table)
    r = cfg.num("scan.r", max(1, math.floor(-rep.alpha) + 1) if not rep.exact else 1, int)
    enh = enhanced_check(F, grid, r, rep, cfg.num("scan.n_psi", 100, int), cfg.seed, q=q, workers=workers)
    out = Outcome([rep.summary(), enh.summary()], {"enhanced.csv": (enh.table.columns, enh.table.rows())})
    if not enh.passed:
        out.failed.append("enhanced ratio unbounded")
    limit = cfg.num("check.max_ratio")
    if limit is not None and enh.max_ratio > limit:
        out.failed.append("check.max_ratio")
    return out


def run_reconstruct(cfg: ExperimentConfig) -> Outcome:
    F, density = build_germ(cfg)
    q = _quadrature(cfg)
    n_max = cfg.num("mollifier.n_max", 12, int)
    rows, lines, worst = [], [], 0.0
    positive = F.nominal_gamma is None or F.nominal_gamma > 0
    if _on_circle(cfg):
        A = _atlas(cfg)
        MF = ManifoldGerm(CIRCLE, F)
        R = global_reconstruct(MF, A, build_pou(A, cfg.num("atlas.pou_seed", None, int)), _mollifier(cfg, F),
                               n_max=n_max, fixed_level=cfg.num("mollifier.fixed_level", None, int),
                               seed=cfg.seed, q=q)
        for k, h in enumerate(_circle_ensemble(cfg)):
            v = R.pair(h)
            o = _oracle(density, h, q) if density is not None else math.nan
            worst = max(worst, abs(v - o)) if density is not None else worst
            rows.append([str(k), format_float(v), format_float(o), format_float(abs(v - o)), "GLOBAL", ""])
        if R.glue is not None:
            lines.append(R.glue.summary())
    else:
        m = _mollifier(cfg, F)
        grid = _grid(cfg, F.domain)
        nonconv = 0
        for k, h in enumerate(_ensemble_line(cfg, grid)):
            res = reconstruct_local(F, m, h, n_max, q)
            o = _oracle(density, h, q) if density is not None else math.nan
            worst = max(worst, abs(res.value - o)) if density is not None else worst
            nonconv += not res.converged
            rows.append([str(k), format_float(res.value), format_float(o), format_float(abs(res.value - o)),
                         res.flag, str(res.n_star)])
        lines.append(f"reconstruct: {len(rows)} test functions, {nonconv} NONCONV")
        if nonconv and positive:
            out = Outcome(lines, {"reconstruct.csv": (["h_id", "value", "oracle", "abs_err", "flag", "n_star"], rows)})
            out.failed.append("NONCONV")
            raise _NonConv(out)
    if density is not None:
        lines.append(f"reconstruct: max |RF(h) - oracle| = {worst:.3g}")
    out = Outcome(lines, {"reconstruct.csv": (["h_id", "value", "oracle", "abs_err", "flag", "n_star"], rows)})
    tol = cfg.num("check.tol")
    if tol is not None and density is not None and worst > tol:
        out.failed.append("check.tol")
    return out


class _NonConv(Exception):
    def __init__(self, outcome: Outcome):
        super().__init__("reconstruction did not converge for a positive-gamma germ")
        self.outcome = outcome


def run_residual(cfg: ExperimentConfig) -> Outcome:
    F, _ = build_germ(cfg)
    if _on_circle(cfg):
        F = ManifoldGerm(CIRCLE, F).chart_germ(_atlas(cfg).charts[0])
    grid = _grid(cfg, F.domain)
    positive = F.nominal_gamma is None or F.nominal_gamma > 0
    n_max = cfg.num("mollifier.n_max", 12, int)
    level = cfg.num("mollifier.fixed_level", None if positive else n_max, int)
    RF = LocalReconstruction(F, _mollifier(cfg, F), n_max, _quadrature(cfg), fixed_level=level)
    h = polynomial_bump([1.0, 0.5]) if cfg.get("scan.f", "asymmetric") == "asymmetric" else _scan_function(cfg)
    rep = residual_scan(F, RF, grid, h, _quadrature(cfg), _workers())
    out = Outcome([rep.summary()], {"residual.csv": (rep.table.columns, rep.table.rows())})
    _check_close(out, cfg, "check.slope", rep.slope, "check.tol", 0.3)
    if cfg.flag("check.log_envelope") and not rep.log_constant > 0:
        out.failed.append("check.log_envelope")
    return out


def run_glue(cfg: ExperimentConfig) -> Outcome:
    F, density = build_germ(cfg)
    A = _atlas(cfg)
    MF = ManifoldGerm(CIRCLE, F)
    source = cfg.get("glue.locals", "reconstruct")
    if source == "pushforward":
        if density is None:
            raise ConfigError("glue.locals = pushforward needs a germ with a closed-form density")
        global_t = Density(density, OpenSetDomain.line(1))
        locals_ = [pushforward_chart(global_t, c.lift_map()) for c in A.charts]
    elif source == "reconstruct":
        locals_ = chart_locals(MF, A, _mollifier(cfg, F), cfg.num("mollifier.n_max", 12, int),
                               cfg.num("mollifier.fixed_level", None, int), _quadrature(cfg))
    else:
        raise ConfigError("glue.locals must be reconstruct or pushforward")
    eps = cfg.num("glue.perturb", 0.0)
    if eps:
        centre = cfg.num("glue.perturb_center", 0.0)
        b = rescale(unit_bump(), [centre], cfg.num("glue.perturb_scale", 0.2))
        locals_[0] = LinearCombination([(1.0, locals_[0]), (eps, Density(lambda y: b(y)))])
    rep = glue_check(locals_, A, cfg.num("glue.tol", 1e-5), n_per_overlap=cfg.num("glue.n_per_overlap", 20, int),
                     seed=cfg.seed, workers=_workers())
    rows = [[str(i), str(j), str(g), format_float(l), format_float(r), format_float(d)]
            for i, j, g, l, r, d in rep.rows]
    out = Outcome([rep.summary()], {"glue.csv": (["chart_i", "chart_j", "g_id", "lhs", "rhs", "abs_diff"], rows)})
    if not rep.passed:
        w = rep.witness
        row = next(r for r in rep.rows if (r[0], r[1], r[2]) == (w["chart_i"], w["chart_j"], w["g_id"]))
        out.lines.append("witness row: " + ",".join(str(v) for v in row))
        out.failed.append("glue")
    return out


def run_compare(cfg: ExperimentConfig) -> Outcome:
    F, _ = build_germ(cfg)
    MF = ManifoldGerm(CIRCLE, F)
    A = _atlas(cfg)
    B = _atlas(cfg, "atlas.compare", cfg.get("atlas.kind", "two-arc"))
    seed_a = cfg.num("atlas.pou_seed", None, int)
    seed_b = cfg.num("atlas.pou_seed_b", seed_a, int)
    m = _mollifier(cfg, F)
    positive = F.nominal_gamma is None or F.nominal_gamma > 0
    n_max = cfg.num("mollifier.n_max", 12, int)
    level = cfg.num("mollifier.fixed_level", None if positive else n_max, int)
    hs = _circle_ensemble(cfg)
    rep = atlas_compare(MF, A, B, hs, m, P_a=build_pou(A, seed_a), P_b=build_pou(B, seed_b),
                        n_max=n_max, fixed_level=level, workers=_workers())
    rows = [[str(k), format_float(a), format_float(b), format_float(d)] for k, a, b, d in rep.rows]
    out = Outcome([rep.summary()], {"compare.csv": (["h_id", "rf_a", "rf_b", "rel_diff"], rows)})
    hi, lo = cfg.num("check.max_discrepancy"), cfg.num("check.min_discrepancy")
    if hi is not None and rep.max_rel_discrepancy > hi:
        out.failed.append("check.max_discrepancy")
    if lo is not None and not rep.max_rel_discrepancy > lo:
        out.failed.append("check.min_discrepancy")
    if not positive and rep.max_rel_discrepancy > 1e-3:
        out.lines.append("gamma <= 0: the assemblies differ, as expected without uniqueness")
    return out


RUNNERS = {
    "coherence": run_coherence,
    "homogeneity": run_homogeneity,
    "enhanced": run_enhanced,
    "reconstruct": run_reconstruct,
    "residual": run_residual,
    "glue": run_glue,
    "atlas-compare": run_compare,
}

DEMOS = {
    "constant-circle": """
experiment.kind = reconstruct
germ.kind = constant
germ.density = cos
domain.kind = circle
atlas.kind = two-arc
mollifier.r = 1
ensemble.n = 10
check.tol = 1e-5
""",
    "taylor-line": """
experiment.kind = coherence
germ.kind = taylor
germ.g = sin
germ.k = 1
scan.m_min = 3
scan.m_max = 9
scan.n_pairs = 128
check.gamma = 2
check.tol = 0.3
""",
    "young-circle": """
experiment.kind = coherence
germ.kind = young
germ.beta_g = 0.7
germ.a = 0.4
domain.kind = circle
atlas.kind = three-arc
atlas.chart = 0
scan.m_min = 3
scan.m_max = 10
check.gamma = 0.1
check.tol = 0.1
""",
    "atlas-independence": """
experiment.kind = atlas-compare
germ.kind = taylor
germ.g = trig2
germ.k = 2
domain.kind = circle
atlas.kind = two-arc
atlas.compare = three-arc
mollifier.r = 3
ensemble.n = 20
check.max_discrepancy = 1e-5
""",
    "nonuniqueness": """
experiment.kind = atlas-compare
germ.kind = young
germ.beta_g = 0.6
germ.a = 0.2
germ.aligned = true
domain.kind = circle
atlas.kind = two-arc-rescaled
atlas.pou_seed = 1
atlas.pou_seed_b = 2
mollifier.r = 1
mollifier.fixed_level = 10
ensemble.n = 20
check.min_discrepancy = 1e-3
""",
}


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------


def _outdir(cfg: ExperimentConfig) -> Path:
    return Path(os.environ.get("GERMLAB_OUTDIR") or cfg.get("output.dir", "germlab-out"))


def _write(cfg: ExperimentConfig, out: Outcome) -> Path:
    d = _outdir(cfg)
    d.mkdir(parents=True, exist_ok=True)
    header = cfg.header()
    for name, (cols, rows) in out.tables.items():
        with open(d / name, "w", newline="\n") as fh:
            fh.write(f"# {header}\n")
            fh.write(",".join(cols) + "\n")
            for row in rows:
                fh.write(",".join(row) + "\n")
    status = "FAIL " + ", ".join(out.failed) if out.failed else "PASS"
    with open(d / "summary.txt", "w", newline="\n") as fh:
        fh.write(f"# {header}\n")
        fh.write(f"experiment: {cfg.kind}\n")
        for line in out.lines:
            fh.write(line + "\n")
        fh.write(f"status: {status}\n")
    return d


def execute(cfg: ExperimentConfig) -> int:
    if cfg.kind == "demo":
        inner = ExperimentConfig.parse(DEMOS[cfg.get("demo.name")], f"demo:{cfg.get('demo.name')}")
        inner.values.update({k: v for k, v in cfg.values.items() if k.startswith("output.")})
        return execute(inner)
    try:
        out = RUNNERS[cfg.kind](cfg)
    except _NonConv as exc:
        _write(cfg, exc.outcome)
        raise NonConvergenceError(str(exc)) from None
    d = _write(cfg, out)
    for line in out.lines:
        print(line)
    print(f"outputs: {d}")
    if out.failed:
        print(f"germlab: check failed: {', '.join(out.failed)}", file=sys.stderr)
        return 1
    return 0


def _guarded(fn) -> int:
    try:
        return fn()
    except GlueError as exc:
        print(f"germlab: glue failure: {exc}", file=sys.stderr)
        return 1
    except NonConvergenceError as exc:
        print(f"germlab: non-convergence: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, DomainError) as exc:
        print(f"germlab: configuration error: {exc}", file=sys.stderr)
        return 2
    except GermlabError as exc:
        print(f"germlab: error: {exc}", file=sys.stderr)
        return 2


def cmd_run(path: str) -> int:
    return _guarded(lambda: execute(ExperimentConfig.load(path)))


def cmd_validate(path: str) -> int:
    def check():
        cfg = ExperimentConfig.load(path)
        if cfg.kind != "demo":
            F, _ = build_germ(cfg)
            if cfg.kind in ("coherence", "homogeneity", "enhanced", "residual") and not _on_circle(cfg):
                _grid(cfg, F.domain).scales(F.domain)
            if _on_circle(cfg):
                _atlas(cfg)
            _quadrature(cfg)
        print(f"{path}: ok ({cfg.kind}, config={cfg.digest})")
        return 0

    return _guarded(check)


def cmd_demo(name: str) -> int:
    if name not in DEMOS:
        print(f"germlab: configuration error: unknown demo {name!r}; choose from {', '.join(DEMOS)}",
              file=sys.stderr)
        return 2

    def go():
        cfg = ExperimentConfig.parse(DEMOS[name], f"demo:{name}")
        if not os.environ.get("GERMLAB_OUTDIR"):
            cfg.values["output.dir"] = f"germlab-demo-{name}"
        return execute(cfg)

    return _guarded(go)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="germlab", description="Coherence, reconstruction and gluing experiments.")
    p.add_argument("--version", action="version", version=f"germlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    v = sub.add_parser("validate", help="check a config without running it")
    v.add_argument("config")
    d = sub.add_parser("demo", help="run a built-in demo")
    d.add_argument("name", choices=sorted(DEMOS))
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config)
    if args.command == "validate":
        return cmd_validate(args.config)
    return cmd_demo(args.name)


if __name__ == "__main__":
    sys.exit(main())
