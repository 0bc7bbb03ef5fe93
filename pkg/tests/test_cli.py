import numpy as np
import pytest

from germlab.cli import DEMOS, ExperimentConfig, main
from germlab.errors import ConfigError


def write(tmp_path, text, name="exp.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read_csv(path):
    lines = path.read_text().splitlines()
    return lines[0], lines[1].split(","), [l.split(",") for l in lines[2:]]


@pytest.fixture
def outdir(tmp_path, monkeypatch):
    d = tmp_path / "out"
    monkeypatch.setenv("GERMLAB_OUTDIR", str(d))
    return d


def test_parse_and_digest():
    cfg = ExperimentConfig.parse("experiment.kind = coherence  # scan\ngerm.kind = constant\n\noutput.dir = a\n")
    other = ExperimentConfig.parse("germ.kind = constant\nexperiment.kind = coherence\noutput.dir = b\n")
    assert cfg.kind == "coherence"
    assert cfg.digest == other.digest


@pytest.mark.parametrize("text", [
    "experiment.kind = coherence\n",
    "germ.kind = constant\n",
    "experiment.kind = sweep\ngerm.kind = constant\n",
    "experiment.kind = coherence\ngerm.kind = mystery\n",
    "experiment.kind = coherence\ngerm.kind = constant\nnot a pair\n",
    "experiment.kind = coherence\ngerm.kind = constant\nbogus.key = 1\n",
])
def test_invalid_configs(text):
    with pytest.raises(ConfigError):
        ExperimentConfig.parse(text)


def test_constant_coherence_exit_zero(tmp_path, outdir, capsys):
    path = write(tmp_path, "experiment.kind = coherence\ngerm.kind = constant\nscan.n_pairs = 16\nscan.seed = 42\n")
    assert main(["run", path]) == 0
    header, cols, rows = read_csv(outdir / "coherence.csv")
    assert cols == ["p", "q", "lambda", "value", "regime"]
    assert header.startswith("# germlab 0.1.0 config=") and header.endswith("seed=42")
    assert all(float(r[3]) == 0.0 for r in rows)
    assert "EXACT" in (outdir / "summary.txt").read_text()


def test_missing_germ_kind_exit_two(tmp_path, outdir, capsys):
    path = write(tmp_path, "experiment.kind = coherence\n")
    assert main(["run", path]) == 2
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and "germ.kind" in err[0]


def test_unreadable_config_exit_two(tmp_path, capsys):
    assert main(["run", str(tmp_path / "missing.cfg")]) == 2


def test_perturbed_glue_exit_one(tmp_path, outdir, capsys):
    path = write(tmp_path, "\n".join([
        "experiment.kind = glue", "germ.kind = constant", "germ.density = cos", "domain.kind = circle",
        "glue.locals = pushforward", "glue.perturb = 1e-3", "glue.tol = 1e-5", "",
    ]))
    assert main(["run", path]) == 1
    out = capsys.readouterr()
    assert "witness row" in out.out
    assert len(out.err.strip().splitlines()) == 1
    _, cols, rows = read_csv(outdir / "glue.csv")
    assert cols == ["chart_i", "chart_j", "g_id", "lhs", "rhs", "abs_diff"]
    assert max(float(r[5]) for r in rows) == pytest.approx(1e-3, rel=1.0)


def test_unperturbed_glue_exit_zero(tmp_path, outdir):
    path = write(tmp_path, "experiment.kind = glue\ngerm.kind = constant\ndomain.kind = circle\n"
                           "glue.locals = pushforward\nglue.tol = 1e-9\n")
    assert main(["run", path]) == 0


def test_nonconvergence_exit_three(tmp_path, outdir, capsys):
    path = write(tmp_path, "experiment.kind = reconstruct\ngerm.kind = young\nensemble.n = 1\nmollifier.n_max = 5\n")
    assert main(["run", path]) == 3
    assert "non-convergence" in capsys.readouterr().err


def test_reconstruct_taylor_line(tmp_path, outdir):
    path = write(tmp_path, "experiment.kind = reconstruct\ngerm.kind = taylor\ngerm.g = sin\ngerm.k = 1\n"
                           "mollifier.r = 2\nensemble.n = 3\ncheck.tol = 1e-6\n")
    assert main(["run", path]) == 0
    _, cols, rows = read_csv(outdir / "reconstruct.csv")
    assert cols[:3] == ["h_id", "value", "oracle"]
    assert all(r[4] == "CONVERGED" for r in rows)


def test_homogeneity_and_residual_schemas(tmp_path, outdir):
    hom = write(tmp_path, "experiment.kind = homogeneity\ngerm.kind = dirac\nscan.n_pairs = 1\ncheck.beta = -1\n", "h.cfg")
    assert main(["run", hom]) == 0
    assert read_csv(outdir / "homogeneity.csv")[1] == ["p", "lambda", "value"]
    res = write(tmp_path, "experiment.kind = residual\ngerm.kind = taylor\ngerm.g = sin\ngerm.k = 2\n"
                          "mollifier.r = 3\nscan.n_pairs = 4\nscan.m_max = 7\ncheck.slope = 3\n", "r.cfg")
    assert main(["run", res]) == 0
    assert read_csv(outdir / "residual.csv")[1] == ["p", "lambda", "residual"]


def test_failed_check_exit_one(tmp_path, outdir):
    path = write(tmp_path, "experiment.kind = coherence\ngerm.kind = taylor\ngerm.g = square\n"
                           "scan.n_pairs = 32\ncheck.gamma = 5\ncheck.tol = 0.1\n")
    assert main(["run", path]) == 1


def test_validate(tmp_path, capsys):
    good = write(tmp_path, "experiment.kind = coherence\ngerm.kind = young\n", "g.cfg")
    bad = write(tmp_path, "experiment.kind = coherence\ngerm.kind = taylor\ngerm.g = nothing\n", "b.cfg")
    assert main(["validate", good]) == 0
    assert main(["validate", bad]) == 2


@pytest.mark.parametrize("kind, extra", [
    ("coherence", "germ.kind = young\nscan.n_pairs = 48\nscan.m_max = 8\n"),
    ("enhanced", "germ.kind = taylor\ngerm.g = square\nscan.n_pairs = 16\nscan.n_psi = 6\nscan.m_max = 6\n"),
    ("atlas-compare", "germ.kind = taylor\ngerm.g = sin\ndomain.kind = circle\natlas.compare = three-arc\n"
                      "mollifier.r = 2\nensemble.n = 4\n"),
])
def test_outputs_identical_across_thread_counts(tmp_path, monkeypatch, kind, extra):
    path = write(tmp_path, f"experiment.kind = {kind}\n{extra}")
    outputs = []
    for threads in ("1", "4"):
        d = tmp_path / f"t{threads}"
        monkeypatch.setenv("GERMLAB_OUTDIR", str(d))
        monkeypatch.setenv("GERMLAB_THREADS", threads)
        assert main(["run", path]) == 0
        outputs.append({p.name: p.read_bytes() for p in d.iterdir()})
    assert outputs[0] == outputs[1]


def test_demo_names():
    assert set(DEMOS) == {"constant-circle", "taylor-line", "young-circle", "atlas-independence", "nonuniqueness"}
    for text in DEMOS.values():
        ExperimentConfig.parse(text)


def test_demo_runs(outdir):
    assert main(["demo", "taylor-line"]) == 0
    assert (outdir / "coherence.csv").exists()
