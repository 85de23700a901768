import json
import math
import os
import re
from importlib import resources

import numpy as np
import pytest

from atcdiging import bench, rates
from atcdiging.cli import main
from atcdiging.errors import ConfigError
from atcdiging.solvers import RunTrace

SMALL_RUN = """
[experiment]
name = "small"
iterations = 150
master_seed = 3
seeds = [0, 1]
algorithms = ["atc_diging", "diging"]
output_dir = "{out}"

[problem]
kind = "huber"
n = 6
rows = 8
p = 3
seed = 2

[network]
mode = "random"
edge_prob = 0.4

[schedule]
mode = "perturbed"
base_factor = 0.5
"""

STATIC_RUN = """
[experiment]
iterations = 400
master_seed = 1
output_dir = "{out}"
plot = false

[problem]
kind = "quadratic"
n = 5
p = 2
seed = 3

[network]
mode = "static"
topology = "ring"

[schedule]
mode = "constant"
alpha_factor = 0.9
kappa_D = 1.01
"""

DIVERGING_RUN = """
[experiment]
iterations = 5000
master_seed = 1
output_dir = "{out}"
plot = false

[problem]
kind = "quadratic"
n = 4
p = 2
seed = 0

[network]
mode = "static"
topology = "path"

[schedule]
mode = "constant"
alpha = 10.0
"""

SMALL_BOUNDS = """
[experiment]
master_seed = 0
output_dir = "{out}"

[bounds]
topologies = ["complete", "star"]
kappa_D = [1.0, 1.03]
alpha_fractions = [0.5]
max_iterations = 3000
complexity_n = [4]
complexity_kappa_bar = [10.0]
complexity_delta = [0.0, 0.2]
"""


def write(tmp_path, template, name="cfg.toml", **kw):
    out = tmp_path / "out"
    path = tmp_path / name
    path.write_text(template.format(out=out, **kw))
    return path, out


def svg_paths(svg_text):
    """Map gid -> list of (x, y) vertices of the path inside that group."""
    found = {}
    for gid, body in re.findall(r'<g id="(trace-\d+)">(.*?)</g>', svg_text, flags=re.S):
        d = re.search(r'd="([^"]+)"', body).group(1)
        nums = [float(v) for v in re.findall(r"-?\d+(?:\.\d+)?(?:e-?\d+)?", d)]
        found[gid] = list(zip(nums[0::2], nums[1::2]))
    return found


# ------------------------------------------------------------------ config parsing


def test_presets_parse():
    names = ["time_varying_huber.toml", "bounds.toml", "comparison.toml"]
    for name in names:
        text = resources.files("atcdiging.presets").joinpath(name).read_text()
        cfg = bench.parse_config(text, name)
        assert cfg.master_seed >= 0


def test_huber_preset_contents():
    text = resources.files("atcdiging.presets").joinpath("time_varying_huber.toml").read_text()
    cfg = bench.parse_config(text)
    assert cfg.problem.kind == "huber" and cfg.problem.n == 12
    assert cfg.network.mode == "random"
    assert (cfg.schedule.mode, cfg.schedule.lo, cfg.schedule.hi) == ("perturbed", 0.5, 1.5)


def test_unknown_key_reports_line():
    text = SMALL_RUN.format(out="x").replace('edge_prob = 0.4', 'edge_prob = 0.4\nedge_prop = 0.1')
    with pytest.raises(ConfigError) as info:
        bench.parse_config(text, "cfg.toml")
    line = text.splitlines().index("edge_prop = 0.1") + 1
    assert f"cfg.toml:{line}:" in str(info.value)
    assert "[network] edge_prop" in str(info.value)


@pytest.mark.parametrize("edit,needle", [
    (("iterations = 150", "iterations = 0"), "iterations"),
    (("master_seed = 3\n", ""), "master_seed"),
    (('kind = "huber"', 'kind = "cubic"'), "kind"),
    (('algorithms = ["atc_diging", "diging"]', 'algorithms = ["extra"]'), "algorithms"),
    (("seeds = [0, 1]", "seeds = [-1]"), "seeds"),
    (("base_factor = 0.5", "base_factor = 0.5\nbase = 0.1"), "exactly one"),
    (("n = 6", 'n = "six"'), "n"),
    (("[network]", "[netwerk]"), "netwerk"),
    (("edge_prob = 0.4", "edge_prob = 1.4"), "edge_prob"),
    (("iterations = 150", "iterations = 150 150"), "syntax"),
    (("iterations = 150", "iterations = true"), "iterations"),
])
def test_invalid_configs(edit, needle):
    text = SMALL_RUN.format(out="x").replace(*edit)
    with pytest.raises(ConfigError) as info:
        bench.parse_config(text)
    assert needle in str(info.value)


def test_static_needs_topology():
    text = STATIC_RUN.format(out="x").replace('topology = "ring"\n', "")
    with pytest.raises(ConfigError):
        bench.parse_config(text)


def test_run_seeds_are_derived_deterministically():
    cfg = bench.parse_config(SMALL_RUN.format(out="x"))
    assert cfg.run_seeds(0) == cfg.run_seeds(0)
    assert cfg.run_seeds(0) != cfg.run_seeds(1)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        bench.load_config(tmp_path / "nope.toml")


def test_output_dir_not_writable(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    cfg = bench.parse_config(STATIC_RUN.format(out=blocker / "sub"))
    with pytest.raises(ConfigError):
        bench.resolve_output_dir(cfg)


def test_output_dir_env_override(tmp_path, monkeypatch):
    cfg = bench.parse_config(STATIC_RUN.format(out=tmp_path / "a"))
    monkeypatch.setenv(bench.OUTPUT_ENV, str(tmp_path / "b"))
    assert bench.resolve_output_dir(cfg) == str(tmp_path / "b")
    assert bench.resolve_output_dir(cfg, str(tmp_path / "c")) == str(tmp_path / "c")


# ------------------------------------------------------------------ experiments


def test_run_experiment_outputs(tmp_path):
    path, out = write(tmp_path, SMALL_RUN)
    res = bench.run_experiment(bench.load_config(path))
    names = sorted(os.listdir(out))
    assert names == ["atc_diging_seed0.csv", "atc_diging_seed1.csv", "diging_seed0.csv",
                     "diging_seed1.csv", "residuals.svg", "summary.json"]
    summary = json.loads((out / "summary.json").read_text())
    assert len(summary["runs"]) == 4
    for row in summary["runs"]:
        assert row["status"] == "ok"
        trace = RunTrace.read_csv(out / row["csv"])
        fit = rates.fit_log_rate(trace.residual)
        assert row["measured_rate"] == pytest.approx(fit.rate, rel=1e-12)
        assert row["mean_kappa_D"] == pytest.approx(np.mean(trace.kappa_D), rel=1e-12)
        assert row["lambda_theory"] is None        # time-varying: not covered
    assert not res.diverged


def test_run_experiment_is_byte_identical(tmp_path):
    outputs = []
    for tag in ("a", "b"):
        path = tmp_path / f"{tag}.toml"
        out = tmp_path / tag
        path.write_text(SMALL_RUN.format(out=out))
        bench.run_experiment(bench.load_config(path))
        outputs.append({name: (out / name).read_bytes() for name in sorted(os.listdir(out))})
    assert outputs[0] == outputs[1]


def test_static_run_reports_theory(tmp_path):
    path, out = write(tmp_path, STATIC_RUN)
    res = bench.run_experiment(bench.load_config(path))
    row = res.summary[0]
    assert row["lambda_theory"] is not None and 0 < row["lambda_theory"] < 1
    assert row["measured_rate"] <= row["lambda_theory"] * math.exp(1e-3)
    assert row["rate_bound_holds"]
    assert row["mean_kappa_D"] == pytest.approx(1.01)


def test_divergent_run_is_flagged(tmp_path):
    path, out = write(tmp_path, DIVERGING_RUN)
    res = bench.run_experiment(bench.load_config(path))
    assert res.diverged
    summary = json.loads((out / "summary.json").read_text())
    assert summary["runs"][0]["status"] == "diverged"
    trace = RunTrace.read_csv(out / "atc_diging_seed0.csv")
    assert 1 < len(trace) < 5001


def test_run_without_problem_section(tmp_path):
    path, _ = write(tmp_path, SMALL_BOUNDS)
    with pytest.raises(ConfigError):
        bench.run_experiment(bench.load_config(path))


def test_comparison_preset_atc_ahead(tmp_path):
    text = resources.files("atcdiging.presets").joinpath("comparison.toml").read_text()
    cfg = bench.parse_config(text)
    res = bench.run_experiment(cfg, str(tmp_path))
    for seed in cfg.seeds:
        atc = res.traces[("atc_diging", seed)].normalized_residual[-1]
        dig = res.traces[("diging", seed)].normalized_residual[-1]
        assert atc <= dig


# ------------------------------------------------------------------ bound suite


def test_bound_suite(tmp_path):
    path, out = write(tmp_path, SMALL_BOUNDS)
    res = bench.run_bound_suite(bench.load_config(path))
    lines = (out / "rate_report.csv").read_text().splitlines()
    assert lines[0] == "delta,n,kappa_D,kappa_bar,alpha_max,lambda_theory,lambda_measured,C,status"
    assert len(lines) == 1 + len(res.rows)
    infeasible = [r for r in res.rows if r.status != "ok"]
    assert infeasible and all(r.status == "infeasible:HeterogeneityTooLarge" for r in infeasible)
    assert all(r.within_bound for r in res.feasible_rows)
    inst_prof = bench.objectives.random_quadratic(6, 3, 4, (1.0, 1.6)).profile
    zero = [r for r in res.feasible_rows if r.delta < 1e-12 and r.kappa_D == 1.0][0]
    assert zero.alpha_max == pytest.approx(0.5 / (2 * inst_prof.L_bar))
    assert zero.lambda_theory == pytest.approx(math.sqrt(1 - zero.alpha_max * inst_prof.mu_bar / 3))
    assert zero.lambda_measured < zero.lambda_theory
    comp = (out / "complexity.csv").read_text().splitlines()
    assert comp[0] == ",".join(bench.COMPLEXITY_HEADER) and len(comp) == 3


# ------------------------------------------------------------------ plots


def _geometric_trace(rate, K, name):
    r = rate ** np.arange(K + 1.0)
    z = np.zeros(K + 1)
    return RunTrace(name, np.arange(K + 1), r, r, z, z, z, np.ones(K + 1))


def test_plot_geometric_trace_is_straight(tmp_path):
    path = bench.emit_plot([_geometric_trace(0.8, 40, "geo")], tmp_path / "p.svg")
    pts = svg_paths(open(path).read())["trace-0"]
    assert len(pts) == 41
    xs, ys = np.array(pts).T
    slope, icpt = np.polyfit(xs, ys, 1)
    assert np.max(np.abs(ys - (slope * xs + icpt))) < 1e-2


def test_plot_two_traces(tmp_path):
    traces = [_geometric_trace(0.8, 20, "a"), _geometric_trace(0.9, 20, "b")]
    text = open(bench.emit_plot(traces, tmp_path / "p.svg")).read()
    assert set(svg_paths(text)) == {"trace-0", "trace-1"}
    assert ">a<" in text and ">b<" in text


def test_plot_is_deterministic(tmp_path):
    t = [_geometric_trace(0.8, 20, "a")]
    a = open(bench.emit_plot(t, tmp_path / "a.svg"), "rb").read()
    b = open(bench.emit_plot(t, tmp_path / "b.svg"), "rb").read()
    assert a == b


def test_plot_needs_traces(tmp_path):
    with pytest.raises(ValueError):
        bench.emit_plot([], tmp_path / "p.svg")


# ------------------------------------------------------------------ CLI


def test_cli_run_and_plot(tmp_path, capsys):
    path, out = write(tmp_path, SMALL_RUN)
    assert main(["run", str(path)]) == 0
    assert "summary.json" in capsys.readouterr().out
    svg = tmp_path / "cli.svg"
    assert main(["plot", str(out / "atc_diging_seed0.csv"), str(out / "diging_seed0.csv"),
                 "-o", str(svg)]) == 0
    assert len(svg_paths(svg.read_text())) == 2


def test_cli_config_error_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.toml"
    path.write_text(SMALL_RUN.format(out=tmp_path).replace("iterations = 150", "iterations = 0"))
    assert main(["run", str(path)]) == 2
    assert "iterations" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.toml")]) == 2
    assert main(["plot", str(tmp_path / "missing.csv"), "-o", str(tmp_path / "x.svg")]) == 2


def test_cli_divergence_exit_code(tmp_path):
    path, _ = write(tmp_path, DIVERGING_RUN)
    assert main(["run", str(path)]) == 3


def test_cli_output_dir_env(tmp_path, monkeypatch):
    path, out = write(tmp_path, STATIC_RUN)
    monkeypatch.setenv(bench.OUTPUT_ENV, str(tmp_path / "env"))
    assert main(["run", str(path)]) == 0
    assert (tmp_path / "env" / "summary.json").exists()
    assert not out.exists()


def test_cli_bounds(tmp_path):
    path, out = write(tmp_path, SMALL_BOUNDS)
    assert main(["bounds", str(path)]) == 0
    assert (out / "rate_report.csv").exists() and (out / "complexity.csv").exists()
