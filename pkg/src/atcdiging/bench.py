"""Config-driven experiments: residual traces, bound suites and plots.

Configs are TOML files. Every section is parsed strictly: unknown keys and
wrong types are rejected with the offending section, key and line.
"""

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import network, objectives, rates
from .errors import ConfigError, Diverged, HeterogeneityTooLarge, RateNotContractive
from .solvers import ALGORITHMS, StepSizeSchedule, default_x0, run

OUTPUT_ENV = "ATCDIGING_OUTPUT_DIR"
RATE_HEADER = ("delta", "n", "kappa_D", "kappa_bar", "alpha_max",
               "lambda_theory", "lambda_measured", "C", "status")
COMPLEXITY_HEADER = ("n", "kappa_bar", "delta", "epsilon", "K_diging", "K_atc",
                     "lambda_diging", "lambda_atc")
TOPOLOGIES = ("complete", "ring", "path", "star", "random", "edgelist")


# ------------------------------------------------------------------ config


def _line_of(text, section, key):
    """1-based line of ``key`` inside ``[section]`` of a TOML text, or None."""
    current = ""
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line.strip("[]").strip()
        elif current == section and line.split("=")[0].strip() == key:
            return i
    return None


class _Section:
    """Strict accessor over one TOML table; records which keys were read."""

    def __init__(self, name, table, source, text):
        self.name, self.table, self.source, self.text = name, dict(table), source, text
        self.used = set()

    def error(self, key, msg):
        line = _line_of(self.text, self.name, key) if key else None
        where = f"{self.source}:{line}: " if line else f"{self.source}: "
        loc = f"[{self.name}] {key}" if key else f"[{self.name}]"
        return ConfigError(f"{where}{loc}: {msg}")

    def get(self, key, types, default=..., check=None, what=None):
        self.used.add(key)
        if key not in self.table:
            if default is ...:
                raise self.error(None, f"missing required key {key!r}")
            return default
        value = self.table[key]
        if isinstance(value, bool) and bool not in (types if isinstance(types, tuple) else (types,)):
            raise self.error(key, f"expected {what or types}, got {value!r}")
        if not isinstance(value, types):
            raise self.error(key, f"expected {what or types}, got {value!r}")
        if check is not None and not check(value):
            raise self.error(key, f"invalid value {value!r}" + (f" (need {what})" if what else ""))
        return value

    def finish(self):
        extra = sorted(set(self.table) - self.used)
        if extra:
            raise self.error(extra[0], "unknown key")


NUM = (int, float)


@dataclass(frozen=True)
class ProblemSpec:
    kind: str
    n: int
    p: int
    seed: int
    rows: int = 20
    xi: float = 1.0
    ridge: float = 0.01
    outlier_fraction: float = 0.1
    eig_min: float = 1.0
    eig_max: float = 2.0
    file: str = None

    def build(self):
        if self.file is not None:
            inst = objectives.load_instance(self.file)
        elif self.kind == "quadratic":
            inst = objectives.random_quadratic(self.n, self.p, self.seed, (self.eig_min, self.eig_max))
        elif self.kind == "least_squares":
            inst = objectives.random_least_squares(self.n, self.rows, self.p, self.seed)
        else:
            inst = objectives.random_huber(self.n, self.rows, self.p, self.seed, xi=self.xi,
                                           ridge=self.ridge, outlier_frac=self.outlier_fraction)
        return inst


@dataclass(frozen=True)
class NetworkSpec:
    mode: str
    topology: str = None
    edge_prob: float = 0.3
    edges_file: str = None
    graph_seed: int = 0

    def static_graph(self, n):
        t = self.topology
        if t == "complete":
            return network.complete_graph(n)
        if t == "ring":
            return network.ring_graph(n)
        if t == "path":
            return network.path_graph(n)
        if t == "star":
            return network.star_graph(n)
        if t == "random":
            return network.next_graph(network.GraphSequence.random(n, self.edge_prob, self.graph_seed), 0)
        g = network.read_edgelist(self.edges_file)
        if g.n != n:
            raise ConfigError(f"edge list has {g.n} nodes, problem has {n}")
        return g

    def sequence(self, n, seed):
        if self.mode == "static":
            return network.GraphSequence.static(self.static_graph(n))
        return network.GraphSequence.random(n, self.edge_prob, seed)


@dataclass(frozen=True)
class ScheduleSpec:
    mode: str
    base: float = None
    base_factor: float = None
    lo: float = 0.5
    hi: float = 1.5
    alphas: tuple = None
    alpha_factor: float = None
    kappa_D: float = 1.0

    def build(self, inst, seq, seed):
        """Concrete schedule; factor rules are resolved against ``inst``."""
        prof = inst.profile
        if self.mode == "perturbed":
            base = self.base
            if base is None:
                # fraction of the centralized cap 1/(2 L_bar)
                base = self.base_factor / (2.0 * prof.L_bar)
            return StepSizeSchedule.perturbed(base, self.lo, self.hi, seed)
        if self.alphas is not None:
            if len(self.alphas) != inst.n:
                raise ConfigError(f"[schedule] alphas has {len(self.alphas)} entries, need {inst.n}")
            return StepSizeSchedule.constant(self.alphas)
        if not seq.is_static:
            raise ConfigError("[schedule] alpha_factor needs a static network")
        delta = seq.mixing(0).delta
        amax = self.alpha_factor * rates.max_stepsize(prof, delta, inst.n, self.kappa_D)
        return StepSizeSchedule.constant(spread_alphas(amax, self.kappa_D, inst.n))


def spread_alphas(alpha_max, kappa_D, n):
    """``n`` step-sizes from ``alpha_max`` down to ``alpha_max / kappa_D``."""
    if n == 1:
        return (float(alpha_max),)
    return tuple(float(a) for a in np.linspace(alpha_max, alpha_max / kappa_D, n))


@dataclass(frozen=True)
class BoundsSpec:
    n: int = 6
    p: int = 3
    seed: int = 4
    eig_min: float = 1.0
    eig_max: float = 1.6
    topologies: tuple = ("complete", "random:0.5", "ring", "star")
    kappa_D: tuple = (1.0, 1.01, 1.03)
    alpha_fractions: tuple = (0.3, 0.9)
    max_iterations: int = 20000
    stop_tol: float = 1e-11
    graph_seed: int = 2
    x0_seed: int = 1
    complexity_n: tuple = (4, 12, 50)
    complexity_kappa_bar: tuple = (10.0, 100.0)
    complexity_delta: tuple = (0.0, 0.1, 0.2, 0.3, 0.6, 0.9)
    epsilon: float = 1e-6


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    iterations: int
    master_seed: int
    seeds: tuple
    algorithms: tuple
    output_dir: str
    problem: ProblemSpec = None
    network: NetworkSpec = None
    schedule: ScheduleSpec = None
    x0: str = "normal"
    stop_tol: float = None
    plot: bool = True
    bounds: BoundsSpec = None
    source: str = "<config>"

    def run_seeds(self, run_seed):
        """Graph, step-size and x0 seeds of one run, derived from the master seed."""
        ss = np.random.SeedSequence(self.master_seed, spawn_key=(int(run_seed),))
        return tuple(int(v) for v in ss.generate_state(3))


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _float_list(sec, key, default):
    vals = sec.get(key, list, default=list(default))
    if not all(isinstance(v, NUM) and not isinstance(v, bool) for v in vals):
        raise sec.error(key, "expected a list of numbers")
    return tuple(float(v) for v in vals)


def parse_config(text, source="<config>"):
    """Parse and validate a TOML experiment config.

    Raises
    ------
    ConfigError
        With file, line (when known), section and key of the first problem.
    """
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: TOML syntax error: {exc}") from None

    allowed = {"experiment", "problem", "network", "schedule", "bounds"}
    for name in doc:
        if name not in allowed:
            raise ConfigError(f"{source}: unknown section [{name}]")
    if "experiment" not in doc:
        raise ConfigError(f"{source}: missing [experiment] section")

    def section(name):
        table = doc.get(name)
        if table is not None and not isinstance(table, dict):
            raise ConfigError(f"{source}: {name} must be a table")
        return _Section(name, table or {}, source, text)

    ex = section("experiment")
    name = ex.get("name", str, default="experiment")
    iterations = ex.get("iterations", int, default=1000, check=lambda v: v >= 1, what="K >= 1")
    master_seed = ex.get("master_seed", int, check=lambda v: v >= 0, what="a nonnegative integer")
    seeds = ex.get("seeds", list, default=[0])
    if not seeds or not all(_is_int(s) and s >= 0 for s in seeds):
        raise ex.error("seeds", "expected a nonempty list of nonnegative integers")
    algorithms = ex.get("algorithms", list, default=["atc_diging"])
    if not algorithms or any(a not in ALGORITHMS for a in algorithms):
        raise ex.error("algorithms", f"expected a nonempty subset of {list(ALGORITHMS)}")
    output_dir = ex.get("output_dir", str, default="out")
    x0 = ex.get("x0", str, default="normal", check=lambda v: v in ("normal", "zero"),
                what="'normal' or 'zero'")
    stop_tol = ex.get("stop_tol", NUM, default=None, check=lambda v: 0 < v < 1, what="0 < stop_tol < 1")
    plot = ex.get("plot", bool, default=True)
    ex.finish()

    problem = net = sched = bounds = None
    if "problem" in doc:
        pr = section("problem")
        kind = pr.get("kind", str, check=lambda v: v in objectives.KINDS, what=f"one of {objectives.KINDS}")
        file = pr.get("file", str, default=None)
        if file is not None and not os.path.isabs(file) and source not in ("<config>",):
            file = os.path.join(os.path.dirname(os.path.abspath(source)), file)
        pos = lambda v: v > 0
        problem = ProblemSpec(
            kind=kind,
            n=pr.get("n", int, check=lambda v: v >= 1, what="n >= 1"),
            p=pr.get("p", int, check=lambda v: v >= 1, what="p >= 1"),
            seed=pr.get("seed", int, check=lambda v: v >= 0, what="a nonnegative integer"),
            rows=pr.get("rows", int, default=20, check=lambda v: v >= 1, what="rows >= 1"),
            xi=float(pr.get("xi", NUM, default=1.0, check=pos, what="xi > 0")),
            ridge=float(pr.get("ridge", NUM, default=0.01, check=lambda v: v >= 0, what="ridge >= 0")),
            outlier_fraction=float(pr.get("outlier_fraction", NUM, default=0.1,
                                          check=lambda v: 0 <= v <= 1, what="in [0, 1]")),
            eig_min=float(pr.get("eig_min", NUM, default=1.0, check=pos, what="eig_min > 0")),
            eig_max=float(pr.get("eig_max", NUM, default=2.0, check=pos, what="eig_max > 0")),
            file=file,
        )
        if problem.eig_max < problem.eig_min:
            raise pr.error("eig_max", "must be >= eig_min")
        pr.finish()
        if "network" not in doc or "schedule" not in doc:
            raise ConfigError(f"{source}: [problem] needs [network] and [schedule] sections")

        nw = section("network")
        mode = nw.get("mode", str, check=lambda v: v in ("static", "random"), what="'static' or 'random'")
        topology = nw.get("topology", str, default=None,
                          check=lambda v: v in TOPOLOGIES, what=f"one of {TOPOLOGIES}")
        if mode == "static" and topology is None:
            raise nw.error(None, "static network needs a 'topology'")
        edges_file = nw.get("edges_file", str, default=None)
        if topology == "edgelist":
            if edges_file is None:
                raise nw.error("topology", "'edgelist' needs 'edges_file'")
            if not os.path.isabs(edges_file) and source != "<config>":
                edges_file = os.path.join(os.path.dirname(os.path.abspath(source)), edges_file)
        net = NetworkSpec(
            mode=mode, topology=topology,
            edge_prob=float(nw.get("edge_prob", NUM, default=0.3, check=lambda v: 0 <= v <= 1,
                                   what="in [0, 1]")),
            edges_file=edges_file,
            graph_seed=nw.get("graph_seed", int, default=0),
        )
        nw.finish()

        sc = section("schedule")
        smode = sc.get("mode", str, check=lambda v: v in ("constant", "perturbed"),
                       what="'constant' or 'perturbed'")
        if smode == "perturbed":
            base = sc.get("base", NUM, default=None, check=pos, what="base > 0")
            base_factor = sc.get("base_factor", NUM, default=None, check=pos, what="base_factor > 0")
            if (base is None) == (base_factor is None):
                raise sc.error(None, "perturbed schedule needs exactly one of 'base', 'base_factor'")
            lo = float(sc.get("lo", NUM, default=0.5, check=pos, what="lo > 0"))
            hi = float(sc.get("hi", NUM, default=1.5, check=pos, what="hi > 0"))
            if hi < lo:
                raise sc.error("hi", "must be >= lo")
            sched = ScheduleSpec("perturbed", base=None if base is None else float(base),
                                 base_factor=None if base_factor is None else float(base_factor),
                                 lo=lo, hi=hi)
        else:
            alphas = sc.get("alphas", list, default=None)
            alpha = sc.get("alpha", NUM, default=None, check=pos, what="alpha > 0")
            alpha_factor = sc.get("alpha_factor", NUM, default=None,
                                  check=lambda v: 0 < v < 1, what="0 < alpha_factor < 1")
            kd = float(sc.get("kappa_D", NUM, default=1.0, check=lambda v: v >= 1, what="kappa_D >= 1"))
            given = [v is not None for v in (alphas, alpha, alpha_factor)]
            if sum(given) != 1:
                raise sc.error(None, "constant schedule needs exactly one of 'alphas', 'alpha', 'alpha_factor'")
            if alphas is not None:
                if not alphas or not all(isinstance(a, NUM) and not isinstance(a, bool) and a > 0
                                         for a in alphas):
                    raise sc.error("alphas", "expected a list of positive numbers")
                alphas = tuple(float(a) for a in alphas)
            elif alpha is not None:
                alphas = (float(alpha),) * problem.n
            sched = ScheduleSpec("constant", alphas=alphas, kappa_D=kd,
                                 alpha_factor=None if alpha_factor is None else float(alpha_factor))
        sc.finish()
    else:
        for other in ("network", "schedule"):
            if other in doc:
                raise ConfigError(f"{source}: [{other}] given without [problem]")

    if "bounds" in doc:
        bd = section("bounds")
        d = BoundsSpec()
        topologies = bd.get("topologies", list, default=list(d.topologies))
        for t in topologies:
            if not isinstance(t, str) or not _valid_topology(t):
                raise bd.error("topologies", f"bad topology {t!r}")
        bounds = BoundsSpec(
            n=bd.get("n", int, default=d.n, check=lambda v: v >= 2, what="n >= 2"),
            p=bd.get("p", int, default=d.p, check=lambda v: v >= 1, what="p >= 1"),
            seed=bd.get("seed", int, default=d.seed),
            eig_min=float(bd.get("eig_min", NUM, default=d.eig_min)),
            eig_max=float(bd.get("eig_max", NUM, default=d.eig_max)),
            topologies=tuple(topologies),
            kappa_D=_float_list(bd, "kappa_D", d.kappa_D),
            alpha_fractions=_float_list(bd, "alpha_fractions", d.alpha_fractions),
            max_iterations=bd.get("max_iterations", int, default=d.max_iterations,
                                  check=lambda v: v >= 10, what=">= 10"),
            stop_tol=float(bd.get("stop_tol", NUM, default=d.stop_tol)),
            graph_seed=bd.get("graph_seed", int, default=d.graph_seed),
            x0_seed=bd.get("x0_seed", int, default=d.x0_seed),
            complexity_n=tuple(int(v) for v in _float_list(bd, "complexity_n", d.complexity_n)),
            complexity_kappa_bar=_float_list(bd, "complexity_kappa_bar", d.complexity_kappa_bar),
            complexity_delta=_float_list(bd, "complexity_delta", d.complexity_delta),
            epsilon=float(bd.get("epsilon", NUM, default=d.epsilon, check=lambda v: 0 < v < 1,
                                 what="0 < epsilon < 1")),
        )
        if any(not 0 < a < 1 for a in bounds.alpha_fractions):
            raise bd.error("alpha_fractions", "fractions must lie in (0, 1)")
        if any(k < 1 for k in bounds.kappa_D):
            raise bd.error("kappa_D", "values must be >= 1")
        bd.finish()

    return ExperimentConfig(
        name=name, iterations=iterations, master_seed=master_seed, seeds=tuple(seeds),
        algorithms=tuple(algorithms), output_dir=output_dir, problem=problem, network=net,
        schedule=sched, x0=x0, stop_tol=None if stop_tol is None else float(stop_tol),
        plot=plot, bounds=bounds, source=source,
    )


def _valid_topology(t):
    if t in ("complete", "ring", "path", "star"):
        return True
    if t.startswith("random:"):
        try:
            return 0 <= float(t.split(":", 1)[1]) <= 1
        except ValueError:
            return False
    return False


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from None
    return parse_config(text, source=path)


def resolve_output_dir(config, override=None):
    out = override or os.environ.get(OUTPUT_ENV) or config.output_dir
    try:
        os.makedirs(out, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output directory {out!r} not writable: {exc.strerror}") from None
    if not os.access(out, os.W_OK):
        raise ConfigError(f"output directory {out!r} not writable")
    return out


# ------------------------------------------------------------------ runs


@dataclass
class ExperimentResult:
    output_dir: str
    traces: dict = field(default_factory=dict)     # (algorithm, seed) -> RunTrace
    files: dict = field(default_factory=dict)      # (algorithm, seed) -> csv path
    summary: list = field(default_factory=list)
    summary_path: str = None
    plot_path: str = None

    @property
    def diverged(self):
        return any(row["status"] == "diverged" for row in self.summary)


def _fmt(v):
    return None if v is None or (isinstance(v, float) and not math.isfinite(v)) else v


def summarize_trace(trace, lam_theory=None):
    """Summary statistics recomputable from the trace's CSV columns alone."""
    row = {
        "algorithm": trace.algorithm,
        "status": trace.status,
        "iterations": int(trace.iterations),
        "final_normalized_residual": float(trace.normalized_residual[-1]),
        "mean_kappa_D": float(np.mean(trace.kappa_D)),
        "lambda_theory": lam_theory,
    }
    try:
        fit = rates.fit_log_rate(trace.residual)
        row.update(measured_rate=fit.rate, fit_slope=fit.slope, fit_r2=fit.r2,
                   fit_window=[fit.start, fit.stop])
    except ValueError:
        row.update(measured_rate=None, fit_slope=None, fit_r2=None, fit_window=None)
    if lam_theory is not None:
        C, holds = rates.check_rate_empirically(trace.residual, lam_theory)
        row.update(C=_fmt(C), rate_bound_holds=holds)
    return row


def theory_rate_for(inst, seq, schedule):
    """Guaranteed rate when the run is covered by the theory, else None."""
    if not (seq.is_static and schedule.is_constant):
        return None
    delta = seq.mixing(0).delta
    alphas = np.array(schedule.alphas)
    kd = float(alphas.max() / alphas.min())
    try:
        amax = rates.max_stepsize(inst.profile, delta, inst.n, kd)
        if alphas.max() >= amax:
            return None
        return rates.guaranteed_rate(inst.profile, delta, inst.n, kd, float(alphas.max()))
    except (HeterogeneityTooLarge, RateNotContractive):
        return None


def run_experiment(config, output_dir=None):
    """Run every (algorithm, seed) pair of ``config`` and write CSV traces.

    Writes ``<algorithm>_seed<s>.csv`` per run, ``summary.json`` and, when
    enabled, ``residuals.svg``. Divergent runs keep their partial trace and
    are flagged ``diverged`` in the summary.
    """
    if config.problem is None:
        raise ConfigError(f"{config.source}: 'run' needs [problem], [network] and [schedule]")
    out = resolve_output_dir(config, output_dir)
    inst = config.problem.build()
    ref = objectives.solve_reference(inst)
    result = ExperimentResult(out)
    for seed in config.seeds:
        g_seed, s_seed, x_seed = config.run_seeds(seed)
        seq = config.network.sequence(inst.n, g_seed)
        schedule = config.schedule.build(inst, seq, s_seed)
        x0 = default_x0(inst.n, inst.p, x_seed, config.x0)
        lam = theory_rate_for(inst, seq, schedule)
        for alg in config.algorithms:
            try:
                trace = run(alg, inst, seq, schedule, config.iterations, ref, x0,
                            stop_tol=config.stop_tol)
            except Diverged as exc:
                trace = exc.trace
            path = os.path.join(out, f"{alg}_seed{seed}.csv")
            trace.write_csv(path)
            row = summarize_trace(trace, lam if alg == "atc_diging" else None)
            row.update(seed=int(seed), csv=os.path.basename(path))
            result.traces[(alg, seed)] = trace
            result.files[(alg, seed)] = path
            result.summary.append(row)
    summary = {
        "name": config.name,
        "problem": {"kind": inst.kind, "n": inst.n, "p": inst.p,
                    "L": inst.profile.L, "L_bar": inst.profile.L_bar,
                    "mu_bar": inst.profile.mu_bar, "kappa_bar": inst.profile.kappa_bar,
                    "x_star_grad_norm": ref.grad_norm},
        "runs": result.summary,
    }
    result.summary_path = os.path.join(out, "summary.json")
    with open(result.summary_path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if config.plot:
        result.plot_path = emit_plot(
            [result.traces[(a, s)] for s in config.seeds for a in config.algorithms],
            os.path.join(out, "residuals.svg"),
            labels=[f"{a} (seed {s})" for s in config.seeds for a in config.algorithms],
        )
    return result


# ------------------------------------------------------------------ bounds


def _topology_graph(t, n, seed):
    if t.startswith("random:"):
        return network.next_graph(network.GraphSequence.random(n, float(t.split(":")[1]), seed), 0)
    return {"complete": network.complete_graph, "ring": network.ring_graph,
            "path": network.path_graph, "star": network.star_graph}[t](n)


@dataclass
class BoundRow:
    topology: str
    delta: float
    n: int
    kappa_D: float
    kappa_bar: float
    alpha_max: float = None
    lambda_theory: float = None
    lambda_measured: float = None
    C: float = None
    status: str = "ok"

    def cells(self):
        vals = [self.delta, self.n, self.kappa_D, self.kappa_bar, self.alpha_max,
                self.lambda_theory, self.lambda_measured, self.C]
        return ["" if v is None else (str(v) if isinstance(v, int) else repr(float(v)))
                for v in vals] + [self.status]

    @property
    def within_bound(self):
        if self.status != "ok":
            return None
        return math.log(self.lambda_measured) <= math.log(self.lambda_theory) + 1e-3


@dataclass
class BoundSuiteResult:
    rows: list
    complexity: list
    rate_csv: str = None
    complexity_csv: str = None

    @property
    def feasible_rows(self):
        return [r for r in self.rows if r.status == "ok"]

    @property
    def all_within_bound(self):
        return all(r.within_bound for r in self.feasible_rows)


def bound_grid(spec):
    """Rate check on every (topology, kappa_D, alpha fraction) grid point."""
    inst = objectives.random_quadratic(spec.n, spec.p, spec.seed, (spec.eig_min, spec.eig_max))
    prof = inst.profile
    ref = objectives.solve_reference(inst)
    x0 = default_x0(spec.n, spec.p, spec.x0_seed)
    rows = []
    for topo in spec.topologies:
        g = _topology_graph(topo, spec.n, spec.graph_seed)
        seq = network.GraphSequence.static(g)
        delta = seq.mixing(0).delta
        for kd in spec.kappa_D:
            try:
                amax = rates.max_stepsize(prof, delta, spec.n, kd)
            except HeterogeneityTooLarge:
                rows.append(BoundRow(topo, delta, spec.n, kd, prof.kappa_bar,
                                     status="infeasible:HeterogeneityTooLarge"))
                continue
            for frac in spec.alpha_fractions:
                a = frac * amax
                lam = rates.guaranteed_rate(prof, delta, spec.n, kd, a)
                sched = StepSizeSchedule.constant(spread_alphas(a, kd, spec.n))
                trace = run("atc_diging", inst, seq, sched, spec.max_iterations, ref, x0,
                            stop_tol=spec.stop_tol)
                fit = rates.fit_log_rate(trace.residual)
                C, _ = rates.check_rate_empirically(trace.residual, lam)
                rows.append(BoundRow(topo, delta, spec.n, kd, prof.kappa_bar, a, lam, fit.rate, C))
    return rows


def complexity_table(spec):
    rows = []
    for n in spec.complexity_n:
        for kb in spec.complexity_kappa_bar:
            prof = objectives.SmoothnessProfile.uniform(n, kb, 1.0)
            for d in spec.complexity_delta:
                c = rates.complexity_comparison(prof, d, n, spec.epsilon)
                rows.append(dict(n=n, kappa_bar=kb, delta=d, epsilon=spec.epsilon,
                                 K_diging=c.K_diging, K_atc=c.K_atc,
                                 lambda_diging=c.lambda_diging, lambda_atc=c.lambda_atc))
    return rows


def run_bound_suite(config, output_dir=None):
    """Theory-vs-measurement grid plus the complexity table, written as CSV."""
    spec = config.bounds or BoundsSpec()
    out = resolve_output_dir(config, output_dir)
    rows = bound_grid(spec)
    comp = complexity_table(spec)
    res = BoundSuiteResult(rows, comp)
    res.rate_csv = os.path.join(out, "rate_report.csv")
    with open(res.rate_csv, "w") as fh:
        fh.write(",".join(RATE_HEADER) + "\n")
        for r in rows:
            fh.write(",".join(r.cells()) + "\n")
    res.complexity_csv = os.path.join(out, "complexity.csv")
    with open(res.complexity_csv, "w") as fh:
        fh.write(",".join(COMPLEXITY_HEADER) + "\n")
        for r in comp:
            fh.write(",".join(repr(r[h]) if isinstance(r[h], float) else str(r[h])
                              for h in COMPLEXITY_HEADER) + "\n")
    return res


# ------------------------------------------------------------------ plots


def emit_plot(traces, path, labels=None):
    """Semilog plot of normalized residuals, one curve per trace, as SVG.

    Each curve is tagged ``trace-<i>`` so the emitted coordinates can be
    located in the file.
    """
    traces = list(traces)
    if not traces:
        raise ValueError("emit_plot needs at least one trace")
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    labels = labels or [t.algorithm for t in traces]
    with matplotlib.rc_context({"svg.hashsalt": "atcdiging", "svg.fonttype": "none",
                                "path.simplify": False}):
        fig, ax = plt.subplots(figsize=(6, 4))
        for i, (t, label) in enumerate(zip(traces, labels)):
            y = np.asarray(t.normalized_residual, dtype=float)
            keep = y > 0
            (line,) = ax.semilogy(np.asarray(t.k)[keep], y[keep], label=label)
            line.set_gid(f"trace-{i}")
        ax.set_xlabel("iteration k")
        ax.set_ylabel(r"$\|x_k - x^*\|_F / \|x_0 - x^*\|_F$")
        ax.legend()
        ax.grid(True, which="major", alpha=0.3)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return path
