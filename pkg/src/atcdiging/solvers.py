"""ATC-DIGing, DIGing and the centralized inexact gradient method.

Stacked iterates are ``n x p`` arrays, one row per agent. Both distributed
methods keep a gradient tracker ``y`` initialised to ``grad f(x_0)``:

* ATC-DIGing: ``x+ = W (x - D y)``,  ``y+ = W (y + grad f(x+) - grad f(x))``
* DIGing:     ``x+ = W x - D y``,    ``y+ = W y + grad f(x+) - grad f(x)``
"""

import csv
import io
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import Diverged, StepsizeConditionViolated
from .network import MixingMatrix
from .objectives import stacked_gradient

ALGORITHMS = ("atc_diging", "diging")
CSV_HEADER = ("k", "residual", "normalized_residual", "consensus_violation",
              "tracker_seminorm", "tracker_norm", "kappa_D")
DIVERGENCE_FACTOR = 1e12

# keeps step-size draws independent of graph draws sharing a seed
_STEP_STREAM = 0x5354


# ------------------------------------------------------------------ schedules


@dataclass(frozen=True)
class StepSizeSchedule:
    """Per-agent step-sizes, fixed or freshly perturbed at every iteration.

    In ``perturbed`` mode agent i uses ``base * zeta`` at iteration k with
    ``zeta ~ U(lo, hi)`` drawn from a stream keyed by ``(seed, k)``.
    """

    mode: str = "constant"
    alphas: tuple = None
    base: float = None
    lo: float = 0.5
    hi: float = 1.5
    seed: int = 0

    def __post_init__(self):
        if self.mode == "constant":
            if self.alphas is None or len(self.alphas) == 0:
                raise ValueError("constant schedule needs per-agent alphas")
            a = tuple(float(v) for v in self.alphas)
            if any(not np.isfinite(v) or v <= 0 for v in a):
                raise ValueError("step-sizes must be positive and finite")
            object.__setattr__(self, "alphas", a)
        elif self.mode == "perturbed":
            if self.base is None or not self.base > 0:
                raise ValueError("perturbed schedule needs a positive base step")
            if not 0 < self.lo <= self.hi:
                raise ValueError("perturbation interval must satisfy 0 < lo <= hi")
        else:
            raise ValueError(f"unknown schedule mode {self.mode!r}")

    @classmethod
    def constant(cls, alphas):
        return cls(mode="constant", alphas=tuple(alphas))

    @classmethod
    def coordinated(cls, alpha, n):
        return cls(mode="constant", alphas=(float(alpha),) * n)

    @classmethod
    def perturbed(cls, base, lo=0.5, hi=1.5, seed=0):
        return cls(mode="perturbed", base=float(base), lo=lo, hi=hi, seed=seed)

    @property
    def is_constant(self):
        return self.mode == "constant"


def kappa_D(alphas):
    alphas = np.asarray(alphas, dtype=float)
    return float(alphas.max() / alphas.min())


def realize_schedule(schedule, k, n):
    """Step-sizes of all ``n`` agents at iteration ``k`` and their ``kappa_D``."""
    if schedule.mode == "constant":
        if len(schedule.alphas) != n:
            raise ValueError(f"schedule has {len(schedule.alphas)} alphas for {n} agents")
        alphas = np.array(schedule.alphas)
    else:
        rng = np.random.default_rng([schedule.seed, k, _STEP_STREAM])
        alphas = schedule.base * rng.uniform(schedule.lo, schedule.hi, size=n)
    return alphas, kappa_D(alphas)


# ------------------------------------------------------------------ iteration


@dataclass(frozen=True, eq=False)
class SolverState:
    k: int
    x: np.ndarray
    y: np.ndarray
    prev_grad: np.ndarray


def initial_state(inst, x0):
    x0 = np.array(x0, dtype=float)
    if x0.shape != (inst.n, inst.p):
        raise ValueError(f"x0 must have shape {(inst.n, inst.p)}, got {x0.shape}")
    g = stacked_gradient(inst, x0)
    return SolverState(0, x0, g.copy(), g)


def _weights(w):
    return w.weights if isinstance(w, MixingMatrix) else np.asarray(w, dtype=float)


def _finish(state, x_new, y_new, g_new):
    # a single NaN/inf anywhere poisons the sum
    if not np.isfinite(x_new.sum() + y_new.sum()):
        raise Diverged(f"non-finite iterate at iteration {state.k + 1}", state.k + 1)
    return SolverState(state.k + 1, x_new, y_new, g_new)


def atc_diging_step(state, w, d, inst):
    W = _weights(w)
    d = np.asarray(d, dtype=float).reshape(-1, 1)
    x_new = W @ (state.x - d * state.y)
    g_new = stacked_gradient(inst, x_new)
    y_new = W @ (state.y + g_new - state.prev_grad)
    return _finish(state, x_new, y_new, g_new)


def diging_step(state, w, d, inst):
    W = _weights(w)
    d = np.asarray(d, dtype=float).reshape(-1, 1)
    x_new = W @ state.x - d * state.y
    g_new = stacked_gradient(inst, x_new)
    y_new = W @ state.y + g_new - state.prev_grad
    return _finish(state, x_new, y_new, g_new)


_STEPS = {"atc_diging": atc_diging_step, "diging": diging_step}


# ------------------------------------------------------------------ traces


@dataclass
class RunTrace:
    """Per-iteration metrics of one run, rows k = 0..K.

    ``tracking_error`` holds ``||1'y_k - 1'grad f(x_k)|| / (1 + ||1'grad f(x_k)||)``
    and, like the stored iterates ``xs``/``ys``, is kept in memory only.
    """

    algorithm: str
    k: np.ndarray
    residual: np.ndarray
    normalized_residual: np.ndarray
    consensus_violation: np.ndarray
    tracker_seminorm: np.ndarray
    tracker_norm: np.ndarray
    kappa_D: np.ndarray
    tracking_error: np.ndarray = None
    status: str = "ok"
    xs: np.ndarray = None
    ys: np.ndarray = None
    alpha_max: float = None

    def __len__(self):
        return len(self.k)

    @property
    def iterations(self):
        return len(self.k) - 1

    def columns(self):
        return {name: getattr(self, name) for name in CSV_HEADER}

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        cols = [self.residual, self.normalized_residual, self.consensus_violation,
                self.tracker_seminorm, self.tracker_norm, self.kappa_D]
        for i, k in enumerate(self.k):
            writer.writerow([int(k)] + [repr(float(c[i])) for c in cols])
        return buf.getvalue()

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    @classmethod
    def from_csv(cls, text, algorithm=""):
        reader = csv.reader(io.StringIO(text))
        header = tuple(next(reader))
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {header}")
        rows = [r for r in reader if r]
        data = np.array([[float(v) for v in r] for r in rows]).reshape(-1, len(CSV_HEADER))
        cols = {name: data[:, j] for j, name in enumerate(CSV_HEADER)}
        cols["k"] = cols["k"].astype(int)
        return cls(algorithm=algorithm, **cols)

    @classmethod
    def read_csv(cls, path, algorithm=None):
        with open(path) as fh:
            text = fh.read()
        if algorithm is None:
            algorithm = os.path.splitext(os.path.basename(path))[0]
        return cls.from_csv(text, algorithm)


def _norm(a):
    v = a.ravel()
    return math.sqrt(float(v @ v))


class _Recorder:
    def __init__(self, x_star, n, store):
        self.x_star = np.tile(x_star, (n, 1))
        self.rows = []
        self.tracking = []
        self.store = store
        self.xs, self.ys = [], []

    def add(self, state, kd):
        x, y, g = state.x, state.y, state.prev_grad
        res = _norm(x - self.x_star)
        r0 = self.rows[0][1] if self.rows else res
        sx, sy, sg = x.sum(axis=0), y.sum(axis=0), g.sum(axis=0)
        n = x.shape[0]
        self.rows.append((state.k, res, res / r0 if r0 > 0 else 0.0,
                          _norm(x - sx / n), _norm(y - sy / n), _norm(y), kd))
        self.tracking.append(_norm(sy - sg) / (1.0 + _norm(sg)))
        if self.store:
            self.xs.append(x.copy())
            self.ys.append(y.copy())
        return res, r0

    def trace(self, algorithm, status, alpha_max):
        a = np.array(self.rows, dtype=float).reshape(-1, 7)
        return RunTrace(
            algorithm=algorithm, k=a[:, 0].astype(int), residual=a[:, 1],
            normalized_residual=a[:, 2], consensus_violation=a[:, 3],
            tracker_seminorm=a[:, 4], tracker_norm=a[:, 5], kappa_D=a[:, 6],
            tracking_error=np.array(self.tracking), status=status,
            xs=np.array(self.xs) if self.store else None,
            ys=np.array(self.ys) if self.store else None,
            alpha_max=alpha_max,
        )


def run(algorithm, inst, graph_seq, schedule, iterations, ref, x0,
        stop_tol=None, store_iterates=False):
    """Run ``iterations`` steps of a distributed method and record a trace.

    Parameters
    ----------
    algorithm : {'atc_diging', 'diging'}
    inst : ProblemInstance
    graph_seq : GraphSequence or MixingMatrix
        A bare mixing matrix is used at every iteration.
    schedule : StepSizeSchedule
    iterations : int
        Number of steps K; the trace holds K + 1 rows unless stopped early.
    ref : ReferenceSolution
    x0 : array_like, shape (n, p)
    stop_tol : float, optional
        Stop once the normalized residual drops to this value.
    store_iterates : bool
        Keep every ``x_k`` and ``y_k`` on the trace.

    Raises
    ------
    Diverged
        On a non-finite iterate or a residual above ``1e12`` times the
        initial one (times ``sqrt(n) max(1, ||x*||)`` when starting at x*);
        the partial trace is attached as ``exc.trace``.
    """
    if algorithm not in _STEPS:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    if iterations < 1:
        raise ValueError("iterations must be at least 1")
    step = _STEPS[algorithm]
    n = inst.n
    if isinstance(graph_seq, MixingMatrix):
        mixing = lambda k, _w=graph_seq: _w
    else:
        if graph_seq.n != n:
            raise ValueError("graph sequence and instance disagree on n")
        mixing = graph_seq.mixing

    state = initial_state(inst, x0)
    rec = _Recorder(ref.x_star, n, store_iterates)
    alphas, kd = realize_schedule(schedule, 0, n)
    alpha_max = float(alphas.max())
    _, r0 = rec.add(state, kd)
    # a start at x* has r0 = 0; fall back to the scale of x* itself
    scale = math.sqrt(n) * max(1.0, float(np.linalg.norm(ref.x_star)))
    blowup = DIVERGENCE_FACTOR * (r0 if r0 > 0 else scale)
    status = "ok"
    for k in range(iterations):
        try:
            state = step(state, mixing(k), alphas, inst)
        except Diverged as exc:
            exc.trace = rec.trace(algorithm, "diverged", alpha_max)
            raise
        alphas, kd = realize_schedule(schedule, k + 1, n)
        alpha_max = max(alpha_max, float(alphas.max()))
        res, _ = rec.add(state, kd)
        if res > blowup:
            raise Diverged(f"residual exploded at iteration {k + 1}", k + 1,
                           rec.trace(algorithm, "diverged", alpha_max))
        if stop_tol is not None and r0 > 0 and res / r0 <= stop_tol:
            status = "converged"
            break
    return rec.trace(algorithm, status, alpha_max)


def default_x0(n, p, seed=0, mode="normal"):
    if mode == "zero":
        return np.zeros((n, p))
    if mode == "normal":
        return np.random.default_rng(seed).standard_normal((n, p))
    raise ValueError(f"unknown x0 mode {mode!r}")


# ------------------------------------------------------------------ IGD harness


def exact_points(k, p, n):
    return np.tile(p, (n, 1))


def zero_noise(k, d):
    return np.zeros(d)


@dataclass(frozen=True)
class IgdRun:
    """Inexact gradient descent ``p+ = p - theta * mean_i grad g^i(s^i) + e``.

    ``points(k, p_k)`` returns the ``n x d`` evaluation points and
    ``noise(k)`` the additive error; both default to the exact method.
    """

    theta: float
    beta: float = 2.0
    eta: float = 1.0
    points: object = None
    noise: object = None

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError("theta must be positive")
        if self.beta < 2:
            raise ValueError("beta must be at least 2")
        if not self.eta > 0:
            raise ValueError("eta must be positive")


@dataclass
class IgdTrace:
    p: np.ndarray        # (K+1, d) iterates
    r: np.ndarray        # (K+1,) distances to the minimiser
    s: np.ndarray        # (K+1, n, d) evaluation points
    e: np.ndarray        # (K+1, d) injected errors
    status: str = "ok"


def igd_run(inst, run, p0, iterations, ref):
    """Iterate the inexact gradient method on ``g = (1/n) sum_i f^i``."""
    prof = inst.profile
    if run.theta > 1.0 / ((1.0 + run.eta) * prof.L_bar) * (1 + 1e-12):
        raise StepsizeConditionViolated(
            f"theta={run.theta:g} exceeds 1/((1+eta) L_bar)={1 / ((1 + run.eta) * prof.L_bar):g}"
        )
    n, d = inst.n, inst.p
    points = run.points or (lambda k, p: exact_points(k, p, n))
    noise = run.noise or (lambda k: zero_noise(k, d))
    p = np.array(p0, dtype=float)
    ps, ss, es = [], [], []
    for k in range(iterations + 1):
        s = np.asarray(points(k, p), dtype=float).reshape(n, d)
        e = np.asarray(noise(k), dtype=float).reshape(d)
        ps.append(p)
        ss.append(s)
        es.append(e)
        if k == iterations:
            break
        p = p - run.theta * stacked_gradient(inst, s).mean(axis=0) + e
        if not np.all(np.isfinite(p)):
            raise Diverged(f"IGD iterate non-finite at iteration {k + 1}", k + 1)
    P = np.array(ps)
    r = np.linalg.norm(P - ref.x_star, axis=1)
    return IgdTrace(P, r, np.array(ss), np.array(es))
