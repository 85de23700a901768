"""Local objectives f^i, their gradient oracles and smoothness constants.

Three problem kinds are supported, each agent holding its own data block:

* ``quadratic``: ``f^i(x) = x'Q^i x / 2 - c^i'x``
* ``least_squares``: ``f^i(x) = ||A^i x - b^i||^2 / 2``
* ``huber``: ``f^i(x) = sum_r h(a_r'x - b_r) + ridge * ||x||^2 / 2`` where ``h``
  is the Huber penalty with threshold ``xi``.

Data blocks are stacked along a leading agent axis, so every agent of an
instance has the same number of rows.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ReferenceSolverDiverged

KINDS = ("quadratic", "least_squares", "huber")
_FIELDS = {"quadratic": ("Q", "c"), "least_squares": ("A", "b"), "huber": ("A", "b")}


@dataclass(frozen=True)
class SmoothnessProfile:
    """Per-agent Lipschitz (``L^i``) and strong-convexity (``mu^i``) moduli."""

    per_agent_L: tuple
    per_agent_mu: tuple

    def __post_init__(self):
        L = np.asarray(self.per_agent_L, dtype=float)
        mu = np.asarray(self.per_agent_mu, dtype=float)
        if L.shape != mu.shape or L.ndim != 1 or L.size == 0:
            raise ValueError("per-agent constants must be equal-length 1-d lists")
        if np.any(~np.isfinite(L)) or np.any(L <= 0):
            raise ValueError("every L^i must lie in (0, inf)")
        if np.any(mu < 0) or not np.any(mu > 0):
            raise ValueError("mu^i must be nonnegative with at least one positive")
        if np.any(mu > L * (1 + 1e-12)):
            raise ValueError("mu^i cannot exceed L^i")
        object.__setattr__(self, "per_agent_L", tuple(float(v) for v in L))
        object.__setattr__(self, "per_agent_mu", tuple(float(v) for v in mu))

    @property
    def n(self):
        return len(self.per_agent_L)

    @property
    def L(self):
        return max(self.per_agent_L)

    @property
    def L_bar(self):
        return float(np.mean(self.per_agent_L))

    @property
    def mu_bar(self):
        return float(np.mean(self.per_agent_mu))

    @property
    def mu_hat(self):
        return max(self.per_agent_mu)

    @property
    def kappa_bar(self):
        return self.L / self.mu_bar

    @classmethod
    def uniform(cls, n, L, mu):
        return cls((L,) * n, (mu,) * n)


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    kind: str
    data: dict
    xi: float = 1.0
    ridge: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown problem kind {self.kind!r}")
        data = {}
        for name in _FIELDS[self.kind]:
            if name not in self.data:
                raise ValueError(f"{self.kind} instance needs array {name!r}")
            arr = np.array(self.data[name], dtype=float)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"array {name!r} has non-finite entries")
            arr.setflags(write=False)
            data[name] = arr
        first, second = _FIELDS[self.kind]
        a, b = data[first], data[second]
        if a.ndim != 3 or b.ndim != 2 or a.shape[:2] != b.shape:
            raise ValueError(f"inconsistent shapes {a.shape} and {b.shape}")
        if self.kind == "quadratic":
            if a.shape[1] != a.shape[2] or not np.allclose(a, a.transpose(0, 2, 1)):
                raise ValueError("Q^i must be square and symmetric")
        if self.xi <= 0:
            raise ValueError("Huber threshold must be positive")
        if self.ridge < 0:
            raise ValueError("ridge must be nonnegative")
        object.__setattr__(self, "data", data)

    @property
    def n(self):
        return self.data[_FIELDS[self.kind][0]].shape[0]

    @property
    def p(self):
        return self.data[_FIELDS[self.kind][0]].shape[2]

    @cached_property
    def profile(self):
        return estimate_profile(self)

    def value(self, agent, x):
        """``f^i(x)`` for agent ``i``."""
        _check_agent(self, agent)
        x = np.asarray(x, dtype=float)
        if self.kind == "quadratic":
            Q, c = self.data["Q"][agent], self.data["c"][agent]
            return float(0.5 * x @ Q @ x - c @ x)
        r = self.data["A"][agent] @ x - self.data["b"][agent]
        if self.kind == "least_squares":
            return float(0.5 * r @ r)
        return float(np.sum(huber_loss(r, self.xi)) + 0.5 * self.ridge * x @ x)

    def mean_value(self, x):
        return float(np.mean([self.value(i, x) for i in range(self.n)]))

    def mean_gradient(self, x):
        """Gradient of ``f = (1/n) sum_i f^i`` at a single point."""
        x = np.asarray(x, dtype=float)
        return stacked_gradient(self, np.broadcast_to(x, (self.n, self.p))).mean(axis=0)


def huber_loss(r, xi):
    a = np.abs(r)
    return np.where(a <= xi, 0.5 * r * r, xi * (a - 0.5 * xi))


def huber_derivative(r, xi):
    return np.clip(r, -xi, xi)


def _check_agent(inst, agent):
    if not (0 <= agent < inst.n):
        raise IndexError(f"agent index {agent} out of range [0, {inst.n})")


def gradient(inst, agent, point):
    """``grad f^i`` at ``point`` for agent ``i``."""
    _check_agent(inst, agent)
    x = np.asarray(point, dtype=float)
    if x.shape != (inst.p,):
        raise ValueError(f"point must have shape ({inst.p},), got {x.shape}")
    if inst.kind == "quadratic":
        return inst.data["Q"][agent] @ x - inst.data["c"][agent]
    A, b = inst.data["A"][agent], inst.data["b"][agent]
    r = A @ x - b
    if inst.kind == "least_squares":
        return A.T @ r
    return A.T @ huber_derivative(r, inst.xi) + inst.ridge * x


def stacked_gradient(inst, x):
    """Row i is ``grad f^i`` evaluated at row i of ``x``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (inst.n, inst.p):
        raise ValueError(f"expected shape {(inst.n, inst.p)}, got {x.shape}")
    if inst.kind == "quadratic":
        return np.einsum("ijk,ik->ij", inst.data["Q"], x) - inst.data["c"]
    A, b = inst.data["A"], inst.data["b"]
    r = np.einsum("imk,ik->im", A, x) - b
    if inst.kind == "least_squares":
        return np.einsum("imk,im->ik", A, r)
    return np.einsum("imk,im->ik", A, huber_derivative(r, inst.xi)) + inst.ridge * x


def estimate_profile(inst):
    """Per-agent ``L^i`` and ``mu^i`` from Hessian eigenvalue bounds.

    For Huber agents the Hessian lies between ``ridge * I`` (linear region)
    and ``A'A + ridge * I``.
    """
    if inst.kind == "quadratic":
        ev = np.linalg.eigvalsh(inst.data["Q"])
    else:
        A = inst.data["A"]
        ev = np.linalg.eigvalsh(np.einsum("imk,iml->ikl", A, A))
    ev = np.clip(ev, 0.0, None)
    L, mu = ev[:, -1], ev[:, 0]
    if inst.kind == "huber":
        L, mu = L + inst.ridge, np.full_like(mu, inst.ridge)
    return SmoothnessProfile(tuple(L), tuple(mu))


@dataclass(frozen=True)
class ReferenceSolution:
    x_star: np.ndarray
    grad_norm: float
    iterations: int = 0

    def stacked(self, n):
        return np.tile(self.x_star, (n, 1))


def solve_reference(inst, tol=1e-12, max_iter=10_000_000):
    """Minimiser of ``(1/n) sum_i f^i``.

    Quadratic instances are solved in closed form; the other kinds run
    centralized gradient descent with step ``1 / L_bar`` until the mean
    gradient norm drops to ``tol``.
    """
    if inst.kind == "quadratic":
        Qs, cs = inst.data["Q"].sum(axis=0), inst.data["c"].sum(axis=0)
        x = np.linalg.solve(Qs, cs)
        return ReferenceSolution(x, float(np.linalg.norm(inst.mean_gradient(x))), 0)

    n = inst.n
    A = inst.data["A"].reshape(-1, inst.p)
    b = inst.data["b"].reshape(-1)

    def mean_grad(x):
        r = A @ x - b
        if inst.kind == "least_squares":
            return A.T @ r / n
        return A.T @ huber_derivative(r, inst.xi) / n + inst.ridge * x

    step = 1.0 / inst.profile.L_bar
    x = np.zeros(inst.p)
    g = mean_grad(x)
    gnorm = float(np.linalg.norm(g))
    it = 0
    while gnorm > tol:
        if it >= max_iter or not np.isfinite(gnorm):
            raise ReferenceSolverDiverged(
                f"gradient norm {gnorm:.3e} after {it} iterations (tol {tol:g})"
            )
        x = x - step * g
        g = mean_grad(x)
        gnorm = float(np.linalg.norm(g))
        it += 1
    return ReferenceSolution(x, gnorm, it)


# ---------------------------------------------------------------- generators


def random_quadratic(n, p, seed=0, eig_range=(1.0, 2.0)):
    """Quadratics with random orthogonal eigenbases and eigenvalues in ``eig_range``."""
    rng = np.random.default_rng(seed)
    lo, hi = eig_range
    Q = np.empty((n, p, p))
    for i in range(n):
        R, _ = np.linalg.qr(rng.standard_normal((p, p)))
        ev = rng.uniform(lo, hi, size=p)
        Q[i] = (R * ev) @ R.T
        Q[i] = 0.5 * (Q[i] + Q[i].T)
    c = rng.standard_normal((n, p))
    return ProblemInstance("quadratic", {"Q": Q, "c": c})


def random_least_squares(n, m, p, seed=0, noise=0.1):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, m, p))
    x_true = rng.standard_normal(p)
    b = A @ x_true + noise * rng.standard_normal((n, m))
    return ProblemInstance("least_squares", {"A": A, "b": b})


def random_huber(n, m, p, seed=0, xi=1.0, ridge=0.01, outlier_frac=0.1,
                 noise=0.1, outlier_scale=10.0):
    """Robust regression data: Gaussian design, a fraction of Cauchy outliers.

    ``b = A x_true + noise`` with ``outlier_frac`` of all rows additionally
    corrupted by ``outlier_scale`` times a standard Cauchy draw.
    """
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, m, p))
    x_true = rng.standard_normal(p)
    b = A @ x_true + noise * rng.standard_normal((n, m))
    flat = b.reshape(-1)
    bad = rng.choice(flat.size, size=int(round(outlier_frac * flat.size)), replace=False)
    flat[bad] += outlier_scale * rng.standard_cauchy(bad.size)
    return ProblemInstance("huber", {"A": A, "b": flat.reshape(n, m)}, xi=xi, ridge=ridge)


# ------------------------------------------------------------ text format


def format_instance(inst):
    """Self-describing plain-text dump; arrays are written row-major."""
    lines = ["# atcdiging problem instance", f"kind {inst.kind}",
             f"n {inst.n}", f"p {inst.p}", f"xi {inst.xi!r}", f"ridge {inst.ridge!r}"]
    for name in _FIELDS[inst.kind]:
        arr = inst.data[name]
        lines.append(f"array {name} " + " ".join(str(d) for d in arr.shape))
        for row in arr.reshape(-1, arr.shape[-1]):
            lines.append(" ".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def parse_instance(text):
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    header, arrays = {}, {}
    pos = 0
    while pos < len(lines):
        parts = lines[pos].split()
        if parts[0] == "array":
            name, shape = parts[1], tuple(int(d) for d in parts[2:])
            nrows = int(np.prod(shape[:-1])) if len(shape) > 1 else 1
            rows = lines[pos + 1: pos + 1 + nrows]
            if len(rows) != nrows:
                raise ValueError(f"array {name}: expected {nrows} rows, got {len(rows)}")
            values = np.array([[float(v) for v in r.split()] for r in rows])
            arrays[name] = values.reshape(shape)
            pos += 1 + nrows
        elif len(parts) == 2 and parts[0] in ("kind", "n", "p", "xi", "ridge"):
            header[parts[0]] = parts[1]
            pos += 1
        else:
            raise ValueError(f"unrecognised line {lines[pos]!r}")
    inst = ProblemInstance(header["kind"], arrays, xi=float(header.get("xi", 1.0)),
                           ridge=float(header.get("ridge", 0.0)))
    if "n" in header and int(header["n"]) != inst.n:
        raise ValueError("header n disagrees with data")
    if "p" in header and int(header["p"]) != inst.p:
        raise ValueError("header p disagrees with data")
    return inst


def save_instance(inst, path):
    with open(path, "w") as fh:
        fh.write(format_instance(inst))


def load_instance(path):
    with open(path) as fh:
        return parse_instance(fh.read())
