"""Closed-form rate machinery for ATC-DIGing and empirical checks against it.

Notation follows the rest of the package: ``delta`` is the contraction factor
of the mixing matrix, ``kappa_D = alpha_max / alpha_min`` the step-size
heterogeneity, and a :class:`~atcdiging.objectives.SmoothnessProfile` carries
``L``, ``L_bar``, ``mu_bar``, ``mu_hat`` and ``kappa_bar = L / mu_bar``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (GainProductNotContractive, HeterogeneityTooLarge,
                     InsufficientHistory, LambdaBelowDelta, RateNotContractive,
                     StepsizeConditionViolated)
from .linalg import average_seminorm, running_ergodic_norm

SQRT3 = math.sqrt(3.0)


def _het(kappa_D):
    if kappa_D < 1:
        raise ValueError("kappa_D must be at least 1")
    return 1.0 - 1.0 / kappa_D


def heterogeneity_margin(profile, delta, kappa_D):
    """``1 - delta - 4 sqrt(3) kappa_bar (1 - 1/kappa_D)``; feasible iff positive."""
    return 1.0 - delta - 4.0 * SQRT3 * profile.kappa_bar * _het(kappa_D)


def max_kappa_D(profile, delta):
    """Supremum of admissible heterogeneity ``1 + (1-delta)/(4 sqrt(3) kappa_bar)``."""
    return 1.0 + (1.0 - delta) / (4.0 * SQRT3 * profile.kappa_bar)


def max_stepsize(profile, delta, n, kappa_D=1.0):
    """Upper end of the admissible ``alpha_max`` interval for ATC-DIGing.

    Raises
    ------
    HeterogeneityTooLarge
        If ``kappa_D >= 1 + (1 - delta) / (4 sqrt(3) kappa_bar)``.
    """
    if not 0.0 <= delta < 1.0:
        raise ValueError(f"delta must lie in [0, 1), got {delta}")
    margin = heterogeneity_margin(profile, delta, kappa_D)
    # the stated bound on kappa_D is stricter than margin > 0 and implies it
    if kappa_D >= max_kappa_D(profile, delta) or margin <= 0:
        raise HeterogeneityTooLarge(
            f"kappa_D={kappa_D:g} too heterogeneous (needs < {max_kappa_D(profile, delta):.6g})"
        )
    cap = 1.0 / (2.0 * profile.L_bar)
    if delta == 0.0:
        return cap
    kb = profile.kappa_bar
    net = (1.0 - delta) * margin / (10.0 * profile.L * delta * math.sqrt(n) * math.sqrt(kb))
    return min(net, cap)


def rate_branches(profile, delta, n, kappa_D, alpha_max):
    """The two expressions whose max is the guaranteed rate."""
    kb, h = profile.kappa_bar, _het(kappa_D)
    network = (math.sqrt(12.0 * kb ** 2 * h ** 2
                         + 10.0 * profile.L * delta * math.sqrt(n) * math.sqrt(kb) * alpha_max)
               + delta + 2.0 * SQRT3 * kb * h)
    centralized = math.sqrt(1.0 - alpha_max * profile.mu_bar / 3.0)
    return network, centralized


def guaranteed_rate(profile, delta, n, kappa_D, alpha_max):
    """Guaranteed geometric rate of ATC-DIGing with uncoordinated steps."""
    if alpha_max <= 0:
        raise ValueError("alpha_max must be positive")
    lam = max(rate_branches(profile, delta, n, kappa_D, alpha_max))
    if not lam < 1.0:
        raise RateNotContractive(f"rate bound {lam:.6g} is not below 1")
    return lam


def consensus_gains(L, delta, lam, alpha_max):
    """Gains ``(gamma_11, gamma_12, gamma_2)`` of the consensus/tracking arrows."""
    if not lam > delta:
        raise LambdaBelowDelta(f"lambda={lam:g} must exceed delta={delta:g}")
    if not lam < 1:
        raise ValueError("lambda must be below 1")
    gap = lam - delta
    return (lam + 1.0) * delta * L / gap, float(L), delta * alpha_max / gap


def default_beta(profile):
    return 2.0 * profile.L / profile.mu_hat


def igd_root(profile, beta, eta):
    """``sqrt(L (1+eta) / (mu_bar eta) + mu_hat beta / mu_bar)``."""
    return math.sqrt(profile.L * (1.0 + eta) / (profile.mu_bar * eta)
                     + profile.mu_hat * beta / profile.mu_bar)


def igd_min_lambda(profile, step, beta):
    return math.sqrt(1.0 - step * profile.mu_bar * beta / (2.0 * (beta + 1.0)))


def check_igd_conditions(profile, step, lam, beta, eta):
    if beta < 2 or eta <= 0:
        raise ValueError("need beta >= 2 and eta > 0")
    if step > 1.0 / ((1.0 + eta) * profile.L_bar) * (1 + 1e-12):
        raise StepsizeConditionViolated(
            f"step {step:g} exceeds 1/((1+eta) L_bar) = {1 / ((1 + eta) * profile.L_bar):g}"
        )
    lo = igd_min_lambda(profile, step, beta)
    if not (lo <= lam * (1 + 1e-15) and lam < 1):
        raise StepsizeConditionViolated(f"lambda={lam:g} outside [{lo:.6g}, 1)")


def optimality_gains(profile, lam, alpha_max, kappa_D, beta=None, eta=1.0,
                  branch="max", alphas=None):
    """Coefficients ``(gamma_31, gamma_32)`` of the last arrow.

    ``gamma_31`` multiplies the consensus violation of ``x`` and
    ``gamma_32 = B_y`` the full norm of the tracker. With ``branch='mean'`` the
    centralized step is the mean step-size and ``alphas`` must be given.
    """
    beta = default_beta(profile) if beta is None else beta
    n = profile.n
    mu = profile.mu_bar
    if branch == "max":
        step = alpha_max
    elif branch == "mean":
        if alphas is None:
            raise ValueError("branch='mean' needs the per-agent alphas")
        alphas = np.asarray(alphas, dtype=float)
        step = float(alphas.mean())
    else:
        raise ValueError(f"unknown branch {branch!r}")
    check_igd_conditions(profile, step, lam, beta, eta)
    g31 = 1.0 + math.sqrt(n) / lam * igd_root(profile, beta, eta)
    if branch == "max":
        g32 = math.sqrt(3.0 - step * mu) / (lam * mu) * _het(kappa_D)
    else:
        # exact zero for equal steps; the rounded mean would leave ~1e-16
        spread = 0.0 if alphas.max() == alphas.min() else float(np.sqrt(np.sum((alphas - step) ** 2)))
        g32 = math.sqrt(3.0 - step * mu) / (math.sqrt(n) * lam * mu * step) * spread
    return g31, g32


@dataclass(frozen=True)
class GainLedger:
    gamma_11: float
    gamma_12: float
    gamma_2: float
    gamma_31: float
    gamma_32: float

    @property
    def product(self):
        return (self.gamma_11 + self.gamma_12) * (self.gamma_2 * self.gamma_31 + self.gamma_32)

    @property
    def feasible(self):
        return self.product < 1.0


def gain_ledger(profile, delta, lam, alpha_max, kappa_D, beta=None, eta=1.0):
    g11, g12, g2 = consensus_gains(profile.L, delta, lam, alpha_max)
    g31, g32 = optimality_gains(profile, lam, alpha_max, kappa_D, beta, eta)
    return GainLedger(g11, g12, g2, g31, g32)


def small_gain_bound(gains, offsets):
    """Bound on the first sequence of a cycle ``s_{i+1} <= gamma_i s_i + omega_i``."""
    gains = [float(g) for g in gains]
    offsets = [float(w) for w in offsets]
    if len(gains) != len(offsets) or not gains:
        raise ValueError("gains and offsets must be nonempty and of equal length")
    if any(g < 0 for g in gains):
        raise ValueError("gains must be nonnegative")
    prod = math.prod(gains)
    if prod >= 1.0:
        raise GainProductNotContractive(f"gain product {prod:g} >= 1")
    m = len(gains)
    total = sum(offsets[i] * math.prod(gains[i + 1:]) for i in range(m))
    return total / (1.0 - prod)


# ---------------------------------------------------------- complexity


def diging_max_stepsize(profile, delta, n):
    """Largest coordinated DIGing step keeping the DIGing gain product below 1.

    From ``(lam+1)/(lam-delta) * alpha L/(lam-delta) * 5 sqrt(kappa_bar n) < 1``
    in the limit ``lam -> 1``.
    """
    return (1.0 - delta) ** 2 / (10.0 * profile.L * math.sqrt(profile.kappa_bar * n))


def atc_coordinated_max_stepsize(profile, delta, n):
    return max_stepsize(profile, delta, n, 1.0)


@dataclass(frozen=True)
class Complexity:
    K_diging: int
    K_atc: int
    lambda_diging: float
    lambda_atc: float
    lambda_atc_network: float
    lambda_centralized: float


def _iterations(lam, epsilon):
    return math.ceil(math.log(1.0 / epsilon) / -math.log(lam))


def complexity_comparison(profile, delta, n, epsilon):
    """Iterations to epsilon accuracy implied by the DIGing and ATC-DIGing rates.

    Assumes coordinated step-sizes (``kappa_D = 1``).
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    if not 0.0 <= delta < 1.0:
        raise ValueError(f"delta must lie in [0, 1), got {delta}")
    kb15 = profile.kappa_bar ** 1.5
    sn = math.sqrt(n)
    lam_d = 1.0 - (1.0 - delta) ** 2 / (30.0 * sn * kb15)
    lam_net = 1.0 - (1.0 - delta) ** 2 / (2.0 * (15.0 * sn * kb15 * delta ** 2 + 1.0))
    lam_c = math.sqrt(1.0 - profile.mu_bar / (6.0 * profile.L_bar))
    lam_a = max(lam_net, lam_c)
    return Complexity(_iterations(lam_d, epsilon), _iterations(lam_a, epsilon),
                      lam_d, lam_a, lam_net, lam_c)


# ---------------------------------------------------------- empirical rates


@dataclass(frozen=True)
class RateFit:
    rate: float
    slope: float
    intercept: float
    r2: float
    start: int
    stop: int


def usable_length(values, floor=1e-12):
    """Prefix length before ``values`` first drops below ``floor * values[0]``."""
    values = np.asarray(values, dtype=float)
    if values.size == 0 or values[0] <= 0:
        return 0
    below = np.nonzero(~(values >= floor * values[0]))[0]
    return int(below[0]) if below.size else values.size


def fit_log_rate(values, start_frac=0.5, floor=1e-12):
    """Least-squares fit of ``log(values[k])`` on ``k`` over the trailing window.

    The series is first cut where it drops below ``floor`` times its initial
    value (the floating-point floor); the fit uses the last
    ``1 - start_frac`` of what remains.
    """
    values = np.asarray(values, dtype=float)
    m = usable_length(values, floor)
    if m < 3:
        raise ValueError("need at least 3 usable points to fit a rate")
    K = m - 1
    lo = int(math.floor(start_frac * K))
    k = np.arange(lo, K + 1, dtype=float)
    y = np.log(values[lo:K + 1])
    slope, intercept = np.polyfit(k, y, 1)
    resid = y - (slope * k + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(math.exp(slope)), float(slope), float(intercept), r2, lo, K)


def check_rate_empirically(residuals, lam, burn_in=0.1, floor=1e-12):
    """``C = max_k residual_k / lam**k`` and whether that envelope stops growing.

    ``holds`` requires ``C`` finite and no weighted residual after the first
    ``burn_in`` fraction of iterations exceeding the largest one seen
    during the burn-in.
    """
    residuals = getattr(residuals, "residual", residuals)
    values = np.asarray(residuals, dtype=float)
    m = max(usable_length(values, floor), 1)
    values = values[:m]
    k = np.arange(m, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        ratio = np.exp(np.log(values) - k * math.log(lam))
    C = float(np.max(ratio))
    b = max(1, int(math.ceil(burn_in * (m - 1))))
    head = float(np.max(ratio[: b + 1]))
    tail = float(np.max(ratio[b:])) if m > b else head
    holds = bool(np.isfinite(C) and tail <= head * (1 + 1e-9))
    return C, holds


# ---------------------------------------------------------- arrow checks


@dataclass
class ArrowReport:
    """Per-arrow worst margins ``rhs - lhs`` over all horizons checked.

    ``offsets`` holds the closed-form offsets used on the right-hand sides;
    ``empirical_offsets`` the smallest offsets that would make each
    bound hold, maximised over horizons.
    """

    lam: float
    horizon: int
    margins: dict = field(default_factory=dict)
    offsets: dict = field(default_factory=dict)
    empirical_offsets: dict = field(default_factory=dict)
    gains: dict = field(default_factory=dict)

    @property
    def ok(self):
        return all(m >= 0 for m in self.margins.values() if m is not None)


def max_horizon(lam, cap=None):
    # lam**-K must stay well inside the float range
    K = int(600.0 / -math.log(lam))
    return K if cap is None else min(K, cap)


def verify_small_gain_arrows(trace, lam, delta, profile, x_star, K=None,
                             kappa_D=None, beta=None, eta=1.0, slack=1e-9):
    """Evaluate the consensus/tracking arrows on a stored run.

    Needs a trace produced with ``store_iterates=True`` on a static graph
    with constant step-sizes. Arrows checked:

    * ``q_to_yL``: ``|y|_L <= gamma_11 |q|_F + lam/(lam-delta) ||y_0||_L``
    * ``q_to_yavg``: ``|y|_avg <= L |q|_F`` (no offset)
    * ``split_y``: ``|y|_F <= |y|_L + |y|_avg``
    * ``yF_to_xL``: ``|x|_L <= gamma_2 |y|_F + lam/(lam-delta) ||x_0||_L``
    * ``last``: ``|q|_F <= gamma_31 |x|_L + gamma_32 |y|_F + 2 sqrt(n) ||xbar_0 - x*||``
      (only when ``lam`` meets the inexact-gradient conditions; else ``None``)

    where ``|s|`` is the ergodic norm at horizon K. Margins are
    ``rhs - lhs + slack * max(1, rhs)`` minimised over every horizon up to K.
    """
    if trace.xs is None or trace.ys is None:
        raise ValueError("trace must carry stored iterates (store_iterates=True)")
    xs, ys = trace.xs, trace.ys
    n = xs.shape[1]
    K_avail = len(xs) - 1
    K = min(K_avail, max_horizon(lam)) if K is None else K
    if K > K_avail:
        raise InsufficientHistory(f"horizon {K} beyond {K_avail} stored iterates")
    alpha_max = trace.alpha_max
    if kappa_D is None:
        kappa_D = float(trace.kappa_D[0])
    sl = slice(0, K + 1)
    xs, ys = xs[sl], ys[sl]
    q = np.linalg.norm(xs - x_star, axis=(1, 2))
    xL = np.linalg.norm(xs - xs.mean(axis=1, keepdims=True), axis=(1, 2))
    yL = np.linalg.norm(ys - ys.mean(axis=1, keepdims=True), axis=(1, 2))
    yavg = np.array([average_seminorm(y) for y in ys])
    yF = np.linalg.norm(ys, axis=(1, 2))
    E = {name: running_ergodic_norm(v, lam)
         for name, v in dict(q=q, xL=xL, yL=yL, yavg=yavg, yF=yF).items()}

    g11, g12, g2 = consensus_gains(profile.L, delta, lam, alpha_max)
    w11 = lam / (lam - delta) * yL[0]
    w2 = lam / (lam - delta) * xL[0]
    rep = ArrowReport(lam=lam, horizon=K)
    rep.gains.update(gamma_11=g11, gamma_12=g12, gamma_2=g2)
    rep.offsets.update(q_to_yL=w11, q_to_yavg=0.0, split_y=0.0, yF_to_xL=w2)

    def margin(lhs, rhs):
        return float(np.min(rhs - lhs + slack * np.maximum(1.0, np.abs(rhs))))

    rep.margins["q_to_yL"] = margin(E["yL"], g11 * E["q"] + w11)
    rep.margins["q_to_yavg"] = margin(E["yavg"], g12 * E["q"])
    rep.margins["split_y"] = margin(E["yF"], E["yL"] + E["yavg"])
    rep.margins["yF_to_xL"] = margin(E["xL"], g2 * E["yF"] + w2)
    rep.empirical_offsets["q_to_yL"] = float(np.max(np.maximum(0.0, E["yL"] - g11 * E["q"])))
    rep.empirical_offsets["q_to_yavg"] = float(np.max(np.maximum(0.0, E["yavg"] - g12 * E["q"])))
    rep.empirical_offsets["yF_to_xL"] = float(np.max(np.maximum(0.0, E["xL"] - g2 * E["yF"])))

    try:
        g31, g32 = optimality_gains(profile, lam, alpha_max, kappa_D, beta, eta)
    except StepsizeConditionViolated:
        rep.margins["last"] = None
    else:
        w3 = 2.0 * math.sqrt(n) * float(np.linalg.norm(xs[0].mean(axis=0) - x_star))
        rep.gains.update(gamma_31=g31, gamma_32=g32)
        rep.offsets["last"] = w3
        rep.margins["last"] = margin(E["q"], g31 * E["xL"] + g32 * E["yF"] + w3)
        rep.empirical_offsets["last"] = float(
            np.max(np.maximum(0.0, E["q"] - g31 * E["xL"] - g32 * E["yF"])))
    return rep


# ---------------------------------------------------------- inexact gradient


@dataclass(frozen=True)
class IgdBound:
    lhs: float
    rhs: float
    consensus_term: float
    initial_term: float
    noise_term: float

    @property
    def holds(self):
        return self.lhs <= self.rhs + 1e-9


def igd_bound(profile, theta, beta, eta, lam, igd_trace, K=None):
    """Both sides of the inexact-gradient error bound at horizon ``K``.

    ``lhs = |r|^{lam,K}`` and ``rhs`` is the sum of the evaluation-point,
    initial-distance and noise terms.
    """
    check_igd_conditions(profile, theta, lam, beta, eta)
    r, p, s, e = igd_trace.r, igd_trace.p, igd_trace.s, igd_trace.e
    K = len(r) - 1 if K is None else K
    if K > len(r) - 1:
        raise InsufficientHistory(f"horizon {K} beyond {len(r) - 1} stored iterates")
    n = s.shape[1]
    sl = slice(0, K + 1)
    lhs = float(running_ergodic_norm(r[sl], lam)[-1])
    dev = np.linalg.norm(p[sl, None, :] - s[sl], axis=2)          # (K+1, n)
    dev_sum = sum(float(running_ergodic_norm(dev[:, i], lam)[-1]) for i in range(n))
    e_norm = float(running_ergodic_norm(np.linalg.norm(e[sl], axis=1), lam)[-1])
    mu = profile.mu_bar
    t1 = igd_root(profile, beta, eta) / (lam * math.sqrt(n)) * dev_sum
    t2 = 2.0 * float(r[0])
    t3 = math.sqrt(3.0 - theta * mu) / (lam * theta * mu) * e_norm
    return IgdBound(lhs, t1 + t2 + t3, t1, t2, t3)
