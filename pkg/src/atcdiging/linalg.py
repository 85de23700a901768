"""Norms of stacked agent matrices.

A stacked matrix has one row per agent and one column per coordinate of the
decision variable. All functions accept anything ``np.asarray`` can turn into
a 2-d float array; 1-d input is read as an ``n x 1`` column.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientHistory

NORM_KINDS = ("frobenius", "consensus", "average")


def as_stacked(m):
    a = np.asarray(m, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(-1, 1)
    elif a.ndim != 2:
        raise ValueError(f"expected a 2-d stacked matrix, got shape {a.shape}")
    return a


def frobenius_norm(m):
    return float(np.linalg.norm(as_stacked(m)))


def consensus_seminorm(m):
    """Frobenius norm of ``m`` with its column-mean row removed from every row."""
    a = as_stacked(m)
    return float(np.linalg.norm(a - a.mean(axis=0, keepdims=True)))


def average_seminorm(m):
    """``(1/sqrt(n)) * ||1' m||``, the norm of the projection onto consensus."""
    a = as_stacked(m)
    return float(np.sqrt(a.shape[0]) * np.linalg.norm(a.mean(axis=0)))


_NORMS = {
    "frobenius": frobenius_norm,
    "consensus": consensus_seminorm,
    "average": average_seminorm,
}


@dataclass(frozen=True)
class ErgodicNormParams:
    lam: float
    horizon: int

    def __post_init__(self):
        if not 0.0 < self.lam < 1.0:
            raise ValueError(f"lambda must lie in (0, 1), got {self.lam}")
        if self.horizon < 0:
            raise ValueError("horizon must be nonnegative")


def _weight(values, lam):
    # log domain: lam**-k overflows long before the product does
    values = np.asarray(values, dtype=float)
    k = np.arange(len(values), dtype=float)
    with np.errstate(divide="ignore"):
        return np.exp(np.log(values) - k * np.log(lam))


def weighted_norms(seq, lam, norm_kind="frobenius"):
    """Array of ``lam**-k * norm(seq[k])`` for every stored k."""
    norm = _NORMS[norm_kind]
    return _weight([norm(s) for s in seq], lam)


def ergodic_norm(seq, params, norm_kind="frobenius"):
    """Max over k = 0..K of ``lambda**-k * norm(seq[k])``.

    Parameters
    ----------
    seq : sequence of array_like
        Stored iterates; scalars are allowed and treated as 1 x 1 matrices.
    params : ErgodicNormParams
    norm_kind : {'frobenius', 'consensus', 'average'}
    """
    if norm_kind not in _NORMS:
        raise ValueError(f"unknown norm kind {norm_kind!r}")
    K = params.horizon
    if K + 1 > len(seq):
        raise InsufficientHistory(
            f"horizon K={K} needs {K + 1} iterates, only {len(seq)} stored"
        )
    return float(np.max(weighted_norms(seq[: K + 1], params.lam, norm_kind)))


def ergodic_norm_from_values(values, lam, horizon=None):
    """Same as :func:`ergodic_norm` but on precomputed per-iterate norms."""
    values = np.asarray(values, dtype=float)
    K = len(values) - 1 if horizon is None else horizon
    if K + 1 > len(values):
        raise InsufficientHistory(
            f"horizon K={K} needs {K + 1} values, only {len(values)} stored"
        )
    return float(np.max(_weight(values[: K + 1], lam)))


def running_ergodic_norm(values, lam):
    """Ergodic norm for every horizon K = 0, 1, ..., len(values) - 1."""
    return np.maximum.accumulate(_weight(values, lam))
