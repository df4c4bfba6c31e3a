"""Coherent sign calls by minimising expected screening loss.

The loss of a set of calls is ``c * M**(1 + a) + m`` where ``M`` counts wrong
sign calls and ``m`` counts features left without a call. Under the
confidence posterior each call on feature i is wrong independently with
probability ``e_i = min(p_i, 1 - p_i)``, so ``M`` is Poisson-binomial.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .errors import DomainError
from .levels import ConfidenceVector

NEGATIVE = "Negative"
POSITIVE = "Positive"
NOCALL = "NoCall"

EXACT_MAX = 20
BRUTE_FORCE_MAX = 12
_CHUNK_ROWS = 256


@dataclass(frozen=True)
class LossParams:
    a: float = 0.0
    c: float = 9.0
    n_mc: int = 10_000
    seed: int = rng.DEFAULT_SEED

    def __post_init__(self):
        if not self.a >= 0:
            raise DomainError(f"a must be >= 0, got {self.a}")
        if not self.c > 0:
            raise DomainError(f"c must be > 0, got {self.c}")
        if int(self.n_mc) < 1:
            raise DomainError("n_mc must be a positive integer")


@dataclass
class DecisionReport:
    feature_ids: list[str]
    action: list[str]
    expected_loss: float
    loss_params: LossParams
    error_prob: np.ndarray
    loss_by_size: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_decisions(self) -> int:
        return sum(a != NOCALL for a in self.action)


def poisson_binomial_pmf(probs) -> np.ndarray:
    """Distribution of the number of successes among independent Bernoulli trials."""
    pmf = np.ones(1)
    for p in np.asarray(probs, dtype=float):
        nxt = np.zeros(len(pmf) + 1)
        nxt[:-1] = pmf * (1.0 - p)
        nxt[1:] += pmf * p
        pmf = nxt
    return pmf


def _moment(pmf: np.ndarray, power: float) -> float:
    k = np.arange(len(pmf), dtype=float)
    return float(np.dot(pmf, k**power))


def _check_probs(e):
    e = np.asarray(e, dtype=float)
    if e.size and (np.any(~np.isfinite(e)) or e.min() < 0.0 or e.max() > 1.0):
        raise DomainError("error probabilities must lie in [0, 1]")
    return e


def expected_loss(error_probs_decided, m: int, params: LossParams) -> float:
    """Expected loss of deciding the features with the given error probabilities.

    Exact when ``a == 0`` or when at most 20 features are decided; otherwise
    a seeded Monte-Carlo mean over ``params.n_mc`` draws.
    """
    e = _check_probs(error_probs_decided)
    if e.size == 0:
        return float(m)
    if params.a == 0:
        return params.c * float(e.sum()) + m
    if e.size <= EXACT_MAX:
        return params.c * _moment(poisson_binomial_pmf(e), 1.0 + params.a) + m
    pow_table = np.arange(e.size + 1, dtype=float) ** (1.0 + params.a)
    total = 0.0
    for start in range(0, params.n_mc, _CHUNK_ROWS):
        rows = range(start, min(start + _CHUNK_ROWS, params.n_mc))
        u = rng.uniform_block(params.seed, rng.SCREENING, rows, e.size)
        total += float(pow_table[(u < e).sum(axis=1)].sum())
    return params.c * total / params.n_mc + m


def _mc_prefix_moments(e_sorted, order, d, params, threads=1):
    """Monte-Carlo E[M_n^(1+a)] for every prefix size n = 1..len(e_sorted).

    One uniform per (draw, feature) is shared by all prefix sizes, keyed by
    the feature's position in the original vector.
    """
    n = len(e_sorted)
    pow_table = np.arange(n + 1, dtype=float) ** (1.0 + params.a)

    def chunk(start):
        rows = range(start, min(start + _CHUNK_ROWS, params.n_mc))
        u = rng.uniform_block(params.seed, rng.SCREENING, rows, d)
        counts = np.cumsum(u[:, order] < e_sorted, axis=1, dtype=np.int32)
        return pow_table[counts].sum(axis=0)

    starts = range(0, params.n_mc, _CHUNK_ROWS)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(chunk, starts))
    else:
        parts = [chunk(s) for s in starts]
    acc = np.zeros(n)
    for part in parts:
        acc += part
    return acc / params.n_mc


def _direction(p: float) -> str:
    return NEGATIVE if p > 0.5 else POSITIVE


def optimize_decisions(levels: ConfidenceVector, params: LossParams, threads: int = 1) -> DecisionReport:
    """Best prefix of the features ranked by error probability.

    Features are ranked by ascending ``e_i`` (ties by position); the number
    of calls minimises the expected loss, ties going to fewer calls.
    Excluded features are never called.
    """
    d = len(levels)
    p = levels.level
    inc = np.flatnonzero(levels.included)
    e_all = np.full(d, np.nan)
    e_all[inc] = np.minimum(p[inc], 1.0 - p[inc])
    order = inc[np.argsort(e_all[inc], kind="stable")]
    e_sorted = e_all[order]
    n_inc = len(order)
    sizes = np.arange(n_inc + 1)

    if params.a == 0:
        moments = np.concatenate([[0.0], np.cumsum(e_sorted)])
    else:
        moments = np.zeros(n_inc + 1)
        pmf = np.ones(1)
        for n in range(1, min(n_inc, EXACT_MAX) + 1):
            q = e_sorted[n - 1]
            nxt = np.zeros(len(pmf) + 1)
            nxt[:-1] = pmf * (1.0 - q)
            nxt[1:] += pmf * q
            pmf = nxt
            moments[n] = _moment(pmf, 1.0 + params.a)
        if n_inc > EXACT_MAX:
            mc = _mc_prefix_moments(e_sorted, order, d, params, threads)
            moments[EXACT_MAX + 1 :] = mc[EXACT_MAX:]
    losses = params.c * moments + (d - sizes)
    best = int(np.argmin(losses))

    action = [NOCALL] * d
    for i in order[:best]:
        action[i] = _direction(p[i])
    return DecisionReport(
        feature_ids=list(levels.feature_ids),
        action=action,
        expected_loss=float(losses[best]),
        loss_params=params,
        error_prob=e_all,
        loss_by_size=losses,
    )


def threshold_rule(levels: ConfidenceVector, c: float) -> list[str]:
    """Closed-form optimum of the additive loss: call iff ``e_i < 1/c``."""
    out = []
    for p, ok in zip(levels.level, levels.included):
        if ok and min(p, 1.0 - p) * c < 1.0:
            out.append(_direction(p))
        else:
            out.append(NOCALL)
    return out


def brute_force_decisions(levels: ConfidenceVector, params: LossParams) -> DecisionReport:
    """Exhaustive search over all 3**d action vectors with exact expectations."""
    d = len(levels)
    if d > BRUTE_FORCE_MAX:
        raise DomainError(f"brute force limited to d <= {BRUTE_FORCE_MAX}, got {d}")
    p = levels.level
    inc = levels.included
    e_all = np.where(inc, np.minimum(p, 1.0 - p), np.nan)
    choices = [(NOCALL, NEGATIVE, POSITIVE) if inc[i] else (NOCALL,) for i in range(d)]
    best_key, best_action = None, [NOCALL] * d
    for action in itertools.product(*choices):
        errs = [1.0 - p[i] if act == NEGATIVE else p[i] for i, act in enumerate(action) if act != NOCALL]
        m = d - len(errs)
        if params.a == 0:
            loss = params.c * float(sum(errs)) + m
        else:
            loss = params.c * _moment(poisson_binomial_pmf(errs), 1.0 + params.a) + m
        key = (loss, len(errs))
        if best_key is None or key < best_key:
            best_key, best_action = key, list(action)
    return DecisionReport(
        feature_ids=list(levels.feature_ids),
        action=best_action,
        expected_loss=float(best_key[0]) if best_key else 0.0,
        loss_params=params,
        error_prob=e_all,
    )
