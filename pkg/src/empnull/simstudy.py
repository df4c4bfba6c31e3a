"""Simulation of conditional inference under a random precision statistic.

Each trial draws a precision ``sigma_k`` and then ``d`` z-values: unaffected
features are N(0, sigma_k^2), affected ones N(2.5 sigma_k, (1.25 sigma_k)^2).
Levels computed under an assumed or estimated null are compared with the
true levels conditional on ``sigma_k`` through the conservative-error
statistic: the share of features whose level is indecisive (inside
[alpha, 1 - alpha]) while the true level is decisive, minus the share with
the roles reversed.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import special

from . import rng
from .errors import DomainError, NullFitError
from .nullmodel import DEFAULT_CENTER_FRACTION, NullModel, fit_null

CONDITIONAL = "conditional"
MARGINAL = "marginal"
ESTIMATED = "estimated"
ASSUMED = "assumed"

_GL_NODES = 64


@dataclass(frozen=True)
class StudyConfig:
    K: int = 500
    d: int = 10_000
    n_affected: int = 500
    precision_support: tuple[float, ...] = (2 / 3, 1.0, 3 / 2)
    precision_probs: tuple[float, ...] = (0.3, 0.4, 0.3)
    affected_mean_mult: float = 2.5
    affected_sd_mult: float = 1.25
    alpha: float = 0.01
    truth_mode: str = CONDITIONAL
    null_modes: tuple[str, ...] = (ESTIMATED, ASSUMED)
    seed: int = rng.DEFAULT_SEED
    center_fraction: float = DEFAULT_CENTER_FRACTION
    # when set, log(sigma_k) ~ Uniform(lo, hi) replaces the discrete support
    log_precision_range: tuple[float, float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "precision_support", tuple(float(s) for s in self.precision_support))
        object.__setattr__(self, "precision_probs", tuple(float(p) for p in self.precision_probs))
        modes = self.null_modes
        if isinstance(modes, str):
            modes = (modes,)
        object.__setattr__(self, "null_modes", tuple(modes))
        if self.log_precision_range is not None:
            object.__setattr__(self, "log_precision_range", tuple(float(x) for x in self.log_precision_range))
        if self.K < 1 or self.d < 1:
            raise DomainError("K and d must be positive")
        if not 0 <= self.n_affected < self.d:
            raise DomainError("n_affected must satisfy 0 <= n_affected < d")
        if len(self.precision_support) != len(self.precision_probs) or not self.precision_support:
            raise DomainError("precision support and probabilities must match")
        if any(s <= 0 for s in self.precision_support) or any(p < 0 for p in self.precision_probs):
            raise DomainError("precision support must be positive and probabilities nonnegative")
        if abs(sum(self.precision_probs) - 1.0) > 1e-12:
            raise DomainError("precision probabilities must sum to 1")
        if not 0 < self.alpha < 0.5:
            raise DomainError("alpha must lie in (0, 0.5)")
        if self.truth_mode not in (CONDITIONAL, MARGINAL):
            raise DomainError(f"unknown truth_mode {self.truth_mode!r}")
        if not self.null_modes or any(m not in (ESTIMATED, ASSUMED) for m in self.null_modes):
            raise DomainError(f"null modes must be drawn from {ESTIMATED!r}, {ASSUMED!r}")
        if self.log_precision_range is not None:
            lo, hi = self.log_precision_range
            if not lo < hi:
                raise DomainError("log_precision_range must be increasing")

    @property
    def n_unaffected(self) -> int:
        return self.d - self.n_affected

    @classmethod
    def from_dict(cls, d: dict) -> "StudyConfig":
        d = dict(d)
        if "null_mode" in d:
            nm = d.pop("null_mode")
            d["null_modes"] = (ESTIMATED, ASSUMED) if nm == "both" else nm
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise DomainError(f"unknown config keys: {sorted(unknown)}")
        for key in ("precision_support", "precision_probs", "null_modes", "log_precision_range"):
            if isinstance(d.get(key), list):
                d[key] = tuple(d[key])
        return cls(**d)

    def to_dict(self) -> dict:
        out = asdict(self)
        for key, val in out.items():
            if isinstance(val, tuple):
                out[key] = list(val)
        return out

    @classmethod
    def from_json(cls, text: str) -> "StudyConfig":
        return cls.from_dict(json.loads(text))


@dataclass
class TrialResult:
    k: int
    null_mode: str
    sigma_k: float
    conservatism_unaffected: float
    conservatism_affected: float
    null_fit: NullModel | None = None
    levels_f0: np.ndarray | None = field(default=None, repr=False)
    levels_true: np.ndarray | None = field(default=None, repr=False)
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass
class CellSummary:
    null_mode: str
    subset: str
    mean: float
    se: float
    mean_abs: float
    se_abs: float
    n_trials: int
    n_failed: int


def draw_precision(config: StudyConfig, k: int) -> float:
    u = float(rng.uniform_row(config.seed, rng.SIM_PRECISION, k, 1)[0])
    if config.log_precision_range is not None:
        lo, hi = config.log_precision_range
        return math.exp(lo + u * (hi - lo))
    cum = np.cumsum(config.precision_probs)
    idx = int(np.searchsorted(cum, u, side="right"))
    return config.precision_support[min(idx, len(cum) - 1)]


def generate_trial(config: StudyConfig, k: int) -> tuple[np.ndarray, float]:
    """Raw z-values of trial ``k`` (unaffected first) and its realised precision."""
    sigma = draw_precision(config, k)
    n = rng.normal_row(config.seed, rng.SIM_FEATURES, k, config.d)
    z = sigma * n
    aff = slice(config.n_unaffected, config.d)
    z[aff] = config.affected_mean_mult * sigma + config.affected_sd_mult * sigma * n[aff]
    return z, sigma


def true_conditional_levels(z, sigma_k: float) -> np.ndarray:
    if not sigma_k > 0:
        raise DomainError("sigma_k must be positive")
    return special.ndtr(np.asarray(z, dtype=float) / sigma_k)


def _mixture(support, probs, log_range):
    if log_range is None:
        return np.asarray(support, dtype=float), np.asarray(probs, dtype=float)
    # log-uniform precision: Gauss-Legendre nodes on log(sigma)
    x, w = np.polynomial.legendre.leggauss(_GL_NODES)
    lo, hi = log_range
    return np.exp(0.5 * (hi - lo) * x + 0.5 * (hi + lo)), 0.5 * w


def marginal_upper_tail(z, support, probs, log_range=None) -> np.ndarray:
    s, w = _mixture(support, probs, log_range)
    z = np.asarray(z, dtype=float)
    return special.ndtr(-z[..., None] / s) @ w


def marginalize_levels(z, support, probs, log_range=None) -> np.ndarray:
    """Mixture CDF sum_sigma w_sigma Phi(z / sigma), elementwise."""
    s, w = _mixture(support, probs, log_range)
    if log_range is None and abs(float(np.sum(w)) - 1.0) > 1e-12:
        raise DomainError("mixture weights must sum to 1")
    z = np.asarray(z, dtype=float)
    return special.ndtr(z[..., None] / s) @ w


def marginal_z(z, support, probs, log_range=None) -> np.ndarray:
    """Normal quantile of the marginal level, computed from the smaller tail."""
    z = np.asarray(z, dtype=float)
    lower = marginalize_levels(z, support, probs, log_range)
    upper = marginal_upper_tail(z, support, probs, log_range)
    return np.where(z > 0, -special.ndtri(upper), special.ndtri(lower))


def conservatism(levels_f0, levels_true, alpha: float, subset) -> float:
    f0 = np.asarray(levels_f0, dtype=float)
    tr = np.asarray(levels_true, dtype=float)
    if f0.shape != tr.shape:
        raise DomainError("level vectors differ in length")
    idx = np.arange(len(f0))[subset]
    if idx.size == 0:
        raise DomainError("subset must be nonempty")
    in_f0 = (f0[idx] >= alpha) & (f0[idx] <= 1.0 - alpha)
    in_tr = (tr[idx] >= alpha) & (tr[idx] <= 1.0 - alpha)
    diff = (in_f0 & ~in_tr).astype(int) - (in_tr & ~in_f0).astype(int)
    return float(diff.sum()) / idx.size


def run_trial(config: StudyConfig, k: int, keep_levels: bool = False) -> list[TrialResult]:
    z, sigma = generate_trial(config, k)
    if config.truth_mode == CONDITIONAL:
        z_obs = z
    else:
        z_obs = marginal_z(z, config.precision_support, config.precision_probs, config.log_precision_range)
    truth = true_conditional_levels(z, sigma)
    unaff = slice(0, config.n_unaffected)
    aff = slice(config.n_unaffected, config.d)
    out = []
    for mode in config.null_modes:
        fit = None
        if mode == ESTIMATED:
            try:
                fit = fit_null(z_obs, config.center_fraction)
            except NullFitError as exc:
                out.append(TrialResult(k, mode, sigma, math.nan, math.nan, error=str(exc)))
                continue
            f0 = special.ndtr((z_obs - fit.mu0) / fit.sigma0)
        else:
            f0 = special.ndtr(z_obs)
        cu = conservatism(f0, truth, config.alpha, unaff)
        ca = conservatism(f0, truth, config.alpha, aff) if config.n_affected else math.nan
        out.append(
            TrialResult(
                k, mode, sigma, cu, ca, null_fit=fit,
                levels_f0=f0 if keep_levels else None,
                levels_true=truth if keep_levels else None,
            )
        )
    return out


def _mean_se(vals):
    mean = float(vals.mean()) if vals.size else math.nan
    se = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else math.nan
    return mean, se


def summarize(results: list[TrialResult], null_modes) -> list[CellSummary]:
    cells = []
    for mode in null_modes:
        rows = [r for r in results if r.null_mode == mode]
        ok = [r for r in rows if not r.failed]
        n_failed = len(rows) - len(ok)
        for subset, attr in (("unaffected", "conservatism_unaffected"), ("affected", "conservatism_affected")):
            vals = np.array([getattr(r, attr) for r in ok], dtype=float)
            vals = vals[np.isfinite(vals)]
            mean, se = _mean_se(vals)
            mean_abs, se_abs = _mean_se(np.abs(vals))
            cells.append(CellSummary(mode, subset, mean, se, mean_abs, se_abs, int(vals.size), n_failed))
    return cells


def run_study(config: StudyConfig, threads: int = 1, keep_levels: bool = False):
    """Run all trials; returns (per-trial results ordered by k then mode, cell summaries)."""

    def one(k):
        return run_trial(config, k, keep_levels)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            per_trial = list(pool.map(one, range(config.K)))
    else:
        per_trial = [one(k) for k in range(config.K)]
    results = [r for rows in per_trial for r in rows]
    return results, summarize(results, config.null_modes)
