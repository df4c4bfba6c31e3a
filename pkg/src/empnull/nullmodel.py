"""Empirical null estimation on the z scale and adjustment of levels.

The null is fitted by maximum likelihood to the z-values that fall inside
a central quantile interval, treating them as a truncated normal sample.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from .errors import (
    ConvergenceError,
    DegenerateIntervalError,
    DomainError,
    InsufficientDataError,
)
from .levels import ConfidenceVector, INCLUDED

SIGMA_MIN = 1e-3
MIN_Z = 100
MIN_CENTRAL = 10
DEFAULT_CENTER_FRACTION = 0.85
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class NullModel:
    mu0: float = 0.0
    sigma0: float = 1.0
    p0: float = 1.0
    provenance: str = "assumed"
    central_interval: tuple[float, float] | None = None
    n_central: int | None = None
    loglik: float | None = None

    def __post_init__(self):
        if self.provenance not in ("assumed", "estimated"):
            raise DomainError(f"unknown provenance {self.provenance!r}")
        if not self.sigma0 >= SIGMA_MIN:
            raise DomainError(f"sigma0 must be >= {SIGMA_MIN}, got {self.sigma0}")
        if self.provenance == "assumed" and (self.mu0, self.sigma0, self.p0) != (0.0, 1.0, 1.0):
            raise DomainError("an assumed null must be N(0, 1) with p0 = 1")
        if self.central_interval is not None:
            a, b = self.central_interval
            if not a < b:
                raise DomainError("central interval must satisfy a < b")

    @classmethod
    def assumed(cls) -> "NullModel":
        return cls()

    @property
    def is_identity(self) -> bool:
        return self.mu0 == 0.0 and self.sigma0 == 1.0

    def to_dict(self) -> dict:
        return {
            "mu0": self.mu0,
            "sigma0": self.sigma0,
            "p0": self.p0,
            "provenance": self.provenance,
            "central_interval": None if self.central_interval is None else list(self.central_interval),
            "n_central": self.n_central,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NullModel":
        ci = d.get("central_interval")
        return cls(
            mu0=float(d["mu0"]),
            sigma0=float(d["sigma0"]),
            p0=float(d.get("p0", 1.0)),
            provenance=d.get("provenance", "estimated"),
            central_interval=None if ci is None else (float(ci[0]), float(ci[1])),
            n_central=None if d.get("n_central") is None else int(d["n_central"]),
        )

    def to_json(self) -> str:
        # json writes floats with repr, which round-trips exactly
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "NullModel":
        return cls.from_dict(json.loads(text))


def log_interval_mass(mu, sigma, a, b):
    """log(Phi((b-mu)/sigma) - Phi((a-mu)/sigma)), accurate in both tails."""
    lo = (a - mu) / sigma
    hi = (b - mu) / sigma
    if lo > 0:
        # reflect so the difference is taken between lower-tail masses
        lo, hi = -hi, -lo
    lhi = special.log_ndtr(hi)
    llo = special.log_ndtr(lo)
    return lhi + math.log1p(-math.exp(llo - lhi))


def truncated_loglik(mu, sigma, zc, a, b):
    """Log-likelihood of the central sample ``zc`` under N(mu, sigma^2) truncated to [a, b]."""
    r = (zc - mu) / sigma
    n0 = len(zc)
    return (
        -0.5 * float(np.dot(r, r))
        - n0 * (_LOG_SQRT_2PI + math.log(sigma))
        - n0 * log_interval_mass(mu, sigma, a, b)
    )


def _neg_loglik_and_grad(theta, zc, a, b, n0, s1, s2):
    mu, sigma = theta
    # sufficient statistics keep each evaluation O(1)
    ss = s2 - 2.0 * mu * s1 + n0 * mu * mu
    lh = log_interval_mass(mu, sigma, a, b)
    ll = -0.5 * ss / sigma**2 - n0 * (_LOG_SQRT_2PI + math.log(sigma)) - n0 * lh
    alpha = (a - mu) / sigma
    beta = (b - mu) / sigma
    h = math.exp(lh)
    phia = math.exp(-0.5 * alpha * alpha) / math.sqrt(2 * math.pi)
    phib = math.exp(-0.5 * beta * beta) / math.sqrt(2 * math.pi)
    dmu = (s1 - n0 * mu) / sigma**2 + n0 * (phib - phia) / (sigma * h)
    dsig = ss / sigma**3 - n0 / sigma + n0 * (beta * phib - alpha * phia) / (sigma * h)
    return -ll, -np.array([dmu, dsig])


def central_interval(z: np.ndarray, center_fraction: float) -> tuple[float, float]:
    lo = (1.0 - center_fraction) / 2.0
    a, b = np.quantile(z, [lo, 1.0 - lo])
    return float(a), float(b)


def fit_null(z, center_fraction: float = DEFAULT_CENTER_FRACTION) -> NullModel:
    """Maximum-likelihood fit of a normal null to the central z-values.

    Non-finite entries of ``z`` are dropped before fitting.
    """
    z = np.asarray(z, dtype=float)
    z = z[np.isfinite(z)]
    if not 0.0 < center_fraction <= 1.0:
        raise DomainError("center_fraction must lie in (0, 1]")
    d = len(z)
    if d < MIN_Z:
        raise InsufficientDataError(f"need at least {MIN_Z} finite z-values, got {d}")
    a, b = central_interval(z, center_fraction)
    zc = z[(z >= a) & (z <= b)]
    n0 = len(zc)
    if n0 < MIN_CENTRAL or not a < b:
        raise DegenerateIntervalError(f"central interval [{a}, {b}] holds {n0} values")

    sd_all = float(np.std(z, ddof=1))
    sig_hi = max(10.0 * sd_all, 2 * SIGMA_MIN)
    q1, med, q3 = np.quantile(zc, [0.25, 0.5, 0.75])
    mu_start = float(med)
    sig_start = float(np.clip((q3 - q1) / 1.349, SIGMA_MIN, sig_hi))

    s1 = float(zc.sum())
    s2 = float(np.dot(zc, zc))
    args = (zc, a, b, n0, s1, s2)
    bounds = [(a, b), (SIGMA_MIN, sig_hi)]
    res = optimize.minimize(
        _neg_loglik_and_grad,
        x0=[mu_start, sig_start],
        args=args,
        jac=True,
        method="L-BFGS-B",
        bounds=bounds,
        options={"ftol": 1e-15, "gtol": 1e-11, "maxiter": 2000},
    )
    mu, sigma = _newton_polish(res.x, args, bounds)
    ll = truncated_loglik(mu, sigma, zc, a, b)
    _, grad = _neg_loglik_and_grad((mu, sigma), *args)
    best = _model(mu, sigma, zc, a, b, d, ll)
    if not np.all(np.isfinite([mu, sigma, ll])):
        raise ConvergenceError("null fit produced non-finite parameters", best=best)
    scale = max(1.0, n0)
    interior = [bounds[0][0] < mu < bounds[0][1], bounds[1][0] < sigma < bounds[1][1]]
    if any(interior[i] and abs(grad[i]) > 1e-4 * scale for i in range(2)):
        raise ConvergenceError(f"null fit did not converge: {res.message}", best=best)
    return best


def _newton_polish(x, args, bounds, steps=50):
    """Projected Newton iterations with backtracking, from the quasi-Newton result."""
    x = np.array(x, dtype=float)
    f, g = _neg_loglik_and_grad(x, *args)
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    n0 = args[3]
    for _ in range(steps):
        hess = np.empty((2, 2))
        for j in range(2):
            h = 1e-6 * max(1.0, abs(x[j]))
            xp, xm = x.copy(), x.copy()
            xp[j] += h
            xm[j] -= h
            hess[:, j] = (_neg_loglik_and_grad(xp, *args)[1] - _neg_loglik_and_grad(xm, *args)[1]) / (2 * h)
        hess = 0.5 * (hess + hess.T)
        # variables pinned at a bound with the gradient pushing outward stay fixed
        free = ~(((x <= lo) & (g > 0)) | ((x >= hi) & (g < 0)))
        if not free.any() or np.abs(g[free]).max() < 1e-10 * n0:
            break
        step = np.zeros(2)
        hf = hess[np.ix_(free, free)]
        if np.linalg.eigvalsh(hf).min() > 0:
            step[free] = np.linalg.solve(hf, g[free])
        else:
            step[free] = g[free] / max(np.abs(np.diag(hf)).max(), 1.0)
        t = 1.0
        for _ in range(60):
            xn = np.clip(x - t * step, lo, hi)
            fn, gn = _neg_loglik_and_grad(xn, *args)
            if fn <= f:
                break
            t *= 0.5
        else:
            break
        moved = np.abs(xn - x).max()
        x, f, g = xn, fn, gn
        if moved < 1e-15:
            break
    return x


def _model(mu, sigma, zc, a, b, d, ll):
    n0 = len(zc)
    mass = math.exp(log_interval_mass(mu, sigma, a, b))
    p0 = min(1.0, (n0 / d) / mass)
    return NullModel(
        mu0=float(mu),
        sigma0=float(sigma),
        p0=float(p0),
        provenance="estimated",
        central_interval=(a, b),
        n_central=n0,
        loglik=float(ll),
    )


def adjust_levels(levels, null: NullModel) -> np.ndarray:
    """Vectorised re-derivation of levels under ``null``; NaN passes through."""
    p = np.asarray(levels, dtype=float)
    if null.is_identity:
        return p.copy()
    return special.ndtr((special.ndtri(p) - null.mu0) / null.sigma0)


def adjust_z(z, null: NullModel) -> np.ndarray:
    """Levels under ``null`` computed straight from z-values."""
    z = np.asarray(z, dtype=float)
    if null.is_identity:
        return special.ndtr(z)
    return special.ndtr((z - null.mu0) / null.sigma0)


def adjust_level(level: float, null: NullModel) -> float:
    if not 0.0 < level < 1.0:
        raise DomainError(f"level must lie strictly inside (0, 1), got {level}")
    return float(adjust_levels(level, null))


def adjust_vector(v: ConfidenceVector, null: NullModel) -> ConfidenceVector:
    inc = v.included
    level = v.level.copy()
    z = v.z.copy()
    reasons = list(v.exclusion_reason)
    if not null.is_identity:
        level[inc] = adjust_levels(v.level[inc], null)
        z[inc] = (v.z[inc] - null.mu0) / null.sigma0
        # adjustment can saturate a level at 0 or 1 in double precision
        sat = inc & ((level <= 0.0) | (level >= 1.0))
        for i in np.flatnonzero(sat):
            reasons[i] = "nonfinite_z"
        level[sat] = np.nan
        z[sat] = np.nan
    return ConfidenceVector(
        list(v.feature_ids), level, z, reasons, None if v.n_obs is None else v.n_obs.copy()
    )


__all__ = [
    "NullModel",
    "fit_null",
    "adjust_level",
    "adjust_levels",
    "adjust_vector",
    "adjust_z",
    "truncated_loglik",
    "central_interval",
    "INCLUDED",
    "DEFAULT_CENTER_FRACTION",
]
