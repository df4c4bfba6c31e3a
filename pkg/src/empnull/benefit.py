"""Score whether conditioning on an estimated null is worthwhile.

Relevance is the order-1/2 Renyi divergence between the estimated and the
theoretical N(0, 1) null. Nonancillarity is the divergence between the
estimate and a refit after the most extreme levels are replaced by their
expected null order statistics. Benefit is relevance minus nonancillarity.
All divergences are in bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BenefitError, DomainError, NullFitError
from .levels import ConfidenceVector, _finish
from .nullmodel import DEFAULT_CENTER_FRACTION, NullModel, fit_null

SIGN_PRESERVING = "sign-preserving"
LITERAL = "literal"


@dataclass
class BenefitCurve:
    d1_grid: np.ndarray
    nonancillarity: np.ndarray
    relevance: float
    benefit: np.ndarray
    refits: list[NullModel] | None = None

    def sign_changes(self) -> int:
        s = np.sign(self.benefit)
        s = s[s != 0]
        return int(np.count_nonzero(s[1:] != s[:-1]))


def renyi_half(f: NullModel, g: NullModel) -> float:
    """Order-1/2 Renyi divergence between two normals, in bits.

    Equal to -2 log2 of the Bhattacharyya coefficient; symmetric in its
    arguments and zero only for identical distributions.
    """
    sf, sg = f.sigma0, g.sigma0
    if not (sf > 0 and sg > 0):
        raise DomainError("both scales must be positive")
    s2 = sf * sf + sg * sg
    mean_term = (f.mu0 - g.mu0) ** 2 / (4.0 * s2)
    # (sf^2 + sg^2) / (2 sf sg) = 1 + (sf - sg)^2 / (2 sf sg)
    scale_term = 0.5 * math.log1p((sf - sg) ** 2 / (2.0 * sf * sg))
    return (2.0 / math.log(2.0)) * (mean_term + scale_term)


def normal(mu: float, sigma: float) -> NullModel:
    """Convenience constructor for an arbitrary normal on the z scale."""
    if mu == 0.0 and sigma == 1.0:
        return NullModel.assumed()
    return NullModel(mu0=mu, sigma0=sigma, p0=1.0, provenance="estimated")


def denull(levels: ConfidenceVector, d1: int, mode: str = SIGN_PRESERVING) -> ConfidenceVector:
    """Replace the ``d1`` included levels farthest from 1/2 by null order statistics.

    A replaced level with ascending distance rank r (1-based, among the d
    included levels) becomes (r - 1/2)/d; in sign-preserving mode a level
    below 1/2 becomes 1 - (r - 1/2)/d instead.
    """
    if mode not in (SIGN_PRESERVING, LITERAL):
        raise DomainError(f"unknown denull mode {mode!r}")
    inc = np.flatnonzero(levels.included)
    d = len(inc)
    if not 0 <= d1 <= d:
        raise DomainError(f"d1 must lie in [0, {d}], got {d1}")
    new = levels.level.copy()
    if d1 > 0:
        dist = np.abs(levels.level[inc] - 0.5)
        ranked = inc[np.argsort(dist, kind="stable")]
        for r in range(d - d1 + 1, d + 1):
            i = ranked[r - 1]
            q = (r - 0.5) / d
            if mode == SIGN_PRESERVING and levels.level[i] < 0.5:
                q = 1.0 - q
            new[i] = q
    out = _finish(list(levels.feature_ids), new, list(levels.exclusion_reason),
                  None if levels.n_obs is None else levels.n_obs.copy())
    # untouched entries keep their original z exactly
    keep = levels.included & (new == levels.level)
    out.z[keep] = levels.z[keep]
    return out


def parse_grid(text: str) -> list[int]:
    """``"0,100,200"`` or ``"0:100:2000"`` (inclusive stop)."""
    text = text.strip()
    if ":" in text:
        start, step, stop = (int(t) for t in text.split(":"))
        if step <= 0:
            raise DomainError("grid step must be positive")
        return list(range(start, stop + 1, step))
    return [int(t) for t in text.split(",") if t.strip()]


def benefit_curve(
    levels: ConfidenceVector,
    null_est: NullModel,
    d1_grid,
    center_fraction: float | None = None,
    mode: str = SIGN_PRESERVING,
) -> BenefitCurve:
    if center_fraction is None:
        center_fraction = DEFAULT_CENTER_FRACTION
    grid = np.array(sorted(int(x) for x in d1_grid), dtype=int)
    relevance = renyi_half(null_est, NullModel.assumed())
    nonanc = np.empty(len(grid))
    refits = []
    for j, d1 in enumerate(grid):
        try:
            refit = fit_null(denull(levels, int(d1), mode).included_z(), center_fraction)
        except (NullFitError, DomainError) as exc:
            raise BenefitError(int(d1), exc) from exc
        refits.append(refit)
        nonanc[j] = renyi_half(refit, null_est)
    return BenefitCurve(grid, nonanc, relevance, relevance - nonanc, refits)
