"""Per-feature one-sided confidence levels from replicate log ratios.

The level of a feature is the confidence that its mean log ratio is
negative, which equals the upper-tail p-value of the one-sample t test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special

from .errors import InputError, NonFiniteObservationError

INCLUDED = "none"
TOO_FEW = "too_few_observations"
NONFINITE_Z = "nonfinite_z"


@dataclass
class FeatureTable:
    """Ragged table of replicate observations; missing values are simply absent."""

    feature_ids: list[str]
    observations: list[np.ndarray]
    log_base: str = "e"

    def __post_init__(self):
        self.feature_ids = [str(f) for f in self.feature_ids]
        self.observations = [np.asarray(o, dtype=float).ravel() for o in self.observations]
        if len(self.feature_ids) != len(self.observations):
            raise InputError("feature_ids and observations differ in length")
        seen = set()
        for fid, obs in zip(self.feature_ids, self.observations):
            if not fid:
                raise InputError("empty feature id")
            if fid in seen:
                raise InputError(f"duplicate feature id {fid!r}")
            seen.add(fid)
            bad = ~np.isfinite(obs)
            if bad.any():
                raise NonFiniteObservationError(fid, float(obs[bad][0]))

    @property
    def n_features(self) -> int:
        return len(self.feature_ids)

    @classmethod
    def from_mapping(cls, data: dict[str, Sequence[float]], log_base: str = "e") -> "FeatureTable":
        return cls(list(data), [np.asarray(v, dtype=float) for v in data.values()], log_base)


@dataclass
class ConfidenceVector:
    """Confidence levels of theta_i < 0 with their normal quantiles.

    Excluded features carry NaN in both ``level`` and ``z`` and a reason
    other than ``"none"``.
    """

    feature_ids: list[str]
    level: np.ndarray
    z: np.ndarray
    exclusion_reason: list[str]
    n_obs: np.ndarray | None = field(default=None)

    def __post_init__(self):
        self.feature_ids = list(self.feature_ids)
        self.level = np.asarray(self.level, dtype=float)
        self.z = np.asarray(self.z, dtype=float)
        self.exclusion_reason = list(self.exclusion_reason)
        if self.n_obs is not None:
            self.n_obs = np.asarray(self.n_obs, dtype=int)
        n = len(self.feature_ids)
        if not (len(self.level) == len(self.z) == len(self.exclusion_reason) == n):
            raise InputError("ConfidenceVector fields differ in length")

    def __len__(self):
        return len(self.feature_ids)

    @property
    def included(self) -> np.ndarray:
        return np.array([r == INCLUDED for r in self.exclusion_reason], dtype=bool)

    @property
    def n_excluded(self) -> int:
        return int((~self.included).sum())

    def included_z(self) -> np.ndarray:
        return self.z[self.included]

    @classmethod
    def from_levels(cls, levels, feature_ids=None, n_obs=None) -> "ConfidenceVector":
        """Build a vector from raw levels; NaN marks an already excluded feature."""
        levels = np.asarray(levels, dtype=float)
        if feature_ids is None:
            feature_ids = [f"f{i + 1}" for i in range(len(levels))]
        reasons = []
        for p in levels:
            if np.isnan(p):
                reasons.append(TOO_FEW)
            elif p <= 0.0 or p >= 1.0:
                reasons.append(NONFINITE_Z)
            else:
                reasons.append(INCLUDED)
        return _finish(list(feature_ids), levels, reasons, n_obs)


def _finish(feature_ids, levels, reasons, n_obs=None) -> ConfidenceVector:
    levels = np.array(levels, dtype=float)
    inc = np.array([r == INCLUDED for r in reasons], dtype=bool)
    levels[~inc] = np.nan
    z = np.full(len(levels), np.nan)
    z[inc] = special.ndtri(levels[inc])
    return ConfidenceVector(feature_ids, levels, z, list(reasons), n_obs)


def t_level(obs: np.ndarray) -> tuple[float, str]:
    """Upper-tail one-sample t p-value of a single feature's observations."""
    n = len(obs)
    if n < 2:
        return math.nan, TOO_FEW
    mean = float(np.mean(obs))
    # identical values must give sd == 0 exactly, not rounding residue
    sd = 0.0 if np.ptp(obs) == 0 else float(np.std(obs, ddof=1))
    if sd == 0.0:
        if mean == 0.0:
            return 0.5, INCLUDED
        return math.nan, NONFINITE_Z
    t = mean / (sd / math.sqrt(n))
    # stdtr(df, -t) = 1 - T(t) without cancellation in the upper tail
    p = float(special.stdtr(n - 1, -t))
    if p <= 0.0 or p >= 1.0:
        return math.nan, NONFINITE_Z
    return p, INCLUDED


def levels_from_table(table: FeatureTable) -> ConfidenceVector:
    if table.n_features == 0:
        raise InputError("feature table is empty")
    levels, reasons = [], []
    for obs in table.observations:
        p, reason = t_level(obs)
        levels.append(p)
        reasons.append(reason)
    n_obs = np.array([len(o) for o in table.observations], dtype=int)
    return _finish(table.feature_ids, levels, reasons, n_obs)


def complement(v: ConfidenceVector) -> ConfidenceVector:
    """Confidence of theta_i > 0 for every feature."""
    return ConfidenceVector(
        list(v.feature_ids),
        1.0 - v.level,
        -v.z,
        list(v.exclusion_reason),
        None if v.n_obs is None else v.n_obs.copy(),
    )
