"""Readers and writers for the on-disk formats used by the CLI.

Floats are written with ``repr`` so every value reads back bit-identical.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np
from scipy.special import ndtri

from .errors import InputError
from .levels import ConfidenceVector, FeatureTable, INCLUDED
from .nullmodel import NullModel
from .screening import DecisionReport

LEVEL_COLUMNS = ["feature_id", "n_obs", "level", "z", "exclusion_reason"]
_MISSING = {"", "NA"}


def fmt(x) -> str:
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return ""
    return repr(x)


def _parse(cell: str) -> float:
    return math.nan if cell.strip() == "" else float(cell)


def read_feature_tsv(path, log_base: str = "e") -> FeatureTable:
    """One feature per line: id, then tab-separated observations (blank = missing)."""
    ids, obs = [], []
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            cells = line.split("\t")
            fid = cells[0].strip()
            if not fid:
                raise InputError(f"line {lineno}: missing feature id")
            values = []
            for cell in cells[1:]:
                cell = cell.strip()
                if cell in _MISSING:
                    continue
                try:
                    values.append(float(cell))
                except ValueError:
                    raise InputError(f"line {lineno}: cannot parse {cell!r} as a number") from None
            ids.append(fid)
            obs.append(values)
    if not ids:
        raise InputError(f"{path}: no features found")
    return FeatureTable(ids, obs, log_base)


def write_levels_csv(v: ConfidenceVector, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LEVEL_COLUMNS)
        for i, fid in enumerate(v.feature_ids):
            n = "" if v.n_obs is None else str(int(v.n_obs[i]))
            w.writerow([fid, n, fmt(v.level[i]), fmt(v.z[i]), v.exclusion_reason[i]])


def read_levels_csv(path) -> ConfidenceVector:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise InputError(f"{path}: no rows")
    missing = {"feature_id", "level"} - set(rows[0])
    if missing:
        raise InputError(f"{path}: missing columns {sorted(missing)}")
    ids, levels, zs, reasons, nobs = [], [], [], [], []
    for lineno, row in enumerate(rows, start=2):
        try:
            p = _parse(row["level"])
            z = _parse(row.get("z") or "")
        except ValueError:
            raise InputError(f"line {lineno}: unparseable number") from None
        reason = (row.get("exclusion_reason") or "").strip()
        if not reason:
            reason = INCLUDED if 0.0 < p < 1.0 else "nonfinite_z"
        if reason == INCLUDED:
            if not 0.0 < p < 1.0:
                raise InputError(f"line {lineno}: included level {p!r} outside (0, 1)")
            if math.isnan(z):
                z = float(ndtri(p))
        else:
            p, z = math.nan, math.nan
        ids.append(row["feature_id"])
        levels.append(p)
        zs.append(z)
        reasons.append(reason)
        n = (row.get("n_obs") or "").strip()
        nobs.append(int(n) if n else -1)
    n_obs = np.array(nobs) if all(n >= 0 for n in nobs) else None
    return ConfidenceVector(ids, levels, zs, reasons, n_obs)


def read_null_json(path) -> NullModel:
    try:
        return NullModel.from_json(Path(path).read_text())
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"{path}: not a valid null model: {exc}") from None


def write_null_json(null: NullModel, path) -> None:
    Path(path).write_text(null.to_json() + "\n")


def write_decisions_csv(report: DecisionReport, levels: ConfidenceVector, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature_id", "level", "error_prob", "action"])
        for i, fid in enumerate(report.feature_ids):
            w.writerow([fid, fmt(levels.level[i]), fmt(report.error_prob[i]), report.action[i]])


def write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(c) if isinstance(c, (float, np.floating)) else c for c in row])
