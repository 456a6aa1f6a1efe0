"""Thematic-proximity spatial weights.

Regions are close in thematic space when their publication subject-area
profiles correlate. The weights matrix W is the profile correlation matrix
with its diagonal zeroed, negative entries clamped to zero (negatively
correlated regions are treated as neutral), and rows standardized to sum to
one. Rows that clamp to all zeros are isolated and keep zero spatial lags.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateDimensions,
    MissingColumn,
    MissingData,
    NonNumericCell,
    RegionOrderMismatch,
)
from .indicators import PublicationRecord, compute_thematic_profile
from .panel import PanelDataset

_ROW_SUM_TOL = 1e-9


@dataclass(frozen=True)
class ThematicProfileMatrix:
    """Region x subject-area share matrix; each row sums to 1."""

    regions: tuple[str, ...]
    subject_areas: tuple[str, ...]
    shares: np.ndarray

    def __post_init__(self):
        shares = np.asarray(self.shares, dtype=float)
        n, s = len(self.regions), len(self.subject_areas)
        if shares.shape != (n, s):
            raise ValueError(f"shares shape {shares.shape} != ({n}, {s})")
        if np.any(shares < -_ROW_SUM_TOL):
            raise ValueError("profile shares must be nonnegative")
        sums = shares.sum(axis=1)
        off = np.abs(sums - 1.0) > _ROW_SUM_TOL
        if off.any():
            i = int(np.nonzero(off)[0][0])
            raise ValueError(
                f"profile row for {self.regions[i]!r} sums to {sums[i]}, expected 1"
            )
        shares = shares.copy()
        shares.flags.writeable = False
        object.__setattr__(self, "shares", shares)


@dataclass(frozen=True)
class SpatialWeights:
    """Row-standardized nonnegative proximity matrix with zero diagonal."""

    regions: tuple[str, ...]
    w: np.ndarray
    isolated: frozenset[int]

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        n = len(self.regions)
        if w.shape != (n, n):
            raise ValueError(f"weights shape {w.shape} != ({n}, {n})")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if np.any(np.diag(w) != 0):
            raise ValueError("weights diagonal must be exactly zero")
        sums = w.sum(axis=1)
        for i, s in enumerate(sums):
            if i in self.isolated:
                if s != 0:
                    raise ValueError(f"isolated row {i} has nonzero sum {s}")
            elif abs(s - 1.0) > _ROW_SUM_TOL:
                raise ValueError(f"row {i} sums to {s}, expected 1")
        w = w.copy()
        w.flags.writeable = False
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "isolated", frozenset(int(i) for i in self.isolated))


def correlation_matrix(m: ThematicProfileMatrix) -> np.ndarray:
    """Pearson correlations between profile rows.

    Zero-variance rows (uniform profiles) correlate 0 with everything,
    themselves included; positive-variance rows keep diagonal 1.
    """
    n, s = m.shares.shape
    if n < 2 or s < 2:
        raise DegenerateDimensions(
            f"need at least 2 regions and 2 subject areas, got {n} x {s}"
        )
    centered = m.shares - m.shares.mean(axis=1, keepdims=True)
    norms = np.sqrt((centered**2).sum(axis=1))
    degenerate = norms == 0
    safe = np.where(degenerate, 1.0, norms)
    unit = centered / safe[:, np.newaxis]
    corr = unit @ unit.T
    corr[degenerate, :] = 0.0
    corr[:, degenerate] = 0.0
    np.clip(corr, -1.0, 1.0, out=corr)
    keep = ~degenerate
    corr[keep, keep] = 1.0
    return corr


def build_weights(c: np.ndarray, regions=None) -> SpatialWeights:
    """Zero the diagonal, clamp negatives, row-standardize.

    Rows whose clamped sum is zero stay all-zero and are recorded isolated.
    """
    c = np.asarray(c, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError(f"correlation matrix must be square, got {c.shape}")
    n = c.shape[0]
    if regions is None:
        regions = tuple(f"r{i}" for i in range(n))
    w = c.copy()
    np.fill_diagonal(w, 0.0)
    np.clip(w, 0.0, None, out=w)
    sums = w.sum(axis=1)
    isolated = frozenset(int(i) for i in np.nonzero(sums == 0)[0])
    nonzero = sums > 0
    w[nonzero] /= sums[nonzero, np.newaxis]
    return SpatialWeights(tuple(regions), w, isolated)


def build_profile_matrix(
    pubs: list[PublicationRecord],
    vocabulary: list[str],
    regions: list[str] | None = None,
) -> ThematicProfileMatrix:
    """Assemble per-region thematic profiles from publication records."""
    by_region: dict[str, list[PublicationRecord]] = {}
    for rec in pubs:
        for region in rec.regions:
            by_region.setdefault(region, []).append(rec)
    if regions is None:
        regions = sorted(by_region)
    shares = np.zeros((len(regions), len(vocabulary)))
    for i, region in enumerate(regions):
        shares[i] = compute_thematic_profile(by_region.get(region, []), vocabulary)
    return ThematicProfileMatrix(tuple(regions), tuple(vocabulary), shares)


def spatial_lag(w: SpatialWeights, d: PanelDataset, x: str, out: str) -> PanelDataset:
    """slX[r, t] = sum_j W[r, j] * x[j, t]; isolated regions get 0."""
    if w.regions != d.region_ids:
        raise RegionOrderMismatch(
            "weights regions do not match dataset regions in order"
        )
    return d.with_variable(out, w.w @ d.var(x))


def lag_values(w: SpatialWeights, values: np.ndarray) -> np.ndarray:
    """Spatial lag of a raw (n, T) array (no dataset wrapping)."""
    return w.w @ values


# ---------------------------------------------------------------------------
# i/o
# ---------------------------------------------------------------------------


def write_weights_csv(w: SpatialWeights, path) -> None:
    """Dense matrix with a region header row and column."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["region", *w.regions])
        for i, region in enumerate(w.regions):
            writer.writerow([region, *[repr(float(v)) for v in w.w[i]]])


def load_weights_csv(path) -> SpatialWeights:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingData(f"{path}: file is empty") from None
        if not header or header[0] != "region":
            raise MissingColumn(f"{path}: first header cell must be 'region'")
        regions = tuple(header[1:])
        rows = []
        row_regions = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            row_regions.append(row[0])
            try:
                rows.append([float(c) for c in row[1:]])
            except ValueError as exc:
                raise NonNumericCell(f"{path}:{lineno}: {exc}") from None
    if tuple(row_regions) != regions:
        raise RegionOrderMismatch(f"{path}: row and column region order differ")
    w = np.asarray(rows)
    isolated = frozenset(int(i) for i in np.nonzero(w.sum(axis=1) == 0)[0])
    return SpatialWeights(regions, w, isolated)


def weights_to_dict(w: SpatialWeights) -> dict:
    return {
        "regions": list(w.regions),
        "w": [[float(v) for v in row] for row in w.w],
        "isolated": sorted(w.regions[i] for i in w.isolated),
    }


def write_weights_json(w: SpatialWeights, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(weights_to_dict(w), fh, indent=2)
        fh.write("\n")


def write_profiles_csv(m: ThematicProfileMatrix, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["region", *m.subject_areas])
        for i, region in enumerate(m.regions):
            writer.writerow([region, *[repr(float(v)) for v in m.shares[i]]])


def load_profiles_csv(path) -> ThematicProfileMatrix:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingData(f"{path}: file is empty") from None
        if not header or header[0] != "region":
            raise MissingColumn(f"{path}: first header cell must be 'region'")
        areas = tuple(header[1:])
        regions = []
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            regions.append(row[0])
            try:
                rows.append([float(c) for c in row[1:]])
            except ValueError as exc:
                raise NonNumericCell(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise MissingData(f"{path}: no profile rows")
    return ThematicProfileMatrix(tuple(regions), areas, np.asarray(rows))
