"""Joint/marginal histograms over the overlap region and the MI objective.

Features of both scans inside the overlap region are binned into a 2D
histogram whose bin 0 on each axis is reserved for the no-feature value of
unoccupied voxels; the (0, 0) cell is computed analytically so empty space
contributes alignment evidence without ever being enumerated.  Mutual
information is H(X) + H(Y) - H(X, Y) in nats.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import EmptyOverlapError, OutOfBoundsError
from .geometry import EulerPose, PointCloud, apply_transform, euler_to_transform
from .voxel import (
    FeatureKind,
    FeatureMap,
    GridSpec,
    OverlapRegion,
    compute_feature_map,
    compute_overlap,
    keys_in_region,
    overlap_voxel_count,
    voxelize,
)

# Worst-possible objective value: returned for candidate poses with no
# overlap so the optimizer retreats instead of aborting mid-run.
NO_OVERLAP_SENTINEL = -1e300

DEFAULT_BIN_COUNT = 32
DEFAULT_UPPER_CLAMP = {FeatureKind.VARZ: 2.0, FeatureKind.COUNT: 64.0}


@dataclass(frozen=True)
class BinningSpec:
    """Linear binning of occupied-voxel features.

    ``bin_count`` occupied bins of width ``upper_clamp / bin_count``; values
    at or above ``upper_clamp`` land in the top bin.  Bin 0 is reserved for
    the no-feature value.
    """

    kind: FeatureKind
    bin_count: int = DEFAULT_BIN_COUNT
    upper_clamp: float = 0.0

    def __post_init__(self):
        if self.bin_count < 2:
            raise ValueError(f"bin_count must be >= 2, got {self.bin_count}")
        if self.upper_clamp == 0.0:
            object.__setattr__(self, "upper_clamp", DEFAULT_UPPER_CLAMP[self.kind])
        if not self.upper_clamp > 0:
            raise ValueError(f"upper_clamp must be > 0, got {self.upper_clamp}")


def bin_feature(value: float | None, spec: BinningSpec) -> int:
    """Bin a single feature value; None (no-feature) maps to bin 0."""
    if value is None:
        return 0
    if not np.isfinite(value) or value < 0:
        raise ValueError(f"feature value must be finite and >= 0, got {value}")
    b = spec.bin_count
    return 1 + min(b - 1, int(value / spec.upper_clamp * b))


def bin_features(values: np.ndarray, spec: BinningSpec) -> np.ndarray:
    """Vectorized :func:`bin_feature` for occupied values only."""
    values = np.asarray(values, dtype=np.float64)
    if values.size and (not np.isfinite(values).all() or (values < 0).any()):
        raise ValueError("feature values must be finite and >= 0")
    b = spec.bin_count
    raw = np.floor(values / spec.upper_clamp * b).astype(np.int64)
    return 1 + np.minimum(b - 1, raw)


@dataclass(frozen=True)
class JointHistogram:
    """(B+1) x (B+1) joint counts; row = scan A bin, column = scan B bin.

    Index 0 on each axis is the no-feature bin.  ``total`` always equals the
    voxel count of the overlap region the histogram was built from.
    """

    counts: np.ndarray
    total: int
    spec: BinningSpec

    def row_marginal(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def col_marginal(self) -> np.ndarray:
        return self.counts.sum(axis=0)


@dataclass(frozen=True)
class MIResult:
    """Entropy breakdown of one histogram, all in nats."""

    mi: float
    h_x: float
    h_y: float
    h_xy: float


def _bincount_chunked(flat: np.ndarray, n_cells: int, n_jobs: int) -> np.ndarray:
    """Histogram of flat cell indices; chunked map + ordered integer reduce."""
    if n_jobs <= 1 or flat.size < 2 * n_jobs:
        return np.bincount(flat, minlength=n_cells)
    chunks = np.array_split(flat, n_jobs)
    out = np.zeros(n_cells, dtype=np.int64)
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        futures = [pool.submit(np.bincount, c, minlength=n_cells) for c in chunks]
        for fut in futures:
            out += fut.result()
    return out


def build_joint_histogram(feat_a: FeatureMap, feat_b: FeatureMap,
                          region: OverlapRegion, spec: BinningSpec,
                          n_jobs: int = 1) -> JointHistogram:
    """Count co-located feature-bin pairs over every voxel of the region.

    Voxels occupied in one scan only pair with bin 0 on the other axis; the
    population of voxels occupied in neither is region size minus the union
    of occupied keys, credited to cell (0, 0) without enumeration.
    """
    if feat_a.kind is not spec.kind or feat_b.kind is not spec.kind:
        raise ValueError("feature maps and binning spec must share one kind")
    if region.is_empty:
        raise EmptyOverlapError("overlap region is empty")
    n_region = overlap_voxel_count(region)

    mask_a = keys_in_region(feat_a.keys, region)
    mask_b = keys_in_region(feat_b.keys, region)
    keys_a, vals_a = feat_a.keys[mask_a], feat_a.values[mask_a]
    keys_b, vals_b = feat_b.keys[mask_b], feat_b.values[mask_b]

    common, ia, ib = np.intersect1d(keys_a, keys_b, assume_unique=True,
                                    return_indices=True)
    only_a = np.ones(keys_a.shape, dtype=bool)
    only_a[ia] = False
    only_b = np.ones(keys_b.shape, dtype=bool)
    only_b[ib] = False

    width = spec.bin_count + 1
    flat = np.concatenate([
        bin_features(vals_a[ia], spec) * width + bin_features(vals_b[ib], spec),
        bin_features(vals_a[only_a], spec) * width,
        bin_features(vals_b[only_b], spec),
    ])
    counts = _bincount_chunked(flat, width * width, n_jobs).reshape(width, width)
    n_union = keys_a.size + keys_b.size - common.size
    counts[0, 0] += n_region - n_union
    return JointHistogram(counts=counts, total=n_region, spec=spec)


def entropy(counts) -> float:
    """Shannon entropy in nats of a non-negative count array (any shape)."""
    arr = np.asarray(counts, dtype=np.float64).ravel()
    if arr.size and (arr < 0).any():
        raise ValueError("counts must be non-negative")
    total = arr.sum()
    if not total > 0:
        raise ValueError("entropy of an all-zero distribution is undefined")
    p = arr[arr > 0] / total
    # summing in sorted order makes the result independent of cell order,
    # so transposed histograms give bit-identical entropies
    return float(-np.sort(p * np.log(p)).sum())


def mutual_information(hist: JointHistogram,
                       include_phi: bool = True) -> MIResult:
    """MI = H(X) + H(Y) - H(X, Y) over the joint histogram.

    With ``include_phi=False`` the no-feature row and column are dropped and
    MI is computed over voxels occupied in both scans only.
    """
    m = hist.counts if include_phi else hist.counts[1:, 1:]
    h_x = entropy(m.sum(axis=1))
    h_y = entropy(m.sum(axis=0))
    h_xy = entropy(m)
    mi = h_x + h_y - h_xy
    if -1e-12 <= mi < 0.0:
        mi = 0.0
    return MIResult(mi=mi, h_x=h_x, h_y=h_y, h_xy=h_xy)


def mi_objective(feat_a: FeatureMap, cloud_b: PointCloud, pose: EulerPose,
                 grid: GridSpec, spec: BinningSpec,
                 include_phi: bool = True, n_jobs: int = 1) -> float:
    """One objective evaluation: transform B, re-voxelize, and score MI.

    Scan A's feature map is precomputed once per run and passed in.  Returns
    the worst-possible sentinel for candidate poses with no overlap (or that
    push points off the representable grid) so the optimizer retreats.
    """
    if feat_a.kind is not spec.kind:
        raise ValueError("feature map and binning spec must share one kind")
    moved = apply_transform(cloud_b, euler_to_transform(pose))
    try:
        vox_b = voxelize(moved, grid)
    except OutOfBoundsError:
        return NO_OVERLAP_SENTINEL
    feat_b = compute_feature_map(vox_b, moved, spec.kind, n_jobs=n_jobs)
    region = compute_overlap(feat_a.bounds, feat_b.bounds)
    if region.is_empty:
        return NO_OVERLAP_SENTINEL
    hist = build_joint_histogram(feat_a, feat_b, region, spec, n_jobs=n_jobs)
    try:
        return mutual_information(hist, include_phi=include_phi).mi
    except ValueError:
        # possible only with include_phi=False and zero co-occupied voxels
        return NO_OVERLAP_SENTINEL


def occupied_correlation(counts: np.ndarray) -> float:
    """Pearson correlation of bin indices over the occupied-bin joint mass.

    Rows/columns 0 (no-feature) are excluded.  Approaches 1 as the histogram
    collapses onto the diagonal; nan when either marginal has no spread.
    """
    counts = np.asarray(counts, dtype=np.float64)
    w = counts[1:, 1:]
    total = w.sum()
    if total <= 0:
        return float("nan")
    i = np.arange(w.shape[0], dtype=np.float64)[:, None]
    j = np.arange(w.shape[1], dtype=np.float64)[None, :]
    mu_i = (w * i).sum() / total
    mu_j = (w * j).sum() / total
    cov = (w * (i - mu_i) * (j - mu_j)).sum() / total
    var_i = (w * (i - mu_i) ** 2).sum() / total
    var_j = (w * (j - mu_j) ** 2).sum() / total
    if var_i <= 0 or var_j <= 0:
        return float("nan")
    return float(cov / np.sqrt(var_i * var_j))


def dump_histogram_csv(hist: JointHistogram, path,
                       include_phi: bool = True) -> None:
    """Write the joint counts as CSV, headed by a line naming the binning.

    With ``include_phi=False`` the first row and column (no-feature bin) are
    omitted, matching the on-screen convention for occupied-only plots.
    """
    m = hist.counts if include_phi else hist.counts[1:, 1:]
    with open(path, "w", newline="") as fh:
        fh.write(
            f"# feature={hist.spec.kind.value} bins={hist.spec.bin_count}"
            f" upper_clamp={hist.spec.upper_clamp!r}"
            f" phi={'included' if include_phi else 'excluded'}"
            f" total={hist.total}\n"
        )
        writer = csv.writer(fh)
        for row in m:
            writer.writerow([int(c) for c in row])


def read_histogram_csv(path) -> tuple[np.ndarray, dict[str, str]]:
    """Parse a histogram dump back into (counts, header metadata)."""
    with open(path, newline="") as fh:
        header = fh.readline().strip()
        if not header.startswith("# "):
            raise ValueError(f"{path}: missing histogram header line")
        meta = dict(item.split("=", 1) for item in header[2:].split())
        rows = [[int(c) for c in row] for row in csv.reader(fh) if row]
    return np.asarray(rows, dtype=np.int64), meta
