"""End-to-end alignment: feature map of scan A once, then MI maximization.

The reference scan A is voxelized and featurized a single time; every
objective evaluation transforms scan B by the candidate pose, re-voxelizes
it on the shared grid (anchored at scan A's frame origin), recomputes the
overlap region, and scores mutual information.  A Nelder-Mead search over
the 6-DOF pose drives the loop.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyOverlapError, NoOverlapError
from .geometry import (
    EulerPose,
    PointCloud,
    apply_transform,
    euler_to_transform,
    transform_to_euler,
    validate_transform,
)
from .mi import (
    NO_OVERLAP_SENTINEL,
    BinningSpec,
    MIResult,
    build_joint_histogram,
    mi_objective,
    mutual_information,
)
from .optim import OptimResult, SimplexConfig, nelder_mead_maximize
from .voxel import (
    FeatureKind,
    GridSpec,
    compute_feature_map,
    compute_overlap,
    voxelize,
)

SWEEP_AXES = ("tx", "ty", "tz", "rx", "ry", "rz")


@dataclass(frozen=True)
class AlignmentConfig:
    """All knobs of one alignment run; defaults reproduce the standard setup."""

    feature: FeatureKind = FeatureKind.VARZ
    grid: GridSpec = field(default_factory=GridSpec)
    binning: BinningSpec | None = None
    simplex: SimplexConfig = field(default_factory=SimplexConfig)
    phi_enabled: bool = True

    def __post_init__(self):
        binning = self.binning
        if binning is None:
            binning = BinningSpec(kind=self.feature)
        elif binning.kind is not self.feature:
            raise ValueError(
                f"binning kind {binning.kind} does not match feature {self.feature}"
            )
        object.__setattr__(self, "binning", binning)
        if len(self.simplex.initial_steps) != 6:
            raise ValueError("simplex initial_steps must have 6 entries")


@dataclass
class AlignmentReport:
    """Estimated transform plus diagnostics of the optimization run."""

    estimated: np.ndarray
    estimated_pose: EulerPose
    initial_pose: EulerPose
    final_mi: float
    mi_trace: list[float]
    iterations: int
    wall_time: float
    termination: str

    def to_dict(self) -> dict:
        pose = self.estimated_pose
        return {
            "estimated_matrix": [[float(v) for v in row] for row in self.estimated],
            "estimated_pose": {
                "tx": pose.tx, "ty": pose.ty, "tz": pose.tz,
                "rx": pose.rx, "ry": pose.ry, "rz": pose.rz,
            },
            "initial_pose": {
                "tx": self.initial_pose.tx, "ty": self.initial_pose.ty,
                "tz": self.initial_pose.tz, "rx": self.initial_pose.rx,
                "ry": self.initial_pose.ry, "rz": self.initial_pose.rz,
            },
            "final_mi": self.final_mi,
            "mi_trace": list(self.mi_trace),
            "iterations": self.iterations,
            "wall_time": self.wall_time,
            "termination": self.termination,
            "kitti_line": self.kitti_line(),
        }

    def kitti_line(self) -> str:
        """The 4x4 matrix as the usual 12-float row-major 3x4 pose line."""
        return " ".join(repr(float(v)) for v in self.estimated[:3, :].ravel())

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


def _prepare(scan_a: PointCloud, scan_b: PointCloud, cfg: AlignmentConfig):
    if len(scan_a) == 0 or len(scan_b) == 0:
        raise ValueError("both scans must be non-empty")
    vox_a = voxelize(scan_a, cfg.grid)
    feat_a = compute_feature_map(vox_a, scan_a, cfg.feature)
    return feat_a


def align(scan_a: PointCloud, scan_b: PointCloud, t0: np.ndarray,
          cfg: AlignmentConfig | None = None) -> AlignmentReport:
    """Estimate the transform that projects scan B onto scan A.

    ``t0`` is the initial guess for that transform.  Raises NoOverlapError
    when no probed pose produces any overlap between occupied bounds.
    """
    cfg = cfg or AlignmentConfig()
    t0 = validate_transform(t0)
    feat_a = _prepare(scan_a, scan_b, cfg)
    initial_pose = transform_to_euler(t0)

    def objective(x: np.ndarray) -> float:
        return mi_objective(feat_a, scan_b, EulerPose.from_vector(x),
                            cfg.grid, cfg.binning, include_phi=cfg.phi_enabled)

    start = time.perf_counter()
    result: OptimResult = nelder_mead_maximize(
        objective, initial_pose.as_vector(), cfg.simplex
    )
    wall = time.perf_counter() - start

    if result.best_value <= NO_OVERLAP_SENTINEL:
        raise NoOverlapError(
            "no candidate pose produced overlapping occupied bounds"
        )
    estimated_pose = EulerPose.from_vector(result.best_x).normalized()
    final_mi = objective(estimated_pose.as_vector())
    return AlignmentReport(
        estimated=euler_to_transform(estimated_pose),
        estimated_pose=estimated_pose,
        initial_pose=initial_pose,
        final_mi=final_mi,
        mi_trace=[*result.trace, final_mi],
        iterations=result.iterations,
        wall_time=wall,
        termination=result.termination,
    )


def mi_at(scan_a: PointCloud, scan_b: PointCloud, pose: EulerPose,
          cfg: AlignmentConfig | None = None) -> MIResult:
    """Single objective evaluation with the full entropy breakdown."""
    cfg = cfg or AlignmentConfig()
    feat_a = _prepare(scan_a, scan_b, cfg)
    moved = apply_transform(scan_b, euler_to_transform(pose))
    vox_b = voxelize(moved, cfg.grid)
    feat_b = compute_feature_map(vox_b, moved, cfg.feature)
    region = compute_overlap(feat_a.bounds, feat_b.bounds)
    if region.is_empty:
        raise EmptyOverlapError("scans do not overlap at this pose")
    hist = build_joint_histogram(feat_a, feat_b, region, cfg.binning)
    return mutual_information(hist, include_phi=cfg.phi_enabled)


def sweep_axis(scan_a: PointCloud, scan_b: PointCloud, base_pose: EulerPose,
               axis: str, values, cfg: AlignmentConfig | None = None
               ) -> list[tuple[float, float]]:
    """MI along one pose axis, all other parameters held at ``base_pose``.

    Returns (axis value, MI) pairs; poses without overlap score the
    no-overlap sentinel so the curve stays total.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"axis must be one of {SWEEP_AXES}, got {axis!r}")
    cfg = cfg or AlignmentConfig()
    feat_a = _prepare(scan_a, scan_b, cfg)
    base = base_pose.as_vector()
    idx = SWEEP_AXES.index(axis)
    out = []
    for v in values:
        x = base.copy()
        x[idx] = v
        mi = mi_objective(feat_a, scan_b, EulerPose.from_vector(x),
                          cfg.grid, cfg.binning, include_phi=cfg.phi_enabled)
        out.append((float(v), mi))
    return out
