"""Two-nearest-neighbor intrinsic dimension estimation on trajectory clouds.

The estimator uses only the ratio mu = r_nnn / r_nn of second- to first-
neighbor distances: for a locally uniform density on a d-dimensional support,
mu is Pareto(d) distributed, so d is the slope of -log(1 - F(mu)) against
log(mu) through the origin. Everything downstream (time series, late-time
averages, scale profiles) is bookkeeping around that one regression.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .hilbert import real_embedding
from .trajectory import TrajectoryRecord

# below this first-neighbor distance two points are treated as duplicates and
# excluded from the regression (they still serve as neighbors)
DEGENERATE_RNN = 1e-12

_TIME_TOL = 1e-9


@dataclass(frozen=True)
class MuSample:
    """Neighbor-ratio sample: mu[i] = r_nnn[i] / r_nn[i] over non-degenerate points."""

    mu: np.ndarray
    r_nn: np.ndarray
    r_nnn: np.ndarray
    discarded: int


@dataclass(frozen=True)
class IdEstimate:
    id: float
    typical_scale: float
    n_points: int
    cutoff_fraction: float
    fit_residual: float
    discarded: int


@dataclass(frozen=True)
class IdSeries:
    times: np.ndarray
    estimates: tuple[IdEstimate, ...]

    def field(self, name: str) -> np.ndarray:
        return np.array([getattr(e, name) for e in self.estimates])


@dataclass(frozen=True)
class ScalePoint:
    n_trajectories: int
    id_mean: float
    id_std: float
    typical_scale: float


def neighbor_distances(points: np.ndarray, method: str = "auto") -> tuple[np.ndarray, np.ndarray]:
    """Exact first and second nearest-neighbor distances for every point.

    method "tree" queries a k-d tree, "brute" scans chunked distance matrices;
    both are exact and must agree, "auto" picks by size. Self-matches are
    excluded; exact duplicates legitimately produce r_nn = 0.
    """
    points = np.ascontiguousarray(points, dtype=float)
    if points.ndim != 2:
        raise ValueError(f"expected a 2d point cloud, got shape {points.shape}")
    n = points.shape[0]
    if n < 3:
        raise ValueError(f"need at least 3 points, got {n}")
    if method == "auto":
        method = "tree" if n > 512 else "brute"
    if method == "tree":
        dists, _ = cKDTree(points).query(points, k=3)
        return dists[:, 1], dists[:, 2]
    if method != "brute":
        raise ValueError(f"unknown method {method!r}")
    r_nn = np.empty(n)
    r_nnn = np.empty(n)
    # direct differences per chunk: slower than the norm-expansion trick but
    # immune to cancellation when clouds collapse to tiny scales
    chunk = max(1, int(8e6 / (n * points.shape[1])))
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        diff = points[lo:hi, None, :] - points[None, :, :]
        d = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        d[np.arange(lo, hi) - lo, np.arange(lo, hi)] = np.inf
        part = np.partition(d, (0, 1), axis=1)
        r_nn[lo:hi] = part[:, 0]
        r_nnn[lo:hi] = part[:, 1]
    return r_nn, r_nnn


def mu_ratios(points: np.ndarray, method: str = "auto") -> MuSample:
    """Neighbor ratios of a Euclidean point cloud, duplicates counted out."""
    r_nn, r_nnn = neighbor_distances(points, method=method)
    keep = r_nn > DEGENERATE_RNN
    discarded = int((~keep).sum())
    if keep.sum() < 3:
        raise ValueError(
            f"fewer than 3 non-degenerate points ({int(keep.sum())} kept, {discarded} discarded)"
        )
    return MuSample(
        mu=r_nnn[keep] / r_nn[keep],
        r_nn=r_nn[keep],
        r_nnn=r_nnn[keep],
        discarded=discarded,
    )


def two_nn(
    points: np.ndarray, cutoff_fraction: float = 0.9, method: str = "auto"
) -> IdEstimate:
    """Intrinsic dimension of a point cloud by the two-neighbor Pareto fit.

    Sorts mu ascending, assigns the empirical CDF F(mu_(i)) = i/N, and fits
    -log(1 - F) = d log(mu) through the origin over the smallest
    floor(cutoff_fraction * N) ratios; cutoff_fraction = 1 keeps all but the
    top point (whose F = 1 maps to infinity). fit_residual is the RMS
    deviation of the fit, a cheap flag for non-Pareto tails. typical_scale is
    the mean of (r_nn + r_nnn)/2, tracking where on the manifold the estimate
    looks.
    """
    if not 0 < cutoff_fraction <= 1:
        raise ValueError(f"cutoff_fraction must be in (0, 1], got {cutoff_fraction}")
    sample = mu_ratios(points, method=method)
    mu = np.sort(sample.mu)
    n = mu.size
    n_keep = int(np.floor(cutoff_fraction * n))
    n_keep = min(n_keep, n - 1)
    if n_keep < 1:
        raise ValueError(f"cutoff keeps no points (N={n}, cutoff={cutoff_fraction})")
    x = np.log(mu[:n_keep])
    i = np.arange(1, n_keep + 1)
    y = np.log(n / (n - i))  # -log(1 - i/N) without cancellation
    sxx = float(x @ x)
    if sxx == 0.0:
        raise ValueError("all mu ratios equal 1; slope undefined")
    slope = float(x @ y) / sxx
    residual = float(np.sqrt(np.mean((y - slope * x) ** 2)))
    return IdEstimate(
        id=slope,
        typical_scale=float(np.mean((sample.r_nn + sample.r_nnn) / 2.0)),
        n_points=n,
        cutoff_fraction=cutoff_fraction,
        fit_residual=residual,
        discarded=sample.discarded,
    )


def _snapshot_index(record: TrajectoryRecord, t: float) -> int:
    idx = int(np.argmin(np.abs(record.times - t)))
    if abs(record.times[idx] - t) > _TIME_TOL * max(1.0, abs(t)):
        raise ValueError(f"time {t} is not on the snapshot grid")
    return idx


def fixed_time_dataset(ensemble: list[TrajectoryRecord], t: float) -> np.ndarray:
    """Real embedding of every trajectory's state at time t, shape (N, 2 dim)."""
    if not ensemble:
        raise ValueError("empty ensemble")
    states = np.array([rec.states[_snapshot_index(rec, t)] for rec in ensemble])
    return real_embedding(states)


def single_trajectory_dataset(record: TrajectoryRecord, delta_t: float) -> np.ndarray:
    """States of one trajectory sampled every delta_t, embedded as real vectors.

    delta_t must be an integer multiple of the snapshot spacing; the dataset
    starts at the first snapshot.
    """
    if len(record) < 2:
        raise ValueError("record has fewer than 2 snapshots")
    spacing = float(record.times[1] - record.times[0])
    k = delta_t / spacing
    k_int = int(round(k))
    if k_int < 1 or abs(k_int * spacing - delta_t) > _TIME_TOL * max(1.0, delta_t):
        raise ValueError(
            f"delta_t={delta_t} is not an integer multiple of the snapshot spacing {spacing}"
        )
    return real_embedding(record.states[::k_int])


def id_time_series(
    ensemble: list[TrajectoryRecord],
    times: np.ndarray,
    cutoff_fraction: float = 0.9,
) -> IdSeries:
    """two_nn on the fixed-time ensemble cloud at each requested time."""
    estimates = [
        two_nn(fixed_time_dataset(ensemble, t), cutoff_fraction=cutoff_fraction) for t in times
    ]
    return IdSeries(times=np.asarray(times, dtype=float), estimates=tuple(estimates))


def late_time_average(series: IdSeries, t_start: float, t_end: float) -> tuple[float, float]:
    """Mean and plain std of the id estimates with t_start <= t <= t_end."""
    mask = (series.times >= t_start - _TIME_TOL) & (series.times <= t_end + _TIME_TOL)
    if not mask.any():
        raise ValueError(f"no estimates inside [{t_start}, {t_end}]")
    ids = series.field("id")[mask]
    return float(ids.mean()), float(ids.std())


def scale_profile(
    ensemble: list[TrajectoryRecord],
    times: np.ndarray,
    n_list: list[int],
    cutoff_fraction: float = 0.9,
) -> list[ScalePoint]:
    """Late-time id and typical scale as functions of the ensemble size.

    Uses the first n trajectories for each n in n_list, so the profiles are
    nested subsamples of one ensemble rather than independent runs.
    """
    out = []
    for n in n_list:
        if not 3 <= n <= len(ensemble):
            raise ValueError(f"n={n} outside [3, {len(ensemble)}]")
        series = id_time_series(ensemble[:n], times, cutoff_fraction=cutoff_fraction)
        ids = series.field("id")
        out.append(
            ScalePoint(
                n_trajectories=n,
                id_mean=float(ids.mean()),
                id_std=float(ids.std()),
                typical_scale=float(series.field("typical_scale").mean()),
            )
        )
    return out
