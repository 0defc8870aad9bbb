"""Spectral statistics of non-Hermitian matrices in the complex plane.

Nearest-neighbor spacings and complex two-neighbor ratios, with the two
reference laws they are compared against: uncorrelated 2D points (Poisson)
and the infinite Ginibre ensemble.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.csgraph
from scipy.spatial import cKDTree
from scipy.special import gammaincc, gammaln

RATIO_CONVENTIONS = ("nn_over_nnn", "nnn_over_nn")

# 'auto' sector policy: split only when the sparsity pattern falls apart into a
# few macroscopic components (a discrete weak symmetry); a spectrum that
# fragments into many small components is analyzed whole, since there the
# pooled 2D point set is the meaningful object
AUTO_MAX_SECTORS = 8
AUTO_MIN_SECTOR = 16


@dataclass(frozen=True)
class ComplexSpectrum:
    """Eigenvalues plus a residual certificate max_j ||A v_j - w_j v_j||."""

    eigenvalues: np.ndarray
    residual: float


@dataclass(frozen=True)
class RatioSample:
    ratios: np.ndarray
    skipped: int = 0
    sectors: int = 1


def eigen_spectrum(matrix: np.ndarray) -> ComplexSpectrum:
    """Dense non-Hermitian eigenvalues with an explicit accuracy certificate."""
    a = np.asarray(matrix, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix must be square, got shape {a.shape}")
    w, v = scipy.linalg.eig(a)
    residual = float(np.linalg.norm(a @ v - v * w[None, :], axis=0).max())
    return ComplexSpectrum(eigenvalues=w, residual=residual)


def nn_spacings(eigenvalues: np.ndarray) -> np.ndarray:
    """Nearest-neighbor distances in the complex plane, normalized to unit mean."""
    w = np.asarray(eigenvalues).ravel()
    if w.size < 2:
        raise ValueError("need at least 2 eigenvalues")
    pts = np.column_stack([w.real, w.imag])
    dists, _ = cKDTree(pts).query(pts, k=2)
    s = dists[:, 1]
    mean = s.mean()
    if mean == 0.0:
        raise ValueError("all eigenvalues coincide")
    return s / mean


def _neighbor_order(w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Indices of the nearest and next-nearest eigenvalue for every point.

    Exact distance ties resolve by index order (stable sort), which makes the
    assignment deterministic on degenerate lattices.
    """
    n = w.size
    pts = np.column_stack([w.real, w.imag])
    nn = np.empty(n, dtype=int)
    nnn = np.empty(n, dtype=int)
    chunk = max(1, int(4e6 / n))
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        diff = pts[lo:hi, None, :] - pts[None, :, :]
        d = np.einsum("ijk,ijk->ij", diff, diff)
        d[np.arange(lo, hi) - lo, np.arange(lo, hi)] = np.inf
        order = np.argsort(d, axis=1, kind="stable")
        nn[lo:hi] = order[:, 0]
        nnn[lo:hi] = order[:, 1]
    return nn, nnn


def complex_ratios(
    eigenvalues: np.ndarray,
    convention: str = "nn_over_nnn",
    denominator_tol: float | None = None,
) -> RatioSample:
    """Two-neighbor complex spacing ratios of a spectrum.

    Default convention "nn_over_nnn" forms z = (w_nn - w)/(w_nnn - w), which
    lives in the unit disk; "nnn_over_nn" is the reciprocal. Ratios whose
    denominator is smaller than denominator_tol (default 1e-14 times the
    spectrum scale) are skipped and counted, never silently kept.
    """
    if convention not in RATIO_CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}, expected one of {RATIO_CONVENTIONS}")
    w = np.asarray(eigenvalues, dtype=complex).ravel()
    if w.size < 3:
        raise ValueError(f"need at least 3 eigenvalues, got {w.size}")
    nn, nnn = _neighbor_order(w)
    d_nn = w[nn] - w
    d_nnn = w[nnn] - w
    if denominator_tol is None:
        denominator_tol = 1e-14 * max(1.0, float(np.abs(w).max()))
    num, den = (d_nn, d_nnn) if convention == "nn_over_nnn" else (d_nnn, d_nn)
    good = np.abs(den) > denominator_tol
    return RatioSample(ratios=num[good] / den[good], skipped=int((~good).sum()))


def mean_cos_theta(sample: RatioSample) -> float:
    """Mean of cos(arg z) over the ratio sample; zero-modulus ratios are excluded."""
    z = sample.ratios
    r = np.abs(z)
    keep = r > 0
    if not keep.any():
        raise ValueError("no nonzero ratios in sample")
    return float(np.mean(z[keep].real / r[keep]))


def poisson2d_pdf(s: np.ndarray) -> np.ndarray:
    """Spacing density (pi s / 2) exp(-pi s^2 / 4) of uncorrelated 2D points.

    Normalized with unit mean; the 2D-Poisson analogue of the Wigner surmise.
    """
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("spacings must be nonnegative")
    return (np.pi * s / 2.0) * np.exp(-np.pi * s**2 / 4.0)


def _ginibre_terms(s: np.ndarray, n_terms: int) -> np.ndarray:
    """p(s) = sum_j [2 s^{2j+1} e^{-s^2} / j!] prod_{k != j} Q(1+k, s^2), j,k = 1..n_terms.

    The exclusion products come from left/right cumulative products, so exact
    zeros in Q propagate without ever dividing by them.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    s2 = s**2
    ks = np.arange(1, n_terms + 1)
    q = gammaincc(ks[None, :] + 1.0, s2[:, None])  # (n_s, n_terms)
    left = np.ones_like(q)
    left[:, 1:] = np.cumprod(q[:, :-1], axis=1)
    right = np.ones_like(q)
    right[:, :-1] = np.cumprod(q[:, ::-1], axis=1)[:, -2::-1]
    with np.errstate(divide="ignore"):
        log_s = np.where(s2[:, None] > 0, np.log(np.where(s2 > 0, s2, 1.0))[:, None], -np.inf)
    log_pmf = (
        np.log(2.0)
        + (ks[None, :] + 0.5) * log_s
        - s2[:, None]
        - gammaln(ks[None, :] + 1.0)
    )
    pmf = np.where(np.isfinite(log_pmf), np.exp(log_pmf), 0.0)
    return (pmf * left * right).sum(axis=1)


def _ginibre_n_terms(s_max: float) -> int:
    # Q(1+k, s^2) reaches 1 within 1e-14 once k ~ s^2 + spread; walk out until
    # the remaining factors are unity to machine precision
    k = max(8, int(np.ceil(s_max**2)))
    while gammaincc(k + 1.0, s_max**2) < 1.0 - 1e-14 and k < 100_000:
        k = int(1.5 * k) + 8
    return k


@lru_cache(maxsize=1)
def ginibre_mean_spacing() -> float:
    """First moment of the raw Ginibre spacing law, integral of prod_k Q(1+k, s^2).

    The density is normalized but its mean is not 1 (about 1.14); comparisons
    with unit-mean empirical spacings need the rescaled curve.
    """
    s = np.linspace(0.0, 12.0, 20001)
    ks = np.arange(1, _ginibre_n_terms(12.0) + 1)
    q = gammaincc(ks[None, :] + 1.0, (s**2)[:, None])
    survival = np.prod(q, axis=1)
    return float(np.trapezoid(survival, s))


def ginibre_pdf(s: np.ndarray, unit_mean: bool = False, n_terms: int | None = None) -> np.ndarray:
    """Nearest-neighbor spacing density of the infinite Ginibre ensemble.

    p(s) = prod_{k>=1} Q(1+k, s^2) * sum_{j>=1} 2 s^{2j+1} e^{-s^2} / Gamma(1+j, s^2)
         = -d/ds prod_{k>=1} Q(1+k, s^2),

    with Q the regularized upper incomplete gamma function. Truncation is
    adaptive unless n_terms is given. Cubic repulsion at small s. With
    unit_mean=True returns m p(m s) where m is the raw first moment, for
    comparison against spacings normalized to unit mean.
    """
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("spacings must be nonnegative")
    scalar = s.ndim == 0
    s_arr = np.atleast_1d(s).astype(float)
    if unit_mean:
        m = ginibre_mean_spacing()
        out = m * ginibre_pdf(m * s_arr, unit_mean=False, n_terms=n_terms)
        return float(out[0]) if scalar else out
    if n_terms is None:
        n_terms = _ginibre_n_terms(float(s_arr.max(initial=1.0)))
    out = _ginibre_terms(s_arr, n_terms)
    return float(out[0]) if scalar else out


# reference ratios anchor on eigenvalues inside this fraction of the spectral
# radius; the edge has weaker repulsion and biases cos(theta) toward zero
GINIBRE_BULK_FRACTION = 0.75


def sample_ginibre_reference(
    matrix_size: int,
    n_matrices: int,
    rng: np.random.Generator | int,
    convention: str = "nn_over_nnn",
) -> RatioSample:
    """Complex spacing ratios pooled over i.i.d. complex Ginibre matrices.

    Entries are standard complex Gaussians with variance 1 (0.5 per
    component), so the spectrum fills a disk of radius ~sqrt(n). Neighbors
    are searched over each full spectrum, but only ratios anchored on bulk
    eigenvalues (|w| <= GINIBRE_BULK_FRACTION * sqrt(n)) enter the pool:
    edge anchors would drag the mean of cos(theta) visibly toward zero at
    desk-scale n. Pooling is per matrix, so no cross-matrix pairs appear.
    """
    if convention not in RATIO_CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}, expected one of {RATIO_CONVENTIONS}")
    if matrix_size < 10:
        raise ValueError(f"matrix_size {matrix_size} too small for meaningful statistics")
    if n_matrices < 1:
        raise ValueError("need at least one matrix")
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    pools = []
    skipped = 0
    for _ in range(n_matrices):
        g = (
            gen.standard_normal((matrix_size, matrix_size))
            + 1j * gen.standard_normal((matrix_size, matrix_size))
        ) / np.sqrt(2.0)
        w = np.linalg.eigvals(g)
        nn, nnn = _neighbor_order(w)
        d_nn, d_nnn = w[nn] - w, w[nnn] - w
        num, den = (d_nn, d_nnn) if convention == "nn_over_nnn" else (d_nnn, d_nn)
        bulk = np.abs(w) <= GINIBRE_BULK_FRACTION * np.sqrt(matrix_size)
        good = bulk & (np.abs(den) > 1e-14 * float(np.abs(w).max()))
        pools.append(num[good] / den[good])
        skipped += int((bulk & ~good).sum())
    return RatioSample(ratios=np.concatenate(pools), skipped=skipped, sectors=n_matrices)


# ---------------------------------------------------------------------------
# weak-symmetry sectors

def invariant_blocks(matrix: np.ndarray, tol: float = 0.0) -> list[np.ndarray]:
    """Index sets of the connected components of the symmetrized sparsity pattern.

    When the matrix is block-diagonal up to a simultaneous row/column
    permutation, each component spans an invariant subspace and the spectrum
    is the union of the component spectra. tol is relative to the largest
    entry; tol=0 treats only exact zeros as absent edges, which is reliable
    here because symmetry zeros survive expm and matrix products exactly.
    """
    a = np.abs(np.asarray(matrix))
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix must be square, got shape {a.shape}")
    pattern = (a + a.T) > tol * float(a.max(initial=0.0))
    graph = scipy.sparse.csr_matrix(pattern)
    n_comp, labels = scipy.sparse.csgraph.connected_components(graph, directed=False)
    return [np.flatnonzero(labels == c) for c in range(n_comp)]


def spectrum_ratios(
    matrix: np.ndarray,
    sectors: str = "auto",
    convention: str = "nn_over_nnn",
    tol: float = 0.0,
) -> tuple[RatioSample, ComplexSpectrum]:
    """Eigenvalues and complex ratios of a matrix, optionally sector-resolved.

    sectors: "whole" ignores block structure, "split" computes ratios inside
    every connected component and pools them, "auto" splits only when the
    component structure looks like a discrete weak symmetry (between 2 and
    AUTO_MAX_SECTORS components, all of size >= AUTO_MIN_SECTOR). The returned
    spectrum always covers the full matrix.
    """
    if sectors not in ("auto", "whole", "split"):
        raise ValueError(f"unknown sector policy {sectors!r}")
    blocks = invariant_blocks(matrix, tol=tol)
    if sectors == "auto":
        sizes = [b.size for b in blocks]
        split = 1 < len(blocks) <= AUTO_MAX_SECTORS and min(sizes) >= AUTO_MIN_SECTOR
    else:
        split = sectors == "split" and len(blocks) > 1

    matrix = np.asarray(matrix, dtype=complex)
    if not split:
        spec = eigen_spectrum(matrix)
        sample = complex_ratios(spec.eigenvalues, convention=convention)
        return RatioSample(sample.ratios, sample.skipped, sectors=1), spec

    eigs, pools = [], []
    skipped = 0
    used = 0
    residual = 0.0
    for block in blocks:
        sub = eigen_spectrum(matrix[np.ix_(block, block)])
        residual = max(residual, sub.residual)
        eigs.append(sub.eigenvalues)
        if block.size >= 3:
            sample = complex_ratios(sub.eigenvalues, convention=convention)
            pools.append(sample.ratios)
            skipped += sample.skipped
            used += 1
    if not pools:
        raise ValueError("no sector is large enough for ratio statistics")
    spectrum = ComplexSpectrum(np.concatenate(eigs), residual)
    return RatioSample(np.concatenate(pools), skipped, sectors=used), spectrum
