"""Spin and spin-chain operators, random states, and the real embedding metric."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_PAULI = {
    "x": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    "y": np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    "z": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
    "+": np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex),
    "-": np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex),
}

CHAIN_AXES = tuple(_PAULI)


@dataclass(frozen=True)
class SpinRep:
    """Spin-S representation. Stores 2S as an integer so half-integer spins stay exact."""

    two_s: int

    def __post_init__(self) -> None:
        if not isinstance(self.two_s, (int, np.integer)) or self.two_s < 0:
            raise ValueError(f"two_s must be a nonnegative integer, got {self.two_s!r}")

    @property
    def s(self) -> float:
        return self.two_s / 2.0

    @property
    def dim(self) -> int:
        return self.two_s + 1

    @classmethod
    def from_s(cls, s: float) -> "SpinRep":
        two_s = int(round(2 * s))
        if abs(2 * s - two_s) > 1e-12:
            raise ValueError(f"S={s} is not integer or half-integer")
        return cls(two_s)


def spin_operators(rep: SpinRep) -> dict[str, np.ndarray]:
    """Spin matrices in the |S,m> basis ordered by descending m.

    Returns {"Sx", "Sy", "Sz", "Splus", "Sminus"}. Sz is diagonal with entries
    S, S-1, ..., -S; the ladder operators carry the standard
    sqrt(S(S+1) - m(m+1)) matrix elements. All arrays are dense and complex.
    """
    s = rep.s
    m = s - np.arange(rep.dim)
    sz = np.diag(m.astype(complex))
    # <m+1|S+|m>: with descending ordering this sits on the first superdiagonal
    c = np.sqrt(s * (s + 1) - m[1:] * (m[1:] + 1))
    splus = np.zeros((rep.dim, rep.dim), dtype=complex)
    splus[np.arange(rep.dim - 1), np.arange(1, rep.dim)] = c
    sminus = splus.conj().T
    sx = (splus + sminus) / 2.0
    sy = (splus - sminus) / 2.0j
    return {"Sx": sx, "Sy": sy, "Sz": sz, "Splus": splus, "Sminus": sminus}


def chain_operator(L: int, site: int, axis: str) -> np.ndarray:
    """Single-site Pauli (or ladder) operator on an L-qubit chain.

    Sites are 1-indexed; site 1 is the most significant bit of the basis label
    |s_1 s_2 ... s_L>, bit value 0 meaning sigma^z eigenvalue +1. axis is one
    of {x, y, z, +, -}.
    """
    if L < 1:
        raise ValueError(f"chain length must be positive, got {L}")
    if not 1 <= site <= L:
        raise ValueError(f"site {site} out of range for a chain of length {L}")
    try:
        sigma = _PAULI[axis]
    except KeyError:
        raise ValueError(f"unknown axis {axis!r}, expected one of {CHAIN_AXES}") from None
    return np.kron(np.kron(np.eye(2 ** (site - 1)), sigma), np.eye(2 ** (L - site)))


def chain_sz_values(L: int) -> np.ndarray:
    """Total S_z = (1/2) sum_j sigma^z_j eigenvalue of each basis state, in basis order."""
    counts = np.array([int(i).bit_count() for i in range(2**L)])
    return (L - 2 * counts) / 2.0


def dagger(a: np.ndarray) -> np.ndarray:
    return np.asarray(a).conj().T


def random_state(
    dim: int, rng: np.random.Generator, support: np.ndarray | None = None
) -> np.ndarray:
    """Haar-random pure state on C^dim, optionally restricted to a basis subset.

    The restriction draws the same 2*dim Gaussians and zeroes the complement,
    which is Haar on the subspace and keeps the stream layout independent of
    the support.
    """
    z = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    if support is not None:
        mask = np.zeros(dim, dtype=bool)
        mask[np.asarray(support)] = True
        if not mask.any():
            raise ValueError("empty support")
        z = np.where(mask, z, 0.0)
    norm = np.linalg.norm(z)
    if norm == 0.0:
        raise ValueError("degenerate random draw")  # pragma: no cover
    return z / norm


def real_embedding(psi: np.ndarray) -> np.ndarray:
    """Interleave amplitudes into real coordinates [Re c_1, Im c_1, Re c_2, ...].

    Accepts a single state (dim,) or a stack (..., dim); the output doubles the
    last axis. The map is an isometry, so Euclidean distances of embeddings
    equal `state_distance` of the states.
    """
    psi = np.asarray(psi, dtype=complex)
    out = np.empty(psi.shape[:-1] + (2 * psi.shape[-1],), dtype=float)
    out[..., 0::2] = psi.real
    out[..., 1::2] = psi.imag
    return out


def state_distance(psi: np.ndarray, phi: np.ndarray) -> float:
    """Euclidean distance ||psi - phi|| of the amplitude vectors.

    Global phase is deliberately not quotiented: d(psi, -psi) = 2 for unit
    states. This is the metric every point-cloud routine inherits.
    """
    psi = np.asarray(psi)
    phi = np.asarray(phi)
    if psi.shape != phi.shape:
        raise ValueError(f"shape mismatch: {psi.shape} vs {phi.shape}")
    return float(np.linalg.norm(psi - phi))
