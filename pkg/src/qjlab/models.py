"""Lindblad generators: collective-spin top, dissipative XXZ chains, superoperators.

Rates are folded into the jump operators throughout: a channel with rate g and
bare operator A is stored as sqrt(g)*A, and the dissipator reads
D[rho] = sum_a (L_a rho L_a^dag - 1/2 {L_a^dag L_a, rho}).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .hilbert import SpinRep, chain_operator, dagger, spin_operators

_HERM_TOL = 1e-12


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class LindbladModel:
    """Immutable bundle of Hamiltonian, folded jump operators, and optional kick.

    kick_generator is the Hermitian phase generator K of the unitary e^{-iK}
    applied impulsively with period kick_period; both are set or both None.
    Compared and hashed by identity so instances can key propagator caches.
    """

    hamiltonian: np.ndarray
    jumps: tuple[np.ndarray, ...] = ()
    kick_generator: np.ndarray | None = None
    kick_period: float | None = None

    def __post_init__(self) -> None:
        h = _readonly(self.hamiltonian)
        object.__setattr__(self, "hamiltonian", h)
        d = h.shape[0]
        if h.ndim != 2 or h.shape != (d, d):
            raise ValueError(f"hamiltonian must be square, got shape {h.shape}")
        scale = max(1.0, float(np.abs(h).max()))
        if np.abs(h - h.conj().T).max() > _HERM_TOL * scale:
            raise ValueError("hamiltonian is not Hermitian")
        jumps = tuple(_readonly(l) for l in self.jumps)
        object.__setattr__(self, "jumps", jumps)
        for l in jumps:
            if l.shape != (d, d):
                raise ValueError(f"jump operator shape {l.shape} != {(d, d)}")
        if (self.kick_generator is None) != (self.kick_period is None):
            raise ValueError("kick_generator and kick_period must be given together")
        if self.kick_generator is not None:
            k = _readonly(self.kick_generator)
            object.__setattr__(self, "kick_generator", k)
            if k.shape != (d, d):
                raise ValueError(f"kick generator shape {k.shape} != {(d, d)}")
            kscale = max(1.0, float(np.abs(k).max()))
            if np.abs(k - k.conj().T).max() > _HERM_TOL * kscale:
                raise ValueError("kick generator is not Hermitian")
            if not self.kick_period > 0:
                raise ValueError(f"kick period must be positive, got {self.kick_period}")

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    @property
    def has_kick(self) -> bool:
        return self.kick_generator is not None

    @property
    def n_channels(self) -> int:
        return len(self.jumps)


def quantum_top_model(
    s: float,
    omega_z: float = 0.0,
    g: float = 0.0,
    omega_x: float = 0.0,
    k: float = 0.0,
    tau: float | None = None,
    gamma: float = 0.0,
) -> LindbladModel:
    """Dissipative spin-S top, optionally kicked.

    H0 = omega_z Sz + (g/S) Sz^2 + omega_x Sx, collective decay with folded jump
    sqrt(gamma/S) S-, and kick generator (k/S) Sy^2 applied with period tau.
    The kick block is attached whenever tau is given, so k=0 with a period
    still produces a (trivially kicked) Floquet model. All couplings are
    dimensionless; 1/S factors keep the classical limit S -> infinity finite.
    """
    rep = SpinRep.from_s(s)
    if rep.two_s == 0:
        raise ValueError("spin must be positive")
    if gamma < 0:
        raise ValueError(f"gamma must be nonnegative, got {gamma}")
    if tau is None and k != 0.0:
        raise ValueError("kick strength k requires a kick period tau")
    ops = spin_operators(rep)
    sval = rep.s
    h = omega_z * ops["Sz"] + (g / sval) * (ops["Sz"] @ ops["Sz"]) + omega_x * ops["Sx"]
    jumps: tuple[np.ndarray, ...] = ()
    if gamma > 0:
        jumps = (np.sqrt(gamma / sval) * ops["Sminus"],)
    kick = (k / sval) * (ops["Sy"] @ ops["Sy"]) if tau is not None else None
    return LindbladModel(h, jumps, kick_generator=kick, kick_period=tau)


CHAIN_VARIANTS = ("A", "B", "C", "D")

# couplings that each variant pins to zero; everything else is free
_FORBIDDEN = {
    "A": ("gamma1", "gamma2", "gamma3"),
    "B": ("J1", "J2", "gamma0", "gamma2", "gamma3"),
    "C": ("J2", "Delta", "gamma1"),
    "D": ("J2", "gamma0", "gamma1"),
}


def _chain_hamiltonian(L: int, J1: float, J2: float, Delta: float) -> np.ndarray:
    dim = 2**L
    h = np.zeros((dim, dim), dtype=complex)
    for j in range(1, L):
        for a in ("x", "y"):
            h += J1 * chain_operator(L, j, a) @ chain_operator(L, j + 1, a)
        h += Delta * chain_operator(L, j, "z") @ chain_operator(L, j + 1, "z")
    for j in range(1, L - 1):
        for a in ("x", "y"):
            h += J2 * chain_operator(L, j, a) @ chain_operator(L, j + 2, a)
    return h


def chain_model(
    variant: str,
    L: int,
    J1: float = 0.0,
    J2: float = 0.0,
    Delta: float = 0.0,
    gamma0: float = 0.0,
    gamma1: float = 0.0,
    gamma2: float = 0.0,
    gamma3: float = 0.0,
    bond_convention: str = "half-amplitude",
) -> LindbladModel:
    """Open-boundary XXZ chain with next-nearest-neighbor hopping and four
    dissipation channels, restricted to one of the variants A-D.

    H = sum_j [J1 (x_j x_{j+1} + y_j y_{j+1}) + Delta z_j z_{j+1}]
        + J2 sum_j (x_j x_{j+2} + y_j y_{j+2})

    Channels (folded): site dephasing sqrt(gamma0) z_j, bond exchange
    (sqrt(gamma1)/2)(sigma_j.sigma_{j+1} + 1), and directed hopping
    sqrt(gamma2) p_j m_{j+1} / sqrt(gamma3) m_j p_{j+1}. Variants pin subsets
    of couplings to zero:

      A: dephasing only (gamma1 = gamma2 = gamma3 = 0)
      B: pure bond exchange, no Hamiltonian hopping (J1 = J2 = gamma0 = gamma2 = gamma3 = 0)
      C: XX chain with dephasing and directed hopping (J2 = Delta = gamma1 = 0)
      D: XXZ with symmetric hopping noise, gamma2 = gamma3 required (J2 = gamma0 = gamma1 = 0)

    bond_convention picks where the exchange 1/2 sits: "half-amplitude" folds
    (sqrt(gamma1)/2)(...), "half-rate" folds sqrt(gamma1/2)(...), which differ
    by an overall sqrt(2) in the jump and a factor 2 in the effective rate.
    """
    if variant not in CHAIN_VARIANTS:
        raise ValueError(f"unknown variant {variant!r}, expected one of {CHAIN_VARIANTS}")
    if L < 2:
        raise ValueError(f"chain needs at least 2 sites, got L={L}")
    rates = {"gamma0": gamma0, "gamma1": gamma1, "gamma2": gamma2, "gamma3": gamma3}
    for name, value in rates.items():
        if value < 0:
            raise ValueError(f"{name} must be nonnegative, got {value}")
    values = {"J1": J1, "J2": J2, "Delta": Delta, **rates}
    for name in _FORBIDDEN[variant]:
        if values[name] != 0.0:
            raise ValueError(f"variant {variant} requires {name}=0, got {values[name]}")
    if variant == "D" and gamma2 != gamma3:
        raise ValueError(f"variant D requires gamma2 == gamma3, got {gamma2} != {gamma3}")
    if bond_convention not in ("half-amplitude", "half-rate"):
        raise ValueError(f"unknown bond_convention {bond_convention!r}")

    h = _chain_hamiltonian(L, J1, J2, Delta)
    jumps: list[np.ndarray] = []
    if gamma0 > 0:
        for j in range(1, L + 1):
            jumps.append(np.sqrt(gamma0) * chain_operator(L, j, "z"))
    if gamma1 > 0:
        pref = np.sqrt(gamma1) / 2.0 if bond_convention == "half-amplitude" else np.sqrt(gamma1 / 2.0)
        eye = np.eye(2**L, dtype=complex)
        for j in range(1, L):
            dot = sum(
                chain_operator(L, j, a) @ chain_operator(L, j + 1, a) for a in ("x", "y", "z")
            )
            jumps.append(pref * (dot + eye))
    if gamma2 > 0:
        for j in range(1, L):
            jumps.append(np.sqrt(gamma2) * chain_operator(L, j, "+") @ chain_operator(L, j + 1, "-"))
    if gamma3 > 0:
        for j in range(1, L):
            jumps.append(np.sqrt(gamma3) * chain_operator(L, j, "-") @ chain_operator(L, j + 1, "+"))
    return LindbladModel(h, tuple(jumps))


def effective_hamiltonian(model: LindbladModel) -> np.ndarray:
    """H - (i/2) sum_a L_a^dag L_a, generator of the deterministic no-jump flow."""
    h_eff = model.hamiltonian.astype(complex, copy=True)
    for l in model.jumps:
        h_eff -= 0.5j * (dagger(l) @ l)
    return h_eff


def vectorize_density(rho: np.ndarray) -> np.ndarray:
    """Row-major flattening |i><j| -> component i*d + j."""
    return np.asarray(rho, dtype=complex).reshape(-1)


def unvectorize_density(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    d = int(round(np.sqrt(v.size)))
    if d * d != v.size:
        raise ValueError(f"length {v.size} is not a perfect square")
    return v.reshape(d, d)


def vectorize(model: LindbladModel) -> np.ndarray:
    """Matrix of the generator on the doubled space, row-major convention.

    With vec(A rho B) = (A kron B^T) vec(rho):

      L = -i (H kron 1 - 1 kron H*)
          + sum_a [L_a kron L_a* - 1/2 (L_a^dag L_a kron 1 + 1 kron (L_a^dag L_a)*)]

    The kick is not included; it exponentiates separately (see floquet_map).
    """
    d = model.dim
    eye = np.eye(d)
    h = model.hamiltonian
    gen = -1j * (np.kron(h, eye) - np.kron(eye, h.conj()))
    for l in model.jumps:
        ldl = dagger(l) @ l
        gen += np.kron(l, l.conj()) - 0.5 * (np.kron(ldl, eye) + np.kron(eye, ldl.conj()))
    return gen


def kick_unitary(model: LindbladModel) -> np.ndarray:
    if not model.has_kick:
        raise ValueError("model has no kick")
    return expm(-1j * model.kick_generator)


def kick_superoperator(model: LindbladModel) -> np.ndarray:
    u = kick_unitary(model)
    return np.kron(u, u.conj())


def floquet_map(model: LindbladModel) -> np.ndarray:
    """One-period propagator F = e^{tau L0} (U_k kron U_k*), kick applied first.

    Matches the trajectory engine, which kicks at every t = n tau (including
    t = 0) right after recording the pre-kick snapshot.
    """
    if not model.has_kick:
        raise ValueError("floquet_map needs a kicked model; use expm of vectorize instead")
    return expm(model.kick_period * vectorize(model)) @ kick_superoperator(model)


def _check_density(rho: np.ndarray, context: str) -> None:
    scale = max(1.0, float(np.abs(rho).max()))
    if np.abs(rho - rho.conj().T).max() > 1e-10 * scale:
        raise FloatingPointError(f"{context}: density matrix lost Hermiticity")
    if abs(np.trace(rho) - 1.0) > 1e-9:
        raise FloatingPointError(f"{context}: trace drifted to {np.trace(rho)}")
    w = np.linalg.eigvalsh((rho + rho.conj().T) / 2.0)
    if w.min() < -1e-8:
        raise FloatingPointError(f"{context}: negative eigenvalue {w.min():.3e}")


def propagate_density(model: LindbladModel, rho0: np.ndarray, t: float) -> np.ndarray:
    """Evolve a density matrix by direct exponentiation of the vectorized generator.

    Kicked models require t to be an integer multiple of the kick period and
    return the pre-kick state at t = n tau, mirroring the trajectory engine's
    snapshot convention. Dense exponentiation scales as dim^6; intended for
    the oracle cross-checks at small dimension, not production sweeps.
    """
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (model.dim, model.dim):
        raise ValueError(f"density matrix shape {rho0.shape} != {(model.dim, model.dim)}")
    v = vectorize_density(rho0)
    if model.has_kick:
        n = t / model.kick_period
        n_int = int(round(n))
        if abs(n - n_int) > 1e-9:
            raise ValueError(f"t={t} is not an integer multiple of the kick period")
        if n_int > 0:
            f = floquet_map(model)
            for _ in range(n_int):
                v = f @ v
    elif t > 0:
        v = expm(t * vectorize(model)) @ v
    rho = unvectorize_density(v)
    _check_density(rho, f"propagate_density(t={t})")
    return rho


@dataclass(frozen=True)
class UnravelingGauge:
    """c-number shifts of the folded jump operators plus an energy offset."""

    shifts: tuple[complex, ...]
    energy_offset: float = 0.0


def gauge_transform(model: LindbladModel, gauge: UnravelingGauge) -> LindbladModel:
    """Shift each jump by a c-number, compensating in the Hamiltonian.

    L_a -> L_a + l_a,  H -> H - (i/2) sum_a (l_a* L_a - l_a L_a^dag) + r.

    Leaves the vectorized generator (and hence all ensemble averages)
    unchanged while reshuffling individual trajectories. Shifts apply to the
    folded operators, rates included.
    """
    if len(gauge.shifts) != model.n_channels:
        raise ValueError(
            f"got {len(gauge.shifts)} shifts for {model.n_channels} jump channels"
        )
    eye = np.eye(model.dim)
    h = model.hamiltonian.astype(complex, copy=True)
    new_jumps = []
    for l, shift in zip(model.jumps, gauge.shifts):
        shift = complex(shift)
        new_jumps.append(l + shift * eye)
        h -= 0.5j * (np.conj(shift) * l - shift * dagger(l))
    h += gauge.energy_offset * eye
    return LindbladModel(h, tuple(new_jumps), model.kick_generator, model.kick_period)


def adjoint_dissipator(model: LindbladModel, observable: np.ndarray) -> np.ndarray:
    """Heisenberg-picture dissipator sum_a (L^dag O L - 1/2 {L^dag L, O})."""
    o = np.asarray(observable, dtype=complex)
    if o.shape != (model.dim, model.dim):
        raise ValueError(f"observable shape {o.shape} != {(model.dim, model.dim)}")
    out = np.zeros_like(o)
    for l in model.jumps:
        ldl = dagger(l) @ l
        out += dagger(l) @ o @ l - 0.5 * (ldl @ o + o @ ldl)
    return out
