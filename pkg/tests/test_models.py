"""Generators, vectorization, gauge freedom, and the density-matrix oracle."""

import numpy as np
import pytest
from scipy.linalg import expm

from conftest import random_lindblad
from qjlab.hilbert import SpinRep, chain_operator, dagger, spin_operators
from qjlab.models import (
    CHAIN_VARIANTS,
    LindbladModel,
    UnravelingGauge,
    adjoint_dissipator,
    chain_model,
    effective_hamiltonian,
    floquet_map,
    gauge_transform,
    kick_superoperator,
    kick_unitary,
    propagate_density,
    quantum_top_model,
    unvectorize_density,
    vectorize,
    vectorize_density,
)


def lindblad_rhs(model, rho):
    """Reference dissipator written directly in matrix form."""
    h = model.hamiltonian
    out = -1j * (h @ rho - rho @ h)
    for l in model.jumps:
        ldl = dagger(l) @ l
        out += l @ rho @ dagger(l) - 0.5 * (ldl @ rho + rho @ ldl)
    return out


class TestLindbladModel:
    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError, match="Hermitian"):
            LindbladModel(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValueError):
            LindbladModel(np.eye(2), (np.eye(3),))

    def test_kick_pairing(self):
        with pytest.raises(ValueError, match="together"):
            LindbladModel(np.eye(2), kick_generator=np.eye(2))
        with pytest.raises(ValueError, match="together"):
            LindbladModel(np.eye(2), kick_period=1.0)
        with pytest.raises(ValueError, match="positive"):
            LindbladModel(np.eye(2), kick_generator=np.eye(2), kick_period=0.0)

    def test_arrays_frozen(self):
        m = LindbladModel(np.eye(2), (np.diag([0.0, 1.0]).astype(complex),))
        with pytest.raises(ValueError):
            m.hamiltonian[0, 0] = 5.0
        with pytest.raises(ValueError):
            m.jumps[0][0, 0] = 5.0

    def test_identity_hashing(self):
        # two equal-content models must still be distinct cache keys
        a = LindbladModel(np.eye(2))
        b = LindbladModel(np.eye(2))
        assert hash(a) != hash(b) or a is not b
        assert len({a, b}) == 2


def test_effective_hamiltonian_hand_case():
    # single decay channel sqrt(g) sigma-: H_eff = H - (i g / 2) |1><1|
    g = 0.7
    l = np.sqrt(g) * np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
    h = np.diag([1.0, -1.0]).astype(complex)
    m = LindbladModel(h, (l,))
    expected = h - 0.5j * g * np.diag([0.0, 1.0])
    assert np.allclose(effective_hamiltonian(m), expected)


def test_vectorize_density_roundtrip(rng):
    rho = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    assert np.allclose(unvectorize_density(vectorize_density(rho)), rho)
    with pytest.raises(ValueError):
        unvectorize_density(np.zeros(7))


def test_kron_convention_bulk():
    """vec(A rho B) = (A kron B^T) vec(rho), randomized, >= 1000 cases."""
    rng = np.random.default_rng(23)
    for _ in range(1000):
        d = int(rng.integers(2, 6))
        a, b, rho = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)) for _ in range(3))
        lhs = vectorize_density(a @ rho @ b)
        rhs = np.kron(a, b.T) @ vectorize_density(rho)
        assert np.abs(lhs - rhs).max() < 1e-10 * max(1.0, np.abs(lhs).max())


def test_generator_matches_matrix_form_bulk():
    """L vec(rho) == vectorized RHS of the master equation, >= 1000 cases."""
    rng = np.random.default_rng(29)
    for _ in range(1000):
        d = int(rng.integers(2, 5))
        m = random_lindblad(rng, d, n_channels=int(rng.integers(0, 3)))
        r = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        rho = r + r.conj().T
        lhs = vectorize(m) @ vectorize_density(rho)
        rhs = vectorize_density(lindblad_rhs(m, rho))
        assert np.abs(lhs - rhs).max() < 1e-9 * max(1.0, np.abs(rhs).max())


def test_trace_preservation_bulk():
    """vec(1)^dag L = 0: the generator annihilates the trace functional, >= 1000 cases."""
    rng = np.random.default_rng(31)
    for _ in range(1000):
        d = int(rng.integers(2, 6))
        m = random_lindblad(rng, d, n_channels=int(rng.integers(1, 4)))
        gen = vectorize(m)
        tr = vectorize_density(np.eye(d))
        assert np.abs(tr.conj() @ gen).max() < 1e-10 * max(1.0, np.abs(gen).max())


def test_spectrum_contractive(rng):
    # all generator eigenvalues in the closed left half-plane
    for _ in range(50):
        d = int(rng.integers(2, 6))
        m = random_lindblad(rng, d, n_channels=2)
        w = np.linalg.eigvals(vectorize(m))
        assert w.real.max() <= 1e-8


class TestTopModel:
    def test_structure(self):
        m = quantum_top_model(5, omega_z=1.0, g=2.0, omega_x=0.5, gamma=0.3)
        assert m.dim == 11
        assert m.n_channels == 1
        ops = spin_operators(SpinRep(10))
        assert np.allclose(m.jumps[0], np.sqrt(0.3 / 5.0) * ops["Sminus"])
        expected_h = ops["Sz"] + (2.0 / 5.0) * ops["Sz"] @ ops["Sz"] + 0.5 * ops["Sx"]
        assert np.allclose(m.hamiltonian, expected_h)

    def test_gamma_zero_has_no_channel(self):
        assert quantum_top_model(2, omega_z=1.0).n_channels == 0

    def test_kick_attachment(self):
        m = quantum_top_model(2, k=3.0, tau=0.5)
        assert m.has_kick
        ops = spin_operators(SpinRep(4))
        assert np.allclose(m.kick_generator, 1.5 * ops["Sy"] @ ops["Sy"])
        # k=0 with a period still yields a Floquet model
        assert quantum_top_model(2, tau=0.5).has_kick
        with pytest.raises(ValueError, match="tau"):
            quantum_top_model(2, k=1.0)

    def test_validation(self):
        with pytest.raises(ValueError):
            quantum_top_model(0)
        with pytest.raises(ValueError):
            quantum_top_model(2, gamma=-1.0)

    def test_dark_state_is_stationary(self):
        # at omega_x = 0 the fully polarized down state is annihilated by S-
        # and is an Sz eigenstate, so it is an exact steady state
        m = quantum_top_model(3, omega_z=1.3, g=0.7, gamma=2.0)
        rho = np.zeros((7, 7), dtype=complex)
        rho[-1, -1] = 1.0
        assert np.abs(vectorize(m) @ vectorize_density(rho)).max() < 1e-12


class TestChainModel:
    def test_channel_counts(self):
        L = 4
        assert chain_model("A", L, J1=1.0, gamma0=1.0).n_channels == L
        assert chain_model("B", L, Delta=1.0, gamma1=1.0).n_channels == L - 1
        assert chain_model("C", L, J1=1.0, gamma0=1.0, gamma2=1.0).n_channels == L + (L - 1)
        assert chain_model("D", L, J1=1.0, gamma2=1.0, gamma3=1.0).n_channels == 2 * (L - 1)

    def test_hand_hamiltonian_L2(self):
        # J1 (XX + YY) + Delta ZZ on two sites, basis |00>,|01>,|10>,|11>
        m = chain_model("A", 2, J1=0.5, Delta=0.25, gamma0=1.0)
        expected = np.array(
            [
                [0.25, 0, 0, 0],
                [0, -0.25, 1.0, 0],
                [0, 1.0, -0.25, 0],
                [0, 0, 0, 0.25],
            ],
            dtype=complex,
        )
        assert np.allclose(m.hamiltonian, expected)

    def test_next_nearest_term(self):
        # J2 couples sites (1,3): compare against an explicit rebuild
        m = chain_model("A", 3, J1=0.0, J2=0.7, gamma0=1.0)
        expected = sum(
            0.7 * chain_operator(3, 1, a) @ chain_operator(3, 3, a) for a in ("x", "y")
        )
        assert np.allclose(m.hamiltonian, expected)

    @pytest.mark.parametrize("variant", CHAIN_VARIANTS)
    def test_forbidden_couplings_rejected(self, variant):
        forbidden = {
            "A": dict(gamma1=1.0),
            "B": dict(J1=1.0),
            "C": dict(Delta=1.0),
            "D": dict(gamma0=1.0),
        }[variant]
        allowed = {
            "A": dict(J1=1.0, gamma0=1.0),
            "B": dict(Delta=1.0, gamma1=1.0),
            "C": dict(J1=1.0, gamma0=1.0, gamma2=1.0),
            "D": dict(J1=1.0, gamma2=1.0, gamma3=1.0),
        }[variant]
        chain_model(variant, 3, **allowed)  # sanity: the allowed set builds
        with pytest.raises(ValueError, match=f"variant {variant}"):
            chain_model(variant, 3, **{**allowed, **forbidden})

    def test_variant_d_symmetric_rates(self):
        with pytest.raises(ValueError, match="gamma2 == gamma3"):
            chain_model("D", 3, J1=1.0, gamma2=1.0, gamma3=0.5)

    def test_bond_conventions_differ_by_sqrt2(self):
        amp = chain_model("B", 3, gamma1=0.9, bond_convention="half-amplitude")
        rate = chain_model("B", 3, gamma1=0.9, bond_convention="half-rate")
        assert np.allclose(np.sqrt(2.0) * amp.jumps[0], rate.jumps[0])

    def test_validation(self):
        with pytest.raises(ValueError, match="variant"):
            chain_model("E", 3)
        with pytest.raises(ValueError, match="at least 2"):
            chain_model("A", 1)
        with pytest.raises(ValueError, match="nonnegative"):
            chain_model("A", 3, gamma0=-1.0)
        with pytest.raises(ValueError, match="bond_convention"):
            chain_model("B", 3, gamma1=1.0, bond_convention="thirds")

    def test_directed_hopping_operators(self):
        m = chain_model("C", 2, J1=1.0, gamma2=0.49)
        expected = 0.7 * chain_operator(2, 1, "+") @ chain_operator(2, 2, "-")
        assert np.allclose(m.jumps[0], expected)


class TestPropagateDensity:
    def test_two_level_decay_oracle(self):
        """Amplitude damping: <sz>(t) = 2 e^{-g t} - 1, coherence decays at g/2."""
        g = 1.3
        l = np.sqrt(g) * np.array([[0, 1], [0, 0]], dtype=complex)
        m = LindbladModel(np.zeros((2, 2)), (l,))
        plus = np.array([1.0, 1.0]) / np.sqrt(2.0)
        rho0 = np.outer(plus, plus)
        for t in (0.0, 0.3, 1.0, 4.0):
            rho = propagate_density(m, rho0, t)
            assert abs(rho[0, 0].real - (1 - 0.5 * np.exp(-g * t))) < 1e-10
            assert abs(rho[0, 1] - 0.5 * np.exp(-g * t / 2)) < 1e-10

    def test_trace_and_positivity(self, rng):
        m = random_lindblad(rng, 4, n_channels=2)
        psi = rng.normal(size=4) + 1j * rng.normal(size=4)
        psi /= np.linalg.norm(psi)
        rho = propagate_density(m, np.outer(psi, psi.conj()), 2.0)
        assert abs(np.trace(rho) - 1.0) < 1e-9
        assert np.linalg.eigvalsh(rho).min() > -1e-8

    def test_kicked_requires_integer_periods(self):
        m = quantum_top_model(2, omega_z=1.0, k=1.0, tau=0.5, gamma=0.1)
        rho0 = np.diag([1.0, 0, 0, 0, 0]).astype(complex)
        with pytest.raises(ValueError, match="integer multiple"):
            propagate_density(m, rho0, 0.7)
        rho = propagate_density(m, rho0, 1.0)
        # manual two-period composition against the Floquet map
        f = floquet_map(m)
        v = f @ (f @ vectorize_density(rho0))
        assert np.allclose(rho, unvectorize_density(v))

    def test_input_validation(self):
        m = quantum_top_model(1, omega_z=1.0, gamma=0.5)
        rho0 = np.diag([1.0, 0, 0]).astype(complex)
        with pytest.raises(ValueError):
            propagate_density(m, rho0, -1.0)
        with pytest.raises(ValueError):
            propagate_density(m, np.eye(2), 1.0)


class TestKickAndFloquet:
    def test_kick_unitary(self):
        m = quantum_top_model(2, k=1.7, tau=1.0)
        u = kick_unitary(m)
        assert np.allclose(u @ dagger(u), np.eye(5), atol=1e-12)
        assert np.allclose(u, expm(-1j * m.kick_generator))
        plain = quantum_top_model(2, omega_z=1.0)
        with pytest.raises(ValueError):
            kick_unitary(plain)
        with pytest.raises(ValueError):
            floquet_map(plain)

    def test_floquet_preserves_trace(self, rng):
        m = random_lindblad(rng, 3, n_channels=2, kick=True)
        f = floquet_map(m)
        tr = vectorize_density(np.eye(3))
        assert np.abs(tr.conj() @ f - tr.conj()).max() < 1e-10

    def test_kick_superoperator_is_conjugation(self, rng):
        m = random_lindblad(rng, 3, kick=True)
        u = kick_unitary(m)
        rho = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        lhs = unvectorize_density(kick_superoperator(m) @ vectorize_density(rho))
        assert np.allclose(lhs, u @ rho @ dagger(u))


class TestGauge:
    def test_generator_invariance_bulk(self):
        """Gauge shifts leave the vectorized generator unchanged, >= 1000 cases."""
        rng = np.random.default_rng(37)
        for _ in range(1000):
            d = int(rng.integers(2, 5))
            n = int(rng.integers(1, 3))
            m = random_lindblad(rng, d, n_channels=n)
            shifts = tuple(rng.normal() + 1j * rng.normal() for _ in range(n))
            g = gauge_transform(m, UnravelingGauge(shifts, energy_offset=rng.normal()))
            diff = np.abs(vectorize(g) - vectorize(m)).max()
            assert diff < 1e-10 * max(1.0, np.abs(vectorize(m)).max())

    def test_shift_count_checked(self, rng):
        m = random_lindblad(rng, 3, n_channels=2)
        with pytest.raises(ValueError, match="2 jump channels"):
            gauge_transform(m, UnravelingGauge((1.0,)))

    def test_shifts_are_applied(self, rng):
        m = random_lindblad(rng, 3, n_channels=1)
        g = gauge_transform(m, UnravelingGauge((0.5 + 0.1j,)))
        assert np.allclose(g.jumps[0], m.jumps[0] + (0.5 + 0.1j) * np.eye(3))

    def test_kick_carried_through(self, rng):
        m = random_lindblad(rng, 3, n_channels=1, kick=True)
        g = gauge_transform(m, UnravelingGauge((1.0,)))
        assert g.has_kick and g.kick_period == m.kick_period


def test_adjoint_dissipator_duality(rng):
    # tr(O D[rho]) == tr(D^dag[O] rho)
    for _ in range(100):
        d = int(rng.integers(2, 5))
        m = random_lindblad(rng, d, n_channels=2)
        o = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        o = o + o.conj().T
        r = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        rho = r @ r.conj().T
        lhs = np.trace(o @ (lindblad_rhs(m, rho) - (-1j) * (m.hamiltonian @ rho - rho @ m.hamiltonian)))
        rhs = np.trace(adjoint_dissipator(m, o) @ rho)
        assert abs(lhs - rhs) < 1e-9 * max(1.0, abs(rhs))
