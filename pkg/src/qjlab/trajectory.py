"""Quantum-jump unraveling of Lindblad dynamics on a fixed time grid.

Each step draws one uniform variate and branches on the first-order jump
probabilities p_a = dt ||L_a psi||^2; the no-jump branch applies the cached
exponential of the effective Hamiltonian. First order in dt by construction,
so dt must resolve the fastest total jump rate (see StepTooCoarse).
"""

from __future__ import annotations

import weakref
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.linalg import expm

from .hilbert import dagger
from .models import LindbladModel, effective_hamiltonian, kick_unitary

# total jump probability per step above which the first-order splitting is
# untrustworthy and the step refuses to proceed
JUMP_BUDGET = 0.1

#: reserved Philox stream for initial-state draws; trajectory indices stay below it
INITIAL_STATE_STREAM = 2**63

_GRID_TOL = 1e-9


class StepTooCoarse(RuntimeError):
    """Raised when sum_a p_a exceeds JUMP_BUDGET; reduce dt."""


def trajectory_rng(seed: int, stream: int) -> np.random.Generator:
    """Counter-based RNG: one Philox block range per stream index.

    Streams are independent and order-free, so trajectory i is bit-identical
    whether run alone, in a batch, or across threads.
    """
    if stream < 0:
        raise ValueError(f"stream index must be nonnegative, got {stream}")
    return np.random.Generator(np.random.Philox(key=seed, counter=stream << 128))


@dataclass(frozen=True)
class TrajectoryConfig:
    """Time grid and stream identity of a single trajectory."""

    dt: float
    horizon: float
    snapshot_stride: int = 1
    seed: int = 0
    trajectory_index: int = 0

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.horizon < 0:
            raise ValueError(f"horizon must be nonnegative, got {self.horizon}")
        if self.snapshot_stride < 1:
            raise ValueError(f"snapshot_stride must be >= 1, got {self.snapshot_stride}")
        if not 0 <= self.trajectory_index < INITIAL_STATE_STREAM:
            raise ValueError("trajectory_index out of the non-reserved stream range")

    @property
    def n_steps(self) -> int:
        n = int(round(self.horizon / self.dt))
        if abs(n * self.dt - self.horizon) > _GRID_TOL * max(1.0, self.horizon):
            raise ValueError(f"horizon {self.horizon} is not an integer multiple of dt {self.dt}")
        return n


@dataclass(frozen=True)
class JumpEvent:
    time: float
    channel: int


@dataclass(frozen=True)
class TrajectoryRecord:
    """Snapshots on the recording grid plus the full jump log.

    states has shape (n_snapshots, dim), row i at times[i]; snapshots at kick
    times are pre-kick. config is None for records read back from disk.
    """

    times: np.ndarray
    states: np.ndarray
    jumps: tuple[JumpEvent, ...]
    config: TrajectoryConfig | None = None

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def __len__(self) -> int:
        return self.states.shape[0]


class JumpEngine:
    """Propagators precomputed for one (model, dt): reusable across trajectories."""

    def __init__(self, model: LindbladModel, dt: float):
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt}")
        self.model = model
        self.dt = dt
        self.no_jump = expm(-1j * dt * effective_hamiltonian(model))
        if model.n_channels:
            self.jump_ops = np.stack(model.jumps)
        else:
            self.jump_ops = np.zeros((0, model.dim, model.dim), dtype=complex)
        self.kick = kick_unitary(model) if model.has_kick else None
        self.kick_stride = 0
        if model.has_kick:
            stride = model.kick_period / dt
            self.kick_stride = int(round(stride))
            if self.kick_stride < 1 or abs(self.kick_stride * dt - model.kick_period) > _GRID_TOL:
                raise ValueError(
                    f"kick period {model.kick_period} is not an integer multiple of dt {dt}"
                )


_ENGINES: "weakref.WeakKeyDictionary[LindbladModel, dict[float, JumpEngine]]" = (
    weakref.WeakKeyDictionary()
)


def _engine_for(model: LindbladModel, dt: float) -> JumpEngine:
    per_model = _ENGINES.setdefault(model, {})
    engine = per_model.get(dt)
    if engine is None:
        engine = per_model[dt] = JumpEngine(model, dt)
    return engine


def jump_probabilities(
    psi: np.ndarray, model: LindbladModel, dt: float
) -> tuple[np.ndarray, float]:
    """First-order branch probabilities (p_1..p_n, p_0) for one step from psi."""
    psi = np.asarray(psi, dtype=complex)
    p = np.array([dt * np.vdot(l @ psi, l @ psi).real for l in model.jumps])
    total = float(p.sum())
    if total > JUMP_BUDGET:
        raise StepTooCoarse(
            f"total jump probability {total:.3g} exceeds {JUMP_BUDGET} at dt={dt}; reduce dt"
        )
    return p, 1.0 - total


def _advance(psi: np.ndarray, engine: JumpEngine, rng: np.random.Generator):
    """One Bernoulli step; returns (psi', channel or None). psi must be normalized."""
    if engine.jump_ops.shape[0]:
        amps = engine.jump_ops @ psi
        p = engine.dt * np.einsum("ad,ad->a", amps, amps.conj()).real
        total = p.sum()
        if total > JUMP_BUDGET:
            raise StepTooCoarse(
                f"total jump probability {total:.3g} exceeds {JUMP_BUDGET} "
                f"at dt={engine.dt}; reduce dt"
            )
        u = rng.random()
        if u < total:
            # channel intervals stacked in order, no-jump branch last
            alpha = int(np.searchsorted(np.cumsum(p), u, side="right"))
            alpha = min(alpha, len(p) - 1)  # cumsum rounding at the top edge
            jumped = amps[alpha]
            return jumped / np.linalg.norm(jumped), alpha
    psi = engine.no_jump @ psi
    return psi / np.linalg.norm(psi), None


def step(
    psi: np.ndarray, model: LindbladModel, dt: float, rng: np.random.Generator
) -> tuple[np.ndarray, int | None]:
    """Single unraveling step. Cached propagators per (model, dt)."""
    return _advance(np.asarray(psi, dtype=complex), _engine_for(model, dt), rng)


def _check_initial(psi0: np.ndarray, dim: int) -> np.ndarray:
    psi = np.array(psi0, dtype=complex)
    if psi.shape != (dim,):
        raise ValueError(f"initial state shape {psi.shape} != ({dim},)")
    if abs(np.linalg.norm(psi) - 1.0) > 1e-10:
        raise ValueError("initial state is not normalized")
    return psi


def simulate_trajectory(
    psi0: np.ndarray,
    model: LindbladModel,
    config: TrajectoryConfig,
    engine: JumpEngine | None = None,
) -> TrajectoryRecord:
    """Run one trajectory on the fixed grid, recording every snapshot_stride steps.

    Kicks fire at every t = n tau including t = 0, after the snapshot is
    recorded, so stored states are pre-kick. The RNG stream is fully
    determined by (seed, trajectory_index).
    """
    if engine is None:
        engine = _engine_for(model, config.dt)
    elif engine.model is not model or engine.dt != config.dt:
        raise ValueError("engine was built for a different model or dt")
    psi = _check_initial(psi0, model.dim)
    rng = trajectory_rng(config.seed, config.trajectory_index)
    n_steps = config.n_steps
    stride = config.snapshot_stride
    kick_stride = engine.kick_stride

    # snapshots live on the stride grid only, so recorded times stay uniform;
    # pick stride | n_steps to capture the final state
    times, snaps, jumps = [], [], []
    for s in range(n_steps + 1):
        if s % stride == 0:
            times.append(s * config.dt)
            snaps.append(psi)
        if s == n_steps:
            break
        if kick_stride and s % kick_stride == 0:
            psi = engine.kick @ psi
            psi = psi / np.linalg.norm(psi)
        psi, alpha = _advance(psi, engine, rng)
        if alpha is not None:
            jumps.append(JumpEvent(time=(s + 1) * config.dt, channel=alpha))
    return TrajectoryRecord(
        times=np.array(times), states=np.array(snaps), jumps=tuple(jumps), config=config
    )


def simulate_ensemble(
    psi0: np.ndarray,
    model: LindbladModel,
    config: TrajectoryConfig,
    n_trajectories: int,
    first_index: int | None = None,
    threads: int = 1,
) -> list[TrajectoryRecord]:
    """n trajectories on consecutive stream indices starting at first_index.

    Results are ordered by index and bit-identical for any thread count;
    threads only help past the GIL for larger dimensions where BLAS dominates.
    """
    if n_trajectories < 1:
        raise ValueError(f"need at least one trajectory, got {n_trajectories}")
    start = config.trajectory_index if first_index is None else first_index
    engine = _engine_for(model, config.dt)
    configs = [replace(config, trajectory_index=start + i) for i in range(n_trajectories)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda c: simulate_trajectory(psi0, model, c, engine), configs))
    return [simulate_trajectory(psi0, model, c, engine) for c in configs]


def expectation(psi: np.ndarray, observable: np.ndarray) -> float:
    """<psi|O|psi> for Hermitian O, returned as a real number."""
    o = np.asarray(observable)
    scale = max(1.0, float(np.abs(o).max()))
    if np.abs(o - o.conj().T).max() > 1e-10 * scale:
        raise ValueError("observable is not Hermitian")
    psi = np.asarray(psi, dtype=complex)
    return float(np.vdot(psi, o @ psi).real)


def ensemble_expectation(
    records: list[TrajectoryRecord], observable: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mean and standard error of <O> over trajectories at every snapshot time."""
    o = np.asarray(observable)
    scale = max(1.0, float(np.abs(o).max()))
    if np.abs(o - o.conj().T).max() > 1e-10 * scale:
        raise ValueError("observable is not Hermitian")
    times = records[0].times
    vals = np.empty((len(records), len(times)))
    for i, rec in enumerate(records):
        if rec.states.shape[0] != len(times):
            raise ValueError("records disagree on the snapshot grid")
        opsi = rec.states @ o.T
        vals[i] = np.einsum("td,td->t", rec.states.conj(), opsi).real
    se = vals.std(axis=0, ddof=1) / np.sqrt(len(records)) if len(records) > 1 else np.zeros_like(times)
    return times, vals.mean(axis=0), se


def freezing_monitor(
    record: TrajectoryRecord, charge: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Trajectory-resolved mean and variance of a Hermitian charge.

    Returns (times, <Q>, <Q^2> - <Q>^2). A trajectory has frozen into a
    symmetry sector once the variance stays at zero.
    """
    q = np.asarray(charge, dtype=complex)
    scale = max(1.0, float(np.abs(q).max()))
    if np.abs(q - q.conj().T).max() > 1e-10 * scale:
        raise ValueError("charge is not Hermitian")
    states = record.states
    qpsi = states @ q.T
    q2psi = qpsi @ q.T
    means = np.einsum("td,td->t", states.conj(), qpsi).real
    seconds = np.einsum("td,td->t", states.conj(), q2psi).real
    return record.times, means, seconds - means**2


# ---------------------------------------------------------------------------
# binary trajectory files

QTRJ_MAGIC = b"QTRJ"
QTRJ_VERSION = 1

_JUMP_DTYPE = np.dtype([("time", "<f8"), ("channel", "<u4")])


def write_qtrj(path: str | Path, record: TrajectoryRecord) -> None:
    """Dump a trajectory to the QTRJ binary layout.

    Little-endian throughout: 4-byte magic "QTRJ", then u32 version, u32
    Hilbert dimension, u32 snapshot count; per snapshot one f64 time followed
    by 2*dim f64 interleaved (Re, Im) amplitudes; then the jump log as a u32
    count and (f64 time, u32 channel) pairs.
    """
    dim = record.dim
    n = len(record)
    with open(path, "wb") as fh:
        fh.write(QTRJ_MAGIC)
        fh.write(np.array([QTRJ_VERSION, dim, n], dtype="<u4").tobytes())
        block = np.empty((n, 1 + 2 * dim), dtype="<f8")
        block[:, 0] = record.times
        block[:, 1::2] = record.states.real
        block[:, 2::2] = record.states.imag
        fh.write(block.tobytes())
        fh.write(np.array([len(record.jumps)], dtype="<u4").tobytes())
        log = np.empty(len(record.jumps), dtype=_JUMP_DTYPE)
        for i, ev in enumerate(record.jumps):
            log[i] = (ev.time, ev.channel)
        fh.write(log.tobytes())


def read_qtrj(path: str | Path) -> TrajectoryRecord:
    """Read a QTRJ file back; the returned record carries config=None."""
    raw = Path(path).read_bytes()
    if raw[:4] != QTRJ_MAGIC:
        raise ValueError(f"{path}: not a QTRJ file (bad magic {raw[:4]!r})")
    version, dim, n = np.frombuffer(raw, dtype="<u4", count=3, offset=4)
    if version != QTRJ_VERSION:
        raise ValueError(f"{path}: unsupported QTRJ version {version}")
    offset = 4 + 12
    block = np.frombuffer(raw, dtype="<f8", count=n * (1 + 2 * dim), offset=offset)
    block = block.reshape(n, 1 + 2 * dim)
    offset += block.nbytes
    times = block[:, 0].copy()
    states = block[:, 1::2] + 1j * block[:, 2::2]
    (n_jumps,) = np.frombuffer(raw, dtype="<u4", count=1, offset=offset)
    offset += 4
    log = np.frombuffer(raw, dtype=_JUMP_DTYPE, count=n_jumps, offset=offset)
    jumps = tuple(JumpEvent(float(t), int(c)) for t, c in log)
    return TrajectoryRecord(times=times, states=states, jumps=jumps, config=None)
