"""Mean-field limit of the dissipative top: drift on the unit sphere, exact kicks.

The magnetization m = <S>/S obeys a closed flow once quantum fluctuations are
dropped. The drift is everywhere tangent to the sphere and the kick is an
exact rotation, so |m| is a conserved quantity of the combined map; the
integrator inherits norm conservation to its own order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ORBIT_COLUMNS = ("t", "m_x", "m_y", "m_z", "z", "phi")

_GRID_TOL = 1e-9


@dataclass(frozen=True)
class ClassicalParams:
    omega_z: float = 0.0
    g: float = 0.0
    omega_x: float = 0.0
    gamma: float = 0.0
    k: float = 0.0
    tau: float = 1.0

    def __post_init__(self) -> None:
        if self.gamma < 0:
            raise ValueError(f"gamma must be nonnegative, got {self.gamma}")
        if self.k != 0.0 and not self.tau > 0:
            raise ValueError(f"kick period must be positive, got {self.tau}")


def drift(m: np.ndarray, params: ClassicalParams) -> np.ndarray:
    """Autonomous part of the flow; batch-friendly over leading axes of (..., 3).

    dm_x = -omega_z m_y - 2 g m_y m_z + 2 gamma m_x m_z
    dm_y = +omega_z m_x + 2 g m_x m_z - omega_x m_z + 2 gamma m_y m_z
    dm_z = +omega_x m_y - 2 gamma (m_x^2 + m_y^2)

    m . drift(m) = 0 identically, so the flow stays on the initial sphere.
    """
    m = np.asarray(m, dtype=float)
    if m.shape[-1] != 3:
        raise ValueError(f"expected (..., 3) magnetization, got shape {m.shape}")
    mx, my, mz = m[..., 0], m[..., 1], m[..., 2]
    out = np.empty_like(m)
    out[..., 0] = -params.omega_z * my - 2.0 * params.g * my * mz + 2.0 * params.gamma * mx * mz
    out[..., 1] = (
        params.omega_z * mx
        + 2.0 * params.g * mx * mz
        - params.omega_x * mz
        + 2.0 * params.gamma * my * mz
    )
    out[..., 2] = params.omega_x * my - 2.0 * params.gamma * (mx * mx + my * my)
    return out


def kick_map(m: np.ndarray, k: float) -> np.ndarray:
    """Impulsive Sy^2 kick: rotation about the y axis by the angle 2 k m_y.

    m_y is itself conserved while the pulse acts, so the delta kick integrates
    in closed form; |m| is preserved to machine precision. kick_map(k) and
    kick_map(-k) are exact inverses.
    """
    m = np.asarray(m, dtype=float)
    if m.shape[-1] != 3:
        raise ValueError(f"expected (..., 3) magnetization, got shape {m.shape}")
    phi = 2.0 * k * m[..., 1]
    c, s = np.cos(phi), np.sin(phi)
    out = np.empty_like(m)
    out[..., 0] = c * m[..., 0] + s * m[..., 2]
    out[..., 1] = m[..., 1]
    out[..., 2] = -s * m[..., 0] + c * m[..., 2]
    return out


def _rk4_step(m: np.ndarray, dt: float, params: ClassicalParams) -> np.ndarray:
    k1 = drift(m, params)
    k2 = drift(m + 0.5 * dt * k1, params)
    k3 = drift(m + 0.5 * dt * k2, params)
    k4 = drift(m + dt * k3, params)
    return m + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_orbit(
    m0: np.ndarray,
    params: ClassicalParams,
    dt: float,
    horizon: float,
    record_stride: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Fixed-step RK4 with exact kicks at t = n tau (kick first, like the
    quantum engine: recorded samples at kick times are pre-kick).

    Accepts one initial condition (3,) or a batch (B, 3); returns (times,
    orbits) with orbits of shape (n_samples, ..., 3).
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if horizon < 0:
        raise ValueError(f"horizon must be nonnegative, got {horizon}")
    if record_stride < 1:
        raise ValueError(f"record_stride must be >= 1, got {record_stride}")
    m = np.asarray(m0, dtype=float)
    if m.shape[-1] != 3:
        raise ValueError(f"expected (..., 3) initial conditions, got shape {m.shape}")
    n_steps = int(round(horizon / dt))
    if abs(n_steps * dt - horizon) > _GRID_TOL * max(1.0, horizon):
        raise ValueError(f"horizon {horizon} is not an integer multiple of dt {dt}")
    kick_stride = 0
    if params.k != 0.0:
        kick_stride = int(round(params.tau / dt))
        if kick_stride < 1 or abs(kick_stride * dt - params.tau) > _GRID_TOL:
            raise ValueError(f"kick period {params.tau} is not an integer multiple of dt {dt}")

    times, samples = [], []
    for s in range(n_steps + 1):
        if s % record_stride == 0:
            times.append(s * dt)
            samples.append(m)
        if s == n_steps:
            break
        if kick_stride and s % kick_stride == 0:
            m = kick_map(m, params.k)
        m = _rk4_step(m, dt, params)
    return np.array(times), np.array(samples)


def orbit_export(times: np.ndarray, orbit: np.ndarray) -> np.ndarray:
    """Flatten one orbit to rows (t, m_x, m_y, m_z, z, phi).

    z = m_z and phi = atan2(m_y, m_x). On the rotation axis (m_x = m_y = 0)
    the angle is undefined; the previous sample's value is carried forward,
    starting from 0 if the orbit begins there.
    """
    times = np.asarray(times, dtype=float)
    orbit = np.asarray(orbit, dtype=float)
    if orbit.ndim != 2 or orbit.shape[1] != 3:
        raise ValueError(f"expected a single orbit of shape (n, 3), got {orbit.shape}")
    if times.shape[0] != orbit.shape[0]:
        raise ValueError("times and orbit length mismatch")
    phi = np.arctan2(orbit[:, 1], orbit[:, 0])
    on_axis = (orbit[:, 0] == 0.0) & (orbit[:, 1] == 0.0)
    if on_axis.any():
        phi = phi.copy()
        last = 0.0
        for i in range(phi.size):
            if on_axis[i]:
                phi[i] = last
            else:
                last = phi[i]
    out = np.empty((times.size, 6))
    out[:, 0] = times
    out[:, 1:4] = orbit
    out[:, 4] = orbit[:, 2]
    out[:, 5] = phi
    return out


def random_sphere_points(n: int, rng: np.random.Generator | int) -> np.ndarray:
    """n points uniform on the unit sphere (Gaussian direction trick)."""
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    v = gen.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)
