"""Deterministic, seeded generators for trajectories, observations and
dropout masks.

Randomness discipline: every consumer draws from an independent stream
keyed by (seed, purpose label).  Streams are Philox counter-based
generators, so identical (seed, label) pairs give identical output on
every platform; Gaussians are produced by Box-Muller on top of the
uniform stream.
"""

import zlib
from dataclasses import dataclass, field

import numpy as np

from .geometry import OrbitState, Spectrum
from .linalg import check_rotation, expm_skew, frob_norm, so3_basis, sym_eig, symmetrize

__all__ = [
    "stream",
    "gaussian",
    "wishart_obs",
    "dropout_mask",
    "Spd2Protocol",
    "So3Protocol",
    "Trajectory",
    "spd2_trajectory",
    "so3_trajectory",
    "so3_observation",
    "varying_velocity_trajectory",
    "trajectory_to_text",
    "TUNING_SEEDS",
    "TESTING_SEEDS",
]

TUNING_SEEDS = (0, 1, 2, 3, 4)
TESTING_SEEDS = (5, 6, 7, 8, 9)


def stream(seed, label):
    """Independent deterministic stream for one (seed, purpose) pair."""
    key = np.array([np.uint64(seed), np.uint64(zlib.crc32(label.encode()))])
    return np.random.Generator(np.random.Philox(key=key))


def gaussian(rng, n):
    """n standard normals via Box-Muller (platform-stable)."""
    m = (n + 1) // 2
    u1 = rng.random(m)
    u2 = rng.random(m)
    r = np.sqrt(-2.0 * np.log1p(-u1))
    z = np.concatenate([r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)])
    return z[:n]


def wishart_obs(rng, s_star, m_dof):
    """Sample covariance C = (1/m) sum v v^T with v ~ N(0, S*)."""
    s_star = symmetrize(s_star)
    eig = sym_eig(s_star)
    if float(np.min(eig.values)) < -1e-9:
        raise ValueError("scale matrix is not positive semi-definite")
    factor = eig.vectors * np.sqrt(np.maximum(eig.values, 0.0))
    d = s_star.shape[0]
    z = gaussian(rng, m_dof * d).reshape(m_dof, d)
    v = z @ factor.T
    return symmetrize(v.T @ v / m_dof)


def dropout_mask(rng, horizon, p):
    """Boolean series; True means the observation is present."""
    if not 0.0 <= p < 1.0:
        raise ValueError("dropout probability must be in [0, 1)")
    return rng.random(horizon) >= p


@dataclass(frozen=True)
class Spd2Protocol:
    """Rotating-ellipse protocol: constant angular velocity on SPD(2)."""

    spectrum: Spectrum = field(default_factory=lambda: Spectrum(np.array([2.0, 0.5])))
    omega: float = 0.08
    sigma2: float = 0.1
    m_dof: int = 8
    horizon: int = 400
    dropout_p: float = 0.0


@dataclass(frozen=True)
class So3Protocol:
    """Coupled-oscillation protocol for camera-shake rotations.

    Amplitudes, frequencies and phases are drawn per seed from the
    stated ranges.
    """

    amp_range: tuple = (0.05, 0.15)
    freq_range: tuple = (0.01, 0.05)
    sigma_r: float = 0.05
    horizon: int = 200
    dropout_p: float = 0.0


class Trajectory:
    """Ground-truth states plus the per-step angular velocities."""

    def __init__(self, states, velocities):
        if len(states) != len(velocities) + 1:
            raise ValueError("need one velocity per transition")
        self.states = states
        self.velocities = velocities

    def __len__(self):
        return len(self.states)

    @property
    def total_variation(self):
        return float(
            sum(
                frob_norm(b - a)
                for a, b in zip(self.velocities[:-1], self.velocities[1:])
            )
        )


def _spd_path(spectrum, omegas):
    q = np.eye(spectrum.dim)
    states = [OrbitState.from_rotation(spectrum, q)]
    for w in omegas:
        q = expm_skew(w) @ q
        states.append(OrbitState.from_rotation(spectrum, q))
    return Trajectory(states, list(omegas))


def spd2_trajectory(proto):
    """Constant-velocity rotation of the ellipse spectrum."""
    d = proto.spectrum.dim
    w = np.zeros((d, d))
    w[0, 1], w[1, 0] = -proto.omega, proto.omega
    return _spd_path(proto.spectrum, [w.copy() for _ in range(proto.horizon - 1)])


def varying_velocity_trajectory(base_omega, v_omega_budget, n_changes, horizon, rng,
                                spectrum=None):
    """Piecewise-constant angular velocity on SPD(2) with total
    variation exactly equal to the budget.

    The budget is split into ``n_changes`` equally spaced jumps of equal
    magnitude and random sign.
    """
    spectrum = spectrum or Spectrum(np.array([2.0, 0.5]))
    omega = base_omega
    jump = v_omega_budget / n_changes / np.sqrt(2.0) if n_changes else 0.0
    change_at = {
        int(round((k + 1) * (horizon - 1) / (n_changes + 1))): k
        for k in range(n_changes)
    }
    omegas = []
    for t in range(horizon - 1):
        if t in change_at and jump:
            omega = omega + jump * (1.0 if rng.random() < 0.5 else -1.0)
        w = np.array([[0.0, -omega], [omega, 0.0]])
        omegas.append(w)
    return _spd_path(spectrum, omegas)


def so3_trajectory(proto, rng):
    """Multi-frequency oscillation on SO(3); parameters drawn per seed."""
    basis = so3_basis()
    lo_a, hi_a = proto.amp_range
    lo_f, hi_f = proto.freq_range
    amps = lo_a + (hi_a - lo_a) * rng.random(3)
    freqs = lo_f + (hi_f - lo_f) * rng.random(3)
    phases = 2.0 * np.pi * rng.random(3)
    r = np.eye(3)
    states = [r]
    velocities = []
    for t in range(proto.horizon - 1):
        w = sum(
            amps[k] * np.sin(2.0 * np.pi * freqs[k] * t + phases[k]) * basis[k]
            for k in range(3)
        )
        velocities.append(w)
        r = r @ expm_skew(w)
        states.append(r)
    return Trajectory(states, velocities)


def so3_observation(rng, r_true, sigma_r):
    """Noisy rotation: right-multiplied exponential of isotropic
    Gaussian axis noise."""
    r_true = check_rotation(r_true, name="true rotation")
    basis = so3_basis()
    eps = sigma_r * gaussian(rng, 3)
    noise = sum(eps[k] * basis[k] for k in range(3))
    return r_true @ expm_skew(noise)


def trajectory_to_text(traj, path):
    """One frame per row: frame index, flattened state, flattened
    velocity (zeros for the final frame)."""
    rows = []
    d = np.asarray(_state_matrix(traj.states[0])).shape[0]
    zero = np.zeros((d, d))
    for t, state in enumerate(traj.states):
        m = _state_matrix(state)
        w = traj.velocities[t] if t < len(traj.velocities) else zero
        entries = np.concatenate([m.ravel(), np.asarray(w).ravel()])
        rows.append(str(t) + " " + " ".join(f"{x:.17g}" for x in entries))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(rows) + "\n")


def _state_matrix(state):
    return state.m if isinstance(state, OrbitState) else state
