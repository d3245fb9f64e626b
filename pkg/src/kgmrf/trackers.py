"""Online trackers behind one common interface.

Every tracker holds its own mutable state, exposes ``update(obs)``
(``obs is None`` encodes dropout) returning the new estimate, and a
sklearn-style parameter surface via ``get_params``/``set_params``.
``fit(observations)`` runs a whole sequence and stores the estimates.

Two families are provided: SPD-orbit trackers whose estimate is a
fixed-spectrum covariance matrix, and SO(3) trackers whose estimate is
a rotation.
"""

import numpy as np
from sklearn.base import BaseEstimator

from .geometry import (
    DEFAULT_INERTIA_EPS,
    NoiseModel,
    OrbitState,
    inertia_inverse,
    torque,
)
from .linalg import (
    check_rotation,
    check_symmetric,
    expm_skew,
    frob_norm,
    logm_rot,
    nearest_rotation,
    sym_eig,
    symmetrize,
)

__all__ = [
    "stability_check",
    "characteristic_roots",
    "kappa_max_estimate",
    "KGMRFTracker",
    "RiemannianEMA",
    "EuclideanEMA",
    "TangentKF",
    "AlphaBeta",
    "RotationKGMRF",
    "RotationEMA",
    "RotationEuclideanEMA",
    "RotationTangentKF",
    "RotationAlphaBeta",
]


# ---------------------------------------------------------------------------
# stability domain


def characteristic_roots(eta, gamma, kappa):
    """Roots of r^2 - (2 - gamma - eta*kappa) r + (1 - gamma)."""
    return np.roots([1.0, -(2.0 - gamma - eta * kappa), 1.0 - gamma])


def stability_check(eta, gamma, kappa_max):
    """True iff (eta, gamma) lies strictly inside the stability domain
    0 < gamma < 2, 0 < eta < 2 (2 - gamma) / kappa_max."""
    if not 0.0 < gamma < 2.0:
        return False
    return 0.0 < eta < 2.0 * (2.0 - gamma) / kappa_max


def kappa_max_estimate(spectrum, sigma2, eps=DEFAULT_INERTIA_EPS):
    """Largest linearized mode coefficient of the preconditioned torque.

    The curvature weight of pair (i, j) is (l_i - l_j)^2 / (d_i d_j) and
    the inertia inverse multiplies it by d_i d_j / ((l_i - l_j)^2 + eps),
    so each mode coefficient is g^2 / (g^2 + eps).
    """
    lam = spectrum.values
    gaps = np.subtract.outer(lam, lam) ** 2
    mask = ~np.eye(len(lam), dtype=bool)
    coeffs = gaps[mask] / (gaps[mask] + eps)
    return float(np.max(coeffs))


# ---------------------------------------------------------------------------
# common plumbing


class _SequenceTracker(BaseEstimator):
    """Shared fit/predict surface: ``fit`` consumes a sequence of
    observations (None entries are dropouts) and stores ``estimates_``."""

    def update(self, obs):  # pragma: no cover - abstract
        raise NotImplementedError

    @property
    def estimate(self):  # pragma: no cover - abstract
        raise NotImplementedError

    def fit(self, observations, y=None):
        self.estimates_ = [self.update(obs) for obs in observations]
        return self

    def predict(self, n_steps=1):
        """Coast forward without observations and return the estimates."""
        return [self.update(None) for _ in range(n_steps)]


# ---------------------------------------------------------------------------
# SPD-orbit trackers


class KGMRFTracker(_SequenceTracker):
    """Second-order tracker on a fixed-spectrum SPD orbit.

    Per frame: measure the whitened commutator torque of the observation,
    precondition it with the inertia inverse, kick the angular velocity,
    and drift the state by the group exponential.  ``obs is None``
    coasts on the stored velocity.

    Three gain modes are supported.  The fixed-gain mode applies the
    kick-drift recursion verbatim: velocity <- (1-gamma)*velocity +
    eta*innovation, then one drift by the velocity (plus an optional
    ``position_gain`` kick).  The ``gain_schedule="rls"`` mode replaces
    the fixed gains with the recursive-least-squares schedule of a
    zero-process-noise constant-velocity filter (position gain
    2(2n-1)/(n(n+1)), velocity gain 6/(n(n+1)) after n observations)
    and uses predict-measure-correct ordering, which is the consistent
    estimator for a constant unknown rotation rate.  The
    ``gain_schedule="kalman"`` mode runs one error-state constant-velocity
    Kalman filter per eigenbasis mode (i < j pair), with the measurement
    variance derived from the local curvature of the observation
    log-likelihood: R_ij = d_i d_j / (m (lambda_i - lambda_j)^2).

    Parameters
    ----------
    eta : velocity gain (step size) on the preconditioned torque.
    gamma : velocity damping in [0, 2); the retained fraction is 1-gamma.
    position_gain : extra immediate rotation by ``position_gain`` times
        the preconditioned torque during the drift.  0 recovers the
        plain kick-drift update; a positive value removes the
        steady-state lag of absolute damping under constant rotation.
    eps : inertia regularizer for coincident eigenvalues.
    sigma2, m_dof : observation noise model.
    gain_schedule : None for fixed gains, "rls" for the decaying
        schedule; in rls mode the velocity gain is capped at
        ``velocity_gain_cap`` during initiation (the uncapped n=1..2
        gains amplify observation noise past the 45-degree capture
        range of the torque and the track never locks).
    p_vel0 : kalman mode, initial velocity variance per mode.  The
        position variance starts at zero (the track is initialized on
        the truth), so this prior bounds how fast early noisy
        innovations can move the velocity state; pick it near the
        square of the expected rotation rate.
    q_vel : kalman mode, per-step process noise on the velocity.  Zero
        gives a growing-memory filter for a constant rate; a small
        positive value keeps the gains open so rate changes are
        followed.
    fixed_gains : kalman mode, optional (k_pos, k_vel) pair that
        bypasses the covariance recursion and applies stationary loop
        gains; useful when the steady-state error must be an ergodic
        time average.
    init_omega : optional initial angular velocity (skew matrix);
        defaults to zero.
    momentum_enabled : ablation switch; when False the velocity state is
        dropped and each frame applies one first-order torque step with
        gain ``first_order_gain``.
    intrinsic_enabled : ablation switch; when False the inertia inverse
        is bypassed (identity preconditioner).
    obs_smoothing : optional pre-smoothing weight kept on the previous
        observation average before the torque is measured; None disables.
    omega_star : oracle angular velocity; when given, damping acts on
        the velocity error instead of the absolute velocity.
    """

    def __init__(self, init_state, eta=0.05, gamma=0.95, position_gain=0.0,
                 eps=DEFAULT_INERTIA_EPS, sigma2=0.1, m_dof=8,
                 gain_schedule=None, velocity_gain_cap=0.15,
                 p_vel0=0.01, q_vel=0.0, fixed_gains=None, init_omega=None,
                 momentum_enabled=True, intrinsic_enabled=True,
                 first_order_gain=0.2, obs_smoothing=None, omega_star=None):
        if eta <= 0:
            raise ValueError("eta must be > 0")
        if not 0.0 <= gamma < 2.0:
            raise ValueError("gamma must be in [0, 2)")
        if eps <= 0:
            raise ValueError("eps must be > 0")
        if gain_schedule not in (None, "rls", "kalman"):
            raise ValueError("gain_schedule must be None, 'rls' or 'kalman'")
        self.init_state = init_state
        self.eta = eta
        self.gamma = gamma
        self.position_gain = position_gain
        self.eps = eps
        self.sigma2 = sigma2
        self.m_dof = m_dof
        self.gain_schedule = gain_schedule
        self.velocity_gain_cap = velocity_gain_cap
        self.p_vel0 = p_vel0
        self.q_vel = q_vel
        self.fixed_gains = fixed_gains
        self.init_omega = init_omega
        self.momentum_enabled = momentum_enabled
        self.intrinsic_enabled = intrinsic_enabled
        self.first_order_gain = first_order_gain
        self.obs_smoothing = obs_smoothing
        self.omega_star = omega_star
        self.reset()

    def reset(self):
        self.state_ = self.init_state
        d = self.init_state.dim
        if self.init_omega is not None:
            self.omega_ = np.asarray(self.init_omega, float).copy()
        else:
            self.omega_ = np.zeros((d, d))
        self.max_eig_drift_ = 0.0
        self.n_obs_ = 0
        self._obs_avg = None
        self._modes = [(i, j) for i in range(d) for j in range(i + 1, d)]
        self._mode_p = np.array(
            [[[0.0, 0.0], [0.0, self.p_vel0]] for _ in self._modes]
        )
        lam = self.init_state.spectrum.values
        d_vals = lam + self.sigma2
        self._mode_r = np.array(
            [
                d_vals[i] * d_vals[j] / (self.m_dof * (lam[i] - lam[j]) ** 2)
                for i, j in self._modes
            ]
        )
        if self.obs_smoothing is not None:
            # pre-averaged observations carry less noise; scale the
            # per-mode measurement variance by the EMA variance factor
            w = self.obs_smoothing
            self._mode_r = self._mode_r * (1.0 - w) / (1.0 + w)

    @property
    def estimate(self):
        return self.state_.m

    def _noise(self):
        return NoiseModel(sigma2=self.sigma2, m_dof=self.m_dof)

    def _innovation(self, obs):
        if obs is None:
            return np.zeros_like(self.omega_)
        if self.obs_smoothing is not None:
            if self._obs_avg is None:
                self._obs_avg = obs
            else:
                w = self.obs_smoothing
                self._obs_avg = w * self._obs_avg + (1.0 - w) * obs
            obs = self._obs_avg
        tau = torque(self.state_, obs, self._noise())
        if self.intrinsic_enabled:
            return inertia_inverse(self.state_, self._noise(), self.eps, tau)
        return tau

    def _drift(self, step):
        self.state_, drift = self.state_.rotated(expm_skew(step))
        self.max_eig_drift_ = max(self.max_eig_drift_, drift)

    def _update_rls(self, obs):
        self._drift(self.omega_)
        if obs is None:
            return self.estimate
        delta = self._innovation(obs)
        if self.state_.dim == 2:
            # invert the sin(2*angle)/2 response so large lags are not
            # underestimated during initiation
            nrm = frob_norm(delta) / np.sqrt(2.0)
            if nrm > 1e-12:
                delta = delta * (np.arcsin(min(2.0 * nrm, 1.0)) / (2.0 * nrm))
        self.n_obs_ += 1
        n = self.n_obs_
        k1 = min(2.0 * (2 * n - 1) / (n * (n + 1)), 1.0)
        k2 = min(6.0 / (n * (n + 1)), self.velocity_gain_cap)
        self.omega_ = self.omega_ + k2 * delta
        self._drift(k1 * delta)
        return self.estimate

    def _update_kalman(self, obs):
        self._drift(self.omega_)
        f = np.array([[1.0, 1.0], [0.0, 1.0]])
        if self.fixed_gains is None:
            self._mode_p = f @ self._mode_p @ f.T
            self._mode_p[:, 1, 1] += self.q_vel
        if obs is None:
            return self.estimate
        delta = self._innovation(obs)
        u = self.state_.eig.vectors
        d_til = u.T @ delta @ u
        v_til = u.T @ self.omega_ @ u
        pos_til = np.zeros_like(d_til)
        for k, (i, j) in enumerate(self._modes):
            z = d_til[j, i]
            if self.fixed_gains is not None:
                gain = np.asarray(self.fixed_gains, float)
            else:
                p = self._mode_p[k]
                s = p[0, 0] + self._mode_r[k]
                gain = p[:, 0] / s
                self._mode_p[k] = p - np.outer(gain, p[0, :])
            pos_til[j, i] += gain[0] * z
            pos_til[i, j] -= gain[0] * z
            v_til[j, i] += gain[1] * z
            v_til[i, j] -= gain[1] * z
        self.omega_ = u @ (0.5 * (v_til - v_til.T)) @ u.T
        self.omega_ = 0.5 * (self.omega_ - self.omega_.T)
        self._drift(u @ pos_til @ u.T)
        return self.estimate

    def _update_oracle(self, obs):
        # predict with the current velocity, then damp the velocity error
        # toward the reference rate; only this ordering realizes the
        # zero-error fixed point of the velocity-error recursion
        self._drift(self.omega_)
        delta = self._innovation(obs)
        u = self.omega_ - self.omega_star
        self.omega_ = self.omega_star + (1.0 - self.gamma) * u + self.eta * delta
        return self.estimate

    def update(self, obs):
        if self.momentum_enabled:
            if self.gain_schedule == "rls":
                return self._update_rls(obs)
            if self.gain_schedule == "kalman":
                return self._update_kalman(obs)
            if self.omega_star is not None:
                return self._update_oracle(obs)
        delta = self._innovation(obs)
        if not self.momentum_enabled:
            self._drift(self.first_order_gain * delta)
            return self.estimate
        self.omega_ = (1.0 - self.gamma) * self.omega_ + self.eta * delta
        self._drift(self.omega_ + self.position_gain * delta)
        return self.estimate


class RiemannianEMA(_SequenceTracker):
    """Geodesic interpolation toward the observation on SPD(d).

    ``beta`` is the weight on the new observation: beta=0 freezes the
    estimate, beta=1 jumps to the observation.  Dropout leaves the
    estimate unchanged.
    """

    def __init__(self, init_m, beta=0.2):
        if not 0.0 <= beta <= 1.0:
            raise ValueError("beta must be in [0, 1]")
        self.init_m = init_m
        self.beta = beta
        self.reset()

    def reset(self):
        self.m_ = symmetrize(np.asarray(self.init_m, float))

    @property
    def estimate(self):
        return self.m_

    def update(self, obs):
        if obs is not None:
            self.m_ = spd_geodesic(self.m_, check_symmetric(obs), self.beta)
        return self.m_


class EuclideanEMA(_SequenceTracker):
    """Linear interpolation toward the observation (may leave SPD)."""

    def __init__(self, init_m, beta=0.2):
        if not 0.0 <= beta <= 1.0:
            raise ValueError("beta must be in [0, 1]")
        self.init_m = init_m
        self.beta = beta
        self.reset()

    def reset(self):
        self.m_ = symmetrize(np.asarray(self.init_m, float))

    @property
    def estimate(self):
        return self.m_

    def update(self, obs):
        if obs is not None:
            self.m_ = self.beta * check_symmetric(obs) + (1.0 - self.beta) * self.m_
        return self.m_


def _spd_power(m, p):
    eig = sym_eig(m)
    vals = np.maximum(eig.values, 1e-300)
    return symmetrize((eig.vectors * vals ** p) @ eig.vectors.T)


def spd_geodesic(a, b, t):
    """Point at parameter t on the affine-invariant geodesic from a to b."""
    a_half = _spd_power(a, 0.5)
    a_neg_half = _spd_power(a, -0.5)
    inner = symmetrize(a_neg_half @ b @ a_neg_half)
    return symmetrize(a_half @ _spd_power(inner, t) @ a_half)


def _sym_to_vec(x):
    """Orthonormal coordinates of a symmetric matrix (off-diagonals
    scaled by sqrt 2 so the Frobenius norm is preserved)."""
    d = x.shape[0]
    iu = np.triu_indices(d, 1)
    return np.concatenate([np.diag(x), np.sqrt(2.0) * x[iu]])


def _vec_to_sym(v, d):
    out = np.diag(v[:d]).astype(float)
    iu = np.triu_indices(d, 1)
    out[iu] = v[d:] / np.sqrt(2.0)
    out = out + np.triu(out, 1).T
    return out


def _spd_log(base, target):
    half = _spd_power(base, 0.5)
    neg_half = _spd_power(base, -0.5)
    inner = symmetrize(neg_half @ target @ neg_half)
    eig = sym_eig(inner)
    clamped = np.maximum(eig.values, 1e-12)
    log_inner = (eig.vectors * np.log(clamped)) @ eig.vectors.T
    return symmetrize(half @ log_inner @ half), bool(np.min(eig.values) < 1e-12)


def _spd_exp(base, tangent):
    half = _spd_power(base, 0.5)
    neg_half = _spd_power(base, -0.5)
    inner = symmetrize(neg_half @ tangent @ neg_half)
    eig = sym_eig(inner)
    exp_inner = (eig.vectors * np.exp(eig.values)) @ eig.vectors.T
    return symmetrize(half @ exp_inner @ half)


class _ScalarCVKF:
    """Constant-velocity Kalman filter applied independently to each
    coordinate: shared 2x2 covariance, per-coordinate [position,
    velocity] state.  Process noise q acts on velocity, measurement
    noise r on position."""

    def __init__(self, n_coords, q, r):
        if q <= 0 or r <= 0:
            raise ValueError("q and r must be > 0")
        self.q = q
        self.r = r
        self.x = np.zeros((n_coords, 2))
        self.p = np.eye(2)

    def predict(self):
        f = np.array([[1.0, 1.0], [0.0, 1.0]])
        self.x = self.x @ f.T
        self.p = f @ self.p @ f.T + np.array([[0.0, 0.0], [0.0, self.q]])

    def correct(self, z):
        s = self.p[0, 0] + self.r
        k = self.p[:, 0] / s
        self.x = self.x + np.outer(z - self.x[:, 0], k)
        self.p = self.p - np.outer(k, self.p[0, :])


class TangentKF(_SequenceTracker):
    """Constant-velocity Kalman filter in the tangent space at the
    current estimate, with exponential-map retraction.

    The tangent base point is moved to the estimate after every frame,
    so positions re-zero while velocities persist.  Retractions leaving
    the PD cone clamp eigenvalues at 1e-9 and set ``clamped_``.
    """

    def __init__(self, init_m, q=0.005, r=0.1):
        self.init_m = init_m
        self.q = q
        self.r = r
        self.reset()

    def reset(self):
        self.m_ = symmetrize(np.asarray(self.init_m, float))
        d = self.m_.shape[0]
        self._kf = _ScalarCVKF(d * (d + 1) // 2, self.q, self.r)
        self.clamped_ = False

    @property
    def estimate(self):
        return self.m_

    def update(self, obs):
        d = self.m_.shape[0]
        self._kf.predict()
        if obs is not None:
            tangent, clamped = _spd_log(self.m_, check_symmetric(obs))
            self.clamped_ |= clamped
            self._kf.correct(_sym_to_vec(tangent))
        step = _vec_to_sym(self._kf.x[:, 0].copy(), d)
        self.m_ = _spd_exp(self.m_, step)
        eig = sym_eig(self.m_)
        if float(np.min(eig.values)) < 1e-9:
            self.clamped_ = True
            self.m_ = symmetrize(
                (eig.vectors * np.maximum(eig.values, 1e-9)) @ eig.vectors.T
            )
        self._kf.x[:, 0] = 0.0
        return self.m_


class AlphaBeta(_SequenceTracker):
    """Classical fixed-gain position/velocity tracker on vectorized
    matrix entries.

    ``project`` maps the raw estimate back to the output domain: SPD
    trackers symmetrize, SO(3) trackers re-project to the nearest
    rotation.  Dropout advances the position by the velocity only.
    """

    def __init__(self, init_x, alpha=0.4, beta=0.1, project=None):
        if not 0.0 < alpha < 1.0:
            raise ValueError("alpha must be in (0, 1)")
        if beta < 0:
            raise ValueError("beta must be >= 0")
        self.init_x = init_x
        self.alpha = alpha
        self.beta = beta
        self.project = project
        self.reset()

    def reset(self):
        self.x_ = np.asarray(self.init_x, float).copy()
        self.v_ = np.zeros_like(self.x_)

    @property
    def estimate(self):
        return self._projected()

    def _projected(self):
        return self.project(self.x_) if self.project is not None else self.x_

    def update(self, obs):
        if obs is None:
            self.x_ = self.x_ + self.v_
        else:
            resid = np.asarray(obs, float) - self.x_
            self.x_ = self.x_ + self.alpha * resid + self.v_
            self.v_ = self.v_ + self.beta * resid
        return self._projected()


def spd_alpha_beta(init_m, alpha=0.4, beta=0.1):
    return AlphaBeta(init_m, alpha=alpha, beta=beta, project=symmetrize)


# ---------------------------------------------------------------------------
# SO(3) trackers


class RotationKGMRF(_SequenceTracker):
    """Second-order pose tracker on SO(3).

    Innovation xi = log(R^T R_obs); velocity integrates beta * xi with
    retention gamma; the pose advances by exp(alpha * xi + velocity).
    Dropout coasts: the pose advances by the stored velocity alone.
    """

    def __init__(self, init_r, alpha=0.5, beta=0.05, gamma=0.98):
        self.init_r = init_r
        self.alpha = alpha
        self.beta = beta
        self.gamma = gamma
        self.reset()

    def reset(self):
        self.r_ = check_rotation(np.asarray(self.init_r, float))
        self.omega_ = np.zeros((3, 3))

    @property
    def estimate(self):
        return self.r_

    def update(self, obs):
        if obs is None:
            xi = np.zeros((3, 3))
        else:
            xi = logm_rot(self.r_.T @ check_rotation(np.asarray(obs, float)))
        self.omega_ = self.gamma * self.omega_ + self.beta * xi
        self.r_ = self.r_ @ expm_skew(self.alpha * xi + self.omega_)
        return self.r_


class RotationEMA(_SequenceTracker):
    """Geodesic interpolation toward the observed rotation; freezes on
    dropout."""

    def __init__(self, init_r, beta=0.2):
        self.init_r = init_r
        self.beta = beta
        self.reset()

    def reset(self):
        self.r_ = check_rotation(np.asarray(self.init_r, float))

    @property
    def estimate(self):
        return self.r_

    def update(self, obs):
        if obs is not None:
            xi = logm_rot(self.r_.T @ check_rotation(np.asarray(obs, float)))
            self.r_ = self.r_ @ expm_skew(self.beta * xi)
        return self.r_


class RotationEuclideanEMA(_SequenceTracker):
    """Entrywise linear blend followed by projection to the nearest
    rotation."""

    def __init__(self, init_r, beta=0.2):
        self.init_r = init_r
        self.beta = beta
        self.reset()

    def reset(self):
        self.r_ = check_rotation(np.asarray(self.init_r, float))

    @property
    def estimate(self):
        return self.r_

    def update(self, obs):
        if obs is not None:
            blend = self.beta * np.asarray(obs, float) + (1.0 - self.beta) * self.r_
            self.r_ = nearest_rotation(blend)
        return self.r_


class RotationTangentKF(_SequenceTracker):
    """Constant-velocity Kalman filter on so(3) coordinates at the
    current pose."""

    def __init__(self, init_r, q=0.005, r=0.1):
        self.init_r = init_r
        self.q = q
        self.r = r
        self.reset()

    def reset(self):
        self.r_ = check_rotation(np.asarray(self.init_r, float))
        self._kf = _ScalarCVKF(3, self.q, self.r)

    @property
    def estimate(self):
        return self.r_

    def update(self, obs):
        self._kf.predict()
        if obs is not None:
            xi = logm_rot(self.r_.T @ check_rotation(np.asarray(obs, float)))
            z = np.array([xi[2, 1], xi[0, 2], xi[1, 0]])
            self._kf.correct(z)
        coords = self._kf.x[:, 0]
        step = np.array(
            [
                [0.0, -coords[2], coords[1]],
                [coords[2], 0.0, -coords[0]],
                [-coords[1], coords[0], 0.0],
            ]
        )
        self.r_ = self.r_ @ expm_skew(step)
        self._kf.x[:, 0] = 0.0
        return self.r_


def rotation_alpha_beta(init_r, alpha=0.5, beta=0.05):
    return AlphaBeta(
        np.asarray(init_r, float).ravel().copy(),
        alpha=alpha,
        beta=beta,
        project=lambda x: nearest_rotation(x.reshape(3, 3)),
    )


class RotationAlphaBeta(_SequenceTracker):
    """Alpha-beta recursion on the 9 vectorized rotation entries with
    polar re-projection of the estimate."""

    def __init__(self, init_r, alpha=0.5, beta=0.05):
        self.init_r = init_r
        self.alpha = alpha
        self.beta = beta
        self.reset()

    def reset(self):
        self._ab = AlphaBeta(
            np.asarray(self.init_r, float).ravel().copy(),
            alpha=self.alpha,
            beta=self.beta,
            project=lambda x: nearest_rotation(x.reshape(3, 3)),
        )

    @property
    def estimate(self):
        return self._ab.estimate

    def update(self, obs):
        flat = None if obs is None else np.asarray(obs, float).ravel()
        return self._ab.update(flat)
