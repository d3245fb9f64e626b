"""Quantities on the fixed-spectrum SPD orbit.

An orbit is the set of SPD matrices sharing one strictly ordered
eigenvalue spectrum; its points differ only by a rotation of the
eigenbasis.  This module provides the whitening matrix, the commutator
torque, the inertia-inverse preconditioner, the observation
log-likelihood with its derivatives, the identifiability gap, and the
error metrics used by the benchmarks.
"""

from dataclasses import dataclass

import numpy as np

from .linalg import (
    BranchCutError,
    EigDecomp,
    check_rotation,
    check_symmetric,
    commutator,
    expm_skew,
    frob_norm,
    logm_rot,
    sym_eig,
    symmetrize,
)

__all__ = [
    "SingularWhiteningError",
    "Spectrum",
    "OrbitState",
    "NoiseModel",
    "whiten",
    "torque",
    "inertia_inverse",
    "whitened_spectral_gap",
    "wishart_nll",
    "directional_dV",
    "curvature_closed_form",
    "orbit_log",
    "angular_error_deg_spd2",
    "geodesic_error_deg_so3",
    "FD_STEP",
    "GRADIENT_CHECK_TOL",
    "CURVATURE_CHECK_TOL",
    "DEFAULT_INERTIA_EPS",
]

# shared constants for the finite-difference theory checks
FD_STEP = 1e-5
GRADIENT_CHECK_TOL = 1e-5
CURVATURE_CHECK_TOL = 1e-3
DEFAULT_INERTIA_EPS = 1e-6

_SINGULAR_EIG = 1e-12


class SingularWhiteningError(ValueError):
    """Whitening matrix numerically singular (smallest eigenvalue < 1e-12)."""


@dataclass(frozen=True)
class Spectrum:
    """Strictly descending, strictly positive eigenvalues."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if np.any(vals <= 0):
            raise ValueError("spectrum must be strictly positive")
        if np.any(np.diff(vals) > -1e-12):
            raise ValueError("spectrum must be strictly descending")

    @property
    def dim(self):
        return len(self.values)

    def matrix(self):
        return np.diag(self.values)


@dataclass(frozen=True)
class NoiseModel:
    """Observation noise: isotropic variance and sample count."""

    sigma2: float = 0.1
    m_dof: int = 8

    def __post_init__(self):
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be >= 0")
        if self.m_dof < 1:
            raise ValueError("m_dof must be >= 1")


class OrbitState:
    """An SPD matrix together with its eigendecomposition and the
    spectrum it lives on.

    Construction checks orbit membership: the eigenvalues of ``m`` must
    match the spectrum within 1e-8.
    """

    __slots__ = ("m", "eig", "spectrum")

    def __init__(self, m, spectrum, eig=None, membership_tol=1e-8):
        m = check_symmetric(m, name="orbit state")
        eig = eig if eig is not None else sym_eig(m)
        drift = float(np.max(np.abs(eig.values - spectrum.values)))
        if drift > membership_tol:
            raise ValueError(
                f"matrix is off the orbit: eigenvalue drift {drift:.3e}"
            )
        self.m = m
        self.eig = eig
        self.spectrum = spectrum

    @classmethod
    def from_rotation(cls, spectrum, q):
        q = check_rotation(q, name="orbit rotation")
        m = symmetrize((q * spectrum.values) @ q.T)
        return cls(m, spectrum, eig=EigDecomp(spectrum.values.copy(), q))

    @classmethod
    def identity(cls, spectrum):
        return cls.from_rotation(spectrum, np.eye(spectrum.dim))

    @property
    def dim(self):
        return self.spectrum.dim

    def rotated(self, r):
        """Conjugate by a rotation and re-snap the eigenvalues to the
        exact spectrum.  Returns (new_state, raw_eig_drift)."""
        r = check_rotation(r, name="drift rotation")
        m_raw = symmetrize(r @ self.m @ r.T)
        eig = sym_eig(m_raw)
        drift = float(np.max(np.abs(eig.values - self.spectrum.values)))
        snapped = OrbitState.from_rotation(self.spectrum, eig.vectors)
        return snapped, drift


def whiten(state, noise):
    """S = M + sigma^2 I."""
    return state.m + noise.sigma2 * np.eye(state.dim)


def _whitening_inverse(state, noise):
    d_vals = state.spectrum.values + noise.sigma2
    if float(np.min(d_vals)) < _SINGULAR_EIG:
        raise SingularWhiteningError(
            f"whitening matrix singular: min eigenvalue {np.min(d_vals):.3e}"
        )
    u = state.eig.vectors
    return (u / d_vals) @ u.T


def torque(state, c, noise):
    """Whitened commutator torque S^-1 [C, M] S^-1 (skew-symmetric)."""
    c = check_symmetric(c, name="observation")
    s_inv = _whitening_inverse(state, noise)
    t = s_inv @ commutator(c, state.m) @ s_inv
    out = 0.5 * (t - t.T)
    np.fill_diagonal(out, 0.0)
    return out


def inertia_inverse(state, noise, eps, tau):
    """Eigenbasis-wise preconditioning of a torque.

    Entry (i, j) in the eigenbasis is scaled by
    d_i d_j / ((lambda_i - lambda_j)^2 + eps) with d_i = lambda_i + sigma^2.
    """
    if eps <= 0:
        raise ValueError("eps must be > 0")
    u = state.eig.vectors
    lam = state.eig.values
    d_vals = lam + noise.sigma2
    tau_tilde = u.T @ tau @ u
    gaps = np.subtract.outer(lam, lam) ** 2
    weights = np.outer(d_vals, d_vals) / (gaps + eps)
    out = u @ (weights * tau_tilde) @ u.T
    out = 0.5 * (out - out.T)
    np.fill_diagonal(out, 0.0)
    return out


def whitened_spectral_gap(spec, sigma2):
    """Identifiability parameter: the smallest pairwise separation of
    the whitened ratios lambda / (lambda + sigma^2)."""
    ratios = spec.values / (spec.values + sigma2)
    diffs = np.abs(np.subtract.outer(ratios, ratios))
    mask = ~np.eye(len(ratios), dtype=bool)
    return float(np.min(diffs[mask]))


def wishart_nll(state, c, noise):
    """Observation negative log-likelihood
    (m/2) (log det S + tr(S^-1 C)), up to an additive constant."""
    c = check_symmetric(c, name="observation")
    d_vals = state.spectrum.values + noise.sigma2
    if float(np.min(d_vals)) < _SINGULAR_EIG:
        raise SingularWhiteningError(
            f"whitening matrix singular: min eigenvalue {np.min(d_vals):.3e}"
        )
    s_inv = _whitening_inverse(state, noise)
    logdet = float(np.sum(np.log(d_vals)))
    return 0.5 * noise.m_dof * (logdet + float(np.trace(s_inv @ c)))


def directional_dV(state, c, noise, w, h=FD_STEP):
    """Central finite difference of the NLL along the orbit curve
    M(t) = exp(t w) M exp(t w)^T."""

    def value(t):
        r = expm_skew(t * w)
        shifted = OrbitState.from_rotation(state.spectrum, r @ state.eig.vectors)
        return wishart_nll(shifted, c, noise)

    return (value(h) - value(-h)) / (2.0 * h)


def curvature_closed_form(spec, sigma2, m_dof, w):
    """Directional curvature weight of the population NLL at the
    aligned state:  (m/4) sum_{i!=j} w_ij^2 (l_i - l_j)^2 / (d_i d_j).

    The true second derivative along exp(t w) equals twice this value
    (each unordered pair is counted twice in the displayed sum)."""
    lam = spec.values
    d_vals = lam + sigma2
    gaps = np.subtract.outer(lam, lam) ** 2
    denom = np.outer(d_vals, d_vals)
    mask = ~np.eye(len(lam), dtype=bool)
    contrib = (np.asarray(w, float) ** 2) * gaps / denom
    return 0.25 * m_dof * float(np.sum(contrib[mask]))


def _sign_matrices(d):
    """All diagonal +-1 matrices with determinant +1."""
    out = []
    for bits in range(2 ** (d - 1)):
        signs = np.ones(d)
        for k in range(d - 1):
            if bits >> k & 1:
                signs[k] = -1.0
        signs[-1] = np.prod(signs[:-1])
        out.append(signs)
    return out


def orbit_log(state, ref):
    """Relative configuration log xi = log(Q D Q_ref^T), minimized in
    Frobenius norm over the stabilizer of diagonal sign matrices.

    Raises :class:`BranchCutError` when every stabilizer representative
    sits at the branch cut.
    """
    if not np.allclose(state.spectrum.values, ref.spectrum.values):
        raise ValueError("states live on different orbits")
    q, q_ref = state.eig.vectors, ref.eig.vectors
    best = None
    best_norm = np.inf
    for signs in _sign_matrices(state.dim):
        rel = (q * signs) @ q_ref.T
        try:
            xi = logm_rot(rel)
        except BranchCutError:
            continue
        n = frob_norm(xi)
        if n < best_norm:
            best, best_norm = xi, n
    if best is None:
        raise BranchCutError("all stabilizer representatives are at the branch cut")
    return best


def angular_error_deg_spd2(est, truth):
    """Orientation error of the leading eigenvector, in degrees,
    compared modulo pi (ellipse symmetry).  Result in [0, 90]."""
    u_est = sym_eig(check_symmetric(est, name="estimate")).vectors[:, 0]
    u_true = sym_eig(check_symmetric(truth, name="truth")).vectors[:, 0]
    a = np.arctan2(u_est[1], u_est[0])
    b = np.arctan2(u_true[1], u_true[0])
    diff = (a - b) % np.pi
    diff = min(diff, np.pi - diff)
    return float(np.degrees(diff))


def geodesic_error_deg_so3(est, truth):
    """Rotation angle of est^T truth, in degrees."""
    est = check_rotation(est, name="estimate")
    truth = check_rotation(truth, name="truth")
    rel = est.T @ truth
    cos_theta = np.clip(0.5 * (np.trace(rel) - 1.0), -1.0, 1.0)
    return float(np.degrees(np.arccos(cos_theta)))
