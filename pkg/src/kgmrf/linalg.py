"""Dense kernels for small symmetric, skew-symmetric and rotation matrices.

Everything here targets dimensions 2..16 and favours determinism over
speed: the eigensolver is a cyclic Jacobi sweep, the exponential and
logarithm use closed forms for d=2,3 and series with scaling/squaring
otherwise.
"""

import numpy as np

__all__ = [
    "ConvergenceError",
    "BranchCutError",
    "EigDecomp",
    "symmetrize",
    "check_symmetric",
    "check_skew",
    "check_rotation",
    "sym_eig",
    "expm_skew",
    "logm_rot",
    "commutator",
    "frob_inner",
    "frob_norm",
    "nearest_rotation",
    "so3_basis",
]

_SERIES_TOL = 1e-14
_JACOBI_TOL = 1e-14
_JACOBI_MAX_SWEEPS = 50
_ROTATION_TOL = 1e-9
_BRANCH_TOL = 1e-6


class ConvergenceError(RuntimeError):
    """Iterative kernel failed to reach its tolerance."""


class BranchCutError(ValueError):
    """Rotation logarithm requested at or too close to angle pi."""


class EigDecomp:
    """Eigendecomposition of a symmetric matrix.

    Attributes
    ----------
    values : (d,) ndarray
        Eigenvalues sorted descending (ties keep original order).
    vectors : (d, d) ndarray
        Orthogonal matrix with det +1; column i pairs with values[i].
    """

    __slots__ = ("values", "vectors")

    def __init__(self, values, vectors):
        self.values = np.asarray(values, dtype=float)
        self.vectors = np.asarray(vectors, dtype=float)

    def reconstruct(self):
        return (self.vectors * self.values) @ self.vectors.T


def symmetrize(a):
    a = np.asarray(a, dtype=float)
    return 0.5 * (a + a.T)


def check_symmetric(a, tol=1e-9, name="matrix"):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    if frob_norm(a - a.T) > tol * max(1.0, frob_norm(a)):
        raise ValueError(f"{name} is not symmetric")
    return symmetrize(a)


def check_skew(w, tol=1e-9, name="matrix"):
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError(f"{name} must be square, got shape {w.shape}")
    if frob_norm(w + w.T) > tol * max(1.0, frob_norm(w)):
        raise ValueError(f"{name} is not skew-symmetric")
    out = 0.5 * (w - w.T)
    np.fill_diagonal(out, 0.0)
    return out


def check_rotation(r, tol=_ROTATION_TOL, name="matrix"):
    r = np.asarray(r, dtype=float)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise ValueError(f"{name} must be square, got shape {r.shape}")
    d = r.shape[0]
    if frob_norm(r.T @ r - np.eye(d)) > tol:
        raise ValueError(f"{name} is not orthogonal within {tol}")
    if np.linalg.det(r) <= 0:
        raise ValueError(f"{name} has non-positive determinant")
    return r


def commutator(a, b):
    """[a, b] = ab - ba."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a @ b - b @ a


def frob_inner(a, b):
    return float(np.tensordot(np.asarray(a, float), np.asarray(b, float), axes=2))


def frob_norm(a):
    return float(np.linalg.norm(np.asarray(a, float)))


def _jacobi_rotate(a, v, p, q):
    """Zero out a[p, q] with a Givens rotation; accumulate into v."""
    apq = a[p, q]
    if apq == 0.0:
        return
    theta = 0.5 * (a[q, q] - a[p, p]) / apq
    # smaller root of t^2 + 2*theta*t - 1 = 0, stable form
    t = np.sign(theta) / (abs(theta) + np.hypot(theta, 1.0)) if theta != 0.0 else 1.0
    c = 1.0 / np.hypot(t, 1.0)
    s = t * c
    rows = np.array([p, q])
    g = np.array([[c, s], [-s, c]])
    a[rows, :] = g.T @ a[rows, :]
    a[:, rows] = a[:, rows] @ g
    a[p, q] = a[q, p] = 0.0
    v[:, rows] = v[:, rows] @ g


def _offdiag_norm(a):
    return float(np.linalg.norm(a - np.diag(np.diag(a))))


def sym_eig(a, tol=_JACOBI_TOL, max_sweeps=_JACOBI_MAX_SWEEPS):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi.

    Returns an :class:`EigDecomp` with descending eigenvalues and a
    special-orthogonal eigenvector matrix.

    Raises
    ------
    ConvergenceError
        If the off-diagonal norm has not dropped below ``tol`` (relative
        to the matrix norm) after ``max_sweeps`` sweeps.
    """
    a = check_symmetric(a, name="eigensolver input")
    d = a.shape[0]
    v = np.eye(d)
    scale = max(frob_norm(a), 1.0)
    work = a.copy()
    for _ in range(max_sweeps):
        off = _offdiag_norm(work)
        if off <= tol * scale:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                if abs(work[p, q]) > 0.0:
                    _jacobi_rotate(work, v, p, q)
    else:
        off = _offdiag_norm(work)
        if off > tol * scale:
            raise ConvergenceError(
                f"Jacobi did not converge in {max_sweeps} sweeps; "
                f"off-diagonal norm {off:.3e} for matrix norm {scale:.3e}"
            )
    values = np.diag(work).copy()
    # descending sort, ties broken by original index (stable sort on -values)
    order = np.argsort(-values, kind="stable")
    values = values[order]
    v = v[:, order]
    if np.linalg.det(v) < 0:
        v[:, -1] = -v[:, -1]
    return EigDecomp(values, v)


def so3_basis():
    """Canonical basis (E1, E2, E3) of so(3): generators of rotations
    about x, y, z."""
    e1 = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]])
    e2 = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]])
    e3 = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    return e1, e2, e3


def expm_skew(w):
    """Exponential of a skew-symmetric matrix; always a rotation.

    d=2 and d=3 use closed forms, larger d uses scaling-and-squaring on
    the truncated series with term tolerance 1e-14.
    """
    w = check_skew(w, name="exponential input")
    d = w.shape[0]
    if d == 2:
        theta = w[1, 0]
        c, s = np.cos(theta), np.sin(theta)
        return np.array([[c, -s], [s, c]])
    if d == 3:
        theta = frob_norm(w) / np.sqrt(2.0)
        if theta < 1e-12:
            return np.eye(3) + w + 0.5 * (w @ w)
        k = w / theta
        return np.eye(3) + np.sin(theta) * k + (1.0 - np.cos(theta)) * (k @ k)
    # scaling and squaring
    norm = frob_norm(w)
    n_squarings = max(0, int(np.ceil(np.log2(norm / 0.5))) if norm > 0.5 else 0)
    ws = w / (2.0 ** n_squarings)
    result = np.eye(d)
    term = np.eye(d)
    k = 1
    while True:
        term = term @ ws / k
        result = result + term
        if frob_norm(term) < _SERIES_TOL:
            break
        k += 1
        if k > 200:
            raise ConvergenceError("exponential series failed to converge")
    for _ in range(n_squarings):
        result = result @ result
    # clean up orthogonality drift from the squarings
    return nearest_rotation(result)


def _rotation_max_angle(r):
    """Largest principal rotation angle of r, from the symmetric part."""
    sym = symmetrize(r)
    cos_min = float(np.min(sym_eig(sym).values))
    return float(np.arccos(np.clip(cos_min, -1.0, 1.0)))


def logm_rot(r, branch_tol=_BRANCH_TOL):
    """Principal logarithm of a rotation matrix.

    Raises :class:`BranchCutError` when any principal angle is within
    ``branch_tol`` of pi.
    """
    r = check_rotation(r, name="logarithm input")
    d = r.shape[0]
    if _rotation_max_angle(r) >= np.pi - branch_tol:
        raise BranchCutError("rotation angle too close to pi for the principal branch")
    if d == 2:
        theta = np.arctan2(r[1, 0], r[0, 0])
        return np.array([[0.0, -theta], [theta, 0.0]])
    if d == 3:
        cos_theta = np.clip(0.5 * (np.trace(r) - 1.0), -1.0, 1.0)
        theta = np.arccos(cos_theta)
        if theta < 1e-8:
            return 0.5 * (r - r.T)
        return theta / (2.0 * np.sin(theta)) * (r - r.T)
    # general d: inverse scaling via rotation square roots, then the
    # Mercator series log(I + X)
    n_roots = 0
    work = r.copy()
    while frob_norm(work - np.eye(d)) > 0.25:
        work = _rotation_sqrt(work)
        n_roots += 1
        if n_roots > 60:
            raise ConvergenceError("square-root reduction failed for rotation log")
    x = work - np.eye(d)
    term = np.eye(d)
    log = np.zeros((d, d))
    for k in range(1, 200):
        term = term @ x
        log = log + ((-1.0) ** (k + 1) / k) * term
        if frob_norm(term) < _SERIES_TOL:
            break
    else:
        raise ConvergenceError("log series failed to converge")
    log = log * (2.0 ** n_roots)
    out = 0.5 * (log - log.T)
    np.fill_diagonal(out, 0.0)
    return out


def _rotation_sqrt(r):
    """Principal square root of a rotation with all angles below pi
    (Denman-Beavers iteration)."""
    y = r.copy()
    z = np.eye(r.shape[0])
    for _ in range(60):
        y_next = 0.5 * (y + np.linalg.inv(z))
        z_next = 0.5 * (z + np.linalg.inv(y))
        if frob_norm(y_next - y) < _SERIES_TOL:
            return nearest_rotation(y_next)
        y, z = y_next, z_next
    raise ConvergenceError("rotation square root did not converge")


def nearest_rotation(x):
    """Orthogonal polar factor of x with determinant +1.

    Computed from the eigendecomposition of x^T x; the column paired
    with the smallest singular value absorbs a sign flip when needed.
    """
    x = np.asarray(x, dtype=float)
    eig = sym_eig(x.T @ x)
    inv_sqrt = eig.vectors @ np.diag(1.0 / np.sqrt(np.maximum(eig.values, 1e-30))) @ eig.vectors.T
    r = x @ inv_sqrt
    if np.linalg.det(r) < 0:
        # flip the direction of least variance
        u = eig.vectors[:, -1]
        r = r - 2.0 * np.outer(r @ u, u)
    return r
