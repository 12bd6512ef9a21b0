"""Fixed-size 3x3 double-precision kernels.

Everything here operates on ``numpy`` arrays of shape ``(3, 3)``. The
symmetric eigensolver is a cyclic Jacobi iteration, which is stable for
3x3 input and deterministic. The SVD is assembled from two symmetric
eigenproblems (for ``M M^T`` and for the cofactor matrix) so that both the
largest and the smallest singular directions are computed without
catastrophic cancellation; this matters for the very elongated matrices
that appear along divergent sequences in SL(3, R).
"""

import math
from typing import NamedTuple

import numpy as np

from .errors import ValidationError

SYMMETRY_TOL = 1e-12
SIGN_TOL = 1e-12
JACOBI_MAX_SWEEPS = 50
SINGULAR_RTOL = 1e-14
SPD_TOL = 0.0

_PAIRS = ((0, 1), (0, 2), (1, 2))


class EigSym(NamedTuple):
    values: np.ndarray
    vectors: np.ndarray


class SVD3(NamedTuple):
    u: np.ndarray
    s: np.ndarray
    v: np.ndarray


def as_mat3(m) -> np.ndarray:
    """Return ``m`` as a finite float (3, 3) array or raise."""
    a = np.asarray(m, dtype=float)
    if a.shape != (3, 3):
        raise ValidationError(f"expected a 3x3 matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError("matrix has non-finite entries")
    return a


def _fix_signs(V, tol=SIGN_TOL):
    # first component that is clearly nonzero must be positive
    V = V.copy()
    for j in range(3):
        col = V[:, j]
        scale = np.max(np.abs(col))
        for c in col:
            if abs(c) > tol * scale:
                if c < 0:
                    V[:, j] = -col
                break
    return V


def sym_eig(S, sym_tol=SYMMETRY_TOL, max_sweeps=JACOBI_MAX_SWEEPS) -> EigSym:
    """Eigendecomposition of a symmetric 3x3 matrix by cyclic Jacobi rotations.

    Parameters
    ----------
    S : array_like, shape (3, 3)
        Symmetric matrix. Asymmetry larger than ``sym_tol`` times
        ``max(1, |S|)`` raises :class:`ValidationError`.
    sym_tol : float
        Relative symmetry tolerance.
    max_sweeps : int
        Upper bound on Jacobi sweeps (convergence is quadratic, so a handful
        suffices in practice).

    Returns
    -------
    EigSym
        Eigenvalues in descending order and orthonormal eigenvectors as
        columns. The first clearly nonzero entry of every eigenvector is
        positive.
    """
    A = as_mat3(S)
    scale = max(1.0, float(np.max(np.abs(A))))
    if np.max(np.abs(A - A.T)) > sym_tol * scale:
        raise ValidationError("sym_eig requires a symmetric matrix")
    a = (0.5 * (A + A.T)).tolist()
    v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
    for _ in range(max_sweeps):
        off = a[0][1] ** 2 + a[0][2] ** 2 + a[1][2] ** 2
        diag = a[0][0] ** 2 + a[1][1] ** 2 + a[2][2] ** 2
        if off == 0.0 or off <= 1e-36 * diag:
            break
        for p, q in _PAIRS:
            apq = a[p][q]
            if apq == 0.0:
                continue
            # rotation annihilating a[p][q]
            theta = (a[q][q] - a[p][p]) / (2.0 * apq)
            t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + math.sqrt(theta * theta + 1.0))
            c = 1.0 / math.sqrt(t * t + 1.0)
            s = t * c
            r = 3 - p - q
            arp, arq = a[r][p], a[r][q]
            a[r][p] = a[p][r] = c * arp - s * arq
            a[r][q] = a[q][r] = s * arp + c * arq
            a[p][p] -= t * apq
            a[q][q] += t * apq
            a[p][q] = a[q][p] = 0.0
            for row in v:
                vp, vq = row[p], row[q]
                row[p] = c * vp - s * vq
                row[q] = s * vp + c * vq
    A = np.array(a)
    V = np.array(v)
    w = np.diag(A).copy()
    order = np.argsort(-w, kind="stable")
    return EigSym(w[order], _fix_signs(V[:, order]))


def cofactor(M) -> np.ndarray:
    """Cofactor matrix, so that ``M @ cofactor(M).T == det(M) * I``."""
    a = np.asarray(M, dtype=float)
    c = np.empty((3, 3))
    c[0] = np.cross(a[1], a[2])
    c[1] = np.cross(a[2], a[0])
    c[2] = np.cross(a[0], a[1])
    return c


def svd3(M, det=None, singular_rtol=SINGULAR_RTOL) -> SVD3:
    """Singular value decomposition ``M = U diag(s) V^T`` with rotations U, V.

    The top left singular vector comes from ``M M^T`` and the bottom one
    from the cofactor matrix (the left singular vectors of ``M^{-T}``), so
    that matrices with condition numbers far beyond ``1/eps`` still get
    accurate singular directions at both ends of the spectrum.

    Parameters
    ----------
    M : array_like, shape (3, 3)
    det : float, optional
        Known determinant (e.g. 1 for elements of SL(3)). When given it is
        trusted in place of the numerically computed one.
    singular_rtol : float
        ``|det| <= singular_rtol * |M|_F**3`` is treated as singular when
        ``det`` is not supplied.

    Returns
    -------
    SVD3
        ``s`` is descending and nonnegative and ``det(U) = +1``. For
        ``det(M) > 0`` also ``det(V) = +1``; for ``det(M) < 0`` no pair of
        rotations exists and ``V`` carries the reflection.
    """
    M = as_mat3(M)
    C = cofactor(M)
    if det is None:
        det = float(M[0] @ C[0])
        if det == 0.0 or abs(det) <= singular_rtol * np.linalg.norm(M) ** 3:
            raise ValidationError("svd3 requires a nonsingular matrix")
    elif det == 0.0:
        raise ValidationError("svd3 requires a nonsingular matrix")
    sgn = 1.0 if det > 0 else -1.0

    U0 = sym_eig(M @ M.T).vectors
    u1 = U0[:, 0]
    w = sym_eig(C @ C.T).vectors[:, 0]
    u3 = w - (w @ u1) * u1
    n3 = np.linalg.norm(u3)
    if n3 < 0.5:
        # repeated singular values: any orthonormal completion is valid
        u3 = U0[:, 2] - (U0[:, 2] @ u1) * u1
        n3 = np.linalg.norm(u3)
    u3 = u3 / n3
    u2 = np.cross(u3, u1)
    U = np.column_stack([u1, u2, u3])

    y1 = M.T @ u1
    s1 = np.linalg.norm(y1)
    y3 = C.T @ u3
    n = np.linalg.norm(y3)
    s3 = abs(det) / n
    s2 = min(max(abs(det) / (s1 * s3), s3), s1)
    v1 = y1 / s1
    v3 = sgn * y3 / n
    v2 = sgn * np.cross(v3, v1)
    V = np.column_stack([v1, v2, v3])
    return SVD3(U, np.array([s1, s2, s3]), V)


def expm(M) -> np.ndarray:
    """Matrix exponential.

    Symmetric input goes through :func:`sym_eig`; everything else uses
    scaling and squaring with a degree-18 Taylor polynomial.
    """
    A = as_mat3(M)
    if np.max(np.abs(A - A.T)) <= SYMMETRY_TOL * max(1.0, float(np.max(np.abs(A)))):
        w, V = sym_eig(A)
        return (V * np.exp(w)) @ V.T
    norm = float(np.max(np.sum(np.abs(A), axis=0)))
    k = max(0, int(np.ceil(np.log2(norm / 0.25)))) if norm > 0 else 0
    B = A / (2.0**k)
    E = np.eye(3)
    term = np.eye(3)
    for n in range(1, 19):
        term = term @ B / n
        E = E + term
    for _ in range(k):
        E = E @ E
    return E


def logm_spd(S, spd_tol=SPD_TOL) -> np.ndarray:
    """Principal logarithm of a symmetric positive-definite matrix."""
    A = as_mat3(S)
    try:
        w, V = sym_eig(A)
    except ValidationError as exc:
        raise ValidationError("logm_spd requires a symmetric matrix") from exc
    if w[-1] <= spd_tol:
        raise ValidationError("logm_spd requires a positive-definite matrix")
    return (V * np.log(w)) @ V.T
