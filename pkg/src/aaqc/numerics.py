"""Dense complex linear algebra on plain numpy arrays.

Vectors and matrices are ``numpy.ndarray`` objects with ``complex128``
entries. Hermitian problems go to LAPACK by default; a cyclic Jacobi
solver is available as ``method="jacobi"`` for small matrices and as an
independent cross-check. Unitary matrices are diagonalized through two
Hermitian problems (the Hermitian part, then the anti-Hermitian part
inside each near-degenerate cluster), so no general nonsymmetric solver
is involved.

Eigenangles follow the convention ``U v = exp(-1j * theta) v`` with
``theta`` in ``[0, 2*pi)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import NoConvergence, NonHermitian, NonUnitary, UnnormalizedVector

TWO_PI = 2.0 * np.pi

HERMITIAN_TOL = 1e-10
UNITARY_TOL = 1e-10
NORM_TOL = 1e-12
CLUSTER_TOL = 1e-8

JACOBI_TOL = 1e-13
JACOBI_MAX_SWEEPS = 100


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues (or eigenangles) with orthonormal eigenvector columns."""

    values: np.ndarray
    vectors: np.ndarray

    def __iter__(self):
        yield self.values
        yield self.vectors

    def __len__(self) -> int:
        return len(self.values)


def as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-d array, got shape {a.shape}")
    return a


def as_vector(v) -> np.ndarray:
    a = np.asarray(v, dtype=complex)
    if a.ndim != 1:
        raise ValueError(f"expected a 1-d array, got shape {a.shape}")
    return a


def basis_vector(dim: int, index: int) -> np.ndarray:
    e = np.zeros(dim, dtype=complex)
    e[index] = 1.0
    return e


def normalize(v) -> np.ndarray:
    v = as_vector(v)
    n = np.linalg.norm(v)
    if n == 0.0:
        raise UnnormalizedVector("cannot normalize the zero vector")
    return v / n


def check_normalized(v, tol: float = NORM_TOL) -> np.ndarray:
    v = as_vector(v)
    err = abs(np.linalg.norm(v) - 1.0)
    if err > tol:
        raise UnnormalizedVector(f"vector norm deviates from 1 by {err:.3e}")
    return v


def is_hermitian(h, tol: float = HERMITIAN_TOL) -> bool:
    h = as_matrix(h)
    if h.shape[0] != h.shape[1]:
        return False
    return bool(np.max(np.abs(h - h.conj().T), initial=0.0) <= tol)


def is_unitary(u, tol: float = UNITARY_TOL) -> bool:
    u = as_matrix(u)
    if u.shape[0] != u.shape[1]:
        return False
    dev = u.conj().T @ u - np.eye(u.shape[0])
    return bool(np.max(np.abs(dev), initial=0.0) <= tol)


def _hermitian_tolerance(h: np.ndarray, tol: float) -> float:
    # relative to the matrix scale, never looser than the absolute tolerance for |H| <= 1
    return tol * max(1.0, float(np.max(np.abs(h), initial=0.0)))


def _phase_fix(vectors: np.ndarray) -> np.ndarray:
    """Make the first non-negligible component of every column real positive."""
    out = vectors.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        idx = np.flatnonzero(np.abs(col) > 1e-12)
        if idx.size:
            c = col[idx[0]]
            out[:, j] = col * (abs(c) / c)
    return out


def _clusters(values: np.ndarray, tol: float) -> list[np.ndarray]:
    """Group sorted values into runs whose consecutive gaps are <= tol."""
    groups = []
    start = 0
    for i in range(1, len(values) + 1):
        if i == len(values) or values[i] - values[i - 1] > tol:
            groups.append(np.arange(start, i))
            start = i
    return groups


def _order_degenerate(values: np.ndarray, vectors: np.ndarray, tol: float) -> np.ndarray:
    """Deterministic column order inside degenerate clusters.

    Columns are keyed by the position of their first non-negligible
    component, then by its magnitude, descending.
    """
    order = np.arange(len(values))
    for grp in _clusters(values, tol):
        if grp.size < 2:
            continue

        def key(j):
            col = vectors[:, j]
            idx = np.flatnonzero(np.abs(col) > 1e-12)
            first = int(idx[0]) if idx.size else col.size
            mag = abs(col[first]) if idx.size else 0.0
            return (first, -round(mag, 10))

        order[grp] = sorted(grp, key=key)
    return order


def jacobi_eigh(h, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS):
    """Cyclic Jacobi diagonalization of a complex Hermitian matrix.

    Each rotation first removes the phase of the pivot ``a[p, q]`` and then
    applies the real symmetric Jacobi rotation. Iteration stops once the
    off-diagonal Frobenius norm falls below ``tol`` times the Frobenius
    norm of the input.

    Returns unsorted ``(values, vectors)``.
    """
    a = as_matrix(h).copy()
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    scale = np.linalg.norm(a)
    if n < 2 or scale == 0.0:
        return a.diagonal().real.copy(), v
    target = tol * scale
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(a.diagonal()))
        if off <= target:
            return a.diagonal().real.copy(), v
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                r = abs(apq)
                if r <= 1e-300:
                    continue
                phase = apq / r
                app = a[p, p].real
                aqq = a[q, q].real
                theta = (aqq - app) / (2.0 * r)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot = np.array([[c, s], [-s * np.conj(phase), c * np.conj(phase)]])
                cols = [p, q]
                a[:, cols] = a[:, cols] @ rot
                a[cols, :] = rot.conj().T @ a[cols, :]
                a[p, q] = a[q, p] = 0.0
                v[:, cols] = v[:, cols] @ rot
    raise NoConvergence(f"Jacobi iteration did not converge in {max_sweeps} sweeps")


def eig_hermitian(h, method: str = "lapack", tol: float = HERMITIAN_TOL) -> EigenDecomposition:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending.

    Parameters
    ----------
    h:
        Square complex matrix, Hermitian within ``tol`` (scaled by the
        largest entry when that exceeds one).
    method:
        ``"lapack"`` (numpy ``eigh``) or ``"jacobi"``.

    Raises
    ------
    NonHermitian
        If ``h`` is not Hermitian within tolerance.
    NoConvergence
        If the Jacobi solver hits its sweep cap.
    """
    h = as_matrix(h)
    if h.shape[0] != h.shape[1]:
        raise NonHermitian(f"matrix is not square: {h.shape}")
    dev = float(np.max(np.abs(h - h.conj().T), initial=0.0))
    if dev > _hermitian_tolerance(h, tol):
        raise NonHermitian(f"matrix deviates from Hermitian by {dev:.3e}")
    hs = 0.5 * (h + h.conj().T)
    if method == "lapack":
        try:
            w, v = np.linalg.eigh(hs)
        except np.linalg.LinAlgError as exc:
            raise NoConvergence(str(exc)) from exc
    elif method == "jacobi":
        w, v = jacobi_eigh(hs)
    else:
        raise ValueError(f"unknown method {method!r}")
    order = np.argsort(w, kind="stable")
    w, v = w[order], v[:, order]
    v = _phase_fix(v)
    deg_tol = 1e-12 * max(1.0, float(np.max(np.abs(w), initial=0.0)))
    order = _order_degenerate(w, v, deg_tol)
    return EigenDecomposition(w[order], v[:, order])


def eigenangles_of(u: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """Eigenangles ``-arg(v^H U v)`` folded into ``[0, 2*pi)``."""
    rq = np.einsum("ij,ik,kj->j", vectors.conj(), u, vectors)
    theta = np.mod(-np.angle(rq), TWO_PI)
    theta[theta >= TWO_PI] -= TWO_PI
    return theta


def eig_unitary(
    u, tol: float = UNITARY_TOL, cluster_tol: float = CLUSTER_TOL, method: str = "lapack"
) -> EigenDecomposition:
    """Eigenangles and eigenvectors of a unitary matrix.

    Returns angles ``theta`` in ``[0, 2*pi)``, ascending, with
    ``u @ vectors[:, j] == exp(-1j*theta[j]) * vectors[:, j]``.
    """
    u = as_matrix(u)
    if not is_unitary(u, tol):
        raise NonUnitary("matrix is not unitary within tolerance")
    herm = 0.5 * (u + u.conj().T)
    anti = (u - u.conj().T) / 2j
    first = eig_hermitian(herm, method=method, tol=1e-8)
    vecs = first.vectors.copy()
    for grp in _clusters(first.values, cluster_tol):
        if grp.size < 2:
            continue
        sub = vecs[:, grp]
        k = sub.conj().T @ anti @ sub
        inner = eig_hermitian(0.5 * (k + k.conj().T), method=method, tol=1e-8)
        vecs[:, grp] = sub @ inner.vectors
    theta = eigenangles_of(u, vecs)
    order = np.argsort(theta, kind="stable")
    theta, vecs = theta[order], _phase_fix(vecs[:, order])
    order = _order_degenerate(theta, vecs, 1e-10)
    return EigenDecomposition(theta[order], vecs[:, order])


def exp_hermitian(h, t: float, method: str = "lapack") -> np.ndarray:
    """``exp(-1j * h * t)`` through the eigendecomposition of ``h``."""
    w, v = eig_hermitian(h, method=method)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def kron(*factors) -> np.ndarray:
    """Kronecker product of one or more matrices (or vectors), left to right."""
    if not factors:
        raise ValueError("kron needs at least one factor")
    return reduce(np.kron, (np.asarray(f, dtype=complex) for f in factors))


def projector(v) -> np.ndarray:
    v = check_normalized(v)
    return np.outer(v, v.conj())


def circular_distance(a, b):
    """Distance between angles on the circle, in ``[0, pi]``."""
    d = np.mod(np.asarray(a) - np.asarray(b), TWO_PI)
    return np.minimum(d, TWO_PI - d)


def wrap_to_pi(x):
    """Fold angle differences into ``(-pi, pi]``."""
    y = np.mod(np.asarray(x, dtype=float) + np.pi, TWO_PI) - np.pi
    return np.where(y == -np.pi, np.pi, y)
