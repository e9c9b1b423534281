"""Rank-1 kicked Floquet operators and the midpoint discretization of
continuous-time adiabatic evolutions.

The kicked system is ``H(t) = H0 + s |v><v| sum_n delta(t - n T)``; its
one-period map (just before a kick) is

    U_s = exp(-1j H0 T) exp(-1j s |v><v|),

and the kick has the closed form ``1 + (exp(-1j s) - 1) |v><v|``, so
``U_s`` is 2*pi-periodic in ``s``. Units: hbar = 1; an eigenangle
``theta`` and its quasienergy ``E`` are related by ``E = theta / T``.
"""

from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import BadGrid, NonHermitian, PreconditionError
from .numerics import (
    HERMITIAN_TOL,
    TWO_PI,
    as_matrix,
    check_normalized,
    eig_hermitian,
    exp_hermitian,
    is_hermitian,
)

#: U0 eigenangles closer than this (on the circle) are treated as one level.
LEVEL_CLUSTER_TOL = 1e-9
#: Clusters whose projection of ``v`` is below this are pure spectators.
SPECTATOR_TOL = 1e-12


def kick_operator(v, s: float) -> np.ndarray:
    """``exp(-1j s |v><v|)`` in closed form; ``v`` must be normalized."""
    v = check_normalized(v)
    return np.eye(v.size, dtype=complex) + (np.exp(-1j * s) - 1.0) * np.outer(v, v.conj())


@dataclass(frozen=True)
class CouplingStructure:
    """Split of the Hilbert space into the cyclic subspace of ``v`` under
    ``U0`` and the flat spectator levels orthogonal to it.

    ``basis`` has one column per distinct U0 level that ``v`` touches; in
    that basis ``U0`` is ``diag(phases)`` and ``v`` is the real positive
    vector ``weights``.
    """

    basis: np.ndarray
    angles: np.ndarray
    weights: np.ndarray
    spectator_angles: np.ndarray
    spectator_vectors: np.ndarray

    @property
    def phases(self) -> np.ndarray:
        return np.exp(-1j * self.angles)

    @property
    def size(self) -> int:
        return self.basis.shape[1]

    def block(self, s: float) -> np.ndarray:
        """``U_s`` restricted to the coupled subspace."""
        c = self.weights
        k = np.eye(c.size, dtype=complex) + (np.exp(-1j * s) - 1.0) * np.outer(c, c)
        return self.phases[:, None] * k


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def _null_complement(y: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the complement of unit vector ``y`` in C^n."""
    n = y.size
    if n == 1:
        return np.zeros((1, 0), dtype=complex)
    _, _, vh = np.linalg.svd(y.conj()[None, :])
    return vh[1:].conj().T


def _coupling_structure(energies, basis, v, T) -> CouplingStructure:
    angles = np.mod(energies * T, TWO_PI)
    angles[angles > TWO_PI - LEVEL_CLUSTER_TOL] = 0.0
    order = np.argsort(angles, kind="stable")
    groups, start = [], 0
    for i in range(1, len(order) + 1):
        if i == len(order) or angles[order[i]] - angles[order[i - 1]] > LEVEL_CLUSTER_TOL:
            groups.append(order[start:i])
            start = i

    cb, ca, cw, sa, sv = [], [], [], [], []
    for grp in groups:
        q = basis[:, grp]
        rep = float(np.mod(-np.angle(np.mean(np.exp(-1j * angles[grp]))), TWO_PI))
        if rep >= TWO_PI - LEVEL_CLUSTER_TOL:
            rep = 0.0
        y = q.conj().T @ v
        c = float(np.linalg.norm(y))
        if c < SPECTATOR_TOL:
            sa.extend([rep] * len(grp))
            sv.append(q)
            continue
        y = y / c
        cb.append(q @ y)
        ca.append(rep)
        cw.append(c)
        rest = q @ _null_complement(y)
        if rest.shape[1]:
            sa.extend([rep] * rest.shape[1])
            sv.append(rest)
    dim = basis.shape[0]
    spect = np.hstack(sv) if sv else np.zeros((dim, 0), dtype=complex)
    return CouplingStructure(
        basis=_readonly(np.column_stack(cb)),
        angles=_readonly(np.array(ca)),
        weights=_readonly(np.array(cw)),
        spectator_angles=_readonly(np.array(sa, dtype=float)),
        spectator_vectors=_readonly(spect),
    )


class FloquetSystem:
    """Immutable ``(H0, v, T)`` triple defining the kicked map ``U_s``.

    The eigendecomposition of ``H0`` and ``exp(-1j H0 T)`` are computed
    once at construction. ``states`` is an optional read-only mapping of
    named reference vectors (for instance the ``"minus"`` and ``"plus"``
    states of an anholonomic adiabatic computation).
    """

    __slots__ = ("_H0", "_v", "_T", "_energies", "_basis", "_u0", "_structure", "_states", "_params")

    def __init__(self, H0, v, T: float, states: Mapping[str, np.ndarray] | None = None,
                 params: Mapping[str, object] | None = None):
        H0 = as_matrix(H0)
        if H0.shape[0] != H0.shape[1]:
            raise NonHermitian(f"H0 must be square, got {H0.shape}")
        if not is_hermitian(H0, HERMITIAN_TOL * max(1.0, float(np.max(np.abs(H0), initial=0.0)))):
            raise NonHermitian("H0 is not Hermitian within 1e-10")
        v = check_normalized(v)
        if v.size != H0.shape[0]:
            raise PreconditionError(f"v has dimension {v.size}, H0 has {H0.shape[0]}")
        if not (np.isfinite(T) and T > 0):
            raise PreconditionError(f"period T must be positive, got {T}")
        H0 = 0.5 * (H0 + H0.conj().T)
        energies, basis = eig_hermitian(H0)
        self._H0 = _readonly(H0)
        self._v = _readonly(v)
        self._T = float(T)
        self._energies = _readonly(energies)
        self._basis = _readonly(basis)
        self._u0 = _readonly((basis * np.exp(-1j * energies * T)) @ basis.conj().T)
        self._structure = _coupling_structure(energies, basis, v, float(T))
        self._states = MappingProxyType({k: _readonly(np.asarray(x, dtype=complex))
                                         for k, x in (states or {}).items()})
        self._params = MappingProxyType(dict(params or {}))

    def __repr__(self) -> str:
        return f"FloquetSystem(dim={self.dim}, T={self.T!r}, coupled={self.coupling.size})"

    @property
    def H0(self) -> np.ndarray:
        return self._H0

    @property
    def v(self) -> np.ndarray:
        return self._v

    @property
    def T(self) -> float:
        return self._T

    @property
    def dim(self) -> int:
        return self._H0.shape[0]

    @property
    def energies(self) -> np.ndarray:
        return self._energies

    @property
    def eigenbasis(self) -> np.ndarray:
        return self._basis

    @property
    def coupling(self) -> CouplingStructure:
        return self._structure

    @property
    def states(self) -> Mapping[str, np.ndarray]:
        return self._states

    @property
    def params(self) -> Mapping[str, object]:
        return self._params

    def unperturbed(self) -> np.ndarray:
        """The cached factor ``exp(-1j H0 T)``."""
        return self._u0

    def floquet(self, s: float) -> np.ndarray:
        return floquet_operator(self, s)

    def apply(self, psi: np.ndarray, s: float) -> np.ndarray:
        """``U_s @ psi`` without forming ``U_s``."""
        v = self._v
        kicked = psi + (np.exp(-1j * s) - 1.0) * np.vdot(v, psi) * v
        return self._u0 @ kicked


def floquet_operator(sys: FloquetSystem, s: float) -> np.ndarray:
    """``U_s = exp(-1j H0 T) @ exp(-1j s |v><v|)``."""
    u0v = sys.unperturbed() @ sys.v
    return sys.unperturbed() + (np.exp(-1j * s) - 1.0) * np.outer(u0v, sys.v.conj())


@dataclass(frozen=True)
class SaqcProblem:
    """A continuous-time adiabatic evolution ``H(s(t))`` for ``0 <= t <= T_max``."""

    H_of_s: Callable[[float], np.ndarray]
    s_max: float
    schedule: Callable[[float], float]
    T_max: float


def _step_times(t_grid: Sequence[float], T_max: float) -> np.ndarray:
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise BadGrid("time grid must be a non-empty 1-d sequence")
    if t[0] != 0.0:
        t = np.concatenate([[0.0], t])
    if t.size < 2:
        raise BadGrid("time grid needs at least one step")
    if np.any(np.diff(t) <= 0):
        raise BadGrid("time grid must be strictly increasing and start after 0")
    if not np.isclose(t[-1], T_max, rtol=1e-12, atol=1e-12):
        raise BadGrid(f"time grid must end at T_max={T_max}, ends at {t[-1]}")
    return t


def saqc_midpoints(p: SaqcProblem, t_grid: Sequence[float]) -> np.ndarray:
    """Piecewise-constant parameter values ``s_0 = 0, s_1, ..., s_L``.

    ``s_l = (s(t_{l-1}) + s(t_l)) / 2`` on the interval ``(t_{l-1}, t_l)``.
    """
    t = _step_times(t_grid, p.T_max)
    sv = np.array([p.schedule(x) for x in t], dtype=float)
    return np.concatenate([[0.0], 0.5 * (sv[:-1] + sv[1:])])


def discretize_saqc(p: SaqcProblem, t_grid: Sequence[float]) -> list[np.ndarray]:
    """Step operators ``[U_1, ..., U_L]`` with ``U_l = exp(-1j H(s_l) dt_l)``.

    ``t_grid`` lists the step end times ``t_1 < ... < t_L = T_max``; the
    start ``t_0 = 0`` is implied (a leading zero is accepted).
    """
    t = _step_times(t_grid, p.T_max)
    s_mid = saqc_midpoints(p, t)
    ops = []
    for l in range(1, t.size):
        h = as_matrix(p.H_of_s(s_mid[l]))
        ops.append(exp_hermitian(h, t[l] - t[l - 1]))
    return ops


def uniform_time_grid(T_max: float, L: int) -> np.ndarray:
    if L < 1:
        raise BadGrid("need at least one step")
    return T_max * np.arange(1, L + 1) / L


def apply_sequence(ops: Sequence[np.ndarray], psi) -> np.ndarray:
    """Apply ``ops[0]`` first, then ``ops[1]``, and so on."""
    out = np.asarray(psi, dtype=complex)
    for u in ops:
        out = u @ out
    return out
