"""Circuit-to-AAQC construction with a Kitaev clock.

Register layout (big-endian, qubit 0 is the most significant bit):

    [work 0 .. n-1][clock 1 .. L][control]

The Hamiltonians act on work + clock (``2**(n+L)`` states); the control
qubit is appended by :func:`compose_circuit_aaqc`. A clock reading ``l``
is ``|c(l)> = |1^l 0^(L-l)>`` and the snapshot of the computation at step
``l`` is ``|gamma(l)> = U_l ... U_1 |0^n> (x) |c(l)>``.

On one clock qubit ``Z = |0><0|`` and ``I = |1><1|`` are projectors and
``A^dagger = |1><0|`` advances it.

Operators are stored as ``scipy.sparse`` CSR matrices; dense copies are
made only where a dense eigendecomposition is unavoidable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from .errors import (
    ConfigError,
    GapConditionViolated,
    IndexOutOfRange,
    NonUnitary,
    NumericalError,
    PeriodTooLong,
    PreconditionError,
    TooLarge,
    ZeroProjection,
)
from .floquet import FloquetSystem
from .numerics import TWO_PI, as_matrix, eig_hermitian, is_unitary

MAX_CLOCK_QUBITS = 12
MAX_BUILD_QUBITS = 14
MAX_DENSE_QUBITS = 12
MAX_PASSAGE_QUBITS = 15
DEFAULT_E_P = 0.5
PERIOD_FRACTION = 0.9

_S2 = 1.0 / np.sqrt(2.0)
GATES = {
    "I": np.eye(2),
    "X": np.array([[0, 1], [1, 0]]),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.diag([1, -1]),
    "H": np.array([[_S2, _S2], [_S2, -_S2]]),
    "S": np.diag([1, 1j]),
    "T": np.diag([1, np.exp(1j * np.pi / 4)]),
    "CNOT": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]]),
    "CZ": np.diag([1, 1, 1, -1]),
    "SWAP": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]]),
}


def phase_gate(angle: float) -> np.ndarray:
    return np.diag([1.0, np.exp(1j * angle)])


def gate_matrix(name: str, **params) -> np.ndarray:
    """Named gate; ``"phase"`` takes an ``angle`` keyword."""
    key = name.upper()
    if key == "PHASE":
        if "angle" not in params:
            raise ConfigError("phase gate needs an 'angle'")
        return phase_gate(float(params["angle"]))
    if key not in GATES:
        raise ConfigError(f"unknown gate {name!r}; known: {sorted(GATES)} and 'phase'")
    return np.asarray(GATES[key], dtype=complex)


@dataclass(frozen=True)
class Gate:
    unitary: np.ndarray
    targets: tuple[int, ...]

    @property
    def arity(self) -> int:
        return len(self.targets)


@dataclass(frozen=True)
class ClockCircuit:
    """Ordered gate list on ``n`` work qubits; gate ``l`` acts at clock step ``l``."""

    n: int
    gates: tuple[Gate, ...]

    def __post_init__(self):
        if self.n < 1:
            raise PreconditionError("need at least one work qubit")
        if not self.gates:
            raise PreconditionError("a circuit needs at least one gate")
        fixed = []
        for g in self.gates:
            if not isinstance(g, Gate):
                g = Gate(*g)
            u = as_matrix(g.unitary)
            t = tuple(int(x) for x in g.targets)
            if not 1 <= len(t) <= 2:
                raise PreconditionError("gates act on one or two qubits")
            if len(set(t)) != len(t):
                raise PreconditionError(f"gate targets must be distinct, got {t}")
            if any(not 0 <= x < self.n for x in t):
                raise IndexOutOfRange(f"gate targets {t} outside 0..{self.n - 1}")
            if u.shape != (2 ** len(t), 2 ** len(t)):
                raise PreconditionError(f"gate on {len(t)} qubits needs a {2 ** len(t)}-square matrix")
            if not is_unitary(u, 1e-10):
                raise NonUnitary("gate matrix is not unitary within 1e-10")
            u = u.copy()
            u.setflags(write=False)
            fixed.append(Gate(u, t))
        object.__setattr__(self, "gates", tuple(fixed))

    @property
    def L(self) -> int:
        return len(self.gates)

    @classmethod
    def from_spec(cls, n: int, items: Sequence[dict]) -> "ClockCircuit":
        """Build from ``[{"gate": name | [[[re, im], ...], ...], "targets": [...]}, ...]``."""
        gates = []
        for item in items:
            if not isinstance(item, dict) or "gate" not in item or "targets" not in item:
                raise ConfigError("each gate needs 'gate' and 'targets'")
            g = item["gate"]
            if isinstance(g, str):
                extra = {k: v for k, v in item.items() if k not in ("gate", "targets")}
                u = gate_matrix(g, **extra)
            else:
                arr = np.asarray(g, dtype=float)
                if arr.ndim != 3 or arr.shape[-1] != 2:
                    raise ConfigError("gate matrices are given as rows of [re, im] pairs")
                u = arr[..., 0] + 1j * arr[..., 1]
            gates.append(Gate(u, tuple(item["targets"])))
        return cls(int(n), tuple(gates))

    @classmethod
    def from_json(cls, path: str | Path) -> "ClockCircuit":
        data = json.loads(Path(path).read_text())
        if isinstance(data, list):
            raise ConfigError("circuit file must be an object with 'n' and 'gates'")
        return cls.from_spec(data["n"], data["gates"])

    def work_states(self) -> list[np.ndarray]:
        """``[alpha(0), alpha(1), ..., alpha(L)]`` by direct state-vector simulation."""
        psi = np.zeros(2 ** self.n, dtype=complex)
        psi[0] = 1.0
        out = [psi]
        for g in self.gates:
            psi = apply_gate(psi, g.unitary, g.targets, self.n)
            out.append(psi)
        return out


def apply_gate(psi: np.ndarray, u: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    """Apply a ``k``-qubit gate to an ``n``-qubit state vector."""
    k = len(targets)
    t = np.moveaxis(psi.reshape((2,) * n), list(targets), list(range(k)))
    shape = t.shape
    t = (u @ t.reshape(2 ** k, -1)).reshape(shape)
    return np.moveaxis(t, list(range(k)), list(targets)).reshape(-1)


def embed_operator(op: np.ndarray, targets: Sequence[int], n_qubits: int) -> sp.csr_matrix:
    """Sparse ``op`` acting on ``targets`` (big-endian) of an ``n_qubits`` register."""
    op = as_matrix(op)
    k = len(targets)
    dim = 2 ** n_qubits
    idx = np.arange(dim)
    sub = np.zeros(dim, dtype=np.int64)
    mask = 0
    for m, t in enumerate(targets):
        shift = n_qubits - 1 - t
        sub |= ((idx >> shift) & 1) << (k - 1 - m)
        mask |= 1 << shift
    base = idx & ~mask
    rows, cols, data = [], [], []
    for b in range(2 ** k):
        bits = 0
        for m, t in enumerate(targets):
            if (b >> (k - 1 - m)) & 1:
                bits |= 1 << (n_qubits - 1 - t)
        vals = op[b, sub]
        keep = vals != 0
        rows.append((base | bits)[keep])
        cols.append(idx[keep])
        data.append(vals[keep])
    return sp.csr_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(dim, dim))


def _qubit_diag(n_qubits: int, qubit: int, bit: int) -> np.ndarray:
    """Diagonal of the projector onto ``qubit == bit``."""
    idx = np.arange(2 ** n_qubits)
    return (((idx >> (n_qubits - 1 - qubit)) & 1) == bit).astype(float)


def clock_index(L: int, l: int) -> int:
    """Integer label of ``|c(l)> = |1^l 0^(L-l)>``."""
    return 2 ** L - 2 ** (L - l)


def clock_states(L: int) -> list[np.ndarray]:
    """The ``L + 1`` valid clock states ``|c(0)>, ..., |c(L)>``."""
    if L < 1:
        raise PreconditionError("L must be at least 1")
    if L > MAX_CLOCK_QUBITS:
        raise TooLarge(f"L={L} exceeds the clock cap of {MAX_CLOCK_QUBITS}")
    out = []
    for l in range(L + 1):
        e = np.zeros(2 ** L, dtype=complex)
        e[clock_index(L, l)] = 1.0
        out.append(e)
    return out


def snapshot_indices(c: ClockCircuit) -> np.ndarray:
    """Basis labels of ``|alpha> (x) |c(l)>`` are ``a * 2**L + clock_index(L, l)``."""
    return np.array([clock_index(c.L, l) for l in range(c.L + 1)])


@dataclass(frozen=True)
class ClockHamiltonians:
    H_clock: sp.csr_matrix
    H_clockinit: sp.csr_matrix
    H_input: sp.csr_matrix
    H_B: sp.csr_matrix
    H_h: sp.csr_matrix
    H_P: sp.csr_matrix
    restricted_H_h: np.ndarray
    history_basis: np.ndarray = field(repr=False)

    @property
    def delta(self) -> float:
        """First excitation of ``H_h`` inside the history space."""
        w = eig_hermitian(self.restricted_H_h).values
        return float(w[1] - w[0])

    @property
    def W_P(self) -> float:
        return float(eig_hermitian(self.restricted_H_h).values[-1])


def _check_build_size(c: ClockCircuit, cap: int = MAX_BUILD_QUBITS):
    if c.L > MAX_CLOCK_QUBITS:
        raise TooLarge(f"L={c.L} exceeds the clock cap of {MAX_CLOCK_QUBITS}")
    if c.n + c.L > cap:
        raise TooLarge(f"n+L={c.n + c.L} exceeds the construction cap of {cap} qubits")


def history_basis(c: ClockCircuit) -> np.ndarray:
    """Columns ``|gamma(0)>, ..., |gamma(L)>``."""
    L = c.L
    dim_c = 2 ** L
    cols = np.zeros((2 ** (c.n + L), L + 1), dtype=complex)
    for l, alpha in enumerate(c.work_states()):
        cols[np.arange(alpha.size) * dim_c + clock_index(L, l), l] = alpha
    return cols


def build_clock_hamiltonians(c: ClockCircuit) -> ClockHamiltonians:
    _check_build_size(c)
    n, L = c.n, c.L
    nq = n + L
    dim = 2 ** nq

    def clock_q(l):  # clock qubit l (1-based) -> register position
        return n + l - 1

    def zd(l):
        return _qubit_diag(nq, clock_q(l), 0)

    def idg(l):
        return _qubit_diag(nq, clock_q(l), 1)

    diag = sp.diags
    h_clock = np.zeros(dim)
    for l in range(1, L):
        h_clock += zd(l) * idg(l + 1)
    h_init = idg(1)
    h_input = sum(_qubit_diag(nq, j, 1) for j in range(n)) * zd(1)

    eye = sp.identity(dim, dtype=complex, format="csr")
    raise_op = np.array([[0, 0], [1, 0]], dtype=complex)
    h_h = sp.csr_matrix((dim, dim), dtype=complex)
    for l, g in enumerate(c.gates, start=1):
        u_adag = embed_operator(np.kron(g.unitary, raise_op), list(g.targets) + [clock_q(l)], nq)
        h_l = 0.5 * (eye - (u_adag + u_adag.conj().T))
        left = idg(l - 1) if l > 1 else np.ones(dim)
        right = zd(l + 1) if l < L else np.ones(dim)
        h_h = h_h + diag(left) @ h_l @ diag(right)

    H_clock = diag(h_clock).astype(complex).tocsr()
    H_init = diag(h_init).astype(complex).tocsr()
    H_input = diag(h_input).astype(complex).tocsr()
    H_h = h_h.tocsr()
    H_h.eliminate_zeros()
    gam = history_basis(c)
    restricted = gam.conj().T @ (H_h @ gam)
    restricted = 0.5 * (restricted + restricted.conj().T)
    return ClockHamiltonians(
        H_clock=H_clock, H_clockinit=H_init, H_input=H_input,
        H_B=(H_init + H_input + H_clock).tocsr(),
        H_h=H_h, H_P=(H_h + H_input + H_clock).tocsr(),
        restricted_H_h=restricted, history_basis=gam)


def clock_fourier(L: int) -> sp.csr_matrix:
    """``F_clock``: DFT on the valid clock states, identity on the rest."""
    if L > MAX_CLOCK_QUBITS:
        raise TooLarge(f"L={L} exceeds the clock cap of {MAX_CLOCK_QUBITS}")
    dim = 2 ** L
    valid = np.array([clock_index(L, l) for l in range(L + 1)])
    f = sp.lil_matrix((dim, dim), dtype=complex)
    rest = np.setdiff1d(np.arange(dim), valid)
    f[rest, rest] = 1.0
    k = np.arange(L + 1)
    dft = np.exp(-2j * np.pi * np.outer(k, k) / (L + 1)) / np.sqrt(L + 1)
    # column j is |c_j> = sum_l dft[l, j] |c(l)>
    for j in range(L + 1):
        for l in range(L + 1):
            f[valid[l], valid[j]] = dft[l, j]
    return f.tocsr()


def history_unitary(c: ClockCircuit) -> sp.csr_matrix:
    """``U_h = prod_{l=L..1} (Z_l + I_l U_l)``: gate ``l`` fires iff clock qubit ``l`` is set."""
    _check_build_size(c, MAX_PASSAGE_QUBITS)
    n, L = c.n, c.L
    nq = n + L
    u_h = sp.identity(2 ** nq, dtype=complex, format="csr")
    for l, g in enumerate(c.gates, start=1):
        ctrl = np.kron(np.diag([1.0, 0.0]), np.eye(g.unitary.shape[0])) \
            + np.kron(np.diag([0.0, 1.0]), g.unitary)
        block = embed_operator(ctrl, [n + l - 1] + list(g.targets), nq)
        u_h = block @ u_h
    return u_h.tocsr()


def history_state(c: ClockCircuit) -> np.ndarray:
    """``|eta> = U_h F_clock |gamma(0)>``, checked against the direct snapshot sum."""
    _check_build_size(c, MAX_PASSAGE_QUBITS)
    dim = 2 ** (c.n + c.L)
    g0 = np.zeros(dim, dtype=complex)
    g0[0] = 1.0
    f_full = sp.kron(sp.identity(2 ** c.n, format="csr"), clock_fourier(c.L), format="csr")
    eta = history_unitary(c) @ (f_full @ g0)
    direct = history_basis(c).sum(axis=1) / np.sqrt(c.L + 1)
    dev = float(np.max(np.abs(eta - direct)))
    if dev > 1e-10:
        raise NumericalError(f"history state deviates from the snapshot sum by {dev:.3e}")
    return eta


class MatrixFreeFloquet:
    """``U_s`` applied to vectors without any dense ``dim x dim`` object.

    ``H0`` is block diagonal in the control qubit, so ``exp(-i H0 T)`` is
    applied per sector with a Krylov-type action of the sparse block.
    """

    def __init__(self, H_B: sp.csr_matrix, H_P_shifted: sp.csr_matrix, v: np.ndarray, T: float):
        self.H_B = H_B
        self.H_P = H_P_shifted
        self.v = v
        self.T = float(T)
        self.dim = v.size

    def unperturbed_apply(self, psi: np.ndarray) -> np.ndarray:
        p = psi.reshape(-1, 2)
        out = np.empty_like(p)
        out[:, 0] = expm_multiply(-1j * self.T * self.H_B, p[:, 0])
        out[:, 1] = expm_multiply(-1j * self.T * self.H_P, p[:, 1])
        return out.reshape(-1)

    def apply(self, psi: np.ndarray, s: float) -> np.ndarray:
        kicked = psi + (np.exp(-1j * s) - 1.0) * np.vdot(self.v, psi) * self.v
        return self.unperturbed_apply(kicked)


@dataclass(frozen=True)
class CircuitSimulator:
    """AAQC simulator of a circuit.

    ``system`` (a dense :class:`FloquetSystem`) is present up to
    ``MAX_DENSE_QUBITS`` total qubits; :meth:`propagator` falls back to a
    matrix-free map beyond that.
    """

    circuit: ClockCircuit
    hamiltonians: ClockHamiltonians
    E_P: float
    T: float
    W: float
    H0: sp.csr_matrix = field(repr=False)
    minus: np.ndarray = field(repr=False)
    plus: np.ndarray = field(repr=False)
    v: np.ndarray = field(repr=False)
    G: sp.csr_matrix = field(repr=False)
    system: FloquetSystem | None = field(default=None, repr=False)

    @property
    def n_qubits(self) -> int:
        return self.circuit.n + self.circuit.L + 1

    @property
    def delta(self) -> float:
        return self.hamiltonians.delta

    def propagator(self):
        if self.system is not None:
            return self.system
        H_shift = (self.hamiltonians.H_P + self.E_P * sp.identity(self.H0.shape[0] // 2)).tocsr()
        return MatrixFreeFloquet(self.hamiltonians.H_B, H_shift, self.v, self.T)


_PROJ0 = sp.diags([1.0, 0.0]).astype(complex)
_PROJ1 = sp.diags([0.0, 1.0]).astype(complex)
_HADAMARD = sp.csr_matrix(GATES["H"].astype(complex))


def compose_circuit_aaqc(c: ClockCircuit, E_P: float = DEFAULT_E_P, T: float | None = None) -> CircuitSimulator:
    """Compose the anholonomic simulator of ``c``.

    ``H0 = H_B (x) Z_C + (H_P + E_P) (x) I_C``, ``|-> = |0...0>``,
    ``|+> = |eta> (x) |1>``, ``v = (|-> + |+>)/sqrt(2)``. ``W`` is
    ``E_P`` plus the largest eigenvalue of ``H_h`` on the history space,
    and ``T`` defaults to ``0.9 * 2 pi / W``.
    """
    _check_build_size(c, MAX_PASSAGE_QUBITS - 1)
    if not 0 < E_P < 1:
        raise GapConditionViolated(f"need 0 < E_P < 1 (first excitation of H_B), got {E_P}")
    ham = build_clock_hamiltonians(c)
    W = E_P + ham.W_P
    if T is None:
        T = PERIOD_FRACTION * TWO_PI / W
    if not 0 < T < TWO_PI / W:
        raise PeriodTooLong(f"T={T} must lie in (0, 2*pi/W) with W={W:.12g}")

    dim_a = ham.H_B.shape[0]
    ident = sp.identity(dim_a, dtype=complex, format="csr")
    H0 = (sp.kron(ham.H_B, _PROJ0) + sp.kron(ham.H_P + E_P * ident, _PROJ1)).tocsr()
    eta = history_state(c)
    minus = np.zeros(2 * dim_a, dtype=complex)
    minus[0] = 1.0
    plus = np.kron(eta, [0.0, 1.0])
    v = (minus + plus) / np.sqrt(2.0)

    f_full = sp.kron(sp.identity(2 ** c.n, format="csr"), clock_fourier(c.L), format="csr")
    uf = history_unitary(c) @ f_full
    G = ((sp.kron(ident, _PROJ0) + sp.kron(uf, _PROJ1)) @ sp.kron(ident, _HADAMARD)).tocsr()
    dev = float(np.max(np.abs(G @ minus - v)))
    if dev > 1e-10:
        raise NumericalError(f"G|-> deviates from |v> by {dev:.3e}")

    system = None
    if c.n + c.L + 1 <= MAX_DENSE_QUBITS:
        system = FloquetSystem(
            H0.toarray(), v, T, states={"minus": minus, "plus": plus},
            params={"model": "clocksim", "n": c.n, "L": c.L, "E_P": E_P, "T": T, "W": W})
    for arr in (minus, plus, v):
        arr.setflags(write=False)
    return CircuitSimulator(c, ham, float(E_P), float(T), float(W), H0, minus, plus, v, G, system)


def extract_output(final_state: np.ndarray, c: ClockCircuit) -> tuple[np.ndarray, float]:
    """Post-select clock ``c(L)`` and control ``|1>``.

    Returns the normalized work-register state and the success
    probability (``1/(L+1)`` for the exact ``|+>``).
    """
    psi = np.asarray(final_state, dtype=complex)
    expected = 2 ** (c.n + c.L + 1)
    if psi.size != expected:
        raise PreconditionError(f"state has dimension {psi.size}, expected {expected}")
    t = psi.reshape(2 ** c.n, 2 ** c.L, 2)
    work = t[:, clock_index(c.L, c.L), 1]
    prob = float(np.vdot(work, work).real)
    if prob < 1e-14:
        raise ZeroProjection("final state has no weight on the output clock reading")
    return work / np.sqrt(prob), prob
