"""Concrete kicked systems.

* the two-level anholonomy model ``H0 = diag(0, E2)``, ``v = (a, b)``;
* the anholonomic composition of a standard adiabatic problem
  ``(H_B, H_P)`` with a control qubit,
  ``H0 = H_B (x) |0><0| + (E_P + H_P) (x) |1><1|``;
* Grover search with the "optimal" kick vector ``(|-> + |+>)/sqrt(2)``
  and with the "fair" one ``a|-> + b|F>|1>``, including the three-level
  reduction and the perturbative analysis of its narrow avoided crossing.

Three-level basis ordering is ``(|->, |+>, |f>)`` throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import spectral
from .errors import (
    CrossingAtSingularPoint,
    CrossingNotFound,
    DegenerateChoice,
    DegenerateGround,
    GapConditionViolated,
    IndexOutOfRange,
    PeriodTooLong,
    PreconditionError,
    UnnormalizedVector,
)
from .floquet import FloquetSystem, kick_operator
from .numerics import TWO_PI, as_matrix, as_vector, basis_vector, check_normalized, eig_hermitian, kron, wrap_to_pi

DEFAULT_E_P = TWO_PI / 3
DEFAULT_ALPHA = TWO_PI / 3
DEFAULT_T = 1.0
DEFAULT_A2 = 5.0 / 6.0
DEFAULT_MIXER_SCALE = 2.5

_PROJ0 = np.diag([1.0, 0.0]).astype(complex)
_PROJ1 = np.diag([0.0, 1.0]).astype(complex)


def _check_unit_pair(a, b, tol=1e-12):
    if abs(abs(a) ** 2 + abs(b) ** 2 - 1.0) > tol:
        raise UnnormalizedVector(f"|a|^2 + |b|^2 = {abs(a) ** 2 + abs(b) ** 2!r}, must be 1")


def two_level_system(E2: float, a: complex, b: complex, T: float = DEFAULT_T) -> FloquetSystem:
    """``H0 = diag(0, E2)`` kicked along ``v = a|E'> + b|E''>``."""
    if abs(a) < 1e-12 or abs(b) < 1e-12:
        raise DegenerateChoice("both a and b must be nonzero for the anholonomy to occur")
    _check_unit_pair(a, b)
    if not 0 < E2 * T < TWO_PI:
        raise PreconditionError(f"need 0 < E2*T < 2*pi, got {E2 * T}")
    H0 = np.diag([0.0, E2]).astype(complex)
    v = np.array([a, b], dtype=complex)
    return FloquetSystem(H0, v, T, states={"ground": basis_vector(2, 0), "excited": basis_vector(2, 1)},
                         params={"model": "two_level", "E2": E2, "T": T})


@dataclass(frozen=True)
class VSpec:
    """Choice of kick vector for an anholonomic composition.

    ``kind`` is ``"optimal"``, ``"fair"`` (needs ``F``, ``a``, ``b``) or
    ``"custom"`` (needs ``v``).
    """

    kind: str = "optimal"
    F: np.ndarray | None = None
    a: float | None = None
    b: float | None = None
    v: np.ndarray | None = None

    @classmethod
    def optimal(cls) -> "VSpec":
        return cls("optimal")

    @classmethod
    def fair(cls, F, a: float, b: float) -> "VSpec":
        return cls("fair", F=as_vector(F), a=a, b=b)

    @classmethod
    def custom(cls, v) -> "VSpec":
        return cls("custom", v=as_vector(v))


@dataclass(frozen=True)
class AaqcProblem:
    H_B: np.ndarray
    H_P: np.ndarray
    E_P: float
    T: float
    v_spec: VSpec = VSpec()


def _unique_ground(h: np.ndarray, name: str, tol: float = 1e-9):
    w, vecs = eig_hermitian(h)
    if w.size > 1 and w[1] - w[0] <= tol:
        raise DegenerateGround(f"ground state of {name} is degenerate")
    return w, vecs


def compose_aaqc(p: AaqcProblem) -> FloquetSystem:
    """Anholonomic composition on ``H_A (x) H_C`` (control qubit last).

    ``H_B`` and ``H_P`` are shifted so that their ground energies are 0.
    The returned system carries the states ``"minus"`` (``|0_B>|0>``, the
    ground state of ``H0``) and ``"plus"`` (``|x>|1>``, energy ``E_P``);
    fair compositions add ``"f"`` and the overlap angle in ``params``.
    """
    H_B = as_matrix(p.H_B)
    H_P = as_matrix(p.H_P)
    if H_B.shape != H_P.shape:
        raise PreconditionError("H_B and H_P must act on the same space")
    wb, vb = _unique_ground(H_B, "H_B")
    wp, vp = _unique_ground(H_P, "H_P")
    H_B = H_B - wb[0] * np.eye(H_B.shape[0])
    H_P = H_P - wp[0] * np.eye(H_P.shape[0])
    first_excited = wb[1] - wb[0] if wb.size > 1 else np.inf
    if not 0 < p.E_P < first_excited:
        raise GapConditionViolated(
            f"need 0 < E_P < first excited energy of H_B ({first_excited:.6g}), got E_P={p.E_P}")
    w_max = p.E_P + (wp[-1] - wp[0])
    if not p.T * w_max < TWO_PI:
        raise PeriodTooLong(f"T*(E_P + max H_P) = {p.T * w_max:.6g} must stay below 2*pi")

    n = H_B.shape[0]
    ground_b = vb[:, 0]
    x = vp[:, 0]
    H0 = kron(H_B, _PROJ0) + kron(p.E_P * np.eye(n) + H_P, _PROJ1)
    minus = kron(ground_b, [1, 0])
    plus = kron(x, [0, 1])
    states = {"minus": minus, "plus": plus}
    params: dict[str, object] = {"model": "aaqc", "E_P": p.E_P, "T": p.T, "v": p.v_spec.kind}

    spec = p.v_spec
    if spec.kind == "optimal":
        v = (minus + plus) / np.sqrt(2.0)
    elif spec.kind == "fair":
        F = check_normalized(spec.F)
        if spec.b is None or spec.a is None or not spec.b > 0:
            raise PreconditionError("fair kick vector needs a and b > 0")
        _check_unit_pair(spec.a, spec.b)
        v = spec.a * minus + spec.b * kron(F, [0, 1])
        overlap = np.vdot(x, F)
        eps = float(np.arcsin(min(abs(overlap), 1.0)))
        if not 0 < eps < np.pi / 2:
            raise PreconditionError("|F> must overlap |x> without being parallel to it")
        x_perp = (F - overlap * x) / np.cos(eps)
        states["f"] = kron(x_perp, [0, 1])
        params.update(epsilon=eps, theta=float(np.angle(overlap)), a=spec.a, b=spec.b)
    elif spec.kind == "custom":
        v = check_normalized(spec.v)
    else:
        raise PreconditionError(f"unknown kick vector kind {spec.kind!r}")

    sys = FloquetSystem(H0, v, p.T, states=states, params=params)
    e = sys.energies
    if abs(e[0]) > 1e-9 or abs(e[1] - p.E_P) > 1e-9 or (e.size > 2 and e[2] - e[1] <= 1e-9):
        raise GapConditionViolated("ground and first excited levels of H0 are not 0 and E_P")
    return sys


def grover_cost(N: int, x: int, alpha: float = DEFAULT_ALPHA) -> np.ndarray:
    """``alpha * (1 - |x><x|)``."""
    if not 0 <= x < N:
        raise IndexOutOfRange(f"marked item {x} outside 0..{N - 1}")
    if not alpha > 0:
        raise PreconditionError("alpha must be positive")
    d = np.full(N, float(alpha))
    d[x] = 0.0
    return np.diag(d).astype(complex)


def grover_mixer(N: int, scale: float = DEFAULT_MIXER_SCALE) -> np.ndarray:
    """``scale * (1 - |0><0|)``: ground state ``|0>`` at energy 0."""
    d = np.full(N, float(scale))
    d[0] = 0.0
    return np.diag(d).astype(complex)


def uniform_state(N: int) -> np.ndarray:
    return np.full(N, 1.0 / np.sqrt(N), dtype=complex)


def grover_system(
    N: int,
    x: int,
    kick: str = "optimal",
    *,
    a2: float = DEFAULT_A2,
    alpha: float = DEFAULT_ALPHA,
    E_P: float = DEFAULT_E_P,
    T: float = DEFAULT_T,
    mixer_scale: float = DEFAULT_MIXER_SCALE,
) -> FloquetSystem:
    """Full ``2N``-dimensional Grover composition with the optimal or fair kick."""
    if kick == "optimal":
        spec = VSpec.optimal()
    elif kick == "fair":
        spec = VSpec.fair(uniform_state(N), np.sqrt(a2), np.sqrt(1.0 - a2))
    else:
        raise PreconditionError(f"unknown kick {kick!r}")
    return compose_aaqc(AaqcProblem(grover_mixer(N, mixer_scale), grover_cost(N, x, alpha), E_P, T, spec))


def optimal_v_quasienergies(E_P: float, T: float, s: float) -> tuple[float, float]:
    """``(E_- T, E_+ T)`` with ``E_{+-} T = (E_P T + s)/2 +- Theta_P(s)``.

    ``Theta_P(s) = arccos(cos(E_P T / 2) cos(s / 2))``. Values are not
    folded into ``[0, 2 pi)``.
    """
    if not 0 < E_P * T < TWO_PI:
        raise PreconditionError("need 0 < E_P*T < 2*pi")
    big = np.arccos(np.clip(np.cos(E_P * T / 2) * np.cos(s / 2), -1.0, 1.0))
    mid = (E_P * T + s) / 2
    return float(mid - big), float(mid + big)


def optimal_v_system(E_P: float = DEFAULT_E_P, T: float = DEFAULT_T) -> FloquetSystem:
    """The two-dimensional ``span{|->, |+>}`` block with ``v = (|->+|+>)/sqrt(2)``."""
    if not 0 < E_P * T < TWO_PI:
        raise PreconditionError("need 0 < E_P*T < 2*pi")
    H0 = np.diag([0.0, E_P]).astype(complex)
    v = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0)
    return FloquetSystem(H0, v, T, states={"minus": basis_vector(2, 0), "plus": basis_vector(2, 1)},
                         params={"model": "grover_optimal", "E_P": E_P, "T": T})


def restricted_operator(op: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """``B^H op B`` for orthonormal columns ``B``."""
    return basis.conj().T @ op @ basis


def leakage(op: np.ndarray, basis: np.ndarray) -> float:
    """Spectral norm of ``(1 - P) op P`` with ``P`` the projector on ``basis``."""
    proj = basis @ basis.conj().T
    return float(np.linalg.norm((np.eye(op.shape[0]) - proj) @ op @ proj, 2))


def fair_epsilon(N: int) -> float:
    """Overlap angle of the uniform superposition with one marked item."""
    if N < 2:
        raise PreconditionError("N must be at least 2")
    return float(np.arcsin(N ** -0.5))


def fair_grover_effective(
    N: int | None = None,
    a: float = np.sqrt(DEFAULT_A2),
    b: float = np.sqrt(1.0 - DEFAULT_A2),
    alpha: float = DEFAULT_ALPHA,
    E_P: float = DEFAULT_E_P,
    T: float = DEFAULT_T,
    theta: float = 0.0,
    *,
    epsilon: float | None = None,
) -> FloquetSystem:
    """Three-level truncation of the fair-kick Grover map.

    ``U0 = diag(1, exp(-i E_P T), exp(-i (E_P + alpha) T))`` and
    ``v = (a, b exp(i theta) sin eps, b cos eps)`` with ``sin eps = N**-0.5``
    unless ``epsilon`` is given directly.
    """
    if epsilon is None:
        if N is None:
            raise PreconditionError("give N or epsilon")
        epsilon = fair_epsilon(N)
    if not 0 <= epsilon < np.pi / 2:
        raise PreconditionError("epsilon must lie in [0, pi/2)")
    _check_unit_pair(a, b)
    if not b > 0:
        raise PreconditionError("b must be positive")
    if not 0 < (E_P + alpha) * T < TWO_PI:
        raise PeriodTooLong("need (E_P + alpha) * T < 2*pi")
    H0 = np.diag([0.0, E_P, E_P + alpha]).astype(complex)
    v = np.array([a, b * np.exp(1j * theta) * np.sin(epsilon), b * np.cos(epsilon)], dtype=complex)
    e = [basis_vector(3, k) for k in range(3)]
    return FloquetSystem(
        H0, v, T, states={"minus": e[0], "plus": e[1], "f": e[2]},
        params={"model": "grover_fair", "N": N, "epsilon": float(epsilon), "a": float(a),
                "b": float(b), "alpha": alpha, "E_P": E_P, "T": T, "theta": theta})


def fair_reference_system(a: float, b: float, alpha: float = DEFAULT_ALPHA,
                          E_P: float = DEFAULT_E_P, T: float = DEFAULT_T) -> FloquetSystem:
    """``W_s = U0 exp(-i s |u><u|)`` with ``u = a|-> + b|f>`` (the ``eps -> 0`` kick)."""
    return fair_grover_effective(a=a, b=b, alpha=alpha, E_P=E_P, T=T, epsilon=0.0)


def perturbation_operator(a: float, b: float, epsilon: float, theta: float, s: float) -> np.ndarray:
    """``S_s = exp(+i s |u><u|) exp(-i s |v><v|)`` in the three-level basis."""
    u = np.array([a, 0.0, b], dtype=complex)
    v = np.array([a, b * np.exp(1j * theta) * np.sin(epsilon), b * np.cos(epsilon)], dtype=complex)
    return kick_operator(u, -s) @ kick_operator(v, s)


def cos_big_theta(b: float, epsilon: float, s: float) -> float:
    """Rotation angle of ``S_s``: ``cos Theta = 1 - 8 b^2 sin^2(eps/2) (1 - b^2 sin^2(eps/2)) sin^2(s/2)``."""
    q = b * b * np.sin(epsilon / 2) ** 2
    return float(1.0 - 8.0 * q * (1.0 - q) * np.sin(s / 2) ** 2)


def perturbation_generator(a: float, b: float, epsilon: float, theta: float, s: float) -> np.ndarray:
    """Hermitian ``s_hat`` with ``exp(-i s_hat) = S_s``, from the closed-form expansion."""
    u = np.array([a, 0.0, b], dtype=complex)
    v = np.array([a, b * np.exp(1j * theta) * np.sin(epsilon), b * np.cos(epsilon)], dtype=complex)
    d = v - u
    dd = np.vdot(d, d).real
    ud = np.vdot(u, d)

    def ket(x, y):
        return np.outer(x, y.conj())

    m = ((ket(d, u) + ket(u, d) + ket(d, d)) * np.sin(s)
         + 1j * (ket(u, d) - ket(d, u)) * (1 - dd / 2) * (1 - np.cos(s))
         - (2 * ket(u, u) + ket(u, d) + ket(d, u)) * ud.imag * (1 - np.cos(s)))
    big = np.arccos(np.clip(1 - 2 * (dd - abs(ud) ** 2) * np.sin(s / 2) ** 2, -1.0, 1.0))
    factor = 1.0 if big < 1e-300 else big / np.sin(big)
    return m * factor


def leading_perturbation(a: float, b: float, epsilon: float, theta: float, s: float) -> np.ndarray:
    """First-order term ``2 eps b sin(s/2) (|+><u| e^{i theta - i s/2} + h.c.)``."""
    u = np.array([a, 0.0, b], dtype=complex)
    plus = basis_vector(3, 1)
    term = np.exp(1j * theta - 1j * s / 2) * np.outer(plus, u.conj())
    return 2 * epsilon * b * np.sin(s / 2) * (term + term.conj().T)


@dataclass(frozen=True)
class FairGroverAnalysis:
    """Gap data of the fair-kick Grover map around its narrow avoided crossing.

    ``gap_perturbative`` is ``2 eps b |sin(s_c/2)|``. ``gap_leading_order``
    is the degenerate-perturbation value ``2 |<+|s_hat|w_-(s_c)>|``, i.e.
    ``gap_perturbative * 2 |<u|w_-(s_c)>|``; the numeric gap tends to the
    latter.
    """

    N: int | None
    epsilon_overlap: float
    theta: float
    s_c: float
    gap_perturbative: float
    gap_numeric: float
    a: float
    b: float
    s_at_min: float
    gap_leading_order: float
    u_overlap: float


def _crossing_with_level(curve: spectral.EigenangleCurve, level: float, xtol: float) -> float:
    th = curve.theta
    idx = np.flatnonzero((th[:-1] - level) * (th[1:] - level) <= 0)
    if idx.size == 0:
        raise CrossingNotFound(f"tracked curve never reaches eigenangle {level:.12g}")
    k = int(idx[0])
    sys = curve.system

    def f(s):
        if s == curve.s[k]:
            return th[k] - level
        if s == curve.s[k + 1]:
            return th[k + 1] - level
        own, _ = spectral._identify(sys, curve, s)
        lifted = curve.theta_at(s) + float(wrap_to_pi(own - curve.theta_at(s)))
        return lifted - level

    lo, hi = float(curve.s[k]), float(curve.s[k + 1])
    if f(lo) == 0:
        return lo
    return float(brentq(f, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps))


def perturbative_gap(
    N: int | None = None,
    *,
    epsilon: float | None = None,
    a2: float = DEFAULT_A2,
    alpha: float = DEFAULT_ALPHA,
    E_P: float = DEFAULT_E_P,
    T: float = DEFAULT_T,
    theta: float = 0.0,
    n_samples: int = 201,
) -> FairGroverAnalysis:
    """Locate the narrow avoided crossing of the fair-kick model and compare
    the numeric gap with its perturbative estimates.

    ``s_c`` is where the tracked reference curve ``W_-(s)`` (kick along
    ``u``) meets the flat level ``E_P T``; it is found by root bracketing
    to ``1e-10``. The numeric gap is the minimum distance from the
    tracked ``E_0`` curve of the full three-level map to any other level.

    Raises
    ------
    CrossingNotFound
        If ``W_-`` never reaches ``E_P T``.
    CrossingAtSingularPoint
        If ``s_c`` lies within ``1e-3`` of 0 or pi.
    """
    if epsilon is None:
        if N is None:
            raise PreconditionError("give N or epsilon")
        epsilon = fair_epsilon(N)
    if not 0 < epsilon < np.pi / 2:
        raise PreconditionError("epsilon must lie in (0, pi/2)")
    a, b = float(np.sqrt(a2)), float(np.sqrt(1.0 - a2))

    ref = fair_reference_system(a, b, alpha, E_P, T)
    ref_curves = spectral.track_curves(ref, 0.0, TWO_PI, n_samples)
    w_minus = next(c for c in ref_curves if c.coupled and abs(c.theta[0]) < 1e-12)
    s_c = _crossing_with_level(w_minus, E_P * T, 1e-12)
    if abs(s_c) < 1e-3 or abs(s_c - np.pi) < 1e-3:
        raise CrossingAtSingularPoint(f"s_c = {s_c:.6g} is too close to 0 or pi")

    _, y = spectral._block_eig(ref, s_c)
    w_vec = ref.coupling.basis @ y
    ref_at = w_minus.vectors[w_minus.nearest_index(s_c)]
    w_vec = w_vec[:, int(np.argmax(np.abs(ref_at.conj() @ w_vec)))]
    u = np.array([a, 0.0, b], dtype=complex)
    u_overlap = float(abs(np.vdot(u, w_vec)))

    sys = fair_grover_effective(a=a, b=b, alpha=alpha, E_P=E_P, T=T, theta=theta, epsilon=epsilon)
    curves = spectral.track_curves(sys, 0.0, TWO_PI, n_samples)
    target = next(c for c in curves if abs(c.theta[0]) < 1e-12)
    rep = spectral.min_gap(curves, target.curve_id)

    pert = float(abs(2 * epsilon * b * np.sin(s_c / 2)))
    return FairGroverAnalysis(
        N=N, epsilon_overlap=float(epsilon), theta=theta, s_c=s_c, gap_perturbative=pert,
        gap_numeric=rep.min_gap, a=a, b=b, s_at_min=rep.s_at_min,
        gap_leading_order=2 * u_overlap * pert, u_overlap=u_overlap)


def landau_zener_problem(gap: float = 0.5, sweep: float = 10.0, T_max: float = 20.0):
    """Continuous two-level sweep ``H(s) = (s - sweep/2) sigma_z + (gap/2) sigma_x``.

    ``s(t) = sweep * t / T_max``; the minimum gap ``gap`` sits at mid sweep.
    Returns ``(problem, psi0, target)`` with the ground states of ``H(0)``
    and ``H(sweep)``.
    """
    from .floquet import SaqcProblem

    if not (gap > 0 and sweep > 0 and T_max > 0):
        raise PreconditionError("gap, sweep and T_max must be positive")
    sz = np.diag([1.0, -1.0]).astype(complex)
    sx = np.array([[0, 1], [1, 0]], dtype=complex)

    def H(s):
        return (s - sweep / 2) * sz + 0.5 * gap * sx

    prob = SaqcProblem(H, sweep, lambda t: sweep * t / T_max, T_max)
    psi0 = eig_hermitian(H(0.0)).vectors[:, 0]
    target = eig_hermitian(H(sweep)).vectors[:, 0]
    return prob, psi0, target
