"""Discrete adiabatic passages ``Psi_L = U_{s_L} ... U_{s_1} Psi_0``.

The adiabatic error is the operator-norm distance between the pure-state
projectors of the final and target states, ``sqrt(1 - |<target|Psi_L>|^2)``;
it ignores global phase and lies in ``[0, 1]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numba
import numpy as np

from .errors import NonpositiveGap, NotConverged, PreconditionError
from .floquet import FloquetSystem
from .numerics import check_normalized

DEFAULT_L_CAP = 2**22


@dataclass(frozen=True)
class Schedule:
    """Monotone grid ``s_0 = 0 <= s_1 <= ... <= s_L = s_max``."""

    values: np.ndarray
    kind: str = "custom"

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 1 or vals.size < 2:
            raise PreconditionError("a schedule needs at least s_0 and s_1")
        if vals[0] != 0.0:
            raise PreconditionError(f"schedule must start at 0, starts at {vals[0]}")
        if np.any(np.diff(vals) < 0):
            raise PreconditionError("schedule must be non-decreasing")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def L(self) -> int:
        return self.values.size - 1

    @property
    def s_max(self) -> float:
        return float(self.values[-1])


@dataclass(frozen=True)
class PassageResult:
    final_state: np.ndarray
    error: float
    L: int
    overlap_history: np.ndarray | None = field(default=None, repr=False)


@numba.njit(cache=True)
def _kicked_map(phases, v, svals, psi):
    # psi and v live in the eigenbasis of H0, where exp(-i H0 T) is diagonal
    out = psi.copy()
    n = v.size
    for s in svals:
        c = np.exp(-1j * s) - 1.0
        ov = 0j
        for k in range(n):
            ov += np.conj(v[k]) * out[k]
        ov *= c
        for k in range(n):
            out[k] = phases[k] * (out[k] + ov * v[k])
    return out


@numba.njit(cache=True)
def _kicked_map_history(phases, v, svals, psi, target):
    out = psi.copy()
    n = v.size
    hist = np.empty(svals.size)
    for i in range(svals.size):
        c = np.exp(-1j * svals[i]) - 1.0
        ov = 0j
        for k in range(n):
            ov += np.conj(v[k]) * out[k]
        ov *= c
        f = 0j
        for k in range(n):
            out[k] = phases[k] * (out[k] + ov * v[k])
            f += np.conj(target[k]) * out[k]
        hist[i] = abs(f)
    return out, hist


def adiabatic_error(state: np.ndarray, target: np.ndarray) -> float:
    """``sqrt(1 - |<target|state>|^2)``, evaluated as the norm of the part of
    ``state`` orthogonal to ``target`` (no cancellation floor near zero)."""
    rest = state - np.vdot(target, state) * target
    return min(1.0, float(np.linalg.norm(rest)))


def run_passage(
    sys: FloquetSystem,
    sched: Schedule,
    psi0,
    target,
    record_overlaps: bool = False,
) -> PassageResult:
    """Apply ``U_{s_1}``, then ``U_{s_2}``, ..., then ``U_{s_L}`` to ``psi0``.

    ``U_{s_0}`` is not applied. Any object with ``apply(psi, s)`` may stand
    in for a :class:`FloquetSystem`; systems exposing an eigenbasis run
    through a compiled kernel at ``O(dim)`` cost per step.
    """
    psi0 = check_normalized(psi0, 1e-10)
    target = check_normalized(target, 1e-10)
    svals = np.ascontiguousarray(sched.values[1:], dtype=float)
    hist = None
    if isinstance(sys, FloquetSystem):
        q = sys.eigenbasis
        phases = np.exp(-1j * sys.energies * sys.T)
        v = np.ascontiguousarray(q.conj().T @ sys.v)
        p = np.ascontiguousarray(q.conj().T @ psi0)
        if record_overlaps:
            t = np.ascontiguousarray(q.conj().T @ target)
            p, hist = _kicked_map_history(phases, v, svals, p, t)
        else:
            p = _kicked_map(phases, v, svals, p)
        final = q @ p
    else:
        final = np.array(psi0, dtype=complex)
        hist_list = []
        for s in svals:
            final = sys.apply(final, float(s))
            if record_overlaps:
                hist_list.append(abs(np.vdot(target, final)))
        if record_overlaps:
            hist = np.array(hist_list)
    return PassageResult(final, adiabatic_error(final, target), sched.L, hist)


def linear_schedule(s_max: float, L: int) -> Schedule:
    if L < 1:
        raise PreconditionError("L must be at least 1")
    vals = s_max * np.arange(L + 1) / L
    vals[-1] = s_max
    return Schedule(vals, "linear")


def _expm1_over_x(x):
    """``(exp(x) - 1) / x`` with the removable singularity at 0."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-8
    return np.where(small, 1.0 + x / 2, np.expm1(x) / np.where(small, 1.0, x))


def _log1p_over_x(y, lam):
    """``log(1 + y) / y * (exp(lam) - 1) / lam``.

    With ``y = q (exp(lam) - 1)`` this times ``q`` is ``log(1 + y) / lam``,
    the position (as a fraction of the cell) where a log-linear density
    with log-ratio ``lam`` has accumulated the fraction ``q`` of its mass.
    """
    y = np.asarray(y, dtype=float)
    lam = np.asarray(lam, dtype=float)
    small = np.abs(y) < 1e-8
    ratio = np.where(small, 1.0 - y / 2, np.log1p(y) / np.where(small, 1.0, y))
    return ratio * _expm1_over_x(lam)


class RolandCerfFamily:
    """Gap-adapted schedules with local steps ``ds ~ gap(s)**exponent``.

    The cumulative integral of ``gap**(-exponent)`` is tabulated once on a
    fine grid that is bisected wherever the integrand changes by more than
    ``max_ratio`` between neighbours. Inside a cell the integrand is taken
    log-linear, which makes both the integral and its inverse closed-form;
    a schedule for any ``L`` is the inverse at ``l / L``.
    """

    def __init__(self, gap_fn: Callable[[float], float], s_max: float, exponent: float = 2.0,
                 n_fine: int = 4097, max_ratio: float = 1.05, max_points: int = 400_000):
        if s_max <= 0:
            raise PreconditionError("s_max must be positive")
        self.s_max = float(s_max)
        self.exponent = float(exponent)
        s = np.linspace(0.0, self.s_max, n_fine)
        g = np.array([gap_fn(x) for x in s], dtype=float)
        self._check(g, s)
        while s.size < max_points:
            d = g ** (-self.exponent)
            ratio = np.maximum(d[1:], d[:-1]) / np.minimum(d[1:], d[:-1])
            bad = np.flatnonzero(ratio > max_ratio)
            if bad.size == 0:
                break
            mids = 0.5 * (s[bad] + s[bad + 1])
            gm = np.array([gap_fn(x) for x in mids], dtype=float)
            self._check(gm, mids)
            s = np.concatenate([s, mids])
            g = np.concatenate([g, gm])
            order = np.argsort(s, kind="stable")
            s, g = s[order], g[order]
        dens = g ** (-self.exponent)
        self.grid = s
        self.gaps = g
        self._log_ratio = np.log(dens[1:] / dens[:-1])
        self._ratio_m1 = np.expm1(self._log_ratio)
        cell = np.diff(s) * dens[:-1] * _expm1_over_x(self._log_ratio)
        cum = np.concatenate([[0.0], np.cumsum(cell)])
        self.cumulative = cum / cum[-1]

    @staticmethod
    def _check(g, s):
        bad = np.flatnonzero(~(g > 0))
        if bad.size:
            raise NonpositiveGap(f"gap function is not positive at s={s[bad[0]]:.12g}")

    def __call__(self, L: int) -> Schedule:
        if L < 1:
            raise PreconditionError("L must be at least 1")
        c = np.arange(L + 1) / L
        k = np.clip(np.searchsorted(self.cumulative, c, side="right") - 1, 0, self.grid.size - 2)
        width = self.cumulative[k + 1] - self.cumulative[k]
        q = np.divide(c - self.cumulative[k], width, out=np.zeros_like(c), where=width > 0)
        # the density is exponential inside each cell, so invert its integral exactly
        frac = q * _log1p_over_x(q * self._ratio_m1[k], self._log_ratio[k])
        vals = self.grid[k] + np.clip(frac, 0.0, 1.0) * np.diff(self.grid)[k]
        vals[0], vals[-1] = 0.0, self.s_max
        return Schedule(np.maximum.accumulate(vals), "roland_cerf")


def roland_cerf_schedule(gap_fn: Callable[[float], float], s_max: float, L: int,
                         exponent: float = 2.0, **kwargs) -> Schedule:
    return RolandCerfFamily(gap_fn, s_max, exponent, **kwargs)(L)


def running_time(
    sys: FloquetSystem,
    schedule_family: Callable[[int], Schedule],
    psi0,
    target,
    epsilon: float,
    L_cap: int = DEFAULT_L_CAP,
    trace: list | None = None,
) -> int:
    """Smallest tested ``L`` whose passage error is below ``epsilon``.

    ``L`` doubles from 1 until two consecutive doublings both succeed,
    then bisection narrows the last failing/succeeding bracket. Every
    evaluated ``(L, error)`` is appended to ``trace`` when given.

    Raises
    ------
    NotConverged
        If ``L`` would exceed ``L_cap``.
    """
    if epsilon <= 0:
        raise PreconditionError("epsilon must be positive")
    if epsilon >= 1:
        return 1
    cache: dict[int, float] = {}

    def err(L: int) -> float:
        if L not in cache:
            cache[L] = run_passage(sys, schedule_family(L), psi0, target).error
            if trace is not None:
                trace.append((L, cache[L]))
        return cache[L]

    L = 1
    while True:
        if 2 * L > L_cap:
            raise NotConverged(f"passage error stayed above {epsilon} up to L={L_cap}")
        if err(L) < epsilon and err(2 * L) < epsilon:
            break
        L *= 2
    if L == 1:
        return 1
    # err(L // 2) failed here, otherwise the doubling would have stopped there
    lo, hi = L // 2, L
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if err(mid) < epsilon:
            hi = mid
        else:
            lo = mid
    return hi


def passage_record(L: int, epsilon: float, error: float, schedule_type: str,
                   model_params: dict) -> dict:
    return {"L": int(L), "epsilon": float(epsilon), "error": float(error),
            "schedule_type": schedule_type, "model_params": dict(model_params)}
