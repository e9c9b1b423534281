"""Eigenangle curves of ``U_s`` along ``s``.

Curves are followed by eigenvector continuation: at each new grid point
the eigenvectors are matched to the previous ones by greedy maximum
overlap, and the step is bisected wherever some matched overlap drops
below 0.7 or some eigenangle moves backwards. Eigenangles are lifted off
the circle by continuity, so a curve that winds past ``2*pi`` keeps
increasing.

Only the cyclic subspace of ``v`` is diagonalized at each step. Levels
orthogonal to it (spectators) are flat and are added from the cached
unperturbed spectrum; they never enter the matching, so exact crossings
with them are harmless.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import BadSpan, PreconditionError, TrackingFailure
from .floquet import FloquetSystem
from .numerics import TWO_PI, circular_distance, eig_unitary, wrap_to_pi

MIN_OVERLAP = 0.7
MAX_REFINE = 12
GAP_XTOL = 1e-9
MONOTONE_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class EigenangleCurve:
    """One continuation-tracked eigenangle branch.

    ``theta`` is branch-lifted (continuous, unbounded); ``vectors[k]`` is
    the eigenvector at ``s[k]`` in a parallel-transport gauge.
    """

    curve_id: int
    s: np.ndarray
    theta: np.ndarray
    vectors: np.ndarray
    overlap_with_v: np.ndarray
    coupled: bool
    system: FloquetSystem | None = field(default=None, repr=False)

    @property
    def branch_offset(self) -> int:
        """Number of times the curve wound past a multiple of ``2*pi``."""
        return int(np.floor(self.theta[-1] / TWO_PI) - np.floor(self.theta[0] / TWO_PI))

    @property
    def theta_mod2pi(self) -> np.ndarray:
        return np.mod(self.theta, TWO_PI)

    @property
    def samples(self) -> Iterator[tuple[float, float, np.ndarray]]:
        for k in range(self.s.size):
            yield float(self.s[k]), float(self.theta[k]), self.vectors[k]

    def __len__(self) -> int:
        return self.s.size

    def theta_at(self, s: float) -> float:
        """Linear interpolation of the lifted eigenangle."""
        return float(np.interp(s, self.s, self.theta))

    def nearest_index(self, s: float) -> int:
        k = int(np.searchsorted(self.s, s))
        if k == 0:
            return 0
        if k >= self.s.size:
            return self.s.size - 1
        return k if self.s[k] - s < s - self.s[k - 1] else k - 1


@dataclass(frozen=True)
class GapReport:
    min_gap: float
    s_at_min: float
    curve_index_pair: tuple[int, int]


def _greedy_match(prev: np.ndarray, new: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column permutation of ``new`` matching ``prev`` by largest |overlap|."""
    ov = np.abs(prev.conj().T @ new)
    m = ov.shape[0]
    perm = np.full(m, -1)
    best = np.zeros(m)
    row_free = np.ones(m, dtype=bool)
    col_free = np.ones(m, dtype=bool)
    for flat in np.argsort(-ov, axis=None, kind="stable"):
        i, j = divmod(int(flat), m)
        if row_free[i] and col_free[j]:
            perm[i] = j
            best[i] = ov[i, j]
            row_free[i] = col_free[j] = False
    return perm, best


def _block_eig(sys: FloquetSystem, s: float):
    return eig_unitary(sys.coupling.block(s))


def track_curves(
    sys: FloquetSystem,
    s_from: float,
    s_to: float,
    n_samples: int,
    *,
    min_overlap: float = MIN_OVERLAP,
    max_refine: int = MAX_REFINE,
) -> list[EigenangleCurve]:
    """Track every eigenangle of ``U_s`` for ``s`` from ``s_from`` to ``s_to``.

    Returns one curve per Hilbert-space dimension, ordered by the
    eigenangle at ``s_from`` (coupled levels before spectators on ties).

    Raises
    ------
    TrackingFailure
        When bisecting a step ``max_refine`` times still leaves a matched
        overlap below ``min_overlap``; this signals a true degeneracy on
        the path.
    """
    if n_samples < 2:
        raise PreconditionError("n_samples must be at least 2")
    if s_to < s_from:
        raise PreconditionError("s_to must not be smaller than s_from")
    cs = sys.coupling
    m = cs.size
    grid = np.linspace(s_from, s_to, n_samples) if s_to > s_from else np.array([float(s_from)])

    th0, y0 = _block_eig(sys, grid[0])
    s_list = [float(grid[0])]
    th_list = [th0.copy()]
    y_list = [y0]

    def step(a: float, b: float, depth: int) -> None:
        th_b, y_b = _block_eig(sys, b)
        y_a = y_list[-1]
        perm, best = _greedy_match(y_a, y_b)
        th_b = th_b[perm]
        lifted = th_list[-1] + wrap_to_pi(th_b - th_list[-1])
        step_th = lifted - th_list[-1]
        # coupled eigenangles never decrease (d theta/ds = |<v|xi>|^2), so a
        # backwards step means two near-degenerate levels were swapped
        if best.min() < min_overlap or np.max(np.abs(step_th)) > np.pi / 2 or step_th.min() < -MONOTONE_TOL:
            if depth >= max_refine:
                raise TrackingFailure(
                    f"eigenvector continuation failed near s={a:.12g} after {max_refine} "
                    f"refinements (min overlap {best.min():.3f})"
                )
            mid = 0.5 * (a + b)
            step(a, mid, depth + 1)
            step(mid, b, depth + 1)
            return
        y_b = y_b[:, perm]
        gauge = np.einsum("ij,ij->j", y_a.conj(), y_b)
        y_b = y_b * (np.abs(gauge) / gauge)
        s_list.append(float(b))
        th_list.append(lifted)
        y_list.append(y_b)

    for k in range(grid.size - 1):
        step(float(grid[k]), float(grid[k + 1]), 0)

    s_arr = np.array(s_list)
    s_arr.setflags(write=False)
    th = np.array(th_list)  # (n, m)
    y = np.array(y_list)  # (n, m_block, m)
    full = np.einsum("dk,nkj->jnd", cs.basis, y)  # (m, n, dim)
    ovv = np.abs(np.einsum("k,nkj->jn", cs.weights, y))

    entries = []
    for j in range(m):
        entries.append((th[0, j], 0, th[:, j], full[j], ovv[j], True))
    n = s_arr.size
    for j, ang in enumerate(cs.spectator_angles):
        vec = np.broadcast_to(cs.spectator_vectors[:, j], (n, sys.dim))
        entries.append((ang, 1, np.full(n, ang), vec, np.zeros(n), False))
    entries.sort(key=lambda e: (e[0], e[1]))

    curves = []
    for cid, (_, _, theta, vecs, ov, coupled) in enumerate(entries):
        theta = np.array(theta, dtype=float)
        theta.setflags(write=False)
        curves.append(EigenangleCurve(cid, s_arr, theta, vecs, ov, coupled, sys))
    return curves


def detect_anholonomy(curve: EigenangleCurve, tol: float = 1e-9) -> float:
    """Lifted eigenangle shift ``theta(s_start + 2 pi) - theta(s_start)``."""
    span = curve.s[-1] - curve.s[0]
    if abs(span - TWO_PI) > tol:
        raise BadSpan(f"curve spans {span:.12g} in s, a full period 2*pi is required")
    return float(curve.theta[-1] - curve.theta[0])


def spectrum(sys: FloquetSystem, s: float) -> np.ndarray:
    """All eigenangles of ``U_s`` (coupled and spectator), sorted."""
    th, _ = _block_eig(sys, s)
    return np.sort(np.concatenate([th, sys.coupling.spectator_angles]))


def _identify(sys: FloquetSystem, curve: EigenangleCurve, s: float):
    """Eigenangle of ``curve``'s level at ``s`` plus the remaining coupled angles."""
    th, y = _block_eig(sys, s)
    ref = sys.coupling.basis.conj().T @ curve.vectors[curve.nearest_index(s)]
    j = int(np.argmax(np.abs(ref.conj() @ y)))
    return th[j], np.delete(th, j)


def level_gap_function(
    curve: EigenangleCurve, include_spectators: bool = True
) -> Callable[[float], float]:
    """Gap (radians) between ``curve``'s level and its nearest neighbour at any ``s``."""
    sys = curve.system
    if sys is None:
        raise PreconditionError("curve carries no system; track it with track_curves")
    spect = sys.coupling.spectator_angles

    def gap(s: float) -> float:
        if curve.coupled:
            own, others = _identify(sys, curve, s)
            if include_spectators:
                others = np.concatenate([others, spect])
        else:
            own = curve.theta[0]
            th, _ = _block_eig(sys, s)
            idx = np.flatnonzero(np.isclose(spect, own, atol=1e-12))
            rest = np.delete(spect, idx[:1]) if include_spectators else np.empty(0)
            others = np.concatenate([th, rest])
        if others.size == 0:
            return float("inf")
        return float(np.min(circular_distance(own, others)))

    return gap


def min_gap(
    curves: Sequence[EigenangleCurve],
    target_index: int,
    *,
    include_spectators: bool = True,
    refine: bool = True,
) -> GapReport:
    """Minimum circular eigenangle distance from one curve to all others.

    The sampled minimum is refined by a bounded scalar search between the
    neighbouring samples (to ``|ds| <= 1e-9``) when the curves carry their
    system.
    """
    if len(curves) < 2:
        raise PreconditionError("need at least two curves")
    target = curves[target_index]
    others = [c for c in curves if c.curve_id != target.curve_id
              and (include_spectators or c.coupled)]
    if not others:
        raise PreconditionError("no other curves to compare with")
    dist = np.array([circular_distance(target.theta, c.theta) for c in others])
    flat = int(np.argmin(dist))
    o_idx, k = divmod(flat, dist.shape[1])
    best_gap = float(dist[o_idx, k])
    best_s = float(target.s[k])
    pair = (target.curve_id, others[o_idx].curve_id)

    if refine and target.system is not None and target.s.size > 1:
        lo = float(target.s[max(k - 1, 0)])
        hi = float(target.s[min(k + 1, target.s.size - 1)])
        gap_fn = level_gap_function(target, include_spectators)
        if hi > lo:
            res = minimize_scalar(gap_fn, bounds=(lo, hi), method="bounded",
                                  options={"xatol": GAP_XTOL})
            if res.fun < best_gap:
                best_gap, best_s = float(res.fun), float(res.x)
    return GapReport(best_gap, best_s, pair)


def finite_difference_slope(sys: FloquetSystem, s: float, vector: np.ndarray, h: float = 1e-5) -> float:
    """Central difference ``d theta / ds`` for the level whose eigenvector is ``vector`` at ``s``."""
    ref = sys.coupling.basis.conj().T @ vector

    def angle(x):
        th, y = _block_eig(sys, x)
        return th[int(np.argmax(np.abs(ref.conj() @ y)))]

    return float(wrap_to_pi(angle(s + h) - angle(s - h)) / (2 * h))


def curve_rows(curves: Sequence[EigenangleCurve]):
    """Rows ``(s, curve_id, theta_lifted, theta_mod2pi, overlap_with_v)`` sorted by s then id."""
    rows = []
    for c in curves:
        mod = c.theta_mod2pi
        for k in range(c.s.size):
            rows.append((float(c.s[k]), c.curve_id, float(c.theta[k]), float(mod[k]),
                         float(c.overlap_with_v[k])))
    rows.sort(key=lambda r: (r[0], r[1]))
    return rows
