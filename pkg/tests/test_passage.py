import json

import numpy as np
import pytest
from scipy.integrate import quad
from conftest import random_hermitian, random_unit

from aaqc import models, passage, spectral
from aaqc.errors import NonpositiveGap, NotConverged, PreconditionError
from aaqc.floquet import FloquetSystem
from aaqc.numerics import TWO_PI
from aaqc.passage import Schedule, linear_schedule, run_passage, running_time


def optimal():
    sys = models.optimal_v_system()
    return sys, sys.states["minus"], sys.states["plus"]


def linear(L):
    return linear_schedule(TWO_PI, L)


class TestSchedule:
    def test_linear(self):
        assert np.allclose(linear_schedule(TWO_PI, 4).values, [0, np.pi / 2, np.pi, 3 * np.pi / 2, TWO_PI])

    def test_validation(self):
        with pytest.raises(PreconditionError):
            Schedule([0.1, 1.0])
        with pytest.raises(PreconditionError):
            Schedule([0.0, 1.0, 0.5])
        with pytest.raises(PreconditionError):
            linear_schedule(1.0, 0)

    def test_roland_cerf_constant_gap_is_linear(self):
        rc = passage.roland_cerf_schedule(lambda s: 0.3, TWO_PI, 50)
        assert np.max(np.abs(rc.values - linear(50).values)) <= 1e-9
        assert rc.values[0] == 0.0 and rc.values[-1] == TWO_PI

    def test_roland_cerf_slows_down_at_small_gap(self):
        gap = lambda s: 0.01 + abs(s - np.pi)
        rc = passage.roland_cerf_schedule(gap, TWO_PI, 200)
        steps = np.diff(rc.values)
        mid = np.argmin(np.abs(rc.values[:-1] - np.pi))
        assert steps[mid] < steps[0] / 20
        # every step carries the same share of the integral of gap^-2
        share = [quad(lambda s: gap(s) ** -2, a, b, points=[np.pi] if a < np.pi < b else None)[0]
                 for a, b in zip(rc.values[:-1], rc.values[1:])]
        assert np.max(np.abs(np.array(share) / np.mean(share) - 1)) < 1e-3

    def test_roland_cerf_rejects_nonpositive_gap(self):
        with pytest.raises(NonpositiveGap):
            passage.roland_cerf_schedule(lambda s: np.pi - s, TWO_PI, 10)


class TestRunPassage:
    def test_stationary(self, rng):
        sys = FloquetSystem(random_hermitian(rng, 4), random_unit(rng, 4), 1.0)
        psi = sys.eigenbasis[:, 2]
        res = run_passage(sys, Schedule(np.zeros(30)), psi, psi)
        assert res.error <= 1e-10
        assert abs(abs(np.vdot(psi, res.final_state)) - 1) <= 1e-10

    def test_sudden_limit(self):
        sys, minus, plus = optimal()
        res = run_passage(sys, linear(1), minus, plus)
        assert abs(res.error - 1.0) <= 1e-12

    def test_optimal_model_l2000(self):
        sys, minus, plus = optimal()
        assert run_passage(sys, linear(2000), minus, plus).error <= 1e-2

    def test_order_of_application(self, rng):
        sys = FloquetSystem(random_hermitian(rng, 3), random_unit(rng, 3), 0.8)
        sched = Schedule([0.0, 0.4, 1.7, 2.2])
        psi = random_unit(rng, 3)
        expected = psi
        for s in sched.values[1:]:
            expected = sys.floquet(s) @ expected
        assert np.allclose(run_passage(sys, sched, psi, psi).final_state, expected)

    def test_duck_typed_system_agrees(self, rng):
        sys = FloquetSystem(random_hermitian(rng, 4), random_unit(rng, 4), 0.8)

        class Wrapper:
            def apply(self, psi, s):
                return sys.apply(psi, s)

        psi = random_unit(rng, 4)
        a = run_passage(sys, linear(37), psi, psi, record_overlaps=True)
        b = run_passage(Wrapper(), linear(37), psi, psi, record_overlaps=True)
        assert np.allclose(a.final_state, b.final_state)
        assert np.allclose(a.overlap_history, b.overlap_history)

    def test_norm_conserved_each_step(self, rng):
        sys = FloquetSystem(random_hermitian(rng, 6), random_unit(rng, 6), 0.9)
        psi = random_unit(rng, 6)
        for L in (1, 10, 100):
            sched = linear(L)
            for k in range(1, L + 1):
                part = Schedule(sched.values[: k + 1])
                assert abs(np.linalg.norm(run_passage(sys, part, psi, psi).final_state) - 1) <= 1e-12

    def test_adiabatic_limit(self):
        sys, minus, plus = optimal()
        errs = {L: run_passage(sys, linear(L), minus, plus).error for L in 2 ** np.arange(4, 17)}
        assert errs[2 ** 16] < 1e-3
        Ls = sorted(errs)
        assert all(errs[b] <= errs[a] + 1e-3 for a, b in zip(Ls[4:], Ls[5:]))

    def test_record(self):
        rec = passage.passage_record(12, 0.1, 0.05, "linear", {"N": 100})
        assert json.loads(json.dumps(rec)) == {"L": 12, "epsilon": 0.1, "error": 0.05,
                                               "schedule_type": "linear", "model_params": {"N": 100}}


class TestRunningTime:
    def test_degenerate_epsilon(self):
        sys, minus, plus = optimal()
        assert running_time(sys, linear, minus, plus, 1.0) == 1

    def test_minimality(self):
        sys, minus, plus = optimal()
        trace = []
        L = running_time(sys, linear, minus, plus, 0.05, trace=trace)
        errs = dict(trace)
        assert errs[L] < 0.05
        assert errs[L - 1] >= 0.05

    def test_cap(self):
        sys = models.fair_grover_effective(100)
        with pytest.raises(NotConverged):
            running_time(sys, linear, sys.states["minus"], sys.states["plus"], 0.1, L_cap=64)

    def test_optimal_two_step_transfer(self):
        # U_2pi U_pi maps |-> exactly onto |+> (up to phase) for the optimal kick
        sys, minus, plus = optimal()
        assert run_passage(sys, linear(2), minus, plus).error < 1e-14
        assert running_time(sys, linear, minus, plus, 0.01) == 2

    def test_independent_of_embedding_dimension(self):
        base = running_time(*optimal()[:1], linear, *optimal()[1:], 0.01)
        for extra in (1, 4, 20):
            levels = np.concatenate([[0.0, TWO_PI / 3], np.linspace(3.0, 6.0, extra)])
            v = np.zeros(levels.size)
            v[:2] = 1 / np.sqrt(2)
            sys = FloquetSystem(np.diag(levels), v, 1.0)
            e = np.eye(levels.size)
            assert running_time(sys, linear, e[0], e[1], 0.01) == base
            for L in (3, 17, 300):
                ref = run_passage(optimal()[0], linear(L), *optimal()[1:]).error
                assert abs(run_passage(sys, linear(L), e[0], e[1]).error - ref) < 1e-12


def test_landau_zener_gap_scaling():
    """L at fixed error grows as gap^-2 across an avoided crossing of tunable width."""
    eps = np.array([0.1, 0.05, 0.025, 0.0125])
    gaps, times = [], []
    for e in eps:
        sys = models.fair_grover_effective(epsilon=e)
        curves = spectral.track_curves(sys, 0.0, TWO_PI, 201)
        gaps.append(spectral.min_gap(curves, 0).min_gap)
        times.append(running_time(sys, linear, sys.states["minus"], sys.states["plus"], 0.1))
    slope = np.polyfit(np.log(gaps), np.log(times), 1)[0]
    assert abs(slope + 2) <= 0.2
