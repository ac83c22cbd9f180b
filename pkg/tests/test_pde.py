"""Time-stepper tests: analytic heat-kernel oracle, comparison principle,
steady-state fixed points, convergence detection, Lyapunov monitor, I/O."""

import math

import numpy as np
import pytest

from rdcontrol import pde, reaction
from rdcontrol import phase_plane as pp
from rdcontrol.errors import DomainError, NumericalError


@pytest.fixture(scope="module")
def cubic_third():
    return reaction.cubic(1.0 / 3.0)


@pytest.fixture(scope="module")
def logistic():
    return reaction.logistic()


@pytest.fixture(scope="module")
def pure_diffusion(logistic):
    return reaction.scale(logistic, 0.0)


class TestField:
    def test_constant_and_props(self):
        f = pde.Field.constant(0.25, 8.0, 200)
        assert f.n_x == 200
        assert f.length == 8.0
        assert f.dx == pytest.approx(0.04)
        assert f.distance_to(0.25) == 0.0

    def test_from_function_samples_nodes(self):
        f = pde.Field.from_function(lambda x: x / 10.0, 10.0, 50)
        assert f.values[0] == 0.0
        assert f.values[-1] == 1.0
        assert f.values[25] == pytest.approx(0.5)

    def test_rejects_out_of_band_values(self):
        grid = np.linspace(0.0, 1.0, 11)
        with pytest.raises(DomainError):
            pde.Field(grid, np.full(11, 1.1))
        with pytest.raises(DomainError):
            pde.Field(grid, np.full(11, -1e-9))
        # within the 1e-10 slack: accepted
        pde.Field(grid, np.full(11, 1.0 + 5e-11))

    def test_rejects_non_uniform_grid(self):
        grid = np.array([0.0, 0.1, 0.3, 0.4])
        with pytest.raises(DomainError):
            pde.Field(grid, np.zeros(4))

    def test_distance_between_fields(self):
        a = pde.Field.constant(0.2, 1.0, 10)
        b = pde.Field.constant(0.5, 1.0, 10)
        assert a.distance_to(b) == pytest.approx(0.3)

    def test_ramp_profile_matches_formula(self):
        f = pde.ramp_profile(12.0, 60)
        x = f.grid
        assert np.allclose(f.values, 0.1 * x / 12.0 + 0.8 * (1 - x / 12.0))


class TestControlSchedule:
    def test_constant(self):
        s = pde.ControlSchedule.constant(0.2, 0.8, 10.0, 100)
        assert s.n_t == 100
        assert s.dt == pytest.approx(0.1)
        assert s.t_final == 10.0
        assert np.all(s.u == 0.2) and np.all(s.v == 0.8)

    def test_from_function_left_endpoint(self):
        s = pde.ControlSchedule.from_function(
            lambda t: (min(t, 1.0), 0.0), 2.0, 4
        )
        assert s.u[0] == 0.0  # sampled at t=0, not t=dt
        assert s.u[-1] == 1.0

    def test_bounds_enforced(self):
        with pytest.raises(DomainError):
            pde.ControlSchedule.constant(-0.1, 0.5, 1.0, 10)
        with pytest.raises(DomainError):
            pde.ControlSchedule.constant(0.5, 1.2, 1.0, 10)

    def test_concat(self):
        a = pde.ControlSchedule.constant(0.1, 0.1, 1.0, 10)
        b = pde.ControlSchedule.constant(0.9, 0.9, 2.0, 20)
        c = a.concat(b)
        assert c.n_t == 30
        assert c.t_final == pytest.approx(3.0)
        assert c.u[0] == 0.1 and c.u[-1] == 0.9

    def test_concat_requires_same_dt(self):
        a = pde.ControlSchedule.constant(0.1, 0.1, 1.0, 10)
        b = pde.ControlSchedule.constant(0.9, 0.9, 1.0, 13)
        with pytest.raises(DomainError):
            a.concat(b)


class TestStep:
    def test_theta_fixed_point(self, cubic_third):
        th = cubic_third.theta
        y = pde.Field.constant(th, 8.0, 200)
        out = pde.step(cubic_third, y, th, th, 1e-3)
        assert out.distance_to(th) <= 1e-14

    def test_one_fixed_point(self, cubic_third):
        y = pde.Field.constant(1.0, 5.0, 100)
        out = pde.step(cubic_third, y, 1.0, 1.0, 1e-3)
        assert out.distance_to(1.0) <= 1e-14

    def test_boundary_rows_pinned(self, cubic_third):
        y = pde.Field.constant(0.5, 5.0, 100)
        out = pde.step(cubic_third, y, 0.25, 0.75, 1e-3)
        assert out.values[0] == 0.25
        assert out.values[-1] == 0.75

    def test_large_overshoot_raises(self, logistic):
        stiff = reaction.scale(logistic, 2000.0)
        y = pde.Field.constant(0.8, 1.0, 50)
        with pytest.raises(NumericalError):
            pde.step(stiff, y, 0.8, 0.8, 1e-3)


class TestHeatDecay:
    def decay_error(self, model, n_x, dt=1e-3, T=1.0):
        L = math.pi
        y0 = pde.Field.from_function(
            lambda x: math.sin(math.pi * x / L), L, n_x
        )
        sched = pde.ControlSchedule.constant(0.0, 0.0, T, int(round(T / dt)))
        traj = pde.simulate(model, y0, sched, record_every=1000)
        exact = math.exp(-((math.pi / L) ** 2) * T) * y0.values
        return float(np.max(np.abs(traj.states[-1] - exact)))

    def test_eigenfunction_decay(self, pure_diffusion):
        assert self.decay_error(pure_diffusion, 200) <= 1e-3

    def test_second_order_in_space(self, pure_diffusion):
        e1 = self.decay_error(pure_diffusion, 200)
        e2 = self.decay_error(pure_diffusion, 400)
        assert e1 / e2 >= 3.5


class TestSimulate:
    def test_invasion_reaches_one(self, cubic_third):
        y0 = pde.ramp_profile(12.0, 200)
        sched = pde.ControlSchedule.constant(1.0, 1.0, 60.0, 60_000)
        traj = pde.simulate(cubic_third, y0, sched, record_every=2000)
        assert traj.final.distance_to(1.0) <= 1e-2

    def test_extinction_below_threshold(self, cubic_third):
        y0 = pde.ramp_profile(8.0, 200)
        sched = pde.ControlSchedule.constant(0.0, 0.0, 100.0, 100_000)
        traj = pde.simulate(cubic_third, y0, sched, record_every=4000)
        assert traj.final.distance_to(0.0) <= 1e-2

    def test_blocked_above_threshold(self, cubic_third):
        y0 = pde.ramp_profile(12.0, 200)
        sched = pde.ControlSchedule.constant(0.0, 0.0, 100.0, 100_000)
        traj = pde.simulate(cubic_third, y0, sched, record_every=4000)
        final = traj.final
        assert final.distance_to(0.0) > 0.1  # not extinct
        sols = pp.find_stationary_solutions(cubic_third, 0.0, 0.0, 12.0)
        bumps = [s for s in sols if s.values.max() > 1e-6]
        dists = [
            float(
                np.max(
                    np.abs(
                        final.values
                        - np.interp(final.grid, s.grid, s.values)
                    )
                )
            )
            for s in bumps
        ]
        assert min(dists) <= 1e-2

    def test_first_snapshot_is_initial(self, cubic_third):
        y0 = pde.ramp_profile(5.0, 50)
        sched = pde.ControlSchedule.constant(0.3, 0.3, 0.1, 100)
        traj = pde.simulate(cubic_third, y0, sched, record_every=10)
        assert np.array_equal(traj.states[0], y0.values)
        assert traj.times[0] == 0.0
        assert np.all(np.diff(traj.times) > 0)

    def test_determinism(self, cubic_third):
        y0 = pde.ramp_profile(5.0, 80)
        sched = pde.ControlSchedule.constant(0.4, 0.6, 1.0, 1000)
        a = pde.simulate(cubic_third, y0, sched, record_every=100)
        b = pde.simulate(cubic_third, y0, sched, record_every=100)
        assert np.array_equal(a.states, b.states)


class TestSteadyStatesAreFixedPoints:
    def test_bump_held_by_zero_controls(self, cubic_third):
        sols = pp.find_stationary_solutions(cubic_third, 0.0, 0.0, 12.0)
        bump = max(sols, key=lambda s: s.values.max())
        grid = np.linspace(0.0, 12.0, 201)
        sampled = pde.Field(grid, np.interp(grid, bump.grid, bump.values))
        ss = pde.discrete_steady_state(cubic_third, sampled, 0.0, 0.0)
        # the discrete rendering stays consistent with the phase-plane object
        assert ss.distance_to(sampled) <= 1e-3
        sched = pde.ControlSchedule.constant(0.0, 0.0, 1.0, 1000)
        drift = pde.simulate(cubic_third, ss, sched).final.distance_to(ss)
        assert drift <= 1e-6
        # naive nodal sampling carries the O(dx^2) discretization gap
        drift_sampled = pde.simulate(
            cubic_third, sampled, sched
        ).final.distance_to(sampled)
        assert drift_sampled <= 1e-4

    def test_gamma_dip_held_by_eps_controls(self, cubic_third):
        sols = pp.find_stationary_solutions(cubic_third, 0.02, 0.02, 8.0)
        grid = np.linspace(0.0, 8.0, 201)
        sampled = pde.Field(
            grid, np.interp(grid, sols[0].grid, sols[0].values)
        )
        ss = pde.discrete_steady_state(cubic_third, sampled, 0.02, 0.02)
        sched = pde.ControlSchedule.constant(0.02, 0.02, 1.0, 1000)
        drift = pde.simulate(cubic_third, ss, sched).final.distance_to(ss)
        assert drift <= 1e-6


class TestComparison:
    def test_randomized_ordered_pairs(self, cubic_third):
        rng = np.random.default_rng(42)
        L, n_x = 8.0, 200
        grid = np.linspace(0.0, L, n_x + 1)
        dt = pde.monotone_dt(cubic_third, L / n_x)
        n_t = int(round(1.0 / dt))
        worst = -np.inf
        for _ in range(50):
            lo_vals = rng.uniform(0.0, 1.0, n_x + 1)
            hi_vals = np.clip(lo_vals + rng.uniform(0.0, 0.5, n_x + 1), 0, 1)
            sched = pde.ControlSchedule(
                np.linspace(0.0, n_t * dt, n_t + 1),
                rng.uniform(0.0, 1.0, n_t),
                rng.uniform(0.0, 1.0, n_t),
            )
            rep = pde.check_comparison(
                cubic_third,
                pde.Field(grid, lo_vals),
                pde.Field(grid, hi_vals),
                sched,
            )
            worst = max(worst, rep.max_gap)
            assert rep.ordered
        assert worst <= 1e-8

    def test_rejects_unordered_data(self, cubic_third):
        lo = pde.Field.constant(0.8, 1.0, 20)
        hi = pde.Field.constant(0.2, 1.0, 20)
        sched = pde.ControlSchedule.constant(0.5, 0.5, 0.1, 100)
        with pytest.raises(DomainError):
            pde.check_comparison(cubic_third, lo, hi, sched)

    def test_obstacle_bump_invariance(self, cubic_third):
        # initial data above the stationary bump stays above it under any
        # admissible schedule (controls >= the bump's zero boundary values)
        sols = pp.find_stationary_solutions(cubic_third, 0.0, 0.0, 12.0)
        bump = max(sols, key=lambda s: s.values.max())
        grid = np.linspace(0.0, 12.0, 201)
        w = pde.discrete_steady_state(
            cubic_third,
            pde.Field(grid, np.interp(grid, bump.grid, bump.values)),
            0.0,
            0.0,
        )
        y0 = pde.Field(grid, np.clip(w.values + 0.05, 0.0, 1.0))
        rng = np.random.default_rng(3)
        dt = pde.monotone_dt(cubic_third, 12.0 / 200)
        n_t = int(round(2.0 / dt))
        sched = pde.ControlSchedule(
            np.linspace(0.0, n_t * dt, n_t + 1),
            rng.uniform(0.0, 1.0, n_t),
            rng.uniform(0.0, 1.0, n_t),
        )
        traj = pde.simulate(cubic_third, y0, sched, record_every=50)
        assert float(np.min(traj.states - w.values)) >= -1e-8


class TestDetectConvergence:
    def test_constant_theta_converges_immediately(self, cubic_third):
        th = cubic_third.theta
        y0 = pde.Field.constant(th, 8.0, 200)
        sched = pde.ControlSchedule.constant(th, th, 2.0, 2000)
        traj = pde.simulate(cubic_third, y0, sched, record_every=100)
        got = pde.detect_convergence(traj, window=1.0, tol=1e-4)
        assert got is not None
        assert got.distance_to(th) <= 1e-12

    def test_eps_run_converges_to_gamma_dip(self, cubic_third):
        # long eps-boundary run settles onto the unique small steady state;
        # cross-validated against the independent shooting enumeration
        y0 = pde.ramp_profile(8.0, 200)
        sched = pde.ControlSchedule.constant(0.02, 0.02, 200.0, 200_000)
        traj = pde.simulate(cubic_third, y0, sched, record_every=5000)
        got = pde.detect_convergence(traj, window=20.0, tol=1e-4)
        assert got is not None
        sols = pp.find_stationary_solutions(cubic_third, 0.02, 0.02, 8.0)
        assert len(sols) == 1
        ref = np.interp(got.grid, sols[0].grid, sols[0].values)
        assert float(np.max(np.abs(got.values - ref))) <= 1e-4

    def test_oscillating_controls_rejected(self, cubic_third):
        y0 = pde.Field.constant(cubic_third.theta, 8.0, 100)
        n_t = 2000
        times = np.linspace(0.0, 2.0, n_t + 1)
        u = 0.3 + 0.2 * (np.arange(n_t) % 2)
        sched = pde.ControlSchedule(times, u, u)
        traj = pde.simulate(cubic_third, y0, sched, record_every=100)
        assert pde.detect_convergence(traj, window=1.0, tol=1e-2) is None

    def test_unsettled_run_rejected(self, cubic_third):
        y0 = pde.ramp_profile(8.0, 200)
        sched = pde.ControlSchedule.constant(0.02, 0.02, 2.0, 2000)
        traj = pde.simulate(cubic_third, y0, sched, record_every=100)
        assert pde.detect_convergence(traj, window=1.0, tol=1e-6) is None


class TestLyapunov:
    def test_zero_at_one(self):
        assert pde.lyapunov_v(pde.Field.constant(1.0, 3.0, 60)) == 0.0

    def test_closed_form_at_half(self):
        v = pde.lyapunov_v(pde.Field.constant(0.5, 1.0, 100))
        assert v == pytest.approx(0.5 - 1.0 + math.log(2.0), abs=1e-12)

    def test_positive_away_from_one(self):
        assert pde.lyapunov_v(pde.Field.constant(0.3, 2.0, 40)) > 0.0

    def test_domain_error_at_zero(self):
        y = pde.Field.constant(0.0, 1.0, 10)
        with pytest.raises(DomainError):
            pde.lyapunov_v(y)

    def test_nonincreasing_along_invasion(self, logistic):
        y0 = pde.Field.from_function(
            lambda x: 0.1 + 0.8 * math.exp(-x), 6.0, 200
        )
        sched = pde.ControlSchedule.constant(1.0, 1.0, 20.0, 20_000)
        traj = pde.simulate(logistic, y0, sched, record_every=200)
        vals = [pde.lyapunov_v(f) for _, f in traj.snapshots()]
        increases = np.diff(vals)
        assert float(increases.max(initial=-np.inf)) <= 1e-6


class TestMatanoRegression:
    # constant-control runs converge to a steady state for a fixed set of
    # (model, L, boundary value) combinations
    CASES = [
        ("cubic", 5.0, 1.0 / 3.0),
        ("cubic", 8.0, 0.02),
        ("cubic", 8.0, 0.6),
        ("cubic", 12.0, 0.0),
        ("cubic", 12.0, 1.0),
        ("cubic", 6.0, 0.45),
        ("logistic", 3.0, 0.0),
        ("logistic", 4.0, 0.3),
        ("logistic", 6.0, 1.0),
        ("logistic", 5.0, 0.8),
        ("logistic", 4.0, 0.5),
        ("logistic", 7.0, 0.9),
    ]

    @pytest.mark.parametrize("kind,L,bval", CASES)
    def test_constant_control_runs_converge(self, kind, L, bval,
                                            cubic_third, logistic):
        model = cubic_third if kind == "cubic" else logistic
        y0 = pde.ramp_profile(L, 200)
        dt = 1e-3
        chunk_t, chunk_steps = 20.0, 20_000
        state = y0
        for _ in range(10):  # up to T = 200
            sched = pde.ControlSchedule.constant(bval, bval, chunk_t,
                                                 chunk_steps)
            traj = pde.simulate(model, state, sched, record_every=1000)
            got = pde.detect_convergence(traj, window=10.0, tol=1e-5)
            if got is not None:
                return
            state = traj.final
        pytest.fail(f"no convergence by T=200 for {kind}, L={L}, b={bval}")


class TestIO:
    def test_csv_round_trip_values(self, cubic_third, tmp_path):
        y0 = pde.ramp_profile(4.0, 8)
        sched = pde.ControlSchedule.constant(0.2, 0.7, 0.01, 10)
        traj = pde.simulate(cubic_third, y0, sched, record_every=5)
        path = tmp_path / "traj.csv"
        pde.trajectory_to_csv(traj, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "t,x,y"
        assert len(lines) == 1 + traj.times.size * traj.grid.size
        t, x, y = lines[1].split(",")
        assert float(t) == 0.0 and float(x) == 0.0
        assert float(y) == y0.values[0]

    def test_schedule_csv(self, tmp_path):
        sched = pde.ControlSchedule.constant(0.25, 0.5, 1.0, 4)
        path = tmp_path / "sched.csv"
        pde.schedule_to_csv(sched, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "t,u,v"
        assert len(lines) == 5
        assert [float(s) for s in lines[1].split(",")] == [0.0, 0.25, 0.5]

    def test_binary_round_trip(self, cubic_third, tmp_path):
        y0 = pde.ramp_profile(6.0, 30)
        sched = pde.ControlSchedule.constant(0.1, 0.9, 0.1, 100)
        traj = pde.simulate(cubic_third, y0, sched, record_every=10)
        path = tmp_path / "traj.bin"
        pde.save_trajectory(traj, path)
        times, grid, states = pde.load_trajectory(path)
        assert np.array_equal(states, traj.states)
        assert np.allclose(times, traj.times)
        assert np.allclose(grid, traj.grid)

    def test_binary_rejects_bad_magic(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOPE!" + b"\x00" * 64)
        with pytest.raises(DomainError):
            pde.load_trajectory(path)

    def test_binary_rejects_truncation(self, cubic_third, tmp_path):
        y0 = pde.ramp_profile(6.0, 30)
        sched = pde.ControlSchedule.constant(0.1, 0.9, 0.1, 100)
        traj = pde.simulate(cubic_third, y0, sched, record_every=10)
        path = tmp_path / "traj.bin"
        pde.save_trajectory(traj, path)
        data = path.read_bytes()
        path.write_bytes(data[:-16])
        with pytest.raises(DomainError):
            pde.load_trajectory(path)


class TestSimulateUntil:
    def test_stops_on_predicate(self, cubic_third):
        y0 = pde.ramp_profile(8.0, 200)
        target = 0.2
        traj, hit = pde.simulate_until(
            cubic_third, y0, 0.0, 0.0, 1e-3,
            stop=lambda t, y: float(np.max(y)) <= target,
            t_max=100.0,
        )
        assert hit is not None
        assert float(np.max(traj.states[-1])) <= target
        assert traj.times[-1] == pytest.approx(hit)

    def test_reaches_t_max_without_hit(self, cubic_third):
        y0 = pde.Field.constant(1.0, 8.0, 100)
        traj, hit = pde.simulate_until(
            cubic_third, y0, 1.0, 1.0, 1e-3,
            stop=lambda t, y: False,
            t_max=0.05,
        )
        assert hit is None
        assert traj.times[-1] == pytest.approx(0.05)


class TestMonotoneDt:
    def test_caps(self, cubic_third, pure_diffusion):
        dx = 0.04
        dt = pde.monotone_dt(cubic_third, dx)
        assert dt == pytest.approx(0.5 * dx * dx)
        lip = reaction.lipschitz_bound(cubic_third)
        assert dt * lip <= 0.5 + 1e-12
        # stiff reaction: the Lipschitz cap takes over
        stiff = reaction.scale(cubic_third, 1e4)
        assert pde.monotone_dt(stiff, dx) == pytest.approx(
            0.5 / reaction.lipschitz_bound(stiff)
        )
        # zero reaction: only the diffusion cap
        assert pde.monotone_dt(pure_diffusion, dx) == pytest.approx(
            0.5 * dx * dx
        )

    def test_reference_dt(self, cubic_third, pure_diffusion):
        assert pde.reference_dt(cubic_third) == pytest.approx(1e-3)
        assert pde.reference_dt(pure_diffusion) == pytest.approx(1e-3)
        stiff = reaction.scale(cubic_third, 1e4)
        lip = reaction.lipschitz_bound(stiff)
        assert pde.reference_dt(stiff) == pytest.approx(0.9 / lip)
