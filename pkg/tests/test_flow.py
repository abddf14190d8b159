import dataclasses

import numpy as np
import pytest

from axiferro.energy import EnergyParams, reduced_energy, residual_supnorm
from axiferro.flow import (FlowConfig, FlowStatus, comparison_trial,
                           detect_blowup, run, step, write_energy_trace_csv)
from axiferro.grid import make_grid
from axiferro.profile import (W1, W2, WedgeSpec, builtin_profile, degree,
                              make_profile)


def random_ordered_pair(grid, rng):
    """Ordered pair of class-(1,1) profiles with smooth positive gap."""
    a1, a2 = rng.uniform(-0.3, 0.3, 2)
    b1, b2 = rng.uniform(0.02, 0.25, 2)
    s = np.sin(grid.nodes)
    lower = np.pi + a1 * s ** 2 * np.cos(grid.nodes) + a2 * s ** 3
    upper = lower + b1 * s ** 2 + b2 * s ** 4
    return (make_profile(grid, lower, 1, 1), make_profile(grid, upper, 1, 1))


class TestStep:
    @pytest.mark.parametrize("name,kappa", [("theta", 7.0), ("two-theta", 4.0)])
    def test_exact_solutions_fixed(self, grid512, name, kappa):
        p = builtin_profile(name, grid512, kappa=kappa)
        q = step(p, EnergyParams(kappa), 1e-2)
        assert np.max(np.abs(q.values - p.values)) < 1e-12

    def test_two_theta_drifts_down_above_four(self, grid512):
        # drift per step is ~ dt (2 - kappa/2) sin(2 theta) < 0 for kappa = 6
        p = builtin_profile("two-theta", grid512)
        q = step(p, EnergyParams(6.0), 1e-3)
        mid = grid512.midpoint_index
        drift = (q.values - p.values)[1:mid]
        assert np.all(drift < 0)

    def test_endpoints_untouched_bitwise(self, grid256):
        p = builtin_profile("pi", grid256)
        q = step(p, EnergyParams(5.0), 1e-2)
        assert q.values[0] == np.pi and q.values[-1] == np.pi

    def test_rejects_nonpositive_dt(self, grid256):
        p = builtin_profile("pi", grid256)
        with pytest.raises(ValueError):
            step(p, EnergyParams(1.0), 0.0)


class TestRun:
    def test_relaxation_from_pi(self, grid512):
        params = EnergyParams(5.0)
        p0 = builtin_profile("pi", grid512)
        cfg = FlowConfig(stationary_tol=1e-9, wedge=WedgeSpec(W1, 1e-8))
        result = run(p0, params, cfg)
        assert result.status is FlowStatus.STATIONARY
        assert result.records[-1].energy < 2.0 * 5.0 / 3.0
        assert result.energy_monotone
        assert result.wedge_always_ok
        assert all(r.hemispheric_dev <= 10 * cfg.stationary_tol
                   for r in result.records)
        assert (result.final.m, result.final.n_end) == (1, 1)
        assert degree(result.final) == 0
        assert result.final.values[0] == np.pi

    def test_exact_solution_immediately_stationary(self, grid256):
        p0 = builtin_profile("two-theta", grid256)
        result = run(p0, EnergyParams(4.0), FlowConfig())
        assert result.status is FlowStatus.STATIONARY
        assert result.steps == 0

    def test_horizon_status(self, grid256):
        p0 = builtin_profile("pi", grid256)
        result = run(p0, EnergyParams(5.0), FlowConfig(t_max=0.05))
        assert result.status is FlowStatus.HORIZON_REACHED

    def test_half_interval_agrees_with_full(self, grid512):
        params = EnergyParams(5.0)
        p0 = builtin_profile("pi", grid512)
        cfg = FlowConfig(stationary_tol=1e-9)
        full = run(p0, params, cfg)
        half = run(p0, params, cfg, half_interval=True)
        assert half.status is FlowStatus.STATIONARY
        assert np.max(np.abs(half.final.values - full.final.values)) < 1e-8

    def test_half_interval_needs_hemispheric_data(self, grid256):
        p0 = builtin_profile("theta", grid256)
        with pytest.raises(ValueError, match="hemispheric"):
            run(p0, EnergyParams(4.0), FlowConfig(), half_interval=True)

    def test_first_type_limit_slopes(self, grid512):
        # the relaxed sawtooth keeps h' <= 1 everywhere and slopes down
        # through the equator
        from axiferro.profile import make_initial_first_type, node_derivative
        p0 = make_initial_first_type(grid512, 9.0)
        result = run(p0, EnergyParams(9.0), FlowConfig(stationary_tol=1e-8),
                     half_interval=True)
        assert result.status is FlowStatus.STATIONARY
        hp = node_derivative(result.final)
        assert hp[grid512.midpoint_index] <= 0
        assert np.max(hp) <= 1 + 1e-6

    def test_w2_wedge_preserved(self, grid512):
        # class (0,2) initial data strictly inside W2
        vals = 2 * grid512.nodes - 0.3 * np.sin(2 * grid512.nodes)
        p0 = make_profile(grid512, vals, 0, 2)
        cfg = FlowConfig(stationary_tol=1e-9, wedge=WedgeSpec(W2, 1e-8))
        result = run(p0, EnergyParams(5.0), cfg)
        assert result.status is FlowStatus.STATIONARY
        assert result.wedge_always_ok
        assert result.energy_monotone

    def test_default_dt_scales_with_kappa(self):
        assert FlowConfig().effective_dt(2.0) == pytest.approx(1e-2)
        assert FlowConfig().effective_dt(100.0) == pytest.approx(5e-3)
        assert FlowConfig(dt=1e-3).effective_dt(100.0) == 1e-3

    def test_config_validation(self):
        with pytest.raises(ValueError):
            FlowConfig(dt=-1.0)
        with pytest.raises(ValueError):
            FlowConfig(t_max=0.0)
        with pytest.raises(ValueError):
            FlowConfig(stationary_tol=0.0)


class TestBlowupDetector:
    def test_bounded_profile(self, grid512):
        p = builtin_profile("two-theta", grid512)
        assert not detect_blowup(p, FlowConfig())

    def test_nonfinite_values(self, grid256):
        p = builtin_profile("theta", grid256)
        vals = p.values.copy()
        vals[7] = np.nan
        assert detect_blowup(dataclasses.replace(p, values=vals), FlowConfig())

    def test_near_bubble_fires(self):
        # concentrated pole bubble with scale 1e-4; needs a grid fine enough
        # to see a finite-difference slope beyond the threshold
        g = make_grid(2048)
        lam = 1e-4
        vals = 2.0 * np.arctan(np.tan(g.nodes / 2) / lam)
        vals[0] = 0.0
        vals[-1] = np.pi
        p = make_profile(g, vals, 0, 1)
        assert detect_blowup(p, FlowConfig(blowup_grad_threshold=1e3))

    def test_flow_reports_blowup_status(self):
        g = make_grid(2048)
        lam = 1e-4
        vals = 2.0 * np.arctan(np.tan(g.nodes / 2) / lam)
        vals[0] = 0.0
        vals[-1] = np.pi
        p0 = make_profile(g, vals, 0, 1)
        result = run(p0, EnergyParams(1.0), FlowConfig(t_max=1.0))
        assert result.status is FlowStatus.BLOWUP_SUSPECTED


class TestComparison:
    def test_identical_inputs(self, grid256):
        p = builtin_profile("pi", grid256)
        verdict = comparison_trial(p, p, EnergyParams(5.0), FlowConfig(t_max=1.0))
        assert verdict.max_violation == 0.0

    def test_pi_below_exact_tilted_solution(self, grid512):
        # h = pi + theta solves the stationarity equation for every kappa
        lower = builtin_profile("pi", grid512)
        upper = make_profile(grid512, np.pi + grid512.nodes, 1, 2)
        assert residual_supnorm(upper, EnergyParams(5.0)) < 1e-9
        verdict = comparison_trial(lower, upper, EnergyParams(5.0),
                                   FlowConfig(t_max=10.0))
        assert verdict.max_violation <= 1e-9

    def test_two_exact_solutions_at_four(self, grid256):
        lower = builtin_profile("theta", grid256)
        upper = builtin_profile("two-theta", grid256)
        verdict = comparison_trial(lower, upper, EnergyParams(4.0),
                                   FlowConfig(t_max=2.0))
        assert verdict.max_violation <= 1e-12

    def test_random_ordered_pairs_stay_ordered(self, grid256, rng):
        worst = 0.0
        for _ in range(5):
            lower, upper = random_ordered_pair(grid256, rng)
            verdict = comparison_trial(lower, upper, EnergyParams(5.0),
                                       FlowConfig(t_max=5.0, record_every=10))
            worst = max(worst, verdict.max_violation)
        assert worst <= 1e-6

    def test_initial_violation_rejected(self, grid256):
        lower = builtin_profile("two-theta", grid256)
        upper = builtin_profile("theta", grid256)
        with pytest.raises(ValueError, match="ordering"):
            comparison_trial(lower, upper, EnergyParams(4.0), FlowConfig())


def test_energy_trace_csv(tmp_path, grid256):
    p0 = builtin_profile("pi", grid256)
    result = run(p0, EnergyParams(5.0),
                 FlowConfig(stationary_tol=1e-8, wedge=WedgeSpec(W1, 1e-8)))
    path = tmp_path / "trace.csv"
    write_energy_trace_csv(result, path, header_lines=["# config_hash=abc"])
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "# config_hash=abc"
    assert lines[1] == "t,E,sup_residual,wedge_ok"
    first = lines[2].split(",")
    assert float(first[0]) == 0.0
    assert float(first[1]) == pytest.approx(10.0 / 3.0, rel=1e-6)
    assert first[3] == "1"
