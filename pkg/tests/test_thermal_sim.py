import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import REF_TEMP_STABLE
from oracles import scalar_iterate
from thermotool.power_model import LeakageParams, SourceParams
from thermotool.thermal_sim import (ScheduleEntry, ThermalStateSpace, Trajectory, coupled_step,
                                    linear_steady_state, linear_step, read_schedule, simulate,
                                    simulate_siso_batch, spectral_radius, write_schedule)


def test_linear_step_by_hand():
    model = ThermalStateSpace(0.9 * np.eye(2), [[0.1], [0.05]], 0.1, [0])
    np.testing.assert_allclose(linear_step(model, [300, 300], [10]), [271.0, 270.5], rtol=1e-15)


def test_linear_step_zero():
    model = ThermalStateSpace(0.9 * np.eye(2), [[0.1], [0.05]], 0.1, [0])
    np.testing.assert_array_equal(linear_step(model, [0, 0], [0]), [0, 0])


def test_linear_step_fixes_linear_steady_state(rng):
    a = rng.uniform(0, 0.3, (3, 3))
    b = rng.uniform(0, 1, (3, 2))
    model = ThermalStateSpace(a, b, 0.1, [0, 2])
    p = np.array([4.0, 7.0])
    t_ss = np.linalg.solve(np.eye(3) - a, b @ p)
    np.testing.assert_allclose(linear_step(model, t_ss, p), t_ss, rtol=1e-13)
    np.testing.assert_allclose(linear_steady_state(model, p), t_ss, rtol=1e-13)


def test_dimension_mismatch_rejected():
    model = ThermalStateSpace(0.9 * np.eye(2), [[0.1], [0.05]], 0.1, [0])
    with pytest.raises(ValueError):
        linear_step(model, [1, 2, 3], [1])
    with pytest.raises(ValueError):
        linear_step(model, [1, 2], [1, 2])


def test_model_invariants():
    with pytest.raises(ValueError, match="spectral radius"):
        ThermalStateSpace([[1.0]], [[0.5]])
    with pytest.raises(ValueError):
        ThermalStateSpace([[0.5]], [[-0.5]])
    with pytest.raises(ValueError):
        ThermalStateSpace([[0.5]], [[0.5]], 0.1, [1])
    with pytest.raises(ValueError):
        ThermalStateSpace(0.5 * np.eye(2), np.ones((2, 3)))
    with pytest.raises(ValueError):
        ThermalStateSpace([[0.5]], [[0.5]], 0.0)


def test_spectral_radius_rotation():
    # complex eigenvalues 0.6 +/- 0.6i
    assert spectral_radius(np.array([[0.6, -0.6], [0.6, 0.6]])) == pytest.approx(0.6 * np.sqrt(2))


def test_coupled_step_reference(ref_model, ref_sources):
    nxt, power = coupled_step(ref_model, ref_sources, [800.0])
    assert power[0] == pytest.approx(40 + 29.43035529371538573, rel=1e-14)
    assert nxt[0] == pytest.approx(794.7151776468576929, rel=1e-14)


def test_coupled_step_without_power_is_linear():
    model = ThermalStateSpace([[0.8, 0.1], [0.05, 0.85]], np.eye(2) * 0.3)
    idle = [SourceParams(0.0, 1.0, 0.0, LeakageParams(0.0, 0.0, -800.0))] * 2
    nxt, power = coupled_step(model, idle, [320.0, 310.0])
    np.testing.assert_array_equal(power, [0.0, 0.0])
    np.testing.assert_allclose(nxt, model.a_matrix @ [320.0, 310.0])


def test_coupled_step_fixed_point_residual(ref_model, ref_sources):
    nxt, _ = coupled_step(ref_model, ref_sources, [REF_TEMP_STABLE])
    assert abs(nxt[0] - REF_TEMP_STABLE) < 5e-3
    # the 40-digit root is a fixed point up to rounding
    assert abs(nxt[0] - REF_TEMP_STABLE) < 1e-10


def test_coupled_step_rejects_nonpositive(ref_model, ref_sources):
    with pytest.raises(ValueError):
        coupled_step(ref_model, ref_sources, [0.0])


def test_source_hotspot_map_routes_leakage():
    leak = LeakageParams(0.0, 1e-4, -800.0)
    model = ThermalStateSpace(0.5 * np.eye(2), [[1.0], [0.0]], 0.1, [1])
    src = [SourceParams.from_pc(0.0, 1.0, leak)]
    _, power = coupled_step(model, src, [300.0, 600.0])
    assert power[0] == pytest.approx(1e-4 * 600.0**2 * np.exp(-800 / 600), rel=1e-14)


def test_simulate_reference_converges(ref_model, ref_sources):
    traj = simulate(ref_model, ref_sources, [300.0], 10_000)
    assert not traj.runaway
    assert traj.temps[-1, 0] == pytest.approx(REF_TEMP_STABLE, abs=0.01)
    assert np.all(np.diff(traj.temps[:, 0]) >= 0)
    np.testing.assert_allclose(traj.times[:3], [0.0, 0.1, 0.2])


def test_simulate_runaway_marker(ref_model, ref_leak):
    src = [SourceParams.from_pc(60.0, 1.0, ref_leak)]
    traj = simulate(ref_model, src, [300.0], 100_000)
    assert traj.runaway
    assert traj.temps[-1, 0] > 2000.0
    assert np.all(traj.temps[:-1, 0] <= 2000.0)


def test_simulate_one_step_equals_coupled_step(ref_model, ref_sources):
    traj = simulate(ref_model, ref_sources, [350.0], 1)
    nxt, power = coupled_step(ref_model, ref_sources, [350.0])
    assert len(traj) == 2
    np.testing.assert_array_equal(traj.temps[1], nxt)
    np.testing.assert_array_equal(traj.powers[0], power)


def test_simulate_rejects_zero_steps(ref_model, ref_sources):
    with pytest.raises(ValueError):
        simulate(ref_model, ref_sources, [300.0], 0)


def test_simulate_is_deterministic(ref_model, ref_sources):
    sched = [ScheduleEntry(50, 0, 20.0), ScheduleEntry(120, 0, 45.0)]
    t1 = simulate(ref_model, ref_sources, [300.0], 400, sched)
    t2 = simulate(ref_model, ref_sources, [300.0], 400, sched)
    assert np.array_equal(t1.temps, t2.temps) and np.array_equal(t1.powers, t2.powers)


def test_schedule_overrides_pc(ref_model, ref_sources):
    traj = simulate(ref_model, ref_sources, [300.0], 20, [ScheduleEntry(10, 0, 5.0)])
    leak = traj.powers[:, 0] - np.where(np.arange(21) < 10, 40.0, 5.0)
    expected = 1.25e-4 * traj.temps[:, 0] ** 2 * np.exp(-800.0 / traj.temps[:, 0])
    np.testing.assert_allclose(leak, expected, rtol=1e-9)


def test_leakage_free_simulation_reaches_linear_steady_state():
    model = ThermalStateSpace([[0.9, 0.03], [0.02, 0.92]], [[0.4, 0.1], [0.05, 0.3]])
    idle = LeakageParams(0.0, 0.0, -800.0)
    src = [SourceParams.from_pc(10.0, 1.0, idle), SourceParams.from_pc(6.0, 1.0, idle)]
    traj = simulate(model, src, [300.0, 300.0], 2000)
    np.testing.assert_allclose(traj.temps[-1], linear_steady_state(model, [10.0, 6.0]), atol=1e-6)


def test_linear_steady_state_scalar_and_diagonal():
    model = ThermalStateSpace([[0.95]], [[0.5]])
    assert linear_steady_state(model, [40.0])[0] == pytest.approx(400.0, rel=1e-13)
    assert linear_steady_state(model, [0.0])[0] == 0.0
    diag = ThermalStateSpace(np.diag([0.9, 0.8]), np.diag([0.2, 0.4]))
    np.testing.assert_allclose(linear_steady_state(diag, [3.0, 5.0]), [6.0, 10.0], rtol=1e-13)


def test_ambient_offset():
    model = ThermalStateSpace([[0.9]], [[0.2]], ambient=300.0)
    assert linear_steady_state(model, [0.0])[0] == pytest.approx(300.0)
    assert linear_step(model, [300.0], [0.0])[0] == pytest.approx(300.0)
    assert linear_steady_state(model, [5.0])[0] == pytest.approx(310.0)


@settings(max_examples=30)
@given(seed=st.integers(0, 2**31))
def test_monotone_heating_random_nonnegative(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    a = rng.uniform(0, 0.05, (n, n))
    np.fill_diagonal(a, rng.uniform(0.7, 0.9, n))
    b = rng.uniform(0, 0.05, (n, n))
    np.fill_diagonal(b, rng.uniform(0.1, 0.4, n))
    leak = LeakageParams(0.0, 1e-5, -900.0)
    src = [SourceParams.from_pc(rng.uniform(1, 10), 1.0, leak) for _ in range(n)]
    model = ThermalStateSpace(a, b)
    traj = simulate(model, src, np.full(n, 1.0), 3000)
    if not traj.runaway:
        assert np.all(np.diff(traj.temps, axis=0) >= -1e-9)


def test_batch_matches_scalar_loop(rng):
    for _ in range(5):
        a, b, pc, k2 = rng.uniform(0.85, 0.98), rng.uniform(0.2, 1.0), rng.uniform(5, 40), -800.0
        k1 = 1.25e-4
        fin, run, _ = simulate_siso_batch(a, b, pc, 1.0, k1, k2, 300.0, 20_000)
        ref, ref_run = scalar_iterate(a, b, pc, 1.0, k1, k2, 300.0, 20_000)
        assert bool(run) == ref_run
        if not ref_run:
            assert float(fin) == pytest.approx(ref, rel=1e-12)


def test_trajectory_csv_round_trip(tmp_path, ref_model, ref_sources):
    traj = simulate(ref_model, ref_sources, [300.0], 25)
    path = tmp_path / "traj.csv"
    traj.to_csv(path)
    header = path.read_text().splitlines()[0]
    assert header == "t_s,T1_K,P1_W"
    back = Trajectory.from_csv(path)
    np.testing.assert_array_equal(back.temps, traj.temps)
    np.testing.assert_array_equal(back.powers, traj.powers)
    np.testing.assert_array_equal(back.times, traj.times)


def test_trajectory_requires_increasing_times():
    with pytest.raises(ValueError):
        Trajectory([0.0, 0.0], [[1.0], [2.0]], [[1.0], [1.0]])


def test_schedule_csv_round_trip(tmp_path):
    entries = [ScheduleEntry(0, 0, 1.5), ScheduleEntry(10, 1, 3.25)]
    path = tmp_path / "sched.csv"
    write_schedule(path, entries)
    assert path.read_text().splitlines()[0] == "step,source,pc_W"
    assert read_schedule(path) == entries
