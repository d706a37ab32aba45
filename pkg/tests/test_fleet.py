"""Fleet model tests: polling, drift law, recalibration state machine."""

import numpy as np
import pytest

from qfleetsim.fleet import (
    ALLOWED_TRANSITIONS,
    AlreadyRecalibrating,
    CalibrationData,
    DriftParams,
    FleetConfigError,
    InvalidStateTransition,
    QpuState,
    begin_recalibration,
    drift_step,
    finish_recalibration,
    fleet_nominal,
    nearest_rank_percentile,
    poll,
)

from conftest import line_edges, make_qpu


def test_fresh_qpu_snapshot_equals_baseline():
    qpu = make_qpu()
    snap = poll(qpu, 0)
    assert snap.state is QpuState.ONLINE
    assert snap.calibration.f1q == qpu.baseline.f1q
    assert snap.calibration.f2q == qpu.baseline.f2q


def test_polling_twice_at_same_time_is_identical():
    qpu = make_qpu()
    a, b = poll(qpu, 50), poll(qpu, 50)
    assert a.calibration.f1q == b.calibration.f1q
    assert a.state == b.state and a.time == b.time


def test_poll_time_must_not_regress():
    qpu = make_qpu()
    poll(qpu, 100)
    with pytest.raises(FleetConfigError, match="backwards"):
        poll(qpu, 50)


def test_null_drift_leaves_calibration_unchanged():
    qpu = make_qpu()
    before = qpu.calibration
    drift_step(qpu, 1000, np.random.default_rng(0), DriftParams(rate=0.0, sigma=0.0))
    assert qpu.calibration.f1q == before.f1q
    assert qpu.calibration.f2q == before.f2q
    assert qpu.calibration.readout_eps0 == before.readout_eps0


def test_deterministic_linear_decay():
    # rate * dt = (1/256 per ms) * 1.28 ms = 0.005 exactly representable
    qpu = make_qpu(f2q=0.99)
    drift_step(qpu, 1280, np.random.default_rng(0), DriftParams(rate=1.0 / 256.0, sigma=0.0))
    assert qpu.calibration.f2q[(0, 1)] == 0.99 - 0.005


def test_decay_clamps_at_floor():
    qpu = make_qpu(f1q=0.6, f2q=0.6)
    params = DriftParams(rate=1.0, sigma=0.0, floor=0.5)
    for _ in range(10):
        drift_step(qpu, 1000, np.random.default_rng(0), params)
    assert all(f == 0.5 for f in qpu.calibration.f1q)
    assert all(f == 0.5 for f in qpu.calibration.f2q.values())


def test_sigma_zero_trajectory_matches_closed_form():
    # dt = 1000 us -> 1 ms steps; rate = 2^-10 per ms keeps every value binary-exact,
    # so the trajectory must equal f(t) = max(floor, baseline - rate * t) with ==.
    rate = 1.0 / 1024.0
    qpu = make_qpu(f2q=1.0, f1q=1.0)
    params = DriftParams(rate=rate, sigma=0.0, floor=0.5)
    rng = np.random.default_rng(0)
    for k in range(1, 400):
        drift_step(qpu, 1000, rng, params)
        expected = max(0.5, 1.0 - rate * k)
        assert qpu.calibration.f2q[(0, 1)] == expected
        assert qpu.calibration.f1q[0] == expected


def test_jittered_drift_respects_bounds():
    qpu = make_qpu(f1q=0.999, f2q=0.99, eps0=0.01, eps1=0.02)
    params = DriftParams(rate=1e-4, sigma=5e-3, floor=0.5, eps_ceiling=0.45)
    rng = np.random.default_rng(99)
    for _ in range(500):
        drift_step(qpu, 10_000, rng, params)
        cal = qpu.calibration
        assert all(0.5 <= f <= 0.999 for f in cal.f1q)
        assert all(0.5 <= f <= 0.99 for f in cal.f2q.values())
        assert all(0.01 <= e <= 0.45 for e in cal.readout_eps0)
        assert all(0.02 <= e <= 0.45 for e in cal.readout_eps1)
        for t1, t2 in zip(cal.T1, cal.T2):
            assert t2 <= 2 * t1


def test_drift_is_deterministic_for_a_seed():
    results = []
    for _ in range(2):
        qpu = make_qpu()
        rng = np.random.default_rng(1234)
        for _ in range(20):
            drift_step(qpu, 5000, rng, DriftParams())
        results.append((qpu.calibration.f1q, tuple(sorted(qpu.calibration.f2q.items()))))
    assert results[0] == results[1]


def test_recalibration_restores_baseline():
    qpu = make_qpu(f2q=0.99)
    drift_step(qpu, 100_000, np.random.default_rng(0), DriftParams(rate=1e-3, sigma=0.0))
    assert qpu.calibration.f2q[(0, 1)] < 0.99
    begin_recalibration(qpu)
    assert qpu.state is QpuState.RECALIBRATING
    finish_recalibration(qpu)
    assert qpu.state is QpuState.ONLINE
    assert qpu.calibration.f2q[(0, 1)] == 0.99


def test_second_recalibration_rejected():
    qpu = make_qpu()
    begin_recalibration(qpu)
    with pytest.raises(AlreadyRecalibrating):
        begin_recalibration(qpu)


def test_drift_frozen_while_recalibrating():
    qpu = make_qpu()
    begin_recalibration(qpu)
    before = qpu.calibration
    drift_step(qpu, 10_000, np.random.default_rng(0), DriftParams(rate=1.0, sigma=0.0))
    assert qpu.calibration.f2q == before.f2q


def test_state_machine_rejects_disallowed_transitions():
    states = list(QpuState)
    for src in states:
        for dst in states:
            qpu = make_qpu()
            qpu.state = src
            if src is dst:
                qpu.set_state(dst)  # no-op
                assert qpu.state is dst
            elif (src, dst) in ALLOWED_TRANSITIONS:
                qpu.set_state(dst)
                assert qpu.state is dst
            else:
                with pytest.raises(InvalidStateTransition):
                    qpu.set_state(dst)


def test_offline_qpu_still_reports_state():
    qpu = make_qpu()
    qpu.set_state(QpuState.OFFLINE)
    assert poll(qpu, 10).state is QpuState.OFFLINE


def test_disconnected_topology_rejected():
    with pytest.raises(FleetConfigError, match="not connected"):
        make_qpu(num_qubits=4, edges={(0, 1), (2, 3)})


def test_t2_bound_validated():
    with pytest.raises(FleetConfigError, match="T2"):
        CalibrationData.uniform(2, line_edges(2), T1=10.0, T2=30.0)


def test_nearest_rank_percentile():
    assert nearest_rank_percentile([1.0, 2.0, 3.0, 4.0], 0.9) == 4.0
    assert nearest_rank_percentile([5.0], 0.9) == 5.0
    assert nearest_rank_percentile([1.0, 2.0], 0.5) == 1.0


def test_fleet_nominal_values():
    a = make_qpu("a", T2=80_000.0, f2q=0.98)
    b = make_qpu("b", T2=50_000.0, f2q=0.99)
    nominal = fleet_nominal([a, b], kappa=0.25)
    assert nominal.min_t2 == 50_000.0
    assert nominal.p90_mean_f2q == 0.99
    assert nominal.kappa == 0.25


def test_mean_f2q_is_edge_average():
    qpu = make_qpu(num_qubits=3, edges={(0, 1), (1, 2)})
    qpu.calibration.f2q[(0, 1)] = 0.98
    qpu.calibration.f2q[(1, 2)] = 0.96
    assert qpu.calibration.mean_f2q == pytest.approx(0.97)


def test_poll_during_recalibration_reports_state_and_frozen_values():
    qpu = make_qpu(f2q=0.99)
    drift_step(qpu, 100_000, np.random.default_rng(0), DriftParams(rate=1e-3, sigma=0.0))
    drifted = dict(qpu.calibration.f2q)
    begin_recalibration(qpu)
    snap = poll(qpu, 123)
    assert snap.state is QpuState.RECALIBRATING
    assert snap.calibration.f2q == drifted  # last drifted values, frozen
