"""Execution model and mitigation tests against hand-solved oracles."""

import math

import numpy as np
import pytest

from qfleetsim.circuit import parse_qasm
from qfleetsim.executor import (
    DegenerateLambdas,
    DistributionError,
    ExecutionRecord,
    OutcomeDistribution,
    ZneConfig,
    amplified_fidelity,
    duration_us,
    execute,
    mitigate_readout,
    parity_expectation,
    run_job,
    zne_coefficients,
    zne_extrapolate,
)
from qfleetsim.fleet import CalibrationData
from qfleetsim.gateway import JobConstraints, JobSpec
from qfleetsim.scheduler import ScheduleDecision
from qfleetsim.transpiler import transpile

from conftest import line_edges, make_qpu

GHZ2 = (
    "OPENQASM 2.0; qreg q[2]; creg c[2]; h q[0]; cx q[0],q[1]; "
    "measure q[0] -> c[0]; measure q[1] -> c[1];"
)


def make_setup(qasm=GHZ2, shots=1000, ideal=None, num_qubits=2, mitigate=True, **cal):
    qpu = make_qpu("q0", num_qubits, line_edges(num_qubits), **cal)
    ir = parse_qasm(qasm)
    tr = transpile(ir, qpu)
    spec = JobSpec(
        job_id="job-x",
        tenant_id="t",
        qasm_source=qasm,
        shots=shots,
        constraints=JobConstraints(0.5, num_qubits, None, 5),
        declared_ideal=ideal,
        mitigate=mitigate,
    )
    decision = ScheduleDecision("job-x", "q0", "sjf", 0, tr.predicted_duration, tr.predicted_fidelity, tr.swap_count)
    return qpu, tr, spec, decision


def fixed_fidelity(tr, value):
    import dataclasses

    return dataclasses.replace(tr, predicted_fidelity=value)


# -- outcome distributions ---------------------------------------------------


def test_distribution_must_sum_to_one():
    with pytest.raises(DistributionError, match="sum"):
        OutcomeDistribution(1, {"0": 0.6, "1": 0.5}).validate()


def test_distribution_key_width_checked():
    with pytest.raises(DistributionError, match="bad outcome key"):
        OutcomeDistribution(2, {"0": 1.0}).validate()


def test_ghz_distribution():
    d = OutcomeDistribution.ghz(3)
    d.validate()
    assert d.probabilities == {"000": 0.5, "111": 0.5}


def test_parity_expectation_values():
    assert parity_expectation(OutcomeDistribution.ghz(2)) == pytest.approx(1.0)
    assert parity_expectation(OutcomeDistribution.point_mass_zeros(4)) == 1.0
    uniform = OutcomeDistribution(1, {"0": 0.5, "1": 0.5})
    assert parity_expectation(uniform) == pytest.approx(0.0)


# -- execution ---------------------------------------------------------------


def test_noiseless_point_mass_gives_all_zero_shots():
    qpu, tr, spec, decision = make_setup(eps0=0.0, eps1=0.0, f1q=1.0, f2q=1.0)
    record = execute(decision, tr, spec, qpu.calibration, 1.0, np.random.default_rng(1))
    assert record.raw_counts == {"00": spec.shots}
    assert record.applied_fidelity == 1.0


def test_zero_fidelity_single_qubit_is_uniform_within_3_sigma():
    qasm = "OPENQASM 2.0; qreg q[1]; creg c[1]; h q[0]; measure q[0] -> c[0];"
    qpu, tr, spec, decision = make_setup(qasm=qasm, shots=10**6, num_qubits=1, eps0=0.0, eps1=0.0)
    tr = fixed_fidelity(tr, 0.0)
    record = execute(decision, tr, spec, qpu.calibration, 1.0, np.random.default_rng(7))
    sigma = math.sqrt(0.25 * spec.shots)
    assert abs(record.raw_counts["0"] - spec.shots / 2) <= 3 * sigma
    assert abs(record.raw_counts["1"] - spec.shots / 2) <= 3 * sigma


def test_noise_amplification_is_linear():
    assert amplified_fidelity(0.8, 1.0) == pytest.approx(0.8)
    assert amplified_fidelity(0.8, 2.0) == pytest.approx(0.6)
    assert amplified_fidelity(0.5, 4.0) == 0.0  # clamped at zero


def test_counts_always_sum_to_shots():
    rng = np.random.default_rng(3)
    qpu, tr, spec, decision = make_setup(shots=777, eps0=0.05, eps1=0.03)
    for lam in (1.0, 2.0, 3.0):
        record = execute(decision, tr, spec, qpu.calibration, lam, rng)
        assert sum(record.raw_counts.values()) == 777


def test_identical_seed_identical_counts():
    qpu, tr, spec, decision = make_setup(shots=5000, eps0=0.02, eps1=0.02)
    a = execute(decision, tr, spec, qpu.calibration, 1.0, np.random.default_rng(42))
    b = execute(decision, tr, spec, qpu.calibration, 1.0, np.random.default_rng(42))
    assert a.raw_counts == b.raw_counts


def test_noise_factor_below_one_rejected():
    qpu, tr, spec, decision = make_setup()
    with pytest.raises(DegenerateLambdas):
        execute(decision, tr, spec, qpu.calibration, 0.5, np.random.default_rng(0))


def test_duration_is_ceiled_and_at_least_one():
    qpu, tr, spec, decision = make_setup()
    assert duration_us(tr) == math.ceil(tr.predicted_duration)
    assert duration_us(tr) >= 1


# -- readout mitigation --------------------------------------------------------


def record_from_probs(probs, shots=100_000, qubits=(0,)):
    counts = {k: int(round(p * shots)) for k, p in probs.items()}
    return ExecutionRecord(
        job_id="job-x",
        qpu_id="q0",
        shots=sum(counts.values()),
        raw_counts=counts,
        start_time=0,
        end_time=1,
        noise_factor=1.0,
        applied_fidelity=1.0,
        measured_qubits=tuple(qubits),
    )


def cal_with_eps(n, eps0, eps1):
    return CalibrationData.uniform(max(n, 2), line_edges(max(n, 2)), eps0=eps0, eps1=eps1)


def test_zero_eps_mitigation_is_identity():
    record = record_from_probs({"0": 0.82, "1": 0.18})
    result = mitigate_readout(record, cal_with_eps(1, 0.0, 0.0))
    probs = result.mitigated_distribution.probabilities
    assert probs["0"] == pytest.approx(0.82)
    assert probs["1"] == pytest.approx(0.18)


def test_hand_solved_single_qubit_inversion():
    # A = [[0.9, 0.1], [0.1, 0.9]], det 0.8; A^-1 (0.82, 0.18) = (0.9, 0.1)
    record = record_from_probs({"0": 0.82, "1": 0.18})
    result = mitigate_readout(record, cal_with_eps(1, 0.1, 0.1))
    probs = result.mitigated_distribution.probabilities
    assert probs["0"] == pytest.approx(0.9, abs=1e-12)
    assert probs["1"] == pytest.approx(0.1, abs=1e-12)


def test_clipping_and_renormalization():
    # raw inverse of (1, 0) is (1.125, -0.125): clip to (1.125, 0), renormalize to (1, 0)
    record = record_from_probs({"0": 1.0})
    result = mitigate_readout(record, cal_with_eps(1, 0.1, 0.1))
    probs = result.mitigated_distribution.probabilities
    assert probs["0"] == pytest.approx(1.0)
    assert probs.get("1", 0.0) == 0.0


def test_forward_then_inverse_recovers_distribution_exactly():
    # in expectation (counts proportional to the confused distribution) the
    # inversion is exact for any eps < 0.5
    rng = np.random.default_rng(17)
    for _ in range(25):
        n = int(rng.integers(1, 4))
        eps0, eps1 = float(rng.uniform(0, 0.4)), float(rng.uniform(0, 0.4))
        raw = rng.dirichlet(np.ones(2**n))
        vec = raw.copy()
        a = np.array([[1 - eps0, eps1], [eps0, 1 - eps1]])
        tensor = vec.reshape((2,) * n)
        for axis in range(n):
            tensor = np.moveaxis(np.tensordot(a, tensor, axes=([1], [axis])), 0, axis)
        confused = tensor.reshape(-1)
        shots = 10**6
        counts = {format(i, f"0{n}b"): int(round(p * shots)) for i, p in enumerate(confused)}
        record = ExecutionRecord(
            "job-x", "q0", sum(counts.values()), counts, 0, 1, 1.0, 1.0, tuple(range(n))
        )
        result = mitigate_readout(record, cal_with_eps(n, eps0, eps1))
        recovered = result.mitigated_distribution.to_vector()
        assert np.allclose(recovered, raw, atol=2e-5)  # rounding to integer counts


def test_mitigation_handles_unmeasured_bits():
    record = record_from_probs({"00": 0.9, "10": 0.1}, qubits=(0, -1))
    result = mitigate_readout(record, cal_with_eps(2, 0.1, 0.1))
    probs = result.mitigated_distribution.probabilities
    assert sum(probs.values()) == pytest.approx(1.0)


# -- zero-noise extrapolation --------------------------------------------------


def test_linear_coefficients():
    assert zne_coefficients((1.0, 3.0), 1) == pytest.approx((1.5, -0.5))


def test_quadratic_coefficients():
    assert zne_coefficients((1.0, 2.0, 3.0), 2) == pytest.approx((3.0, -3.0, 1.0))


def test_quadratic_coefficients_against_brute_force():
    lambdas = (1.0, 1.5, 2.0, 4.0)
    coeffs = zne_coefficients(lambdas, 3)
    # brute-force check of the defining moment conditions
    assert sum(coeffs) == pytest.approx(1.0)
    for k in (1, 2, 3):
        assert sum(c * lam**k for c, lam in zip(coeffs, lambdas)) == pytest.approx(0.0, abs=1e-9)


def test_degenerate_lambdas_rejected():
    with pytest.raises(DegenerateLambdas):
        zne_coefficients((1.0, 1.0), 1)


def test_order_must_match_count():
    with pytest.raises(DegenerateLambdas):
        zne_coefficients((1.0, 2.0, 3.0), 1)


def test_extrapolation_examples():
    assert zne_extrapolate([(1.0, 0.8), (3.0, 0.4)], (1.5, -0.5)) == pytest.approx(1.0)
    assert zne_extrapolate([(1.0, 0.5), (2.0, 0.25)], (2.0, -1.0)) == pytest.approx(0.75)


def test_constant_estimates_are_fixed_point():
    for v in (0.0, 0.37, -0.8):
        assert zne_extrapolate([(1.0, v), (2.0, v), (3.0, v)], (3.0, -3.0, 1.0)) == pytest.approx(v)


def test_zne_config_validation():
    ZneConfig.richardson((1.0, 3.0)).validate()
    with pytest.raises(DegenerateLambdas):
        ZneConfig((2.0, 3.0), (1.5, -0.5)).validate()
    with pytest.raises(DegenerateLambdas):
        ZneConfig((1.0, 3.0), (0.7, -0.5)).validate()


def test_zne_recovers_ideal_parity_within_shot_noise():
    # E(lambda) = F(lambda) * E_ideal exactly under the model, so two-point
    # linear extrapolation recovers E_ideal up to shot noise
    shots = 10**5
    qpu, tr, spec, decision = make_setup(
        shots=shots, ideal=OutcomeDistribution.ghz(2), eps0=0.0, eps1=0.0
    )
    tr = fixed_fidelity(tr, 0.8)
    zne = ZneConfig.richardson((1.0, 3.0))
    for seed in (11, 23, 31):
        estimates = []
        for k, lam in enumerate(zne.lambdas):
            rec = execute(decision, tr, spec, qpu.calibration, lam, np.random.default_rng(seed + k))
            estimates.append((lam, parity_expectation(rec.empirical_distribution())))
        value = zne_extrapolate(estimates, zne.coefficients)
        assert abs(value - 1.0) <= 4.0 * math.sqrt(1.0 / shots) * 2  # |c|-weighted noise


def test_run_job_attaches_zne_and_tags():
    qpu, tr, spec, decision = make_setup(shots=2000, ideal=OutcomeDistribution.ghz(2))
    record, mitigated, execs = run_job(
        decision,
        tr,
        spec,
        live_cal=qpu.calibration,
        collector_cal=qpu.calibration,
        zne=ZneConfig.richardson((1.0, 2.0)),
        rng_for=lambda k: np.random.default_rng(100 + k),
    )
    assert execs == 2
    assert mitigated is not None and mitigated.zne_estimate is not None
    assert "readout-inversion" in mitigated.method_tags
    assert "zne-richardson" in mitigated.method_tags
    assert record.noise_factor == 1.0


def test_run_job_respects_mitigation_opt_out():
    qpu, tr, spec, decision = make_setup(shots=100, mitigate=False)
    record, mitigated, execs = run_job(
        decision,
        tr,
        spec,
        live_cal=qpu.calibration,
        collector_cal=qpu.calibration,
        zne=ZneConfig.richardson((1.0, 2.0)),
        rng_for=lambda k: np.random.default_rng(k),
    )
    assert mitigated is None
    assert execs == 1
