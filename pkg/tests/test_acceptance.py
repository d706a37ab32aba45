"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Every expected value comes from an independent oracle (exhaustive permutation
search, BFS distances, hand-inverted confusion matrices, closed-form decay) or
from the statistical tolerance stated with the criterion.
"""

import dataclasses
import itertools
import time

import numpy as np

from qfleetsim.executor import (
    OutcomeDistribution,
    ZneConfig,
    execute,
    mitigate_readout,
    parity_expectation,
    zne_extrapolate,
)
from qfleetsim.fleet import DriftParams
from qfleetsim.gateway import JobConstraints, JobSpec
from qfleetsim.qos import EstimatorState
from qfleetsim.scheduler import ScheduleDecision
from qfleetsim.simkit import (
    EventKind,
    QpuSpec,
    Scenario,
    SimConfig,
    WorkloadParams,
    export,
    ghz_qasm,
    random_qasm,
    run,
    substream,
)
from qfleetsim.transpiler import Layout, route, transpile

from conftest import make_qpu, random_circuit, random_connected_edges

NO_DRIFT = DriftParams(rate=0.0, sigma=0.0)
TRIANGLE = ((0, 1), (1, 2), (0, 2))


def report(criterion: str, ok: bool, detail: str) -> None:
    print(f"{'PASS' if ok else 'FAIL'}  {criterion}: {detail}")
    assert ok, f"{criterion}: {detail}"


def min_total_wait(durations) -> int:
    best = None
    for perm in itertools.permutations(durations):
        t = total = 0
        for d in perm:
            total += t
            t += d
        best = total if best is None else min(best, total)
    return best


def test_criterion_1_sjf_matches_exhaustive_optimum():
    """200 random single-QPU workloads: simulated SJF mean wait equals the
    exhaustive-permutation minimum exactly."""
    t0 = time.perf_counter()
    gen = np.random.default_rng(1001)
    checked = 0
    for trial in range(200):
        n_jobs = int(gen.integers(1, 7))
        jobs = []
        for i in range(n_jobs):
            depth = int(gen.integers(1, 26))
            jobs.append(
                JobSpec(
                    job_id=f"job-{i}",
                    tenant_id="t0",
                    qasm_source=random_qasm(3, depth, gen),
                    shots=8,
                    constraints=JobConstraints(0.5, 3, None, 5),
                    declared_ideal=OutcomeDistribution.point_mass_zeros(3),
                    submit_time=0,
                )
            )
        scn = Scenario(
            seed=trial,
            qpus=(QpuSpec("solo", 3, TRIANGLE),),
            workload=None,
            policy="sjf",
            config=SimConfig(mitigation=False, drift=NO_DRIFT, health_threshold=10.0),
            explicit_jobs=tuple(jobs),
        )
        log = run(scn)
        assert log.summary.completed == n_jobs
        waits = [r["wait_us"] for r in log.jobs]
        durations = [r["exec_us"] for r in log.jobs]
        assert sum(waits) == min_total_wait(durations), f"trial {trial}"
        checked += 1
    elapsed = time.perf_counter() - t0
    report(
        "criterion 1 (SJF optimality)",
        checked == 200 and elapsed < 10.0,
        f"{checked}/200 workloads exact, {elapsed:.1f}s (< 10s)",
    )


def _ghz2_executor_setup(eps: float, fidelity: float):
    qpu = make_qpu("q0", 2, {(0, 1)}, eps0=eps, eps1=eps, f1q=1.0, f2q=1.0)
    src = ghz_qasm(2)
    from qfleetsim.circuit import parse_qasm

    tr = dataclasses.replace(transpile(parse_qasm(src), qpu), predicted_fidelity=fidelity)
    spec = JobSpec(
        job_id="job-zne",
        tenant_id="t",
        qasm_source=src,
        shots=100_000,
        constraints=JobConstraints(0.5, 2, None, 5),
        declared_ideal=OutcomeDistribution.ghz(2),
    )
    decision = ScheduleDecision("job-zne", "q0", "sjf", 0, tr.predicted_duration, fidelity, 0)
    return qpu, tr, spec, decision


def test_criterion_2_zne_recovers_ideal_parity():
    """GHZ-2, fidelity 0.8, shots 1e5, lambdas (1, 3): |estimate - 1| <= 0.02 in
    at least 95 of 100 seeded trials."""
    t0 = time.perf_counter()
    qpu, tr, spec, decision = _ghz2_executor_setup(eps=0.0, fidelity=0.8)
    zne = ZneConfig.richardson((1.0, 3.0))
    hits = 0
    for trial in range(100):
        estimates = []
        for k, lam in enumerate(zne.lambdas):
            rng = substream(trial, "acceptance-zne", k)
            rec = execute(decision, tr, spec, qpu.calibration, lam, rng)
            estimates.append((lam, parity_expectation(rec.empirical_distribution())))
        value = zne_extrapolate(estimates, zne.coefficients)
        hits += abs(value - 1.0) <= 0.02
    elapsed = time.perf_counter() - t0
    report(
        "criterion 2 (ZNE recovery)",
        hits >= 95 and elapsed < 30.0,
        f"{hits}/100 trials within 0.02, {elapsed:.1f}s (< 30s)",
    )


def tv_distance(a: OutcomeDistribution, b: OutcomeDistribution) -> float:
    keys = set(a.probabilities) | set(b.probabilities)
    return 0.5 * sum(abs(a.probabilities.get(k, 0.0) - b.probabilities.get(k, 0.0)) for k in keys)


def test_criterion_3_readout_mitigation_tv():
    """n=2, symmetric eps=0.1, GHZ ideal, shots 1e5: mitigated TV <= 0.02 while
    the unmitigated TV stays >= 0.08 for contrast."""
    t0 = time.perf_counter()
    qpu, tr, spec, decision = _ghz2_executor_setup(eps=0.1, fidelity=1.0)
    ideal = OutcomeDistribution.ghz(2)
    rec = execute(decision, tr, spec, qpu.calibration, 1.0, substream(7, "acceptance-readout"))
    raw_tv = tv_distance(rec.empirical_distribution(), ideal)
    mitigated = mitigate_readout(rec, qpu.calibration)
    mit_tv = tv_distance(mitigated.mitigated_distribution, ideal)
    elapsed = time.perf_counter() - t0
    report(
        "criterion 3 (readout mitigation)",
        mit_tv <= 0.02 and raw_tv >= 0.08 and elapsed < 10.0,
        f"mitigated TV {mit_tv:.4f} (<= 0.02), raw TV {raw_tv:.4f} (>= 0.08), {elapsed:.1f}s",
    )


def test_criterion_4_routing_oracle():
    """Endpoint cx on P_n inserts exactly n-2 SWAPs; every routed 2-qubit gate
    on 50 random connected topologies lies on a coupling edge."""
    from qfleetsim.circuit import CircuitIR, GateIR, GateKind
    from qfleetsim.fleet import normalize_edge

    path_ok = True
    for n in range(3, 11):
        qpu = make_qpu(f"p{n}", n)
        ir = CircuitIR(n, 0, (GateIR(GateKind.CX, (0, n - 1)),))
        result = route(ir, Layout(tuple(range(n))), qpu)
        path_ok = path_ok and result.swap_count == n - 2

    gen = np.random.default_rng(404)
    total = legal = 0
    for _ in range(50):
        n = int(gen.integers(2, 10))
        qpu = make_qpu("rand", n, random_connected_edges(gen, n))
        ir = random_circuit(gen, max_qubits=n, max_gates=30)
        result = transpile(ir, qpu)
        for g in result.physical.gates:
            if g.is_two_qubit:
                total += 1
                legal += normalize_edge(*g.qubits) in qpu.coupling_edges
    report(
        "criterion 4 (routing oracle)",
        path_ok and total > 0 and legal == total,
        f"path swaps exact for n=3..10; {legal}/{total} routed 2q gates on edges",
    )


def _safety_fleet():
    return (
        QpuSpec("qpu-a", 3, ((0, 1), (1, 2)), f2q=0.995),
        QpuSpec("qpu-b", 4, ((0, 1), (1, 2), (2, 3), (0, 3)), f2q=0.985),
        QpuSpec("qpu-c", 2, ((0, 1),), f2q=0.975),
        QpuSpec("qpu-d", 5, ((0, 1), (1, 2), (2, 3), (3, 4)), f2q=0.965),
    )


def test_criterion_5_constraint_safety_under_each_policy():
    """10,000 random jobs on a 4-QPU drifting fleet per policy: the independent
    validator finds zero feasibility violations and zero busy overlaps."""
    t0 = time.perf_counter()
    workload = WorkloadParams(
        count=10_000,
        arrival="poisson",
        rate_per_s=10_000.0,
        family="ghz",
        num_qubits=2,
        shots=256,
        min_two_qubit_fidelity=(0.5, 0.96),
        max_queue_wait=2_000_000,
    )
    config = SimConfig(quotas={"tenant-0": 10_000})
    results = []
    for policy in ("sjf", "rr", "bff", "prio"):
        scn = Scenario(seed=55, qpus=_safety_fleet(), workload=workload, policy=policy, config=config)
        log = run(scn)
        violations = log.validate()
        assert violations == [], f"{policy}: {violations[:5]}"
        terminal = log.summary.completed + log.summary.cancelled
        results.append(f"{policy}:{terminal}/10000 terminal")
    elapsed = time.perf_counter() - t0
    report(
        "criterion 5 (constraint safety)",
        True,
        f"0 violations under all policies ({'; '.join(results)}), {elapsed:.1f}s",
    )


def _bff_workload():
    gen = substream(66, "acceptance-bff")
    jobs = []
    t = 0
    for i in range(500):
        t += int(gen.exponential(20_000.0))
        high = i % 10 == 9
        jobs.append(
            JobSpec(
                job_id=f"job-{i:04d}",
                tenant_id="t0",
                qasm_source=ghz_qasm(2),
                shots=256,
                constraints=JobConstraints(0.995 if high else 0.97, 2, None, 5),
                declared_ideal=OutcomeDistribution.ghz(2),
                submit_time=t,
            )
        )
    return tuple(jobs)


def test_criterion_6_best_fit_saves_rare_qpus():
    """Two-QPU fleet (0.999 and 0.985): bff routes >= 95% of low-requirement
    jobs to the 0.985 QPU and never makes the high-requirement jobs wait longer
    than SJF placement does."""
    t0 = time.perf_counter()
    qpus = (
        QpuSpec("qpu-a", 3, ((0, 1), (1, 2)), f2q=0.999, t_2q=50.0, t_ro=400.0),
        QpuSpec("qpu-b", 3, ((0, 1), (1, 2)), f2q=0.985, t_2q=50.0, t_ro=400.0),
    )
    jobs = _bff_workload()
    config = SimConfig(mitigation=False, drift=NO_DRIFT, quotas={"t0": 1000})
    logs = {}
    for policy in ("bff", "sjf"):
        scn = Scenario(seed=66, qpus=qpus, workload=None, policy=policy, config=config, explicit_jobs=jobs)
        logs[policy] = run(scn)
        assert logs[policy].validate() == []

    high_ids = {j.job_id for j in jobs if j.constraints.min_two_qubit_fidelity > 0.99}
    bff_rows = {r["job_id"]: r for r in logs["bff"].jobs}
    low_on_modest = sum(
        1 for jid, r in bff_rows.items() if jid not in high_ids and r["qpu_id"] == "qpu-b"
    )
    low_total = len(jobs) - len(high_ids)
    frac = low_on_modest / low_total

    def high_mean_wait(log):
        waits = [r["wait_us"] for r in log.jobs if r["job_id"] in high_ids]
        return sum(waits) / len(waits)

    bff_wait = high_mean_wait(logs["bff"])
    sjf_wait = high_mean_wait(logs["sjf"])
    elapsed = time.perf_counter() - t0
    report(
        "criterion 6 (best-fit conservation)",
        frac >= 0.95 and bff_wait <= sjf_wait,
        f"{frac:.1%} of low-req jobs on the 0.985 QPU (>= 95%); "
        f"high-req mean wait bff {bff_wait:.0f}us <= sjf {sjf_wait:.0f}us; {elapsed:.1f}s",
    )


def test_criterion_7_determinism_and_replay(tmp_path):
    """Same seed: byte-identical events.jsonl. Different seed: different raw
    counts, schema still valid."""
    workload = WorkloadParams(
        count=100,
        arrival="poisson",
        rate_per_s=2000.0,
        family="ghz",
        num_qubits=2,
        shots=200,
        min_two_qubit_fidelity=(0.5, 0.9),
    )
    qpus = (QpuSpec("qpu-a", 3, ((0, 1), (1, 2))), QpuSpec("qpu-b", 2, ((0, 1),)))
    scn = Scenario(seed=31, qpus=qpus, workload=workload, policy="prio")
    paths_a = export(run(scn), tmp_path / "a")
    paths_b = export(run(scn), tmp_path / "b")
    identical = paths_a["events"].read_bytes() == paths_b["events"].read_bytes()

    other = run(dataclasses.replace(scn, seed=32))
    base = run(scn)
    counts_differ = any(
        base.records[j].raw_counts != other.records[j].raw_counts
        for j in base.records
        if j in other.records
    )
    schema_valid = other.validate() == [] and base.validate() == []
    report(
        "criterion 7 (determinism/replay)",
        identical and counts_differ and schema_valid,
        f"byte-identical replay: {identical}; seed change alters counts: {counts_differ}; "
        f"validator clean: {schema_valid}",
    )


def test_criterion_8_estimator_convergence():
    """Constant-duration feed, beta = 0.2: after 20 completions the estimator's
    error is (0.8)^19 of the post-first-completion error within 1e-9 relative."""
    beta, d, d0 = 0.2, 100.0, 260.0
    key = ((4, 1), "qpu-a")
    state = EstimatorState(beta=beta)
    ema = state.update(key, d0)  # completion 1 seeds the estimate
    initial_error = abs(ema - d)
    for _ in range(19):  # completions 2..20 observe the constant duration
        ema = state.update(key, d)
    final_error = abs(ema - d)
    bound = (1 - beta) ** 19 * initial_error
    ok = abs(final_error - bound) <= 1e-9 * bound and final_error <= bound * (1 + 1e-9)

    # end-to-end: a constant-duration workload pins later estimates to the
    # observed busy time exactly (the EMA fixed point)
    jobs = tuple(
        JobSpec(
            job_id=f"job-{i:02d}",
            tenant_id="t0",
            qasm_source=ghz_qasm(2),
            shots=64,
            constraints=JobConstraints(0.9, 2, None, 5),
            declared_ideal=OutcomeDistribution.ghz(2),
            submit_time=i * 10_000,
        )
        for i in range(21)
    )
    scn = Scenario(
        seed=8,
        qpus=(QpuSpec("qpu-a", 2, ((0, 1),)),),
        workload=None,
        policy="sjf",
        config=SimConfig(drift=NO_DRIFT),
        explicit_jobs=jobs,
    )
    log = run(scn)
    busy = {r["job_id"]: r["exec_us"] for r in log.jobs}
    arrivals = {
        e.payload["job_id"]: e.payload["estimated_duration_us"]
        for e in log.events
        if e.kind is EventKind.JOB_ARRIVAL
    }
    sim_ok = all(
        arrivals[f"job-{i:02d}"] == busy["job-00"] for i in range(1, 21)
    )  # every post-feedback estimate equals the constant observed duration
    report(
        "criterion 8 (estimator convergence)",
        ok and sim_ok,
        f"error after 20 completions = {final_error:.3e} vs (0.8)^19 bound {bound:.3e}; "
        f"sim estimates pinned to observed duration: {sim_ok}",
    )


def test_criterion_9_desk_scale_performance(tmp_path):
    """A 10,000-job, 8-QPU scenario simulates and exports in under 60 s."""
    qpus = tuple(
        QpuSpec(
            f"qpu-{chr(97 + i)}",
            3 + i % 3,
            tuple((j, j + 1) for j in range(2 + i % 3)),
            f2q=0.975 + 0.003 * i,
        )
        for i in range(8)
    )
    workload = WorkloadParams(
        count=10_000,
        arrival="poisson",
        rate_per_s=10_000.0,
        family="ghz",
        num_qubits=2,
        shots=64,
        min_two_qubit_fidelity=(0.5, 0.95),
        max_queue_wait=5_000_000,
    )
    scn = Scenario(
        seed=2024,
        qpus=qpus,
        workload=workload,
        policy="sjf",
        config=SimConfig(quotas={"tenant-0": 10_000}),
    )
    t0 = time.perf_counter()
    log = run(scn)
    export(log, tmp_path / "out")
    elapsed = time.perf_counter() - t0
    report(
        "criterion 9 (desk-scale performance)",
        elapsed < 60.0 and log.summary.completed + log.summary.cancelled == 10_000,
        f"10k jobs on 8 QPUs simulated + exported in {elapsed:.1f}s (< 60s); "
        f"completed {log.summary.completed}, cancelled {log.summary.cancelled}",
    )
