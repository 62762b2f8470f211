"""Acceptance criteria, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL`` line (collected into
pytest's terminal summary as well).  Run directly with
``python tests/test_acceptance.py`` to get just those lines.
"""

import itertools
import shlex
import statistics
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent))

from conftest import ACCEPTANCE_LINES, DATA, FAKE_BENCH, PYTHON, quadratic_objective, strip_wall  # noqa: E402
from spsatune import (  # noqa: E402
    EngineOptions,
    FailurePolicy,
    ObjectiveSpec,
    ParameterSpace,
    ParameterSpec,
    Perturbation,
    StepSchedule,
    estimate_gradient,
    finite_difference_oracle,
    get_synthetic,
    load_checkpoint,
    make_objective,
    map_to_system,
    mrsim,
    run,
    save_checkpoint,
)
from spsatune.config import load_config  # noqa: E402
from spsatune.objectives import FAILED, TIMEOUT  # noqa: E402
from spsatune.synthetics import builtin_synthetics  # noqa: E402
from spsatune.trace import TraceWriter, read_trace  # noqa: E402


def report(n, ok, detail, started):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail}; {time.monotonic() - started:.1f}s)"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def sign_pattern_mean(f, theta, c):
    theta = np.asarray(theta, dtype=float)
    f0 = f(theta)
    total = np.zeros_like(theta)
    patterns = list(itertools.product((-1.0, 1.0), repeat=len(theta)))
    for signs in patterns:
        step = np.asarray(signs) * c
        total += estimate_gradient(f0, f(theta + step), Perturbation(step, np.abs(step))).values
    return total / len(patterns)


def test_criterion_1_unbiased_on_cross_quadratic():
    started = time.monotonic()
    syn = get_synthetic("cross_quadratic")
    gen = np.random.default_rng(1)
    worst = 0.0
    for n in (2, 5, 10):
        theta = gen.uniform(0.1, 0.9, size=n)
        c = gen.uniform(0.01, 0.1, size=n)
        worst = max(worst, np.max(np.abs(sign_pattern_mean(syn, theta, c) - syn.gradient(theta))))
    report(1, worst <= 1e-9, f"max abs error {worst:.2e} over n=2,5,10", started)


def test_criterion_2_bias_order_on_cubic():
    started = time.monotonic()
    syn = get_synthetic("cubic")
    theta = np.linspace(0.15, 0.7, 8)
    c = np.full(8, 0.08)
    bias = [np.linalg.norm(sign_pattern_mean(syn, theta, k) - syn.gradient(theta)) for k in (c, c / 2)]
    ratio = bias[0] / bias[1]
    report(2, ratio >= 2 / 2.5, f"bias {bias[0]:.3e} -> {bias[1]:.3e}, reduction x{ratio:.2f}", started)


def test_criterion_3_budget():
    started = time.monotonic()
    gen = np.random.default_rng(3)
    kinds = ["real", "integer", "boolean", "categorical"]
    bad = []
    for trial in range(20):
        specs = []
        for i in range(int(gen.integers(1, 12))):
            kind = kinds[int(gen.integers(0, 4))]
            if kind == "real":
                specs.append(ParameterSpec.real(f"p{i}", -5.0, 5.0, float(gen.uniform(-5, 5))))
            elif kind == "integer":
                hi = int(gen.integers(1, 10**5))
                specs.append(ParameterSpec.integer(f"p{i}", 0, hi, int(gen.integers(0, hi + 1))))
            elif kind == "boolean":
                specs.append(ParameterSpec.boolean(f"p{i}", bool(gen.integers(0, 2))))
            else:
                specs.append(ParameterSpec.categorical(f"p{i}", ["a", "b", "c", "d"], int(gen.integers(0, 4))))
        space = ParameterSpace(specs)
        k, n_iter = int(gen.integers(1, 5)), int(gen.integers(0, 40))
        obj = quadratic_objective(space, noise=float(gen.uniform(0, 0.05)))
        opts = EngineOptions(seed=trial, replicates=k, max_iterations=n_iter, grad_tol=0.0,
                             strict_magnitudes=bool(gen.integers(0, 2)), parallel=bool(gen.integers(0, 2)))
        res = run(space, obj, opts)
        if not (obj.calls == res.state.eval_count == 2 * k * n_iter == 2 * k * len(res.trace)):
            bad.append((trial, k, n_iter, obj.calls))
    report(3, not bad, f"20 configurations, mismatches {bad}", started)


def test_criterion_4_convergence_on_quadratic():
    started = time.monotonic()
    space = ParameterSpace([ParameterSpec.integer(f"k{i}", 0, 100, 90) for i in range(11)])
    syn = get_synthetic("quadratic", center=0.3)
    passed, ratios = 0, []
    for seed in range(20):
        opts = EngineOptions(seed=seed, schedule=StepSchedule("constant", 0.01), max_iterations=500,
                             strict_magnitudes=True)
        res = run(space, quadratic_objective(space), opts)
        initial = res.trace[0].f_base
        final = syn(np.array([s.normalize(v) for s, v in zip(space, res.final_config.values)]))
        ratios.append(final / initial)
        passed += final <= 0.01 * initial
    report(4, passed >= 18, f"{passed}/20 seeds reach <= 1% of initial, worst ratio {max(ratios):.2e}", started)


GRID = np.linspace(0.0, 1.0, 5)


def sensitivity(profile, space, theta):
    spread = []
    for i in range(space.n):
        costs = []
        for g in GRID:
            t = theta.copy()
            t[i] = g
            costs.append(mrsim.simulate(profile, map_to_system(t, space)).total)
        spread.append(max(costs) - min(costs))
    return np.array(spread)


def grid_optimum(profile, space, theta, axes):
    best = np.inf
    for combo in itertools.product(GRID, repeat=len(axes)):
        t = theta.copy()
        t[list(axes)] = combo
        best = min(best, mrsim.simulate(profile, map_to_system(t, space)).total)
    return best


def test_criterion_5_simulator_tuning():
    started = time.monotonic()
    space, profile = mrsim.default_space(), mrsim.reference_profile()
    default_cost = mrsim.simulate(profile, space.default_config()).total
    objective = make_objective(ObjectiveSpec("mrsim"), space)
    passed, improved, ratios = 0, 0, []
    for seed in range(10):
        opts = EngineOptions(seed=seed, replicates=2, max_iterations=60, grad_tol=0.0,
                             schedule=StepSchedule("constant", 0.01), scale="current")
        res = run(space, objective, opts)
        theta = res.state.best_theta
        axes = np.argsort(-sensitivity(profile, space, theta))[:6]
        oracle = grid_optimum(profile, space, theta, axes)
        cost = mrsim.simulate(profile, res.best_config).total
        ratios.append(cost / oracle)
        passed += cost <= 1.10 * oracle
        improved += cost <= 0.70 * default_cost
    ok = passed >= 8 and improved == 10
    report(5, ok, f"{passed}/10 within 10% of grid optimum (ratios {min(ratios):.3f}-{max(ratios):.3f}), "
                  f"{improved}/10 at least 30% below defaults ({default_cost:.1f}s)", started)


def test_criterion_6_resume_equivalence(tmp_path):
    started = time.monotonic()
    gen = np.random.default_rng(6)
    mismatched = []
    for case in range(5):
        n = int(gen.integers(2, 9))
        space = ParameterSpace([ParameterSpec.integer(f"k{i}", 0, int(gen.integers(5, 5000)), 0)
                                if i % 2 else ParameterSpec.real(f"r{i}", 0.0, 1.0, float(gen.uniform()))
                                for i in range(n)])
        total = int(gen.integers(10, 60))
        opts = EngineOptions(seed=int(gen.integers(0, 2**31)), replicates=int(gen.integers(1, 4)),
                             max_iterations=total, grad_tol=0.0)
        noise = float(gen.uniform(0, 0.05))
        whole, split, ck = tmp_path / f"w{case}.jsonl", tmp_path / f"s{case}.jsonl", tmp_path / f"c{case}.json"
        with TraceWriter(whole, truncate=True) as sink:
            run(space, quadratic_objective(space, noise=noise), opts, sink=sink)
        half = EngineOptions.from_dict({**opts.to_dict(), "max_iterations": total // 2})
        with TraceWriter(split, truncate=True) as sink:
            run(space, quadratic_objective(space, noise=noise), half, sink=sink,
                checkpoint=lambda st: save_checkpoint(st, ck, space, opts))
        with TraceWriter(split) as sink:
            run(space, quadratic_objective(space, noise=noise), opts, sink=sink, state=load_checkpoint(ck))
        if strip_wall(read_trace(whole)) != strip_wall(read_trace(split)):
            mismatched.append(case)
    report(6, not mismatched, f"5 split/unsplit pairs, mismatches {mismatched}", started)


def test_criterion_7_finite_difference_cross_check():
    started = time.monotonic()
    gen = np.random.default_rng(7)
    worst = {}
    for name, factory in builtin_synthetics().items():
        syn = factory()
        err = 0.0
        for _ in range(100):
            theta = gen.uniform(0.01, 0.98, size=6)
            exact = syn.gradient(theta)
            fd = finite_difference_oracle(syn, theta, 1e-6)
            err = max(err, np.linalg.norm(fd - exact) / max(np.linalg.norm(exact), 1e-12))
        worst[name] = err
    ok = all(e <= 1e-4 for e in worst.values())
    report(7, ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items()), started)


def test_criterion_8_interaction_witness():
    started = time.monotonic()
    cfg = load_config(DATA / "interaction_witness.toml")
    profile = mrsim.JobProfile.from_dict(cfg.objective.profile)
    start = map_to_system(cfg.initial_point, cfg.space).as_dict()
    raised = {**start, "io.sort.mb": start["io.sort.mb"] + 10}
    before, after = mrsim.simulate(profile, start).total, mrsim.simulate(profile, raised).total
    report(8, after > before, f"io.sort.mb {start['io.sort.mb']} -> {raised['io.sort.mb']}: "
                              f"total {before:.4f}s -> {after:.4f}s", started)


def test_criterion_9_process_adapter():
    started = time.monotonic()
    bench = f"{shlex.quote(PYTHON)} {shlex.quote(str(FAKE_BENCH))}"
    space = ParameterSpace([ParameterSpec.integer("x", 0, 100, 90), ParameterSpec.real("y", 0.0, 1.0, 0.9)])
    objective = make_objective(ObjectiveSpec("process", command_template=bench + " --x {x} --y {y}"), space)

    def runtime(config):
        return statistics.median(objective.evaluate(config).value for _ in range(3))

    optimum = runtime(space.config([30, 0.25]))
    opts = EngineOptions(seed=0, max_iterations=40, grad_tol=0.0, schedule=StepSchedule("constant", 0.05),
                         scale="current", c_lo=0.1, c_hi=0.1)
    res = run(space, objective, opts)
    tuned = runtime(res.final_config)
    tuned_ok = tuned <= 2 * optimum and res.state.iteration <= 40

    slow = make_objective(ObjectiveSpec("process", command_template=bench + " --sleep 2", timeout_seconds=1.0),
                          space)
    t0 = time.monotonic()
    timeout_ok = slow.evaluate(space.default_config()).status == TIMEOUT and time.monotonic() - t0 <= 2.0

    failing = make_objective(ObjectiveSpec("process", command_template=bench + " --sleep 0 --exit 2"), space)
    exit_ok = failing.evaluate(space.default_config()).status == FAILED
    flaky = make_objective(ObjectiveSpec("process", command_template=bench + " --x {x} --fail-above 90 --sleep 0"),
                           space)
    policy_res = run(space, flaky, EngineOptions(seed=0, max_iterations=6, grad_tol=0.0, c_lo=0.1, c_hi=0.1,
                                                 schedule=StepSchedule("constant", 1e-9),
                                                 failure_policy=FailurePolicy(retries=1, penalty=99.0)))
    penalty_ok = 99.0 in {v for r in policy_res.trace for v in r.f_perturbed}

    ok = tuned_ok and timeout_ok and exit_ok and penalty_ok
    report(9, ok, f"tuned {res.final_config.values} runs {tuned:.3f}s vs optimum {optimum:.3f}s "
                  f"(x{tuned / optimum:.2f}); timeout {timeout_ok}, nonzero exit {exit_ok}, "
                  f"penalty {penalty_ok}", started)


if __name__ == "__main__":
    import tempfile

    failures = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                if "tmp_path" in fn.__code__.co_varnames[: fn.__code__.co_argcount]:
                    with tempfile.TemporaryDirectory() as d:
                        fn(Path(d))
                else:
                    fn()
            except AssertionError:
                failures += 1
    sys.exit(1 if failures else 0)
