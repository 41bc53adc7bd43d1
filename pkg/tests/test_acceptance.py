"""Acceptance checks, one test per criterion, each printing a PASS/FAIL line."""

import csv
import math
import time
from pathlib import Path

import numpy as np
import pytest

from mobloc.beaconing import AnnulusConstraint as C, extract_constraints, generate_trajectory, simulate_beaconing
from mobloc.cli import main
from mobloc.geometry import Point2D as P
from mobloc.harness import run_trial
from mobloc.relay import ContentionConfig, backoff_delay, contention_rounds
from mobloc.geometry import SensorNode
from mobloc.scenario import default_setup, write_scenario
from mobloc.solver import RelaxedProblem, constraints_bbox, oracle_grid, solve_relaxation

TRIALS = 100


@pytest.fixture
def report(capsys):
    def emit(number, name, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'}  {name}  [{detail}]")
        assert ok, f"criterion {number} ({name}) failed: {detail}"
    return emit


def _paired_3sigma(better, worse):
    """Mean of worse - better over paired trials and its standard error."""
    diff = np.array(worse, dtype=float) - np.array(better, dtype=float)
    return float(diff.mean()), float(diff.std(ddof=1) / math.sqrt(len(diff)))


_cache = {}


def trials(name):
    """Cached 100-trial batches shared by several criteria (seeds 0..99, paired)."""
    if name not in _cache:
        kind, estimator, relay = {
            "ideal": ("ideal", "convex", True),
            "ideal_baseline": ("ideal", "baseline", True),
            "obstacle": ("obstacle", "convex", True),
            "obstacle_norelay": ("obstacle", "convex", False),
            "obstacle_baseline": ("obstacle", "baseline", True),
        }[name]
        t0 = time.perf_counter()
        out = []
        for seed in range(TRIALS):
            if kind == "ideal":
                sc = default_setup(seed=seed, doi=0.2)
            else:
                sc = default_setup(seed=seed, doi=0.2, fading_f=0.1, obstacle=True)
            out.append(run_trial(sc, relay_on=relay, estimator=estimator))
        _cache[name] = (out, time.perf_counter() - t0)
    return _cache[name]


def _mean_error(results):
    return float(np.mean([r.error for r in results]))


# 1 ---------------------------------------------------------------------------

def _random_instance(rng):
    m = int(rng.integers(3, 11))
    truth = rng.uniform(0, 100, 2)
    feasible = rng.random() < 0.5
    cons = []
    for _ in range(m):
        a = rng.uniform(0, 100, 2)
        d = float(np.hypot(*(truth - a)))
        if feasible:
            lo = max(0.0, d - rng.uniform(0.5, 10))
            hi = d + rng.uniform(0.5, 10)
        else:
            # perturbed distances, so the annuli need not share a point
            d_fake = d * rng.uniform(0.6, 1.4)
            lo = 0.0 if rng.random() < 0.3 else max(0.0, d_fake - rng.uniform(0.5, 8))
            hi = lo + rng.uniform(1, 20)
        cons.append(C(P(*a), lo, hi))
    return cons


def test_criterion_1_oracle_equivalence(report):
    rng = np.random.default_rng(20240101)
    instances = [_random_instance(rng) for _ in range(100)]
    t0 = time.perf_counter()
    results = [solve_relaxation(RelaxedProblem(c)) for c in instances]
    solve_s = time.perf_counter() - t0
    worst_val, worst_pos, bad = 0.0, 0.0, []
    for k, (cons, res) in enumerate(zip(instances, results)):
        x, v = oracle_grid(cons, constraints_bbox(cons), 1.0, 4)
        tol = max(1e-6, 1e-4 * abs(v))
        worst_val = max(worst_val, abs(res.t - v) / max(abs(v), 1e-12))
        if abs(res.t - v) > tol:
            bad.append((k, "value", res.t, v))
        if res.status != "degenerate":
            dx = res.x_hat.dist(x)
            worst_pos = max(worst_pos, dx)
            if dx > 1e-3:
                bad.append((k, "position", dx))
    total_s = time.perf_counter() - t0
    infeasible = sum(not res.relaxation_tight for res in results)
    report(1, "oracle equivalence", not bad and total_s < 10,
           f"worst rel value diff {worst_val:.2e}, worst position diff {worst_pos:.2e} m, "
           f"{infeasible} loose relaxations, solver {solve_s:.2f}s, with oracle {total_s:.2f}s, "
           f"mismatches {bad[:3]}")


# 2 ---------------------------------------------------------------------------

def test_criterion_2_analytic_instances(report):
    s = math.sqrt
    three = [C(P(0, 0), 4.0, s(34)), C(P(10, 0), s(56), s(74)), C(P(0, 10), 6.0, s(54))]
    a = solve_relaxation(RelaxedProblem(three))
    pair = [C(P(0, 0), 0.0, 1.0), C(P(10, 0), 0.0, 1.0)]
    b = solve_relaxation(RelaxedProblem(pair))
    ex = a.x_hat.dist(P(3, 4))
    et = abs(a.t - 9 * s(6)) / (9 * s(6))
    ep = b.x_hat.dist(P(5, 0))
    report(2, "analytic instances", ex <= 1e-4 and et <= 1e-6 and ep <= 1e-3,
           f"three-anchor |x-(3,4)|={ex:.1e}, rel t err={et:.1e}; pair |x-(5,0)|={ep:.1e}")


# 3 ---------------------------------------------------------------------------

def test_criterion_3_feasibility_invariant(report):
    checked = violated = 0
    for seed in range(TRIALS):
        sc = default_setup(seed=seed)
        stops = generate_trajectory(sc.trajectory, (sc.field_width, sc.field_height), seed)
        logs = simulate_beaconing(sc, stops)
        for n in sc.deployed_nodes():
            for c in extract_constraints(logs[n.id], sc.radio):
                checked += 1
                violated += not c.satisfied_by(n.position)
    report(3, "truth satisfies every ideal constraint", checked > 0 and violated == 0,
           f"{checked} constraints over {TRIALS} trials, {violated} violated")


# 4 ---------------------------------------------------------------------------

def test_criterion_4_open_field_error(report):
    res, secs = trials("ideal")
    m = _mean_error(res)
    report(4, "open field DOI=0.2 error bracket", 0.05 <= m <= 0.20 and secs < 120,
           f"mean error {100 * m:.2f}% (bracket 5-20%, reference 11.68%), {secs:.1f}s for {TRIALS} trials")


# 5 ---------------------------------------------------------------------------

def test_criterion_5_obstacle_error(report):
    ideal, _ = trials("ideal")
    res, secs = trials("obstacle")
    m, m4 = _mean_error(res), _mean_error(ideal)
    report(5, "obstacle + fading error bracket and degradation", 0.06 <= m <= 0.25 and m > m4,
           f"mean error {100 * m:.2f}% (bracket 6-25%, reference 12.95%) vs open field {100 * m4:.2f}%, "
           f"{secs:.1f}s")


# 6 ---------------------------------------------------------------------------

def test_criterion_6_relay_benefit(report):
    on, _ = trials("obstacle")
    off, _ = trials("obstacle_norelay")
    frac_ok = all(a.localized_fraction >= b.localized_fraction for a, b in zip(on, off))
    diff, se = _paired_3sigma([r.error for r in on], [r.error for r in off])
    ok = frac_ok and diff > 3 * se
    report(6, "relaying lowers error behind the obstacle", ok,
           f"localized fraction never lower: {frac_ok}; relay-on {100 * _mean_error(on):.2f}% vs "
           f"relay-off {100 * _mean_error(off):.2f}%, paired gain {100 * diff:.2f}% +- {100 * se:.2f}% (need > 3 se)")


# 7 ---------------------------------------------------------------------------

def test_criterion_7_estimator_ordering(report):
    lines, ok = [], True
    for label, conv, base in (("open field", "ideal", "ideal_baseline"),
                              ("obstacle", "obstacle", "obstacle_baseline")):
        c, _ = trials(conv)
        b, _ = trials(base)
        diff, se = _paired_3sigma([r.error for r in c], [r.error for r in b])
        ok &= diff > 3 * se
        lines.append(f"{label}: convex {100 * _mean_error(c):.2f}% vs baseline {100 * _mean_error(b):.2f}%, "
                     f"paired gain {100 * diff:.2f}% +- {100 * se:.2f}%")
    report(7, "convex beats grid baseline", ok, "; ".join(lines))


# 8 ---------------------------------------------------------------------------

def test_criterion_8_backoff(report):
    table = [
        (0.5, 0.5, 0.2, 1.0, 10, 0.1, 0.015),
        (1.0, 0.0, 0.0, 1.0, 7, 0.1, 0.0),
        (0.0, 1.0, 0.3, 1.0, 1, 1.0, 1.0),
        (0.25, 0.75, 2.0, 4.0, 3, 0.2, (0.25 * 0.5 + 0.75 / 3) * 0.2),
        (0.5, 0.5, 1.0, 1.0, 1, 0.05, 0.05),
        (0.75, 0.25, 0.0, 2.0, 5, 1.0, 0.05),
    ]
    worst = 0.0
    for alpha, beta, used, initial, nb, max_delay, expected in table:
        cfg = ContentionConfig(alpha=alpha, beta=beta, max_delay=max_delay)
        got = backoff_delay(SensorNode(0, P(0, 0), True, initial, used, nb), cfg)
        worst = max(worst, abs(got - expected))
    exact = worst <= 4 * np.finfo(float).eps

    rng = np.random.default_rng(8)
    cfg = ContentionConfig(relay_range=15.0)
    invariant = True
    for _ in range(200):
        k = int(rng.integers(1, 9))
        cands = [SensorNode(i, P(*rng.uniform(0, 40, 2)), True, 1.0, float(rng.uniform(0, 1)),
                            int(rng.integers(1, 6))) for i in range(k)]
        ref = contention_rounds(0, cands, cfg)
        for _ in range(5):
            perm = [cands[j] for j in rng.permutation(k)]
            invariant &= contention_rounds(0, perm, cfg) == ref
    report(8, "backoff table and permutation invariance", exact and invariant,
           f"{len(table)} cases, worst abs diff {worst:.1e}; permutation invariant: {invariant}")


# 9 ---------------------------------------------------------------------------

def _csvs_without_runtime(folder: Path):
    out = {}
    for f in sorted(folder.glob("*.csv")):
        with open(f, newline="") as fh:
            rows = list(csv.reader(fh))
        if "mean_runtime_ms" in rows[0]:
            k = rows[0].index("mean_runtime_ms")
            rows = [r[:k] + r[k + 1:] for r in rows]
        out[f.name] = rows
    return out


def test_criterion_9_sweep_determinism(report, tmp_path, capsys):
    write_scenario(default_setup(seed=0, doi=0.2, fading_f=0.1, obstacle=True), tmp_path / "s.toml")
    (tmp_path / "exp.toml").write_text(
        'scenario = "s.toml"\ntrials_per_point = 3\nbase_seed = 11\n'
        '[sweep]\ndoi = [0.0, 0.2]\nfading_f = [0.1]\nrelay = [true, false]\n'
        'estimator = ["convex", "baseline"]\n')
    codes = [main(["sweep", str(tmp_path / "exp.toml"), "--out", str(tmp_path / d)]) for d in ("a", "b")]
    capsys.readouterr()
    a, b = _csvs_without_runtime(tmp_path / "a"), _csvs_without_runtime(tmp_path / "b")
    same = codes == [0, 0] and a.keys() == b.keys() and a == b
    report(9, "sweep CSVs reproducible", same and len(a) == 10,
           f"{len(a)} CSV files compared, identical apart from runtime: {same}")
