"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Run alone with ``pytest -v tests/test_acceptance.py`` or ``python tests/test_acceptance.py``.
Criterion 6 runs the full 810-combination sweep at 200 runs each and takes
several minutes on one core.
"""
import itertools
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import random_case  # noqa: E402
from flexduplex.channel import effective_powers  # noqa: E402
from flexduplex.harness import SweepConfig, aggregate, run_sweep  # noqa: E402
from flexduplex.interference import reuse_coupling  # noqa: E402
from flexduplex.model import Direction, Scenario, Service  # noqa: E402
from flexduplex.solvers import (  # noqa: E402
    SolverConfig,
    f_map,
    fixed_point_solve,
    g_norm,
    random_starts,
    solve_fp,
    solve_rmdi,
    solve_safp,
)


@pytest.fixture
def report(capsys):
    def _report(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number} ({title}): {detail}")
        assert ok, detail

    return _report


def _legacy_f(scn, cp):
    ones = np.ones((scn.n_services,) * 2)
    p = effective_powers(scn)
    return lambda w: f_map(cp, ones, scn.grid, scn.demands, p, w)


def test_criterion_1_sif_axioms(report):
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst_mono = worst_scale = np.inf
    for trial in range(1000):
        scn, cp = random_case(10_000 + trial)
        S = scn.n_services
        # alternate between reuse matrices the solvers produce and arbitrary ones
        C = reuse_coupling(scn, rng.uniform(0, 1, S)) if trial % 2 else rng.uniform(size=(S, S))
        p = effective_powers(scn)
        f = lambda w: f_map(cp, C, scn.grid, scn.demands, p, w)
        w = rng.uniform(1e-3, 1, S)
        w_big = w + rng.uniform(0, 1, S) * (rng.uniform(size=S) < 0.7)
        alpha = 1 + rng.exponential(0.5)
        worst_mono = min(worst_mono, float(np.min(f(w_big) - f(w))))
        worst_scale = min(worst_scale, float(np.min(alpha * f(w) - f(alpha * w))))
    elapsed = time.perf_counter() - t0
    ok = worst_mono >= -1e-12 and worst_scale >= -1e-12 and elapsed < 10
    report(1, "SIF axioms", ok,
           f"1000 cases, min monotonicity slack {worst_mono:.3g}, "
           f"min scalability slack {worst_scale:.3g}, {elapsed:.2f} s (limit 10 s)")


def test_criterion_2_normalization(report):
    cfg = SolverConfig()
    eps = cfg.epsilon
    worst_g = worst_resid = worst_pair = 0.0
    unconverged = 0
    for trial in range(100):
        scn, cp = random_case(20_000 + trial)
        f = _legacy_f(scn, cp)
        g = lambda x: g_norm(scn, x)
        iterates = []

        def tracked(w):
            iterates.append(np.array(w))
            return f(w)

        starts = random_starts(scn, scn.associations.B, 2, trial)
        ends = []
        for k, w0 in enumerate(starts):
            w, _, _, ok = fixed_point_solve(tracked, g, eps, cfg.inner_iter_cap, w0, cfg.relaxation)
            unconverged += not ok
            ends.append(w)
            worst_resid = max(worst_resid, float(np.max(np.abs(f(w) / g(f(w)) - w))))
        worst_g = max(worst_g, max(abs(g(w) - 1.0) for w in iterates))
        worst_pair = max(worst_pair, float(np.max(np.abs(ends[0] - ends[1]))))
        compiled = solve_fp(scn, cp, cfg).w_star
        worst_g = max(worst_g, abs(g(compiled) - 1.0))
        worst_resid = max(worst_resid, float(np.max(np.abs(f(compiled) / g(f(compiled)) - compiled))))
    ok = worst_g <= 1e-12 and worst_resid < eps and worst_pair < 10 * eps and unconverged == 0
    report(2, "normalization and FP uniqueness", ok,
           f"100 scenarios, max |g(w)-1| {worst_g:.2g}, max terminal residual {worst_resid:.3g} "
           f"(< {eps:g}), max two-start gap {worst_pair:.3g} (< {10 * eps:g}), unconverged {unconverged}")


def test_criterion_3_overlap_oracle(report):
    W = 20
    scn = Scenario(
        [[0, 0], [2000, 0]], [[500, 0], [1500, 0]],
        [Service(0, 0, Direction.UL, 1.0, 1.0), Service(1, 1, Direction.DL, 1.0, 1.0)],
    )
    t0 = time.perf_counter()
    mismatches = 0
    for a, b in itertools.product(range(W + 1), repeat=2):
        front = np.arange(W) < a
        back = np.arange(W) >= W - b
        count = int(np.sum(front & back))
        assert count == max(0, a + b - W)
        expected = count / b if b else 0.0
        got = reuse_coupling(scn, [a / W, b / W])[0, 1]
        mismatches += abs(got - expected) > 1e-12
    elapsed = time.perf_counter() - t0
    report(3, "overlap oracle", mismatches == 0 and elapsed < 1,
           f"{(W + 1) ** 2} (a, b) pairs on W={W}, {mismatches} mismatches, {elapsed:.3f} s (limit 1 s)")


def test_criterion_4_rmdi_dominance(report):
    cfg = SolverConfig()
    violations = improved = 0
    for trial in range(500):
        scn, cp = random_case(40_000 + trial)
        safp = solve_safp(scn, cp, cfg)
        rmdi = solve_rmdi(scn, cp, cfg)
        violations += not rmdi.rho_star >= safp.rho_star
        improved += rmdi.rho_star > safp.rho_star
    report(4, "RMDI dominance", violations == 0,
           f"500 scenarios, {violations} violations, RMDI strictly better in {improved}")


def test_criterion_5_inner_monotonicity(report):
    cfg = SolverConfig(trace=True)
    loops = rows = 0
    worst = 0.0
    for trial in range(50):
        scn, cp = random_case(50_000 + trial)
        res = solve_safp(scn, cp, cfg)
        by_loop = {}
        for r in res.trace:
            by_loop.setdefault((r.restart, r.outer), []).append(r.rho)
        loops += len(by_loop)
        rows += len(res.trace)
        for rhos in by_loop.values():
            drops = np.diff(rhos)
            if len(drops):
                worst = min(worst, float(drops.min()))
    report(5, "inner-loop monotonicity", worst >= -1e-9,
           f"50 scenarios, {loops} inner loops, {rows} trace rows, largest drop {max(0.0, -worst):.3g} (slack 1e-9)")


def test_criterion_6_orderings(report):
    cfg = SweepConfig(runs=200)
    t0 = time.perf_counter()
    records = run_sweep(cfg, jobs=os.cpu_count() or 1)
    elapsed = time.perf_counter() - t0
    agg = aggregate(records, cfg.bin_edges, cfg.low_high_split)["protocols"]
    edges = cfg.bin_edges
    mean = {p: agg[p]["bin_mean_rho"] for p in agg}
    failures = []

    for b in range(len(edges) - 1):
        if edges[b] < 0.48:
            continue
        m = {p: mean[p][b] for p in ("rmdi", "safp", "fp", "fix")}
        if None in m.values():
            failures.append(f"(a) bin {edges[b]:.2f} empty")
            continue
        chain = m["rmdi"] >= m["safp"] > m["fp"] > m["fix"]
        if not chain:
            failures.append(
                f"(a) bin [{edges[b]:.2f},{edges[b + 1]:.2f}): rmdi {m['rmdi']:.3f} safp {m['safp']:.3f} "
                f"fp {m['fp']:.3f} fix {m['fix']:.3f}")
    if not agg["dtdd"]["outage"] >= agg["fix"]["outage"]:
        failures.append(f"(b) dtdd outage {agg['dtdd']['outage']:.3f} < fix {agg['fix']['outage']:.3f}")
    if not agg["dtdd"]["outage"] > 0.8:
        failures.append(f"(c) dtdd outage {agg['dtdd']['outage']:.3f} <= 0.8")
    for b in range(len(edges) - 1):
        if edges[b] >= 0.64:
            s, f = mean["safp"][b], mean["fix"][b]
            if s is None or f is None or not s >= 1.5 * f:
                failures.append(f"(d) bin {edges[b]:.2f}: safp {s} vs 1.5 x fix {f}")
    fp_low = agg["fp"]["outage_low"]
    for p in ("safp", "rmdi"):
        if not agg[p]["outage_low"] < fp_low:
            failures.append(f"(e) {p} low-distance outage {agg[p]['outage_low']:.3f} >= fp {fp_low:.3f}")
    if elapsed > 15 * 60:
        failures.append(f"runtime {elapsed / 60:.1f} min > 15 min")

    summary = "; ".join(
        f"{p} outage {agg[p]['outage']:.3f} (low {agg[p]['outage_low']:.3f}) bins "
        + "/".join("-" if v is None else f"{v:.2f}" for v in mean[p])
        for p in agg
    )
    detail = (f"{len(records) // len(agg)} scenarios in {elapsed / 60:.1f} min; "
              + ("all sub-checks hold" if not failures else "failed: " + " | ".join(failures))
              + f". [{summary}]")
    report(6, "sweep orderings", not failures, detail)


def test_criterion_7_determinism(report, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"runs": 3, "inter_ratios": [2, 5, 9, 10], "intra_ratios": [1, 5, 9]}')
    outputs = []
    for name in ("a", "b"):
        out = tmp_path / name
        proc = subprocess.run(
            [sys.executable, "-m", "flexduplex.cli", "sweep", "--config", str(cfg), "--seed", "7",
             "--out", str(out)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr
        outputs.append((out / "records.csv").read_bytes())
    same = outputs[0] == outputs[1]
    n_records = outputs[0].count(b"\n") - 1
    report(7, "determinism", same,
           f"two `sweep` executions, {n_records} records, "
           f"records CSV {'byte-identical' if same else 'differs'}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
