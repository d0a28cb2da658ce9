"""Acceptance criteria 1-10, each at its stated tolerance and runtime budget.

Every test prints one ``criterion N: PASS|FAIL`` line (also repeated in the
terminal summary) before asserting.
"""
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from qmemcap.capacity import OptimizerConfig, product_capacity
from qmemcap.channel import (
    MemoryChannel,
    apply_memory,
    apply_memory_bruteforce,
    depolarizing_channel,
    identity_channel,
    random_channel,
)
from qmemcap.cli import main
from qmemcap.coding import TypeClassification, reduce_messages_by_type
from qmemcap.config import LemmaSettings
from qmemcap.lemma_suite import run_weak_law, run_fannes, run_gentle, run_entropy_typicality, run_shadow
from qmemcap.markov import MarkovChain, random_ergodic_chain
from qmemcap.operators import random_density_matrix, trace_distance

ROOT = Path(__file__).parents[1]
CONFIGS = ROOT / "configs"
FIXTURES = Path(__file__).parent / "fixtures"
# master seed of configs/lemmas_default.yaml
LEMMA_SEED = 11

pytestmark = pytest.mark.slow


def h2(x):
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def product_channel_oracle(kraus, rho, n):
    """Apply the same Kraus map to each of n slots by explicit reshapes."""
    d = kraus[0].shape[1]
    out = rho
    for k in range(n):
        t = out.reshape((d,) * (2 * n))
        acc = 0
        for a in kraus:
            s = np.tensordot(a, t, axes=([1], [k]))
            s = np.moveaxis(s, 0, k)
            s = np.tensordot(s, a.conj(), axes=([n + k], [1]))
            acc = acc + np.moveaxis(s, -1, n + k)
        out = acc.reshape(d**n, d**n)
    return out


def records_ok(records):
    return all(r.hypothesis_ok and r.passed for r in records)


def min_margin(records):
    return min(r.margin for r in records)


def test_criterion_1_single_branch_reduction(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(1, 6))
        branch = random_channel(2, 2, int(rng.integers(1, 5)), rng)
        rho = random_density_matrix(2**n, rng)
        got = apply_memory(MemoryChannel.memoryless(branch), n, rho)
        worst = max(worst, trace_distance(got, product_channel_oracle(branch.kraus_ops, rho, n)))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-12 and elapsed < 10
    report(1, ok, f"max trace distance {worst:.2e} (< 1e-12), {elapsed:.1f}s (< 10s)")
    assert ok


def test_criterion_2_dp_matches_bruteforce(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)
    worst = 0.0
    for _ in range(100):
        states = int(rng.integers(1, 4))
        n = int(rng.integers(1, 5))
        chain = MarkovChain.trivial() if states == 1 else random_ergodic_chain(states, rng)
        channel = MemoryChannel(chain, [random_channel(2, 2, int(rng.integers(1, 4)), rng) for _ in range(states)])
        rho = random_density_matrix(2**n, rng)
        worst = max(worst, trace_distance(apply_memory(channel, n, rho), apply_memory_bruteforce(channel, n, rho)))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-9 and elapsed < 60
    report(2, ok, f"max trace distance {worst:.2e} (< 1e-9), {elapsed:.1f}s (< 60s)")
    assert ok


def depolarizing_grid(p, step=0.01):
    shrink = 1 - p
    s_pure = h2((1 + shrink) / 2)
    best = 0.0
    for theta in np.arange(0, math.pi + 1e-12, step * math.pi):
        r2 = shrink * np.array([math.sin(theta), math.cos(theta)])
        for w in np.arange(0, 1 + 1e-12, step):
            avg = np.linalg.norm(w * np.array([0.0, shrink]) + (1 - w) * r2)
            best = max(best, h2((1 + avg) / 2) - s_pure)
    return best


def test_criterion_3_capacity_sanity(report):
    t0 = time.perf_counter()
    opt = OptimizerConfig(restarts=4, seed=3)
    ident = product_capacity(MemoryChannel.memoryless(identity_channel(2)), 1, opt).chi_n
    full = [product_capacity(MemoryChannel.memoryless(depolarizing_channel(1.0)), n, opt).chi_n for n in (1, 2, 3)]
    half = product_capacity(MemoryChannel.memoryless(depolarizing_channel(0.5)), 1, opt).chi_n
    closed, grid = 1 - h2(0.25), depolarizing_grid(0.5)
    elapsed = time.perf_counter() - t0
    ok = (
        abs(ident - 1.0) <= 1e-6
        and all(abs(c) <= 1e-6 for c in full)
        and abs(half - 0.188722) <= 1e-3
        and abs(closed - grid) <= 1e-3
        and elapsed < 300
    )
    report(
        3, ok,
        f"identity {ident:.9f}, fully depolarizing max |chi| {max(map(abs, full)):.1e}, "
        f"p=0.5 {half:.6f} (closed {closed:.6f}, grid {grid:.6f}), {elapsed:.1f}s (< 300s)",
    )
    assert ok


def test_criterion_4_weak_law(report):
    t0 = time.perf_counter()
    s = LemmaSettings(weak_law_instances=20, weak_law_deltas=(0.3, 0.4), samples=10_000)
    recs = run_weak_law(LEMMA_SEED, s)
    elapsed = time.perf_counter() - t0
    ok = len(recs) == 40 and records_ok(recs) and elapsed < 300
    report(4, ok, f"{len(recs)} instances, {sum(not r.passed for r in recs)} below 1-2delta-3SE, "
                  f"min margin {min_margin(recs):.3f}, {elapsed:.1f}s (< 300s)")
    assert ok


def test_criterion_5_entropy_typicality(report):
    t0 = time.perf_counter()
    s = LemmaSettings(entropy_instances=20, entropy_blocks=100, entropy_delta=0.5, samples=10_000, sandwich_instances=4)
    recs = run_entropy_typicality(LEMMA_SEED, s)
    elapsed = time.perf_counter() - t0
    groups = {name: [r for r in recs if r.lemma == name] for name in ("entropy-expectation", "entropy-mass", "entropy-sandwich")}
    ok = (
        len(groups["entropy-expectation"]) == 20
        and len(groups["entropy-mass"]) == 1
        and len(groups["entropy-sandwich"]) == 4
        and records_ok(recs)
        and elapsed < 300
    )
    sandwich = max(r.lhs for r in groups["entropy-sandwich"])
    report(
        5, ok,
        f"expectation {sum(r.passed for r in groups['entropy-expectation'])}/20 within 3SE, "
        f"{groups['entropy-mass'][0].detail}, sandwich max violation {sandwich:.2e}, {elapsed:.1f}s (< 300s)",
    )
    assert ok


def test_criterion_6_fannes_and_gentle(report):
    t0 = time.perf_counter()
    s = LemmaSettings(fannes_instances=1000, gentle_instances=1000, max_dim=8)
    fannes, gentle = run_fannes(LEMMA_SEED, s), run_gentle(LEMMA_SEED, s)
    elapsed = time.perf_counter() - t0
    bad = sum(not r.passed for r in fannes + gentle)
    ok = len(fannes) == len(gentle) == 1000 and bad == 0 and elapsed < 60
    report(6, ok, f"{bad} violations over 2000 instances, min margins {min_margin(fannes):.2e} / "
                  f"{min_margin(gentle):.2e}, {elapsed:.1f}s (< 60s)")
    assert ok


def test_criterion_7_shadow_bound(report):
    t0 = time.perf_counter()
    recs = run_shadow(LEMMA_SEED, LemmaSettings(shadow_instances=200))
    elapsed = time.perf_counter() - t0
    bad = sum(not r.passed for r in recs)
    ok = len(recs) == 200 and all(r.hypothesis_ok for r in recs) and bad == 0 and elapsed < 60
    report(7, ok, f"{bad} conclusion violations over {len(recs)} instances, min margin {min_margin(recs):.2e}, "
                  f"{elapsed:.1f}s (< 60s)")
    assert ok


def test_criterion_8_code_reduction(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(808)
    failures = 0
    for _ in range(100):
        refs = int(rng.integers(1, 5))
        cls = TypeClassification(rng.integers(0, refs, size=(int(rng.integers(1, 200)), int(rng.integers(1, 12)))), refs)
        rep = reduce_messages_by_type(cls)
        # integer check, independent of the report's own bookkeeping
        exact = len(rep.kept) * (cls.m + 1) ** (cls.J * 2**cls.J) >= cls.cells.shape[0]
        failures += not (exact and rep.product_bound_ok)
    elapsed = time.perf_counter() - t0
    ok = failures == 0 and elapsed < 10
    report(8, ok, f"{failures} failures over 100 classifications, {elapsed:.1f}s (< 10s)")
    assert ok


def strictly(seq, increasing):
    pairs = list(zip(seq, seq[1:]))
    return all(b > a for a, b in pairs) if increasing else all(b < a for a, b in pairs)


def run_converse(out):
    code = main(["converse", "--config", str(CONFIGS / "converse_two_branch.yaml"), "--out", str(out)])
    assert code == 0
    return json.loads((out / "converse.json").read_text())


def test_criterion_9_strong_converse_trend(report, tmp_path):
    t0 = time.perf_counter()
    side = run_converse(tmp_path)
    elapsed = time.perf_counter() - t0
    assert side["config"]["converse"]["rate_factors"] == [1.2, 0.5]
    assert side["config"]["converse"]["n_values"] == [2, 3, 4, 5, 6]
    assert side["config"]["converse"]["trials"] >= 20
    r_star = side["chi_rate_ref"]
    above, below = side["trends"]
    up, down = above["mean_errors"], below["mean_errors"]
    ok_above = strictly(up, True) and up[-1] > 0.5 and above["sign"] == 1
    ok_below = strictly(down, False) and down[-1] < 0.3 and below["sign"] == -1
    ok = ok_above and ok_below and elapsed < 1800
    report(
        9, ok,
        f"R*={r_star:.6f}; 1.2R*: {' '.join(f'{e:.4f}' for e in up)} sign {above['sign']:+d} "
        f"({'ok' if ok_above else 'not strictly increasing to > 0.5'}); "
        f"0.5R*: {' '.join(f'{e:.4f}' for e in down)} sign {below['sign']:+d} "
        f"({'ok' if ok_below else 'not strictly decreasing to < 0.3'}); {elapsed:.1f}s (< 1800s)",
    )
    assert ok


def test_criterion_10_determinism(report, tmp_path):
    t0 = time.perf_counter()
    runs = [
        ("capacity", FIXTURES / "golden_capacity.yaml", ["capacity.csv", "capacity.json"]),
        ("lemmas", CONFIGS / "lemmas_default.yaml", ["lemmas.csv", "lemmas.json"]),
        ("converse", CONFIGS / "converse_two_branch.yaml", ["converse.csv", "converse.json"]),
    ]
    mismatched = []
    for command, cfg, files in runs:
        for rep in ("a", "b"):
            out = tmp_path / command
            # identical output paths so the sidecars can be compared byte-for-byte too
            target = out / "run"
            assert main([command, "--config", str(cfg), "--out", str(target)]) in (0, 5)
            for f in files:
                (out / f"{rep}_{f}").write_bytes((target / f).read_bytes())
        mismatched += [f"{command}/{f}" for f in files if (out / f"a_{f}").read_bytes() != (out / f"b_{f}").read_bytes()]
    elapsed = time.perf_counter() - t0
    ok = not mismatched
    report(10, ok, f"{2 * sum(len(f) for _, _, f in runs)} files compared, mismatched: {mismatched or 'none'}, {elapsed:.1f}s")
    assert ok
