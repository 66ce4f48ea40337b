"""Acceptance suite: one test per criterion, summarized at the end of the run."""

import math
import random
import statistics
import time

import numpy as np
import pytest

from sstdma.analysis import (
    ChainParams,
    global_bound,
    local_bound_eq3,
    local_bound_from_q,
    q_lb,
    rounds_for_confidence,
    stationary,
    tmax_cdf_bound,
    transition_matrix,
)
from sstdma.protocol import FrameConfig, RelativeState
from sstdma.simulator import (
    FaultKind,
    inject_fault,
    is_safe,
    make_world,
    run_round,
    run_until_safe,
)
from sstdma.topology import complete_graph, fig4_range, generate_rgg

READY = RelativeState.READY
OBTAINING = RelativeState.OBTAINING
ALLOCATED = RelativeState.ALLOCATED
UNSTABLE = RelativeState.UNSTABLE


def mean_se(xs):
    return statistics.fmean(xs), statistics.stdev(xs) / math.sqrt(len(xs))


@pytest.mark.criterion(1, "closure from safe configurations")
def test_closure(criterion):
    t0 = time.perf_counter()
    cfg = FrameConfig(T=15, n=2)
    violations = conflicts = moved = 0
    for seed in range(20):
        g = generate_rgg(100, fig4_range(100), seed)
        w = make_world(g, cfg, seed, init="safe")
        assert is_safe(w)
        slots = list(w.slots)
        for _ in range(100):
            _, trace = run_round(w)
            violations += not is_safe(w)
            conflicts += trace.data_conflicts
        moved += w.slots != slots
    elapsed = time.perf_counter() - t0
    criterion(f"20 configs x 100 rounds: {violations} unsafe rounds, {conflicts} DATA conflicts, "
              f"{moved} slot changes, {elapsed:.1f}s")
    assert violations == 0 and conflicts == 0 and moved == 0
    assert elapsed < 10


@pytest.mark.criterion(2, "cleanup of corrupted states within two rounds")
def test_cleanup(criterion):
    t0 = time.perf_counter()
    bad_runs = []
    for seed in range(100):
        g = generate_rgg(100, 0.15, seed)
        T = max(15, max(g.degrees) + 1)
        w = make_world(g, FrameConfig(T=T, n=2), seed, init="random")
        run_round(w)
        run_round(w)
        if UNSTABLE in w.relative_states():
            bad_runs.append(seed)
    elapsed = time.perf_counter() - t0
    criterion(f"100 corrupted starts: {len(bad_runs)} with an Unstable node after 2 rounds, {elapsed:.1f}s")
    assert not bad_runs
    assert elapsed < 10


@pytest.mark.criterion(3, "network convergence against the t_max bound (N=500)")
def test_convergence_fig4(criterion):
    N, runs = 500, 100
    cfg = FrameConfig(T=15, n=2)
    t_max, per_run_mean, unconverged = [], [], 0
    for seed in range(runs):
        g = generate_rgg(N, 0.1, seed)
        res = run_until_safe(make_world(g, cfg, seed), 200)
        if not res.converged:
            unconverged += 1
            t_max.append(math.inf)
            continue
        t_max.append(res.t_max)
        per_run_mean.append(statistics.fmean(res.allocation_round))
    mean_alloc, se = mean_se(per_run_mean)
    bound = global_bound(1, 2)
    gaps = {}
    for k in range(1, 61):
        emp = sum(t < k for t in t_max) / runs
        b = tmax_cdf_bound(k, 0.25, N)
        sigma = math.sqrt(b * (1 - b) / runs)
        gaps[k] = (emp - (b - 3 * sigma), b)
    # report the tightest k inside the bound's transition window
    worst_k = min((k for k in gaps if 0.01 <= gaps[k][1] <= 0.99), key=lambda k: gaps[k][0])
    worst_gap = gaps[worst_k][0]
    finite = [t for t in t_max if t != math.inf]
    criterion(f"{runs - unconverged}/{runs} converged; mean allocation round {mean_alloc:.3f} "
              f"(bound {bound} + 3SE {3 * se:.3f}); t_max range {min(finite)}..{max(finite)}; "
              f"min CDF margin {worst_gap:.3f} at k={worst_k}")
    assert unconverged == 0
    assert mean_alloc <= bound + 3 * se
    assert all(g >= 0 for g, _ in gaps.values())


@pytest.mark.criterion(4, "local bound on complete graphs")
def test_local_bound(criterion):
    t0 = time.perf_counter()
    parts, failures = [], []
    for d in (2, 4, 8):
        g = complete_graph(d + 1)
        for n in (2, 4):
            cfg = FrameConfig(T=d + 1, n=n)
            rounds = [run_until_safe(make_world(g, cfg, seed), 500).allocation_round[0] for seed in range(2000)]
            m, se = mean_se(rounds)
            bound = local_bound_from_q(d / (d + 1), n)
            parts.append(f"d={d},n={n}: {m:.3f}<= {bound:.3f}")
            if m > bound + 3 * se:
                failures.append((d, n, m, bound, se))
    elapsed = time.perf_counter() - t0
    criterion("; ".join(parts) + f"; {elapsed:.1f}s")
    assert not failures
    assert elapsed < 120


def allocation_transitions(graph, cfg, min_obtaining, seed0=0):
    """Count Ready->* and Obtaining->* transitions over fresh runs until enough Obtaining samples."""
    ready = [0, 0]  # [samples, to Allocated]
    obtaining = [0, 0]
    seed = seed0
    while obtaining[0] < min_obtaining:
        res = run_until_safe(make_world(graph, cfg, seed), 500, keep_traces=True)
        for tr in res.traces:
            for b, a in zip(tr.relative_before, tr.relative_after):
                if b is READY:
                    ready[0] += 1
                    ready[1] += a is ALLOCATED
                elif b is OBTAINING:
                    obtaining[0] += 1
                    obtaining[1] += a is ALLOCATED
        seed += 1
    return ready, obtaining, seed - seed0


@pytest.mark.criterion(5, "Obtaining->Allocated at least Ready->Allocated on K4")
def test_obtaining_vs_ready_allocation(criterion):
    ready, obtaining, runs = allocation_transitions(complete_graph(4), FrameConfig(T=5, n=2), 10_000)
    q = ready[1] / ready[0]
    w = obtaining[1] / obtaining[0]
    se = math.sqrt(q * (1 - q) / ready[0] + w * (1 - w) / obtaining[0])
    criterion(f"w={w:.4f} ({obtaining[0]} Obtaining samples) vs q={q:.4f} ({ready[0]} Ready samples), "
              f"3SE={3 * se:.4f}, {runs} runs; see decisions ledger")
    assert w >= q - 3 * se


@pytest.mark.criterion(6, "mean matching-neighbor count at most d_i/T")
def test_matching_count(criterion):
    worst, checked, failures = -math.inf, 0, []
    for gseed in range(3):
        g = generate_rgg(40, 0.25, gseed)
        T = max(g.degrees) + 1
        cfg = FrameConfig(T=T, n=2)
        samples = [[] for _ in range(g.node_count)]
        for seed in range(1000):
            res = run_until_safe(make_world(g, cfg, 10_000 * gseed + seed), 500, keep_traces=True)
            for tr in res.traces:
                for i, m in tr.m_samples.items():
                    samples[i].append(m)
        for i, xs in enumerate(samples):
            if len(xs) < 2:
                continue
            checked += 1
            m, se = mean_se(xs)
            limit = g.degree(i) / T + 3 * se
            worst = max(worst, m - g.degree(i) / T)
            if m > limit:
                failures.append((gseed, i, m, g.degree(i) / T, se))
    criterion(f"{checked} nodes over 3 graphs x 1000 runs; max(mean m_i - d_i/T) = {worst:.4f}; "
              f"{len(failures)} above the 3SE limit")
    assert not failures


@pytest.mark.criterion(7, "analysis golden values")
def test_golden(criterion):
    rng = np.random.default_rng(77)
    worst = 0.0
    for _ in range(10_000):
        f, q = rng.dirichlet([1, 1, 1])[:2]
        h, w = rng.dirichlet([1, 1, 1])[:2]
        p = ChainParams(f=f, h=h, q=q, w=w)
        pi = np.array(stationary(p))
        worst = max(worst, np.abs(pi @ transition_matrix(p) - pi).max())
    k = rounds_for_confidence(0.01, 10000, 1, 3)
    criterion(f"q_lb(1,2)={q_lb(1, 2)}, local_bound_eq3(1,2)={local_bound_eq3(1, 2)}, "
              f"max |piP-pi|={worst:.1e}, k(0.01,10000,1,3)={k:.3f}")
    assert q_lb(1, 2) == 0.25
    assert local_bound_eq3(1, 2) == 4
    assert worst <= 1e-12
    assert 34 <= k <= 36


@pytest.mark.criterion(8, "K2 expected t_max matches the exact chain")
def test_k2_exact(criterion):
    cfg = FrameConfig(T=2, n=2)
    g = complete_graph(2)
    vals = [run_until_safe(make_world(g, cfg, seed), 200).t_max for seed in range(100_000)]
    m, se = mean_se(vals)
    criterion(f"mean t_max {m:.4f} over 1e5 runs (SE {se:.4f}); target 2.0 +- 0.03")
    assert abs(m - 2.0) <= 0.03


@pytest.mark.criterion(9, "recovery after corrupting 20% of a converged world")
def test_fault_recovery(criterion):
    N, frac = 100, 0.2
    cfg = FrameConfig(T=15, n=2)
    t_max, failed = [], []
    for seed in range(50):
        g = generate_rgg(N, fig4_range(N), seed)
        w = make_world(g, cfg, seed)
        assert run_until_safe(w, 200).converged
        inject_fault(w, FaultKind.STATE_CORRUPTION, random.Random(f"fault/{seed}"), fraction=frac)
        res = run_until_safe(w, 200)
        if res.converged and is_safe(w):
            t_max.append(res.t_max)
        else:
            failed.append(seed)
    n_eff = round(frac * N)
    k = rounds_for_confidence(0.01, n_eff, 1, 2)
    cdf_rows = []
    for kk in range(1, max(t_max, default=0) + 2):
        emp = sum(t < kk for t in t_max) / max(len(t_max), 1)
        cdf_rows.append(f"k={kk}:{emp:.2f}/{tmax_cdf_bound(kk, 0.25, n_eff):.2f}")
    criterion(f"{50 - len(failed)}/50 re-converged; t_max mean {statistics.fmean(t_max):.2f}, "
              f"max {max(t_max)}; bound k(0.01, N={n_eff}) = {k:.1f}; empirical/bound CDF "
              + " ".join(cdf_rows))
    assert not failed
