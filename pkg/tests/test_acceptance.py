"""Acceptance suite: one PASS/FAIL line per criterion, printed in the summary."""

import functools
import itertools
import math
import time

import numpy as np
import pytest

from graphdetect.certs import check_inf_norm_uniqueness, check_positivity, perron_frobenius_power
from graphdetect.detectability import OutputSpec, certify_detectability, numeric_detectability
from graphdetect.dynamics import LpvSchedule, Segment, discretize, lpv_transition
from graphdetect.estimation import KalmanConfig, run_estimator
from graphdetect.graph import (
    WeightedGraph,
    adjacency_matrix,
    disjoint_union,
    generate_graph,
    is_irreducible_bruteforce,
    is_strongly_connected,
    laplacian,
)
from graphdetect.matfun import expm, expm_taylor_oracle

from conftest import GOLDEN, run_golden_case

pytestmark = pytest.mark.acceptance

# Weights on (0, 5]: the generator draws uniformly from [lo, hi].
WEIGHTS = (1e-300, 5.0)
DTS = (0.01, 0.1, 1.0)


def rel_fro(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def pattern_graph(n, mask):
    arcs = [(i, j) for i in range(n) for j in range(n) if i != j]
    return WeightedGraph(n, True, tuple((i, j, 1.0) for (i, j), keep in zip(arcs, mask) if keep))


def random_sc(rng, n):
    return generate_graph("random", n, seed=int(rng.integers(1 << 31)), weight_range=WEIGHTS)


def test_strong_connectivity_matches_bruteforce(criterion):
    start = time.perf_counter()
    results = []
    for mask in itertools.product((0, 1), repeat=6):
        g = pattern_graph(3, mask)
        results.append(is_strongly_connected(g) == is_irreducible_bruteforce(adjacency_matrix(g)))
    rng = np.random.default_rng(1)
    for _ in range(500):
        n = int(rng.integers(4, 8))
        mask = rng.random(n * n - n) < rng.uniform(0.1, 0.6)
        g = pattern_graph(n, mask)
        results.append(is_strongly_connected(g) == is_irreducible_bruteforce(adjacency_matrix(g)))
    elapsed = time.perf_counter() - start
    agree = sum(results)
    criterion(1, "strong connectivity vs brute-force irreducibility",
              agree == len(results) == 564 and elapsed < 60,
              f"{agree}/{len(results)} agree, {elapsed:.1f} s")


def test_perron_frobenius_power_positive(criterion):
    rng = np.random.default_rng(2)
    passed = total = 0
    while total < 100:
        n = int(rng.integers(2, 8))
        a = np.where(rng.random((n, n)) < 0.4, rng.uniform(0.1, 5, (n, n)), 0.0)
        if not is_irreducible_bruteforce(a):
            continue
        total += 1
        passed += bool(np.all(perron_frobenius_power(a) > 0))
    criterion(2, "(I + A)^(n-1) > 0 for irreducible A", passed == total, f"{passed}/{total}")


def test_transition_matrix_certificates(criterion):
    rng = np.random.default_rng(3)
    start = time.perf_counter()
    failures = []
    for k in range(200):
        n = int(rng.integers(2, 11))
        dt = float(rng.choice(DTS))
        g = random_sc(rng, n)
        m = expm(-laplacian(g) * dt).value
        positive = check_positivity(m) and m.max() < 1
        rows = np.max(np.abs(m.sum(axis=1) - 1)) <= 1e-10
        unit = abs(np.max(np.abs(m @ np.ones(n))) - 1) <= 1e-10
        try:
            unique = check_inf_norm_uniqueness(m, trials=1000, seed=k, tol=1e-12 * m.max())
        except ValueError:
            unique = False
        if not (positive and rows and unit and unique):
            failures.append(f"n={n}, dt={dt}, min entry {m.min():.3e}")
    elapsed = time.perf_counter() - start
    criterion(3, "transition matrix positive, stochastic, unique norm maximizers",
              not failures and elapsed < 120,
              f"{200 - len(failures)}/200, {elapsed:.1f} s" + (f", first failure {failures[0]}" if failures else ""))


@functools.lru_cache(maxsize=None)
def detectability_cases():
    rng = np.random.default_rng(4)
    positives = []
    for _ in range(200):
        n = int(rng.integers(2, 11))
        g = random_sc(rng, n)
        nodes = rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False) + 1
        positives.append((g, OutputSpec.nodes(*sorted(nodes.tolist())), float(rng.choice(DTS))))
    negatives = []
    for _ in range(50):
        n1 = int(rng.integers(2, 6))
        n2 = int(rng.integers(2, 6))
        g = disjoint_union(random_sc(rng, n1), random_sc(rng, n2))
        nodes = rng.choice(n1, size=int(rng.integers(1, n1 + 1)), replace=False) + 1
        negatives.append((g, OutputSpec.nodes(*sorted(nodes.tolist())), float(rng.choice(DTS))))
    differences = []
    for _ in range(20):
        n = int(rng.integers(2, 11))
        g = random_sc(rng, n)
        rows = []
        for _ in range(int(rng.integers(1, 4))):
            i, j = rng.choice(n, size=2, replace=False)
            row = np.zeros(n)
            row[i], row[j] = 1.0, -1.0
            rows.append(row)
        differences.append((g, OutputSpec(matrix=np.array(rows)), float(rng.choice(DTS))))
    return positives, negatives, differences


def test_certificate_cross_validation(criterion):
    positives, negatives, differences = detectability_cases()
    agree = 0
    for g, out, dt in positives:
        cert = certify_detectability(g, out, dt)
        ok, _, _ = numeric_detectability(discretize(g, dt).a_d, out.c_matrix(g.n))
        agree += cert == (True, True) and ok
    neg_ok = 0
    for g, out, dt in negatives:
        ok, _, modulus = numeric_detectability(discretize(g, dt).a_d, out.c_matrix(g.n))
        neg_ok += (not ok) and modulus is not None and abs(modulus - 1) <= 1e-9
    diff_ok = 0
    for g, out, dt in differences:
        cert = certify_detectability(g, out, dt)
        ok, _, _ = numeric_detectability(discretize(g, dt).a_d, out.c_matrix(g.n))
        diff_ok += cert == (True, False) and not ok
    criterion(4, "detectability certificate vs numeric check",
              agree == 200 and neg_ok == 50 and diff_ok == 20,
              f"positives {agree}/200, disjoint negatives {neg_ok}/50, zero-row-sum outputs {diff_ok}/20")


def test_expm_against_oracles(criterion):
    rng = np.random.default_rng(5)
    taylor_ok = shift_ok = 0
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 11))
        a = rng.normal(size=(n, n))
        a *= rng.uniform(0, 5) / np.linalg.norm(a, 1)
        err = rel_fro(expm(a).value, expm_taylor_oracle(a, 100))
        worst = max(worst, err)
        taylor_ok += err <= 1e-10
    for _ in range(100):
        n = int(rng.integers(1, 11))
        a = rng.normal(size=(n, n))
        a *= rng.uniform(0, 5) / np.linalg.norm(a, 1)
        gamma = rng.uniform(-3, 3)
        shift_ok += rel_fro(expm(a + gamma * np.eye(n)).value, math.exp(gamma) * expm(a).value) <= 1e-10
    criterion(5, "expm vs Taylor oracle and shift identity", taylor_ok == 100 and shift_ok == 100,
              f"Taylor {taylor_ok}/100 (worst {worst:.1e}), shift {shift_ok}/100")


def test_lpv_products(criterion):
    rng = np.random.default_rng(6)
    stochastic_ok = split_ok = 0
    for _ in range(100):
        n = int(rng.integers(2, 9))
        k = int(rng.integers(1, 11))
        segs = [Segment(random_sc(rng, n), float(rng.choice(DTS))) for _ in range(k)]
        m = lpv_transition(LpvSchedule(tuple(segs)))
        stochastic_ok += (check_positivity(m) and m.max() <= 1
                          and np.max(np.abs(m.sum(axis=1) - 1)) <= 1e-10)
        i = int(rng.integers(k))
        frac = rng.uniform(0.05, 0.95)
        whole, part = segs[i], segs[i].delta_t * frac
        split = segs[:i] + [Segment(whole.graph, part), Segment(whole.graph, whole.delta_t - part)] + segs[i + 1:]
        split_ok += np.linalg.norm(lpv_transition(LpvSchedule(tuple(split))) - m) <= 1e-10
    criterion(6, "LPV transition products stochastic and split-consistent",
              stochastic_ok == 100 and split_ok == 100,
              f"stochastic {stochastic_ok}/100, split {split_ok}/100")


def kalman_traces(g, out, dt, seed):
    sys = discretize(g, dt, out=out)
    m = out.c_matrix(g.n).shape[0]
    cfg = KalmanConfig.isotropic(g.n, m, 0.01, 0.01, 1.0)
    return np.array(run_estimator(sys, cfg, np.ones(g.n), np.zeros(g.n), 1000, seed=seed).covariance_traces)


def test_estimator_witness(criterion):
    positives, negatives, _ = detectability_cases()
    start = time.perf_counter()
    bounded = 0
    worst = 0.0
    for seed, (g, out, dt) in enumerate(positives):
        tr = kalman_traces(g, out, dt, seed)
        ratio = tr[49:].max() / tr[49]
        worst = max(worst, ratio)
        bounded += ratio <= 100
    diverged = 0
    weakest = math.inf
    for seed, (g, out, dt) in enumerate(negatives):
        tr = kalman_traces(g, out, dt, seed)
        growth = tr[999] / tr[49]
        weakest = min(weakest, growth)
        diverged += growth >= 2
    elapsed = time.perf_counter() - start
    criterion(7, "Kalman covariance bounded iff detectable",
              bounded == 200 and diverged == 50,
              f"bounded {bounded}/200 (worst ratio {worst:.2f}), divergent {diverged}/50 "
              f"(weakest growth {weakest:.2f}), {elapsed:.1f} s")


def test_cli_golden_files(criterion, capsys):
    results = []
    for name, expected in (("p3", 0), ("disconnected", 2)):
        code, text = run_golden_case(name, capsys)
        results.append(code == expected and text == (GOLDEN / f"{name}.json").read_text())
    criterion(8, "CLI golden reports and exit codes", all(results),
              f"p3 {'ok' if results[0] else 'differs'}, disconnected {'ok' if results[1] else 'differs'}")
