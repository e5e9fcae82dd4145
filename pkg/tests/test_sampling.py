import math
from itertools import combinations

import numpy as np
import pytest

from hdqcka.core_math import QuditWord, round_sums
from hdqcka.sampling import (
    SamplingStrategy,
    adversarial_family,
    delta_for_epsilon,
    epsilon_cl_bound,
    exact_failure_probability,
    good_set_membership,
    mc_failure_frequency,
    sample_subsets,
    weight_strategy_failure_frequency,
)
from hdqcka.streams import make_stream


def W(s, d=2):
    return QuditWord(s, d)


def test_strategy_invariants():
    with pytest.raises(ValueError):
        SamplingStrategy(10, 6, 0.1)
    with pytest.raises(ValueError):
        SamplingStrategy(10, 5, 0.0)
    assert SamplingStrategy(10, 5, 0.1).error_bound() == epsilon_cl_bound(0.1, 5, 10)


def test_good_set_examples():
    zeros = W([0] * 6, 3)
    assert good_set_membership(zeros, [zeros, zeros], [0, 4], 0.01)
    qa, qb = W([1, 1, 0, 0]), W([0, 0, 0, 0])
    assert not good_set_membership(qa, [qb], [0, 1], 0.5)
    assert good_set_membership(qa, [qb], [0, 2], 0.5)


@pytest.mark.parametrize("t", [[], [0, 1, 2, 3], [0, 0], [4], [-1]])
def test_good_set_malformed_subset(t):
    with pytest.raises(ValueError):
        good_set_membership(W([1, 1, 0, 0]), [W([0] * 4)], t, 0.5)


def test_epsilon_cl_examples():
    assert epsilon_cl_bound(0.0, 100, 1000) == 2.0
    N = 10**8
    assert epsilon_cl_bound(0.001, N // 2, N) == pytest.approx(2 * math.exp(-(0.001**2) * N / 2), rel=1e-6)
    # 50-digit mpmath evaluation
    assert epsilon_cl_bound(0.05, 7000, 10**5) == pytest.approx(5.0237562833646797e-08, rel=1e-12)


def test_epsilon_cl_underflows_to_zero():
    assert epsilon_cl_bound(1.0, 10**6, 2 * 10**6) == 0.0


def test_delta_for_epsilon_examples():
    assert delta_for_epsilon(50, 50, math.sqrt(2)) == pytest.approx(0.0, abs=1e-7)
    m, eps = 400, 1e-9
    assert delta_for_epsilon(m, m, eps) == pytest.approx(
        math.sqrt((2 * m + 2) * math.log(2 / eps**2) / (2 * m * m)), rel=1e-14
    )
    # 50-digit mpmath value of the formula
    assert delta_for_epsilon(70_000, 930_000, 1e-36) == pytest.approx(0.048767613204239053, rel=1e-12)


def test_delta_decreasing_in_m_and_n():
    ms = [10, 100, 1000, 10_000]
    ns = [100, 1000, 10_000, 100_000]
    for eps in (1e-3, 1e-36):
        grid = np.array([[delta_for_epsilon(m, n, eps) for n in ns] for m in ms])
        assert np.all(np.diff(grid, axis=0) < 0)
        assert np.all(np.diff(grid, axis=1) < 0)


def test_sample_subsets_uniform_over_all_subsets():
    N, m, count = 6, 2, 60_000
    subsets = np.sort(sample_subsets(N, m, count, make_stream(1)), axis=1)
    assert np.all(subsets[:, 0] != subsets[:, 1])
    index = {c: i for i, c in enumerate(combinations(range(N), m))}
    counts = np.bincount([index[tuple(r)] for r in subsets], minlength=len(index))
    expect = count / len(index)
    chi2 = ((counts - expect) ** 2 / expect).sum()
    from scipy import stats

    assert stats.chi2.sf(chi2, len(index) - 1) > 1e-3


def test_mc_zero_word_never_fails():
    s = SamplingStrategy(200, 100, 0.05)
    z = W([0] * 200, 3)
    assert mc_failure_frequency(z, [z, z], s, 5000, make_stream(2)) == 0.0


def test_mc_large_delta_never_fails():
    name, qa, qbs = adversarial_family(2, 1, 200)[4]
    assert mc_failure_frequency(qa, qbs, SamplingStrategy(200, 100, 1.0), 5000, make_stream(3)) == 0.0


def test_mc_rejects_zero_trials():
    z = W([0] * 10)
    with pytest.raises(ValueError):
        mc_failure_frequency(z, [z], SamplingStrategy(10, 5, 0.1), 0, make_stream(0))


@pytest.mark.parametrize("delta", [0.05, 0.1])
def test_mc_dominated_by_bound_weight_half(delta):
    N, m, trials = 200, 100, 100_000
    s = SamplingStrategy(N, m, delta)
    half = [w for w in adversarial_family(2, 1, N) if w[0].startswith("w=0.5/")]
    for name, qa, qbs in half:
        freq = mc_failure_frequency(qa, qbs, s, trials, make_stream(hash(name) % 2**32))
        sigma = math.sqrt(freq * (1 - freq) / trials)
        assert freq <= epsilon_cl_bound(delta, m, N) + 3 * sigma, name


@pytest.mark.parametrize("K,delta", [(50, 0.1), (100, 0.1), (100, 0.2), (30, 0.05)])
def test_mc_matches_exact_hypergeometric(K, delta):
    N, m, trials = 200, 100, 40_000
    s = SamplingStrategy(N, m, delta)
    word = np.zeros(N, dtype=int)
    word[:K] = 1
    freq = weight_strategy_failure_frequency(W(word), s, trials, make_stream(K))
    exact = exact_failure_probability(K, s)
    assert abs(freq - exact) <= 4 * math.sqrt(max(exact * (1 - exact), 1e-9) / trials)
    assert exact <= epsilon_cl_bound(delta, m, N)


def test_exact_failure_brute_force_small():
    N, m, delta, K = 8, 4, 0.2, 3
    s = SamplingStrategy(N, m, delta)
    nz = np.zeros(N, dtype=bool)
    nz[:K] = True
    subsets = list(combinations(range(N), m))
    fails = 0
    for t in subsets:
        k = nz[list(t)].sum()
        fails += abs(k / m - (K - k) / (N - m)) > delta
    assert exact_failure_probability(K, s) == pytest.approx(fails / len(subsets), abs=1e-12)


@pytest.mark.parametrize("d,p", [(2, 1), (3, 2), (5, 3)])
def test_reduction_to_weight_strategy(d, p):
    """q outside G_t implies s(q) outside the weight strategy's good set, so
    on identical subsets the failure counts coincide."""
    N, trials = 120, 20_000
    s = SamplingStrategy(N, 40, 0.1)
    for name, qa, qbs in adversarial_family(d, p, N):
        f_q = mc_failure_frequency(qa, qbs, s, trials, make_stream(9))
        f_s = weight_strategy_failure_frequency(round_sums(qa, qbs), s, trials, make_stream(9))
        assert f_q <= f_s + 1e-12, name


def test_reduction_on_random_words():
    rng = np.random.default_rng(7)
    N, trials = 100, 5000
    s = SamplingStrategy(N, 30, 0.08)
    for _ in range(5):
        d, p = int(rng.integers(2, 6)), int(rng.integers(1, 4))
        words = [QuditWord(rng.integers(0, d, N), d) for _ in range(p + 1)]
        f_q = mc_failure_frequency(words[0], words[1:], s, trials, make_stream(5))
        f_s = weight_strategy_failure_frequency(round_sums(words[0], words[1:]), s, trials, make_stream(5))
        assert f_q <= f_s + 1e-12


def test_good_set_agrees_with_mc_predicate():
    rng = make_stream(12)
    N, m, delta = 20, 8, 0.15
    d = 3
    qa = QuditWord(np.arange(N) % 3, d)
    qb = QuditWord((np.arange(N) * 2) % 3, d)
    s = SamplingStrategy(N, m, delta)
    subsets = sample_subsets(N, m, 400, rng)
    brute = np.mean([not good_set_membership(qa, [qb], t, delta) for t in subsets])
    freq = mc_failure_frequency(qa, [qb], s, 400, make_stream(12))
    assert freq == pytest.approx(brute, abs=1e-12)


def test_family_is_fixed_and_covers_weights():
    fam1 = adversarial_family(3, 2, 200)
    fam2 = adversarial_family(3, 2, 200)
    assert [f[0] for f in fam1] == [f[0] for f in fam2]
    assert all(a[1] == b[1] and all(x == y for x, y in zip(a[2], b[2])) for a, b in zip(fam1, fam2))
    weights = set()
    for name, qa, qbs in fam1:
        s = round_sums(qa, qbs)
        w = np.count_nonzero(s.symbols) / len(s)
        assert name.startswith(f"w={w:g}/")
        weights.add(w)
        # background makes the party words themselves non-trivial
        assert np.count_nonzero(qa.symbols) > 0
    assert weights == {0, 0.25, 0.5, 0.75, 1}
