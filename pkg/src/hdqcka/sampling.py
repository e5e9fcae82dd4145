"""Classical sampling strategy behind the Fourier test.

A uniformly random size-``m`` subset ``t`` of the ``N`` rounds is observed and
the relative weight of the per-round sums ``s(q_t)`` is used as a guess for the
weight on the unobserved rounds. This module evaluates the good-set predicate,
the analytic failure bound, Monte Carlo estimates of the failure frequency and
an exact hypergeometric reference.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

import numpy as np
from scipy import stats

from .core_math import QuditWord, relative_hamming_weight, round_sums


@dataclass(frozen=True)
class SamplingStrategy:
    N: int
    m: int
    delta: float

    def __post_init__(self):
        if not 1 <= self.m <= self.N / 2:
            raise ValueError(f"sample size must satisfy 1 <= m <= N/2, got m={self.m}, N={self.N}")
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta!r}")

    def error_bound(self) -> float:
        return epsilon_cl_bound(self.delta, self.m, self.N)


def _check_subset(t: Iterable[int], N: int) -> np.ndarray:
    idx = np.asarray(sorted(t), dtype=np.int64)
    if idx.size == 0 or idx.size >= N:
        raise ValueError(f"subset must be non-empty and proper, got size {idx.size} for N={N}")
    if idx[0] < 0 or idx[-1] >= N:
        raise ValueError(f"subset indices must lie in [0, {N - 1}]")
    if np.unique(idx).size != idx.size:
        raise ValueError("subset contains repeated indices")
    return idx


def good_set_membership(
    q_a: QuditWord, q_bs: Sequence[QuditWord], t: Iterable[int], delta: float
) -> bool:
    """True iff ``|w(s(q_t)) - w(s(q_-t))| <= delta``.

    ``t`` holds 0-based round indices.
    """
    N = len(q_a)
    idx = _check_subset(t, N)
    rest = np.setdiff1d(np.arange(N), idx, assume_unique=True)
    s_t = round_sums(q_a[idx], [qb[idx] for qb in q_bs])
    s_rest = round_sums(q_a[rest], [qb[rest] for qb in q_bs])
    return abs(relative_hamming_weight(s_t) - relative_hamming_weight(s_rest)) <= delta


def epsilon_cl_bound(delta: float, m: int, N: int) -> float:
    """``2 exp(-delta^2 m N / (N + 2))``."""
    return 2.0 * math.exp(-(delta**2) * m * N / (N + 2))


def delta_for_epsilon(m: int, n: int, epsilon: float) -> float:
    """Sampling tolerance ``sqrt((m+n+2) ln(2/eps^2) / (m (m+n)))``.

    ``m`` is the test-sample size and ``n`` the number of remaining rounds.
    """
    if m < 1 or n < 1:
        raise ValueError(f"need m, n >= 1, got m={m}, n={n}")
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon!r}")
    log_term = math.log(2.0) - 2.0 * math.log(epsilon)
    if log_term < -1e-12:
        raise ValueError(f"epsilon={epsilon} exceeds sqrt(2); tolerance undefined")
    return math.sqrt((m + n + 2) * max(log_term, 0.0) / (m * (m + n)))


def sample_subsets(N: int, m: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` independent uniform size-``m`` subsets of ``range(N)``.

    Vectorised partial Fisher-Yates: only the first ``m`` swap steps are run.
    Returns an array of shape ``(count, m)``.
    """
    dtype = np.int16 if N < 2**15 else np.int64
    perm = np.tile(np.arange(N, dtype=dtype), (count, 1))
    rows = np.arange(count)
    for i in range(m):
        j = i + rng.integers(0, N - i, size=count)
        tmp = perm[:, i].copy()
        perm[:, i] = perm[rows, j]
        perm[rows, j] = tmp
    return perm[:, :m].astype(np.int64)


def _failure_counts(nonzero: np.ndarray, subsets: np.ndarray, delta: float) -> int:
    N = nonzero.size
    m = subsets.shape[1]
    total = int(nonzero.sum())
    k = nonzero[subsets].sum(axis=1)
    gap = np.abs(k / m - (total - k) / (N - m))
    # small slack so exact ties at |gap| == delta count as good words
    return int(np.count_nonzero(gap > delta + 1e-12))


def _run_trials(nonzero_of_subset, N, m, trials, rng, chunk):
    failures = 0
    done = 0
    while done < trials:
        c = min(chunk, trials - done)
        failures += nonzero_of_subset(sample_subsets(N, m, c, rng))
        done += c
    return failures / trials


def mc_failure_frequency(
    q_a: QuditWord,
    q_bs: Sequence[QuditWord],
    strategy: SamplingStrategy,
    trials: int,
    rng: np.random.Generator,
    chunk: int = 10_000,
) -> float:
    """Monte Carlo frequency of ``q`` falling outside ``G_t`` over random ``t``.

    Round sums are formed from the restricted party words ``q_t`` and
    ``q_-t`` separately, as the protocol does.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    N, m = strategy.N, strategy.m
    if len(q_a) != N:
        raise ValueError(f"word length {len(q_a)} does not match N={N}")
    parties = np.stack([q_a.symbols] + [qb.symbols for qb in q_bs])
    d = q_a.d

    sums_nonzero = (parties.sum(axis=0) % d) != 0

    def failures(subsets):
        k_t = np.count_nonzero(parties[:, subsets].sum(axis=0) % d, axis=1)
        # s(q_-t) is the per-round sum over the complement positions
        k_rest = int(sums_nonzero.sum()) - sums_nonzero[subsets].sum(axis=1)
        gap = np.abs(k_t / m - k_rest / (N - m))
        return int(np.count_nonzero(gap > strategy.delta + 1e-12))

    return _run_trials(failures, N, m, trials, rng, chunk)


def weight_strategy_failure_frequency(
    word: QuditWord, strategy: SamplingStrategy, trials: int, rng: np.random.Generator, chunk: int = 10_000
) -> float:
    """Failure frequency of the plain weight strategy on a single word."""
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    nonzero = word.symbols != 0
    return _run_trials(
        lambda subsets: _failure_counts(nonzero, subsets, strategy.delta),
        strategy.N, strategy.m, trials, rng, chunk,
    )


def exact_failure_probability(weight_count: int, strategy: SamplingStrategy) -> float:
    """Exact ``Pr[q not in G_t]`` for a word whose round sums have
    ``weight_count`` non-zero entries; the count in ``t`` is hypergeometric.
    """
    N, m, delta = strategy.N, strategy.m, strategy.delta
    K = int(weight_count)
    ks = np.arange(max(0, m - (N - K)), min(K, m) + 1)
    gap = np.abs(ks / m - (K - ks) / (N - m))
    pmf = stats.hypergeom(N, K, m).pmf(ks)
    return float(pmf[gap > delta + 1e-12].sum())


#: Weights of ``s(q)`` covered by the adversarial family.
FAMILY_WEIGHTS = (0.0, 0.25, 0.5, 0.75, 1.0)
#: Placement of the non-zero round sums.
FAMILY_PATTERNS = ("clustered", "interleaved", "tail")


def _error_positions(N: int, K: int, pattern: str) -> np.ndarray:
    if pattern == "clustered":
        return np.arange(K)
    if pattern == "tail":
        return np.arange(N - K, N)
    if pattern == "interleaved":
        return np.unique(np.floor(np.arange(K) * N / max(K, 1)).astype(np.int64))[:K]
    raise ValueError(f"unknown pattern {pattern!r}")


def adversarial_family(d: int, p: int, N: int) -> List[Tuple[str, QuditWord, List[QuditWord]]]:
    """Fixed, deterministic test words for the sampling bound.

    Each word carries a cancelling background (Alice holds ``i mod d`` and
    Bob 1 holds its negative, so the background sums to zero) plus errors on
    the last Bob at ``K = weight * N`` positions placed by one of
    :data:`FAMILY_PATTERNS`. Error symbols cycle through ``1..d-1``.
    """
    family = []
    i = np.arange(N)
    for weight in FAMILY_WEIGHTS:
        K = int(round(weight * N))
        for pattern in FAMILY_PATTERNS:
            if K in (0, N) and pattern != "clustered":
                continue
            a = i % d
            bobs = [np.zeros(N, dtype=np.int64) for _ in range(p)]
            bobs[0] = (bobs[0] - a) % d
            pos = _error_positions(N, K, pattern)
            errs = 1 + (np.arange(pos.size) % (d - 1))
            bobs[-1][pos] = (bobs[-1][pos] + errs) % d
            name = f"w={weight:g}/{pattern}"
            family.append((name, QuditWord(a, d), [QuditWord(b, d) for b in bobs]))
    return family
