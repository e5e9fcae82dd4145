"""Acceptance checks, one per criterion.

Each ``criterion_k`` returns ``(passed, detail)``. Under pytest every check
prints a single ``ACCEPTANCE k PASS|FAIL`` line and then asserts; running this
file directly prints all ten lines.
"""
import itertools
import math
import sys
import time

import numpy as np
import pytest
from scipy import stats

from hdqcka.core_math import binary_entropy, hamming_ball_volume_exact
from hdqcka.core_math import log2_hamming_ball_volume_bound
from hdqcka.finite_key import ProtocolParams, asymptotic_rate, evaluate, evaluate_observed, security_epsilons
from hdqcka.protocol import run_protocol
from hdqcka.quantum_sim import amplitudes_in_fourier_basis, exact_born_distribution, fast_sample_rounds, ghz_state
from hdqcka.sampling import SamplingStrategy, adversarial_family, epsilon_cl_bound, mc_failure_frequency
from hdqcka.streams import make_stream


def timed(limit):
    def wrap(fn):
        def run():
            start = time.perf_counter()
            ok, detail = fn()
            elapsed = time.perf_counter() - start
            in_time = elapsed < limit
            return ok and in_time, f"{detail}; {elapsed:.2f}s (limit {limit:g}s)"

        run.__name__ = fn.__name__
        return run

    return wrap


@timed(10)
def criterion_1():
    worst = 0.0
    for d, p in itertools.product(range(2, 7), (1, 2, 3)):
        probs = np.abs(amplitudes_in_fourier_basis(ghz_state(d, p))) ** 2
        words = np.array(list(itertools.product(range(d), repeat=p + 1)))
        target = np.where(words.sum(axis=1) % d == 0, d**-p, 0.0)
        worst = max(worst, float(np.max(np.abs(probs - target))))
    return worst <= 1e-10, f"max deviation {worst:.2e} over d 2..6, p 1..3"


@timed(60)
def criterion_2():
    draws, pmin, extra = 100_000, 1.0, 0
    rng = make_stream(2024)
    for d, p, q, basis in itertools.product((2, 3), (1, 2), (0.0, 0.2, 0.6), ("Z", "F")):
        exact = exact_born_distribution(d, p, q, basis)
        out = fast_sample_rounds(d, p, q, basis, draws, rng)
        counts = np.bincount(np.ravel_multi_index(out.T, (d,) * (p + 1)), minlength=exact.size)
        support = exact > 1e-12
        extra += int(counts[~support].sum())
        f_exp = exact[support] / exact[support].sum() * draws
        if support.sum() > 1:
            pmin = min(pmin, stats.chisquare(counts[support], f_exp).pvalue)
    return pmin > 1e-3 and extra == 0, f"min chi-square p-value {pmin:.3g}, draws off support {extra}"


@timed(120)
def criterion_3():
    N, m, trials = 200, 100, 100_000
    worst, fails = -math.inf, []
    for i, delta in enumerate((0.05, 0.1, 0.2)):
        s = SamplingStrategy(N, m, delta)
        bound = epsilon_cl_bound(delta, m, N)
        for j, (name, qa, qbs) in enumerate(adversarial_family(2, 2, N)):
            rng = make_stream(np.random.SeedSequence(3, spawn_key=(i, j)))
            f = mc_failure_frequency(qa, qbs, s, trials, rng)
            margin = f - (bound + 3 * math.sqrt(f * (1 - f) / trials))
            worst = max(worst, margin)
            if margin > 0:
                fails.append(f"{delta}:{name}")
    return not fails, f"worst freq - (bound + 3 sigma) = {worst:.3g}; violations {fails or 'none'}"


@timed(5)
def criterion_4():
    checked = violations = 0
    for n in range(1, 11):
        for d in range(2, 6):
            for k in range(n + 1):
                gamma = k / n
                if gamma > (d - 1) / d:
                    continue
                checked += 1
                exact = hamming_ball_volume_exact(n, d, gamma)
                violations += math.log2(exact) > log2_hamming_ball_volume_bound(n, d, gamma) + 1e-9
    return violations == 0, f"{violations} violations in {checked} (n, d, gamma) points"


@timed(1)
def criterion_5():
    Ns = np.unique(np.logspace(3, 10, 71).astype(np.int64))
    rates = np.array([evaluate(ProtocolParams(d=2, p=2, N=int(N)), 0.10).rate for N in Ns])
    pos = np.flatnonzero(rates > 0)
    threshold = pos.size > 0 and np.all(rates[: pos[0]] == 0) and np.all(rates[pos[0]:] > 0)
    monotone = bool(np.all(np.diff(rates[pos[0]:]) >= 0)) if pos.size else False
    r7 = evaluate(ProtocolParams(d=2, p=2, N=10**7), 0.10).rate
    asym = asymptotic_rate(2, 0.10)
    closed = 0.93 / 1.07 * (1 - 2 * binary_entropy(0.05))
    r10 = rates[-1]
    checks = {
        "threshold": bool(threshold),
        "rate(1e7) in [0.30, 0.38]": 0.30 <= r7 <= 0.38,
        "monotone": monotone,
        "asymptote 0.371 +- 0.001": abs(asym - 0.371) <= 0.001 and abs(asym - closed) < 1e-12,
        "rate(1e10) below and near asymptote": r10 <= asym and asym - r10 < asym - r7,
    }
    failed = [k for k, v in checks.items() if not v]
    n_star = Ns[pos[0]] if pos.size else None
    return not failed, (f"N* ~ {n_star}, rate(1e7)={r7:.5f}, rate(1e10)={r10:.5f}, asymptote={asym:.5f}; "
                        f"failed: {failed or 'none'}")


@timed(1)
def criterion_6():
    ds = (2, 4, 8, 16)
    r = {q: [evaluate(ProtocolParams(d=d, p=2, N=10**6), q).rate for d in ds] for q in (0.10, 0.30)}
    increasing = all(all(a < b for a, b in zip(v, v[1:])) for v in r.values())
    tolerance = r[0.30][0] == 0.0 and any(x > 0 for x in r[0.30][1:])
    fmt = lambda v: ", ".join(f"{x:.4f}" for x in v)
    return increasing and tolerance, f"Q=0.1: [{fmt(r[0.10])}], Q=0.3: [{fmt(r[0.30])}]"


@timed(1)
def criterion_7():
    pairs = []
    for N in (10**5, 10**6, 10**7):
        l4 = evaluate(ProtocolParams(d=4, p=2, N=N), 0.10).ell
        l2 = evaluate(ProtocolParams(d=2, p=2, N=2 * N), 0.10).ell
        pairs.append((N, l4, l2))
    ok = all(l4 > l2 for _, l4, l2 in pairs)
    return ok, "; ".join(f"N={N:g}: ell(d=4)={l4} vs ell(d=2,2N)={l2}" for N, l4, l2 in pairs)


@timed(1)
def criterion_8():
    rates = [evaluate(ProtocolParams(d=2, p=p, N=10**6), 0.10).rate for p in range(2, 11)]
    spread = max(rates) - min(rates)
    rel = spread / max(rates)
    return rel < 0.01, f"relative spread {rel:.4%} (absolute {spread:.5f} bits/signal)"


@timed(600)
def criterion_9():
    combos = list(itertools.product((2, 3, 4), (1, 2, 3)))
    bad = []
    for run in range(1000):
        d, p = combos[run % len(combos)]
        rec = run_protocol(ProtocolParams(d=d, p=p, N=10**5), 0.0, seed=run)
        if rec.abort or not rec.keys_identical:
            bad.append((d, p, run, rec.abort_reason))
    # N_total = n + 2m = 1e6 exactly at this N
    params = ProtocolParams(d=2, p=2, N=934_579)
    assert params.n_total == 10**6
    rec = run_protocol(params, 0.10, seed=1)
    analytic = evaluate_observed(params, rec.w_s, rec.Q_Z).ell
    rel = abs(rec.ell - analytic) / analytic
    ok = not bad and rel <= 0.02 and rec.keys_identical
    return ok, (f"noiseless runs with abort or mismatch: {len(bad)}/1000; "
                f"ell={rec.ell} vs analytic {analytic} at realised stats (rel {rel:.2%})")


@timed(1)
def criterion_10():
    eps_pa, eps_fail = security_epsilons(1e-36)
    ok = all(1e-13 <= e <= 1e-11 for e in (eps_pa, eps_fail))
    return ok, f"eps_PA={eps_pa:.3e}, eps_fail={eps_fail:.3e}"


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9, criterion_10]


def report_line(k, ok, detail):
    return f"ACCEPTANCE {k:>2} {'PASS' if ok else 'FAIL'}: {detail}"


@pytest.mark.parametrize("k", range(1, 11))
def test_acceptance(k, capsys):
    ok, detail = CRITERIA[k - 1]()
    with capsys.disabled():
        print("\n" + report_line(k, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    results = []
    for k, crit in enumerate(CRITERIA, 1):
        ok, detail = crit()
        results.append(ok)
        print(report_line(k, ok, detail), flush=True)
    sys.exit(0 if all(results) else 1)
