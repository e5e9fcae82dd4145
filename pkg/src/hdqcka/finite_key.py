"""Finite-key length and rate of the high-dimensional conference key protocol.

Signal accounting
-----------------
``N`` is the number of rounds that enter the Fourier sampling test: ``m`` of
them are tested and the remaining ``n = N - m`` form the raw key. A further
``m`` Z-basis rounds are spent estimating the Z error rate, so the protocol
sends ``N_total = n + 2m`` signals and the rate is ``ell / (n + 2m)``. The
default sample size is ``m = 0.07 N``.
"""
from __future__ import annotations

import dataclasses
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import product
from typing import Dict, Iterable, List, Optional, Sequence

from .core_math import d_ary_entropy_bits
from .quantum_sim import z_error_probability
from .sampling import delta_for_epsilon

DEFAULT_EPSILON = 1e-36
DEFAULT_EPSILON_EC = 1e-12
DEFAULT_M_FRACTION = 0.07

#: How the Fourier-test statistic is modelled from the depolarisation strength.
#: ``nominal`` uses Q/d, ``exact`` uses the density-matrix value Q(1 - 1/d).
NOISE_MODELS = ("nominal", "exact")


@dataclass(frozen=True)
class ProtocolParams:
    d: int
    p: int
    N: int
    m: Optional[int] = None
    epsilon: float = DEFAULT_EPSILON
    epsilon_ec: float = DEFAULT_EPSILON_EC
    m_fraction: float = DEFAULT_M_FRACTION

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise ValueError(f"d must be an integer >= 2, got {self.d!r}")
        if int(self.p) != self.p or self.p < 1:
            raise ValueError(f"p must be an integer >= 1, got {self.p!r}")
        if int(self.N) != self.N or self.N < 2:
            raise ValueError(f"N must be an integer >= 2, got {self.N!r}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "N", int(self.N))
        if self.m is None:
            if not 0 < self.m_fraction <= 0.5:
                raise ValueError(f"m_fraction must lie in (0, 0.5], got {self.m_fraction!r}")
            object.__setattr__(self, "m", max(1, int(round(self.m_fraction * self.N))))
        object.__setattr__(self, "m", int(self.m))
        if not 1 <= self.m <= self.N / 2:
            raise ValueError(f"sample size must satisfy 1 <= m <= N/2, got m={self.m}, N={self.N}")
        if not 0 < self.epsilon < 1:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon!r}")
        if not 0 < self.epsilon_ec < 1:
            raise ValueError(f"epsilon_ec must lie in (0, 1), got {self.epsilon_ec!r}")

    @property
    def n(self) -> int:
        return self.N - self.m

    @property
    def n_total(self) -> int:
        return self.n + 2 * self.m

    def replace(self, **changes) -> "ProtocolParams":
        if "N" in changes and "m" not in changes:
            changes["m"] = None
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "d": self.d, "p": self.p, "N": self.N, "m": self.m, "n": self.n,
            "N_total": self.n_total, "epsilon": self.epsilon, "epsilon_ec": self.epsilon_ec,
        }


@dataclass
class KeyRateReport:
    params: ProtocolParams
    Q: Optional[float]
    w_s: float
    Q_Z: float
    delta: float
    nu: float
    leak_EC: float
    ell: int
    rate: float
    eps_PA: float
    eps_fail: float

    def as_row(self) -> Dict[str, object]:
        pr = self.params
        return {
            "d": pr.d, "p": pr.p, "Q": self.Q, "N": pr.N, "N_total": pr.n_total,
            "m": pr.m, "n": pr.n, "delta": self.delta, "nu": self.nu,
            "w_s_model": self.w_s, "Q_Z": self.Q_Z, "leak_EC": self.leak_EC,
            "ell": self.ell, "rate": self.rate, "eps_PA": self.eps_PA,
            "eps_fail": self.eps_fail,
        }


def nu_correction(N: int, m: int, p: int, epsilon_ec: float) -> float:
    """Finite-statistics slack on the Z error rate,
    ``sqrt(N (m+1) ln(4p/eps_EC) / (m^2 (N-m)))``.
    """
    if m >= N:
        raise ValueError(f"nu diverges for m >= N (m={m}, N={N})")
    if m < 1 or p < 1:
        raise ValueError(f"need m >= 1 and p >= 1, got m={m}, p={p}")
    log_term = math.log(4 * p / epsilon_ec)
    if log_term < 0:
        raise ValueError(f"ln(4p/eps_EC) < 0 for p={p}, eps_EC={epsilon_ec}")
    return math.sqrt(N * (m + 1) * log_term / (m * m * (N - m)))


def _clamped_entropy_bits(d: int, x: float) -> float:
    # entropy bounds are only monotone up to the maximiser (d-1)/d
    if x >= (d - 1) / d:
        return math.log2(d)
    return d_ary_entropy_bits(d, max(0.0, x))


def leak_ec_bound(n: int, d: int, q_z: float, nu: float, epsilon_ec: float) -> float:
    """Bits disclosed by one-way error correction plus its verification hash:
    ``n h(Q_Z+nu) + n (Q_Z+nu) log2(d-1) + log2(1/eps_EC)``.
    """
    return n * _clamped_entropy_bits(d, q_z + nu) + math.log2(1.0 / epsilon_ec)


def key_length_real(params: ProtocolParams, w_s: float, leak_ec: float, delta: Optional[float] = None) -> float:
    """Unclamped, unfloored key length."""
    if not 0.0 <= w_s <= 1.0:
        raise ValueError(f"w_s must lie in [0, 1], got {w_s!r}")
    if delta is None:
        delta = delta_for_epsilon(params.m, params.n, params.epsilon)
    d = params.d
    entropy = _clamped_entropy_bits(d, w_s + delta)
    return params.n * (math.log2(d) - entropy) - leak_ec - 2.0 * math.log2(1.0 / params.epsilon)


def key_length(params: ProtocolParams, w_s: float, leak_ec: float, delta: Optional[float] = None) -> int:
    """Extractable key length in bits, floored and clamped at zero."""
    return max(0, math.floor(key_length_real(params, w_s, leak_ec, delta)))


def key_rate(params: ProtocolParams, report_or_ell) -> float:
    ell = report_or_ell.ell if isinstance(report_or_ell, KeyRateReport) else report_or_ell
    return ell / (params.n + 2 * params.m)


def security_epsilons(epsilon: float):
    """``(eps_PA, eps_fail) = (5 eps + (20 eps)^(1/3), (5 eps / 2)^(1/3))``.

    No clamping: for large ``epsilon`` ``eps_PA`` exceeds 1, which simply
    means the key carries no security guarantee.
    """
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    return 5.0 * epsilon + (20.0 * epsilon) ** (1.0 / 3.0), (2.5 * epsilon) ** (1.0 / 3.0)


def modeled_statistics(d: int, q: float, noise_model: str = "nominal"):
    """Expected ``(w_s, Q_Z)`` under global depolarisation of strength ``q``."""
    if noise_model not in NOISE_MODELS:
        raise ValueError(f"noise model must be one of {NOISE_MODELS}, got {noise_model!r}")
    q_z = z_error_probability(d, q)
    w_s = q / d if noise_model == "nominal" else q_z
    return w_s, q_z


def evaluate_observed(params: ProtocolParams, w_s: float, q_z: float, q: Optional[float] = None) -> KeyRateReport:
    """Key-rate report from observed (or modelled) test statistics."""
    delta = delta_for_epsilon(params.m, params.n, params.epsilon)
    nu = nu_correction(params.N, params.m, params.p, params.epsilon_ec)
    leak = leak_ec_bound(params.n, params.d, q_z, nu, params.epsilon_ec)
    ell = key_length(params, w_s, leak, delta)
    eps_pa, eps_fail = security_epsilons(params.epsilon)
    return KeyRateReport(
        params=params, Q=q, w_s=w_s, Q_Z=q_z, delta=delta, nu=nu, leak_EC=leak,
        ell=ell, rate=key_rate(params, ell), eps_PA=eps_pa, eps_fail=eps_fail,
    )


def evaluate(params: ProtocolParams, q: float, noise_model: str = "nominal") -> KeyRateReport:
    """Key-rate report for a depolarising channel of strength ``q``."""
    w_s, q_z = modeled_statistics(params.d, q, noise_model)
    return evaluate_observed(params, w_s, q_z, q=q)


def asymptotic_rate(d: int, q: float, m_fraction: float = DEFAULT_M_FRACTION, noise_model: str = "nominal") -> float:
    """Limit of the rate as ``N -> inf`` (``delta, nu -> 0``, constant terms
    vanish) with the sample fraction held fixed.
    """
    w_s, q_z = modeled_statistics(d, q, noise_model)
    per_digit = math.log2(d) - _clamped_entropy_bits(d, w_s) - _clamped_entropy_bits(d, q_z)
    return max(0.0, per_digit) * (1 - m_fraction) / (1 + m_fraction)


@dataclass
class SweepRow:
    index: int
    d: int
    p: int
    Q: float
    N: int
    report: Optional[KeyRateReport] = None
    error: Optional[str] = None

    def as_row(self) -> Dict[str, object]:
        if self.report is not None:
            row = self.report.as_row()
            row["error"] = ""
            return row
        row = {k: None for k in SWEEP_COLUMNS}
        row.update(d=self.d, p=self.p, Q=self.Q, N=self.N, error=self.error)
        return row


SWEEP_COLUMNS = [
    "d", "p", "Q", "N", "N_total", "m", "n", "delta", "nu", "w_s_model", "Q_Z",
    "leak_EC", "ell", "rate", "eps_PA", "eps_fail", "error",
]


def default_threads() -> int:
    env = os.environ.get("HDQCKA_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def grid_points(ds: Iterable[int], ps: Iterable[int], qs: Iterable[float], ns: Iterable[int]) -> List[tuple]:
    return list(product(ds, ps, qs, ns))


@dataclass(frozen=True)
class ParamsTemplate:
    """Settings shared by every point of a sweep."""

    epsilon: float = DEFAULT_EPSILON
    epsilon_ec: float = DEFAULT_EPSILON_EC
    m_fraction: float = DEFAULT_M_FRACTION

    def build(self, d: int, p: int, N: int) -> ProtocolParams:
        return ProtocolParams(
            d=d, p=p, N=N, epsilon=self.epsilon, epsilon_ec=self.epsilon_ec, m_fraction=self.m_fraction
        )


def sweep(
    points: Sequence[tuple],
    template: ParamsTemplate = ParamsTemplate(),
    noise_model: str = "nominal",
    threads: Optional[int] = None,
) -> List[SweepRow]:
    """Evaluate every ``(d, p, Q, N)`` point; rows keep grid order.

    A point that fails validation yields a row with ``error`` set and the
    sweep carries on.
    """

    def one(item):
        i, (d, p, q, N) = item
        row = SweepRow(i, d, p, q, N)
        try:
            if not 0.0 <= q <= 1.0:
                raise ValueError(f"Q must lie in [0, 1], got {q!r}")
            row.report = evaluate(template.build(d, p, N), q, noise_model)
        except (ValueError, OverflowError) as exc:
            row.error = str(exc)
        return row

    items = list(enumerate(points))
    threads = threads or default_threads()
    if threads <= 1 or len(items) < 64:
        return [one(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, items))
