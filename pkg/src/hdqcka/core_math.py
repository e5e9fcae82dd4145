"""Alphabet words, mod-d round sums, entropies and Hamming-ball counting."""
from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Sequence, Union

import numpy as np

Real = Union[float, int, Fraction]


class QuditWord:
    """Immutable string over the alphabet ``{0, ..., d-1}``.

    Symbols are held in a read-only ``int64`` numpy array so that long raw
    keys (millions of digits) stay cheap to slice and sum.
    """

    __slots__ = ("_symbols", "_d")

    def __init__(self, symbols: Union[Sequence[int], np.ndarray], d: int):
        if int(d) != d or d < 2:
            raise ValueError(f"dimension must be an integer >= 2, got {d!r}")
        arr = np.array(symbols, dtype=np.int64).reshape(-1)
        if arr.size and (arr.min() < 0 or arr.max() >= d):
            raise ValueError(f"symbols must lie in [0, {d - 1}]")
        arr.setflags(write=False)
        self._symbols = arr
        self._d = int(d)

    @property
    def d(self) -> int:
        return self._d

    @property
    def symbols(self) -> np.ndarray:
        return self._symbols

    def __len__(self) -> int:
        return int(self._symbols.size)

    def __iter__(self):
        return (int(s) for s in self._symbols)

    def __getitem__(self, idx) -> "QuditWord | int":
        if isinstance(idx, (int, np.integer)):
            return int(self._symbols[idx])
        return QuditWord(self._symbols[idx], self._d)

    def __add__(self, other: "QuditWord") -> "QuditWord":
        return self.concat(other)

    def concat(self, other: "QuditWord") -> "QuditWord":
        if other.d != self._d:
            raise ValueError(f"cannot concatenate words over d={self._d} and d={other.d}")
        return QuditWord(np.concatenate([self._symbols, other.symbols]), self._d)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, QuditWord):
            return NotImplemented
        return self._d == other.d and np.array_equal(self._symbols, other.symbols)

    def __hash__(self) -> int:
        return hash((self._d, self._symbols.tobytes()))

    def __repr__(self) -> str:
        if len(self) <= 16:
            body = ",".join(str(s) for s in self._symbols)
        else:
            body = ",".join(str(s) for s in self._symbols[:8]) + f",...({len(self)} symbols)"
        return f"QuditWord(d={self._d}, ({body}))"


def _as_symbols(q: Union[QuditWord, np.ndarray, Sequence[int]]) -> np.ndarray:
    return q.symbols if isinstance(q, QuditWord) else np.asarray(q)


def relative_hamming_weight(q: Union[QuditWord, np.ndarray, Sequence[int]]) -> float:
    """Fraction of non-zero characters in ``q``."""
    s = _as_symbols(q)
    if s.size == 0:
        raise ValueError("undefined weight: empty word")
    return float(np.count_nonzero(s)) / s.size


def round_sums(q_a: QuditWord, q_bs: Iterable[QuditWord]) -> QuditWord:
    """Per-index mod-d sum of Alice's word and every Bob's word."""
    q_bs = list(q_bs)
    d = q_a.d
    total = q_a.symbols.copy()
    for i, qb in enumerate(q_bs):
        if qb.d != d:
            raise ValueError(f"dimension mismatch: Alice d={d}, Bob {i + 1} d={qb.d}")
        if len(qb) != len(q_a):
            raise ValueError(f"length mismatch: Alice {len(q_a)}, Bob {i + 1} {len(qb)}")
        total += qb.symbols
    return QuditWord(total % d, d)


def binary_entropy(x: float) -> float:
    """Binary Shannon entropy h(x) in bits, with 0 log 0 = 0."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"entropy argument must lie in [0, 1], got {x!r}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def d_ary_entropy(d: int, x: float) -> float:
    """d-ary entropy

    ``H_d(x) = x log_d(d-1) - x log_d x - (1-x) log_d(1-x)``

    in d-ary units. Boundary terms use ``0 log 0 = 0``; the value is 1 at the
    maximiser ``x = (d-1)/d``.
    """
    if d < 2:
        raise ValueError(f"dimension must be >= 2, got {d!r}")
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"entropy argument must lie in [0, 1], got {x!r}")
    return d_ary_entropy_bits(d, x) / math.log2(d)


def d_ary_entropy_bits(d: int, x: float) -> float:
    """``H_d(x) * log2(d)``, i.e. ``h(x) + x log2(d-1)``."""
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"entropy argument must lie in [0, 1], got {x!r}")
    extra = x * math.log2(d - 1) if d > 2 and x > 0.0 else 0.0
    return binary_entropy(x) + extra


def _max_weight_count(n: int, gamma: Real) -> int:
    # Largest k with k/n <= gamma, by exact rational comparison.
    g = gamma if isinstance(gamma, (Fraction, int)) else Fraction(gamma).limit_denominator(10**12)
    return math.floor(Fraction(g) * n)


def hamming_ball_volume_exact(n: int, d: int, gamma: Real) -> int:
    """Number of words ``y`` in ``A_d^n`` with ``w(y) <= gamma``.

    Exact integer count ``sum_{k <= floor(gamma n)} C(n, k) (d-1)^k``. Float
    ``gamma`` is snapped to the nearest rational with denominator up to 1e12
    so grid points such as ``1/3`` do not lose a term to rounding.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n!r}")
    if not 0 <= gamma <= 1:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma!r}")
    kmax = min(n, _max_weight_count(n, gamma))
    return sum(math.comb(n, k) * (d - 1) ** k for k in range(kmax + 1))


def hamming_ball_volume_bound(n: int, d: int, gamma: Real) -> float:
    """Upper bound ``d^(n H_d(gamma))`` on the Hamming-ball volume.

    Only valid for ``gamma <= (d-1)/d``. Returns ``inf`` if the value
    overflows a double; use :func:`log2_hamming_ball_volume_bound` for the
    log-space value.
    """
    log2v = log2_hamming_ball_volume_bound(n, d, gamma)
    return math.inf if log2v > 1023 else 2.0**log2v


def log2_hamming_ball_volume_bound(n: int, d: int, gamma: Real) -> float:
    if Fraction(gamma).limit_denominator(10**12) > Fraction(d - 1, d):
        raise ValueError(f"gamma={gamma} outside bound validity (gamma <= {d - 1}/{d})")
    return n * d_ary_entropy_bits(d, float(gamma))
