"""Single-round simulation of the qudit GHZ source.

Two routes produce a round outcome:

* the statevector route (:func:`ghz_state`, :func:`depolarize`,
  :func:`measure_round`) builds the density operator and samples from its
  Born distribution; it is limited to small ``d**(p+1)`` and exists for
  validation;
* :func:`fast_sample_round` / :func:`fast_sample_rounds` draw from the same
  distribution directly and drive every protocol run.
"""
from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass

import numpy as np

from .core_math import QuditWord

#: Maximum number of amplitudes in a pure state on the statevector route.
MAX_AMPLITUDES = 2**20
#: Maximum dimension of a density operator (matrix is DIM x DIM complex).
MAX_DENSITY_DIM = 2**10

STATE_TOL = 1e-10


class Basis(str, enum.Enum):
    Z = "Z"
    FOURIER = "F"

    @classmethod
    def parse(cls, value) -> "Basis":
        if isinstance(value, cls):
            return value
        v = str(value).strip().upper()
        if v in ("Z", "COMPUTATIONAL"):
            return cls.Z
        if v in ("F", "FOURIER", "X"):
            return cls.FOURIER
        raise ValueError(f"unknown basis {value!r}")


@dataclass(frozen=True)
class PureState:
    """Amplitude vector over ``parties`` qudits of dimension ``d``.

    Index order is lexicographic with party 0 (Alice) most significant.
    """

    amplitudes: np.ndarray
    d: int
    parties: int

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.shape != (self.d**self.parties,):
            raise ValueError(f"expected {self.d ** self.parties} amplitudes, got shape {amps.shape}")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > STATE_TOL:
            raise ValueError(f"state not normalised: squared norm {norm}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def p(self) -> int:
        return self.parties - 1


@dataclass(frozen=True)
class MixedState:
    """Density operator on ``parties`` qudits of dimension ``d``."""

    matrix: np.ndarray
    d: int
    parties: int

    def __post_init__(self):
        rho = np.asarray(self.matrix, dtype=np.complex128)
        dim = self.d**self.parties
        if rho.shape != (dim, dim):
            raise ValueError(f"expected {dim}x{dim} matrix, got shape {rho.shape}")
        if np.max(np.abs(rho - rho.conj().T)) > STATE_TOL:
            raise ValueError("density operator is not Hermitian")
        tr = np.trace(rho).real
        if abs(tr - 1.0) > STATE_TOL:
            raise ValueError(f"density operator has trace {tr}")
        if np.linalg.eigvalsh(rho).min() < -STATE_TOL:
            raise ValueError("density operator has a negative eigenvalue")
        rho.setflags(write=False)
        object.__setattr__(self, "matrix", rho)

    @property
    def p(self) -> int:
        return self.parties - 1


@dataclass(frozen=True)
class RoundOutcome:
    """Measurement results of one round, ordered (A, B_1, ..., B_p)."""

    basis: Basis
    outcomes: QuditWord


def fourier_matrix(d: int) -> np.ndarray:
    """Unitary whose column ``j`` is the Fourier vector ``|j>^F``."""
    k = np.arange(d)
    return np.exp(2j * np.pi * np.outer(k, k) / d) / math.sqrt(d)


def tensor_fourier_matrix(d: int, parties: int) -> np.ndarray:
    f = fourier_matrix(d)
    out = np.ones((1, 1), dtype=np.complex128)
    for _ in range(parties):
        out = np.kron(out, f)
    return out


def fourier_vector(d: int, j: int) -> PureState:
    if not 0 <= j < d:
        raise ValueError(f"Fourier index j={j} outside [0, {d - 1}]")
    return PureState(fourier_matrix(d)[:, j], d, 1)


def ghz_state(d: int, p: int, max_amplitudes: int = MAX_AMPLITUDES) -> PureState:
    """``(1/sqrt d) sum_a |a, ..., a>`` on Alice plus ``p`` Bobs."""
    if d < 2 or p < 1:
        raise ValueError(f"need d >= 2 and p >= 1, got d={d}, p={p}")
    parties = p + 1
    size = d**parties
    if size > max_amplitudes:
        raise ValueError(
            f"d^(p+1) = {size} amplitudes exceeds the statevector limit of {max_amplitudes}"
        )
    amps = np.zeros(size, dtype=np.complex128)
    # index of |a,...,a> is a * (1 + d + ... + d^p)
    stride = sum(d**i for i in range(parties))
    amps[np.arange(d) * stride] = 1.0 / math.sqrt(d)
    return PureState(amps, d, parties)


def amplitudes_in_fourier_basis(state: PureState) -> np.ndarray:
    """Coefficients ``<j_0 ... j_p|^F psi>`` in the product Fourier basis."""
    d, k = state.d, state.parties
    fdag = fourier_matrix(d).conj().T
    t = state.amplitudes.reshape((d,) * k)
    for axis in range(k):
        t = np.moveaxis(np.tensordot(fdag, t, axes=([1], [axis])), 0, axis)
    return t.reshape(-1)


def depolarize(state: PureState, q: float) -> MixedState:
    """Global depolarisation ``(1-Q)|psi><psi| + Q I / d^(p+1)``."""
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"depolarisation strength must lie in [0, 1], got {q!r}")
    dim = state.d**state.parties
    if dim > MAX_DENSITY_DIM:
        raise ValueError(f"density operator dimension {dim} exceeds the limit of {MAX_DENSITY_DIM}")
    psi = state.amplitudes
    rho = (1.0 - q) * np.outer(psi, psi.conj()) + (q / dim) * np.eye(dim)
    return MixedState(rho, state.d, state.parties)


def born_distribution(state: MixedState, basis) -> np.ndarray:
    """Outcome probabilities when every party measures in ``basis``."""
    basis = Basis.parse(basis)
    rho = state.matrix
    if basis is Basis.Z:
        probs = np.diag(rho).real.copy()
    else:
        u = tensor_fourier_matrix(state.d, state.parties)
        # p(j) = <j^F| rho |j^F> with |j^F> the j-th column of u
        probs = np.einsum("kj,kl,lj->j", u.conj(), rho, u).real
    probs[probs < 0] = 0.0
    return probs / probs.sum()


@functools.lru_cache(maxsize=256)
def _exact_born(d: int, p: int, q: float, basis: Basis) -> np.ndarray:
    probs = born_distribution(depolarize(ghz_state(d, p), q), basis)
    probs.setflags(write=False)
    return probs


def exact_born_distribution(d: int, p: int, q: float, basis) -> np.ndarray:
    """Cached Born distribution of the depolarised GHZ state (read-only)."""
    return _exact_born(int(d), int(p), float(q), Basis.parse(basis))


def _index_to_word(index: int, d: int, parties: int) -> np.ndarray:
    return np.array(np.unravel_index(index, (d,) * parties), dtype=np.int64)


def measure_round(state: MixedState, basis, rng: np.random.Generator) -> RoundOutcome:
    basis = Basis.parse(basis)
    probs = born_distribution(state, basis)
    idx = int(rng.choice(probs.size, p=probs))
    return RoundOutcome(basis, QuditWord(_index_to_word(idx, state.d, state.parties), state.d))


def fast_sample_rounds(d: int, p: int, q: float, basis, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``size`` i.i.d. rounds; returns an int array of shape ``(size, p+1)``.

    With probability ``1-Q`` a round is ideal GHZ (Z: one common uniform
    symbol; Fourier: uniform over words with zero mod-d sum), otherwise all
    ``p+1`` symbols are independent and uniform.
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"depolarisation strength must lie in [0, 1], got {q!r}")
    basis = Basis.parse(basis)
    parties = p + 1
    noisy = rng.random(size) < q
    out = rng.integers(0, d, size=(size, parties), dtype=np.int64)
    ideal = ~noisy
    if basis is Basis.Z:
        out[ideal, 1:] = out[ideal, :1]
    else:
        out[ideal, 0] = (-out[ideal, 1:].sum(axis=1)) % d
    return out


def fast_sample_round(d: int, p: int, q: float, basis, rng: np.random.Generator) -> RoundOutcome:
    basis = Basis.parse(basis)
    row = fast_sample_rounds(d, p, q, basis, 1, rng)[0]
    return RoundOutcome(basis, QuditWord(row, d))


def z_error_probability(d: int, q: float) -> float:
    """Probability that one Bob's Z digit differs from Alice's: ``Q(1-1/d)``."""
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"depolarisation strength must lie in [0, 1], got {q!r}")
    return q * (1.0 - 1.0 / d)


def fourier_nonzero_sum_probability(d: int, q: float) -> float:
    """Exact ``Pr[round sum != 0]`` for a Fourier round of the depolarised state.

    Equals ``Q(1-1/d)`` for every ``p``. This coincides with the ``Q/d``
    evaluation convention only at ``d = 2``.
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"depolarisation strength must lie in [0, 1], got {q!r}")
    return q * (1.0 - 1.0 / d)
