"""End-to-end Monte Carlo run of the entanglement-based protocol.

One run draws every round from the depolarised GHZ source, lets Alice pick
the Fourier test subset and then the Z-estimation subset (in that order),
evaluates the finite-key bound at the observed statistics and, unless no key
can be extracted, performs idealised error correction with a real
verification hash followed by Toeplitz privacy amplification.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import finite_key
from .core_math import QuditWord
from .finite_key import ProtocolParams
from .hashing import encoding_loss_bits, hash_keys, privacy_amplify_many
from .quantum_sim import Basis, fast_sample_rounds
from .streams import named_streams

TRANSCRIPT_SCHEMA = "hdqcka-transcript v1"

ABORT_NO_KEY = "no extractable key"
ABORT_EC = "error-correction verification failed"


def estimate_qz(alice_digits, bob_digits_per_bob: Sequence) -> float:
    """Largest disagreement rate between Alice and any single Bob."""
    a = np.asarray(alice_digits)
    if a.size == 0:
        raise ValueError("need at least one estimation round")
    worst = 0.0
    for i, b in enumerate(bob_digits_per_bob):
        b = np.asarray(b)
        if b.shape != a.shape:
            raise ValueError(f"Bob {i + 1} has {b.size} digits, Alice has {a.size}")
        worst = max(worst, float(np.count_nonzero(a != b)) / a.size)
    return worst


def digest_bits(epsilon_ec: float) -> int:
    """Size of the EC verification hash, ``ceil(log2(1/eps_EC))``."""
    return max(1, math.ceil(math.log2(1.0 / epsilon_ec) - 1e-9))


def ec_simulate(
    alice_key: QuditWord,
    bob_keys: Sequence[QuditWord],
    leak_budget: float,
    epsilon_ec: float,
    rng: np.random.Generator,
    correct: bool = True,
) -> Tuple[List[QuditWord], bool]:
    """Idealised one-way error correction plus hash verification.

    Every Bob adopts Alice's key; the cost is the ``leak_budget`` charged by
    the caller, never bits actually exchanged here. Alice then publishes a
    Toeplitz digest of ``ceil(log2(1/eps_EC))`` bits and each Bob compares it
    with the digest of their own key. ``correct=False`` skips the correction
    step so the collision behaviour of the digest can be tested.
    """
    for i, b in enumerate(bob_keys):
        if len(b) != len(alice_key) or b.d != alice_key.d:
            raise ValueError(f"Bob {i + 1} key does not match Alice's length/dimension")
    if leak_budget < 0:
        raise ValueError("leak budget cannot be negative")
    corrected = [alice_key if correct else b for b in bob_keys]
    k = digest_bits(epsilon_ec)
    seed = int(rng.integers(0, 2**63 - 1))
    reference, *digests = hash_keys([alice_key] + corrected, k, seed)
    ok = all(np.array_equal(reference, h) for h in digests)
    return corrected, ok


def key_digest(bits: np.ndarray) -> str:
    h = hashlib.sha256()
    h.update(len(bits).to_bytes(8, "big"))
    h.update(np.packbits(bits).tobytes())
    return h.hexdigest()


@dataclass
class TranscriptRecord:
    seed: int
    params: dict
    Q: float
    fourier_subset: List[int]
    z_subset: List[int]
    fourier_outcomes: List[List[int]]
    w_s: float
    Q_Z: float
    delta: float
    nu: float
    abort: bool
    abort_reason: Optional[str]
    leak_EC: float
    ell: int
    rate: float
    eps_PA: float
    eps_fail: float
    ec_digest_bits: int
    ec_digest_ok: Optional[bool]
    encoding_loss_bits: float
    key_digests: List[str] = field(default_factory=list)
    keys_identical: Optional[bool] = None
    final_keys: Optional[List[str]] = None
    schema: str = TRANSCRIPT_SCHEMA

    def summary(self) -> dict:
        return {
            "seed": self.seed, "d": self.params["d"], "p": self.params["p"], "Q": self.Q,
            "N": self.params["N"], "N_total": self.params["N_total"], "abort": self.abort,
            "abort_reason": self.abort_reason or "", "w_s": self.w_s, "Q_Z": self.Q_Z,
            "ell": self.ell, "rate": self.rate,
        }

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "TranscriptRecord":
        data = json.loads(text)
        if data.get("schema") != TRANSCRIPT_SCHEMA:
            raise ValueError(f"unsupported transcript schema {data.get('schema')!r}")
        return cls(**data)


def run_protocol(
    params: ProtocolParams,
    q: float,
    seed: int,
    insecure_dump: bool = False,
) -> TranscriptRecord:
    """Execute one protocol run; deterministic in ``(params, q, seed)``."""
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"Q must lie in [0, 1], got {q!r}")
    d, p, m, n = params.d, params.p, params.m, params.n
    total = params.n_total
    rs = named_streams(seed, "rounds", "subsets", "ec", "pa")

    order = rs["subsets"].permutation(total)
    t = np.sort(order[:m])
    z_set = np.sort(order[m : 2 * m])
    key_idx = np.sort(order[2 * m :])

    outcomes = np.empty((total, p + 1), dtype=np.int64)
    outcomes[t] = fast_sample_rounds(d, p, q, Basis.FOURIER, m, rs["rounds"])
    z_rounds = np.sort(np.concatenate([z_set, key_idx]))
    outcomes[z_rounds] = fast_sample_rounds(d, p, q, Basis.Z, n + m, rs["rounds"])

    fourier = outcomes[t]
    sums = fourier.sum(axis=1) % d
    w_s = float(np.count_nonzero(sums)) / m
    z_est = outcomes[z_set]
    q_z = estimate_qz(z_est[:, 0], [z_est[:, i] for i in range(1, p + 1)])

    report = finite_key.evaluate_observed(params, w_s, q_z, q=q)
    record = TranscriptRecord(
        seed=int(seed), params=params.to_dict(), Q=float(q),
        fourier_subset=t.tolist(), z_subset=z_set.tolist(),
        fourier_outcomes=fourier.tolist(), w_s=w_s, Q_Z=q_z,
        delta=report.delta, nu=report.nu, abort=False, abort_reason=None,
        leak_EC=report.leak_EC, ell=report.ell, rate=report.rate,
        eps_PA=report.eps_PA, eps_fail=report.eps_fail,
        ec_digest_bits=digest_bits(params.epsilon_ec), ec_digest_ok=None,
        encoding_loss_bits=encoding_loss_bits(n, d),
    )
    if report.ell <= 0:
        record.abort, record.abort_reason = True, ABORT_NO_KEY
        record.rate = 0.0
        return record

    raw = outcomes[key_idx]
    alice = QuditWord(raw[:, 0], d)
    bobs = [QuditWord(raw[:, i], d) for i in range(1, p + 1)]
    corrected, ok = ec_simulate(alice, bobs, report.leak_EC, params.epsilon_ec, rs["ec"])
    record.ec_digest_ok = ok
    if not ok:
        record.abort, record.abort_reason = True, ABORT_EC
        record.ell, record.rate = 0, 0.0
        return record

    hash_seed = int(rs["pa"].integers(0, 2**63 - 1))
    finals = privacy_amplify_many([alice] + corrected, report.ell, hash_seed)
    record.key_digests = [key_digest(k) for k in finals]
    record.keys_identical = all(np.array_equal(finals[0], k) for k in finals[1:])
    if insecure_dump:
        record.final_keys = [np.packbits(k).tobytes().hex() for k in finals]
    return record
