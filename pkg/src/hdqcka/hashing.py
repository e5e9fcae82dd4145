"""Toeplitz two-universal hashing over GF(2).

A key over ``{0..d-1}`` is first encoded injectively as the natural number it
denotes in base ``d`` and written out in ``L = bitlen(d^n - 1)`` bits. Since
``L - n log2 d < 1`` the encoding wastes less than one bit of entropy; the
exact amount is reported by :func:`encoding_loss_bits`.

An ``ell x L`` Toeplitz matrix is defined by ``L + ell - 1`` uniform seed bits;
for distinct inputs the outputs collide with probability exactly ``2^-ell``.
"""
from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import fft as sp_fft

from .core_math import QuditWord
from .streams import make_stream

# beyond this many matrix entries the product is done by FFT convolution
_DIRECT_LIMIT = 4_000_000
# short outputs are cheaper as one contiguous dot product per row
_ROWWISE_LIMIT = 256


def encoded_length(n: int, d: int) -> int:
    """Bits needed for every base-``d`` number with ``n`` digits."""
    if n == 0:
        return 0
    if d & (d - 1) == 0:
        return n * (d.bit_length() - 1)
    return (d**n - 1).bit_length()


def encoding_loss_bits(n: int, d: int) -> float:
    return encoded_length(n, d) - n * math.log2(d)


def _digits_to_int(digits: np.ndarray, d: int) -> int:
    # block digits so each block fits in int64, then merge blocks pairwise
    k = max(1, int(62 // math.log2(d)))
    pad = (-digits.size) % k
    blocks = np.concatenate([np.zeros(pad, dtype=np.int64), digits]).reshape(-1, k)
    vals = np.zeros(blocks.shape[0], dtype=np.int64)
    for col in range(k):
        vals = vals * d + blocks[:, col]
    parts = [int(v) for v in vals]
    base = d**k
    while len(parts) > 1:
        if len(parts) % 2:
            parts.insert(0, 0)
        parts = [hi * base + lo for hi, lo in zip(parts[0::2], parts[1::2])]
        base = base * base
    return parts[0] if parts else 0


def encode_key(key: QuditWord) -> np.ndarray:
    """Big-endian bit vector of the base-``d`` value of ``key``."""
    d, n = key.d, len(key)
    L = encoded_length(n, d)
    if L == 0:
        return np.zeros(0, dtype=np.uint8)
    if d & (d - 1) == 0:
        width = d.bit_length() - 1
        shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
        return ((key.symbols[:, None] >> shifts) & 1).astype(np.uint8).reshape(-1)
    value = _digits_to_int(key.symbols, d)
    raw = np.frombuffer(value.to_bytes((L + 7) // 8, "big"), dtype=np.uint8)
    return np.unpackbits(raw)[-L:]


def toeplitz_seed_bits(hash_seed: int, L: int, ell: int) -> np.ndarray:
    return make_stream(hash_seed).integers(0, 2, size=L + ell - 1, dtype=np.uint8)


def toeplitz_hash(bits: np.ndarray, seed_bits: np.ndarray, ell: int) -> np.ndarray:
    """``T x mod 2`` with ``T[i, j] = seed[i - j + L - 1]``."""
    return toeplitz_hash_many([bits], seed_bits, ell)[0]


def toeplitz_hash_many(inputs, seed_bits: np.ndarray, ell: int):
    """Hash several equal-length bit vectors under one Toeplitz seed.

    Small products are formed directly; otherwise the seed is transformed once
    and every input is handled by FFT convolution, with an integer-exactness
    check on the result.
    """
    inputs = [np.asarray(b) for b in inputs]
    if not inputs:
        return []
    L = inputs[0].size
    if any(b.size != L for b in inputs):
        raise ValueError("all inputs must have the same length")
    if ell == 0:
        return [np.zeros(0, dtype=np.uint8) for _ in inputs]
    if seed_bits.size != L + ell - 1:
        raise ValueError(f"need {L + ell - 1} seed bits, got {seed_bits.size}")
    rev = np.stack([b[::-1] for b in inputs], axis=1)
    if ell * L <= _DIRECT_LIMIT:
        windows = sliding_window_view(seed_bits.astype(np.int64), L)[:ell]
        out = windows @ rev.astype(np.int64)
    elif ell <= _ROWWISE_LIMIT:
        # contiguous row slices keep this a sequence of BLAS products; sums stay below 2^53
        seed = seed_bits.astype(np.float64)
        rev = rev.astype(np.float64)
        out = np.rint(np.stack([seed[i : i + L] @ rev for i in range(ell)])).astype(np.int64)
    else:
        size = sp_fft.next_fast_len(L + ell - 1 + L - 1, real=True)
        seed_f = sp_fft.rfft(seed_bits.astype(np.float64), size)
        conv = sp_fft.irfft(seed_f[:, None] * sp_fft.rfft(rev[::-1].astype(np.float64), size, axis=0), size, axis=0)
        conv = conv[L - 1 : L - 1 + ell]
        out = np.rint(conv)
        if np.max(np.abs(conv - out)) > 0.25:
            raise ArithmeticError("FFT convolution lost integer precision")
        out = out.astype(np.int64)
    out = (out % 2).astype(np.uint8)
    return [out[:, k] for k in range(len(inputs))]


def toeplitz_hash_batch(bits: np.ndarray, seed_bits: np.ndarray, ell: int) -> np.ndarray:
    """Row-wise :func:`toeplitz_hash` for ``bits`` of shape ``(B, L)`` and
    ``seed_bits`` of shape ``(B, L + ell - 1)``.
    """
    L = bits.shape[1]
    windows = sliding_window_view(seed_bits.astype(np.int32), L, axis=1)[:, :ell, :]
    return (np.einsum("bil,bl->bi", windows, bits[:, ::-1].astype(np.int32)) % 2).astype(np.uint8)


def hash_key(key: QuditWord, ell: int, hash_seed: int) -> np.ndarray:
    return hash_keys([key], ell, hash_seed)[0]


def hash_keys(keys, ell: int, hash_seed: int):
    """Hash equal-length keys with the same seeded Toeplitz matrix."""
    encoded = [encode_key(k) for k in keys]
    seed = toeplitz_seed_bits(hash_seed, encoded[0].size, ell)
    return toeplitz_hash_many(encoded, seed, ell)


def privacy_amplify(raw_key: QuditWord, ell: int, hash_seed: int) -> np.ndarray:
    """Compress ``raw_key`` to ``ell`` bits with a seeded Toeplitz hash."""
    cap = math.floor(len(raw_key) * math.log2(raw_key.d))
    if not 0 <= ell <= cap:
        raise ValueError(f"output length {ell} outside [0, {cap}]")
    return hash_key(raw_key, ell, hash_seed)


def privacy_amplify_many(raw_keys, ell: int, hash_seed: int):
    """:func:`privacy_amplify` for several keys sharing one public seed."""
    for k in raw_keys:
        cap = math.floor(len(k) * math.log2(k.d))
        if not 0 <= ell <= cap:
            raise ValueError(f"output length {ell} outside [0, {cap}]")
    return hash_keys(raw_keys, ell, hash_seed)
