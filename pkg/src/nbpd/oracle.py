"""Exact reference decoders by codebook enumeration.

Feasible only for small codes; used to verify the iterative decoders.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import GeneratorMatrix, enumerate_codewords

MAX_ML_K = 24
MAX_MAP_K = 20


@dataclass(frozen=True)
class Codebook:
    """All 2^k codewords, stored in lexicographic row order."""

    codewords: np.ndarray  # (2^k, n) uint8
    k: int
    n: int

    @classmethod
    def from_generator(cls, gen: GeneratorMatrix) -> "Codebook":
        if gen.k > MAX_ML_K:
            raise ValueError(f"k={gen.k} exceeds codebook cap {MAX_ML_K}")
        words = np.array(list(enumerate_codewords(gen)), dtype=np.uint8)
        order = np.lexsort(words.T[::-1])
        return cls(codewords=words[order], k=gen.k, n=gen.n)

    @property
    def bpsk_signs(self) -> np.ndarray:
        """(-1)^c per codeword bit, cached lazily."""
        cached = getattr(self, "_signs", None)
        if cached is None:
            cached = 1.0 - 2.0 * self.codewords.astype(np.float64)
            object.__setattr__(self, "_signs", cached)
        return cached


def ml_decode(y, cb: Codebook) -> np.ndarray:
    """Soft-decision ML: the codeword maximizing sum_j y_j * (-1)^c_j.

    Correlation ties resolve to the lexicographically smallest codeword.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (cb.n,):
        raise ValueError(f"expected y of length {cb.n}")
    corr = cb.bpsk_signs @ y
    return cb.codewords[int(np.argmax(corr))].copy()


def ml_decode_batch(ys: np.ndarray, cb: Codebook) -> np.ndarray:
    """ML decode for ys of shape (B, n)."""
    corr = ys @ cb.bpsk_signs.T
    return cb.codewords[np.argmax(corr, axis=1)].copy()


def exact_bit_map(llr, cb: Codebook) -> np.ndarray:
    """Exact bitwise MAP posterior LLRs by summing over the codebook.

    For bit i: log of the ratio of total likelihood mass over codewords with
    c_i = 0 versus c_i = 1, evaluated with log-sum-exp stabilization. The
    per-codeword log-likelihood (up to a common constant) is
    0.5 * sum_j (-1)^{c_j} * llr_j.
    """
    if cb.k > MAX_MAP_K:
        raise ValueError(f"k={cb.k} exceeds bit-MAP cap {MAX_MAP_K}")
    llr = np.asarray(llr, dtype=np.float64)
    if llr.shape != (cb.n,):
        raise ValueError(f"expected llr of length {cb.n}")
    scores = cb.bpsk_signs @ (0.5 * llr)  # (2^k,)
    out = np.empty(cb.n)
    for i in range(cb.n):
        zero = scores[cb.codewords[:, i] == 0]
        one = scores[cb.codewords[:, i] == 1]
        out[i] = _logsumexp(zero) - _logsumexp(one)
    return out


def _logsumexp(x: np.ndarray) -> float:
    m = np.max(x)
    return float(m + np.log(np.sum(np.exp(x - m))))
