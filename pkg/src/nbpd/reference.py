"""Plain sum-product BP, written independently of the vectorized decoder.

Scalar loops over the adjacency lists, used as the reduction oracle for the
weighted decoder: with all weights equal to one the two must agree bit for
bit. Numpy's scalar tanh/arctanh are used so both implementations draw their
transcendentals from the same library kernels; aggregation walks neighbors
in ascending counterpart order, matching the documented message ordering.
"""

from __future__ import annotations

import numpy as np

from .channel import ATANH_EPS, LLR_SAT
from .graph import TannerGraph, syndrome_ok


def _clip(x: float, lo: float, hi: float) -> float:
    if x < lo:
        return lo
    if x > hi:
        return hi
    return x


def decode_bp(graph: TannerGraph, mu_ch, l_max: int, early_exit: bool = False):
    """Flooding BP; returns (posteriors per iteration, hard decision, converged_at).

    Check-to-variable messages start at zero. Hard decision is bit 1 iff the
    posterior is negative (sign(0) counts as +1).
    """
    n, m, E = graph.n, graph.m, graph.num_edges
    mu_ch = [float(v) for v in mu_ch]
    if len(mu_ch) != n:
        raise ValueError(f"expected {n} channel LLRs")

    c2v = [0.0] * E
    posteriors: list[np.ndarray] = []
    hard = None
    converged_at = None
    atanh_hi = 1.0 - ATANH_EPS

    for it in range(1, l_max + 1):
        # variable-to-check
        v2c = [0.0] * E
        for v in range(n):
            edges = graph.vn_adjacency[v]
            for e in edges:
                s = mu_ch[v]
                for e2 in edges:
                    if e2 != e:
                        s = s + c2v[e2]
                v2c[e] = _clip(s, -LLR_SAT, LLR_SAT)
        # check-to-variable
        tanh_half = [float(np.tanh(0.5 * x)) for x in v2c]
        for c in range(m):
            edges = graph.cn_adjacency[c]
            for e in edges:
                p = 1.0
                for e2 in edges:
                    if e2 != e:
                        p = p * tanh_half[e2]
                a = float(np.arctanh(_clip(p, -atanh_hi, atanh_hi)))
                c2v[e] = _clip(2.0 * a, -LLR_SAT, LLR_SAT)
        # a-posteriori LLRs
        post = np.empty(n)
        for v in range(n):
            s = mu_ch[v]
            for e in graph.vn_adjacency[v]:
                s = s + c2v[e]
            post[v] = _clip(s, -LLR_SAT, LLR_SAT)
        posteriors.append(post)

        hd = (post < 0).astype(np.uint8)
        if early_exit and syndrome_ok(graph, hd):
            hard = hd
            converged_at = it
            break

    if hard is None:
        hard = (posteriors[-1] < 0).astype(np.uint8)
    return posteriors, hard, converged_at
