"""Numba-compiled batched decoding kernels for the Monte Carlo harness.

Same update equations and aggregation order as the numpy engine; the
transcendentals come from libm rather than numpy's vectorized kernels, so
results may differ from the engine in the last ulp. The harness uses these
kernels exclusively, keeping simulation results deterministic for a given
seed and configuration.
"""

from __future__ import annotations

import math

import numba
import numpy as np

from .channel import ATANH_EPS, LLR_SAT
from .graph import TannerGraph


@numba.njit(cache=True, parallel=True)
def _decode_batch(mu_ch, w_ch, w_v2c, w_c2v, vn_tab, vn_deg, cn_tab, cn_deg,
                  edge_vn, edge_cn, l_max, early_exit,
                  post_out, c2v_out, conv_out, hd_out):
    B, n = mu_ch.shape
    E = edge_vn.shape[0]
    m = cn_tab.shape[0]
    atanh_hi = 1.0 - ATANH_EPS
    for b in numba.prange(B):
        c2v = np.zeros(E)
        v2c = np.zeros(E)
        th = np.zeros(E)
        post = np.zeros(n)
        converged = -1
        for it in range(l_max):
            # variable-to-check
            for v in range(n):
                base = w_ch[v] * mu_ch[b, v]
                d = vn_deg[v]
                for j in range(d):
                    e = vn_tab[v, j]
                    s = base
                    for i in range(d):
                        if i != j:
                            s = s + c2v[vn_tab[v, i]]
                    s = w_v2c[e] * s
                    if s > LLR_SAT:
                        s = LLR_SAT
                    elif s < -LLR_SAT:
                        s = -LLR_SAT
                    v2c[e] = s
            # check-to-variable
            for e in range(E):
                th[e] = math.tanh(0.5 * v2c[e])
            for c in range(m):
                d = cn_deg[c]
                for j in range(d):
                    e = cn_tab[c, j]
                    p = 1.0
                    for i in range(d):
                        if i != j:
                            p = p * th[cn_tab[c, i]]
                    if p > atanh_hi:
                        p = atanh_hi
                    elif p < -atanh_hi:
                        p = -atanh_hi
                    out = w_c2v[e] * (2.0 * math.atanh(p))
                    if out > LLR_SAT:
                        out = LLR_SAT
                    elif out < -LLR_SAT:
                        out = -LLR_SAT
                    c2v[e] = out
            # posteriors
            for v in range(n):
                s = w_ch[v] * mu_ch[b, v]
                for j in range(vn_deg[v]):
                    s = s + c2v[vn_tab[v, j]]
                if s > LLR_SAT:
                    s = LLR_SAT
                elif s < -LLR_SAT:
                    s = -LLR_SAT
                post[v] = s
            if early_exit:
                ok = True
                for c in range(m):
                    parity = 0
                    for j in range(cn_deg[c]):
                        if post[edge_vn[cn_tab[c, j]]] < 0.0:
                            parity ^= 1
                    if parity:
                        ok = False
                        break
                if ok:
                    converged = it + 1
                    break
        for v in range(n):
            post_out[b, v] = post[v]
            hd_out[b, v] = 1 if post[v] < 0.0 else 0
        for e in range(E):
            c2v_out[b, e] = c2v[e]
        conv_out[b] = converged


class FastDecoder:
    """Reusable batched decoder bound to one graph and weight set."""

    def __init__(self, graph: TannerGraph, weights):
        weights.validate_for(graph)
        self.graph = graph
        self.w_ch = np.ascontiguousarray(weights.w_ch)
        self.w_v2c = np.ascontiguousarray(weights.w_v2c)
        self.w_c2v = np.ascontiguousarray(weights.w_c2v)
        self.vn_tab = np.ascontiguousarray(graph.vn_edge_table)
        self.cn_tab = np.ascontiguousarray(graph.cn_edge_table)
        self.vn_deg = np.ascontiguousarray(graph.vn_degrees)
        self.cn_deg = np.ascontiguousarray(graph.cn_degrees)

    def decode(self, mu_ch: np.ndarray, l_max: int, early_exit: bool = False):
        """Returns (posteriors, final c2v, converged_at, hard decisions)."""
        B, n = mu_ch.shape
        E = self.graph.num_edges
        post = np.empty((B, n))
        c2v = np.empty((B, E))
        conv = np.empty(B, dtype=np.int64)
        hd = np.empty((B, n), dtype=np.uint8)
        _decode_batch(np.ascontiguousarray(mu_ch), self.w_ch, self.w_v2c,
                      self.w_c2v, self.vn_tab, self.vn_deg, self.cn_tab,
                      self.cn_deg, self.graph.edge_vn, self.graph.edge_cn,
                      l_max, early_exit, post, c2v, conv, hd)
        return post, c2v, conv, hd
