"""Shared flooding message-passing engine.

The same iteration code runs in two modes: direct numpy execution
(`PlainOps`) and tape-recorded execution for reverse-mode differentiation
(`TapeOps` in `autodiff`). Both modes perform the identical sequence of
elementary array operations, so their outputs agree bit for bit.

Aggregation order is pinned everywhere: extrinsic sums and products walk the
adjacency lists in ascending counterpart-node order, skipping the output
edge. Padded table positions contribute the exact identity (0.0 for sums,
1.0 for products), which leaves IEEE results unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ATANH_EPS, LLR_SAT


@dataclass(frozen=True)
class GraphTables:
    """Precomputed gather indices and masks for vectorized updates."""

    edge_vn: np.ndarray          # (E,)
    vn_sib_idx: np.ndarray       # (d_vmax, E) sibling edge ids within the VN
    vn_sib_mask: np.ndarray      # (d_vmax, E) valid and not the output edge
    cn_sib_idx: np.ndarray       # (d_cmax, E)
    cn_sib_mask: np.ndarray      # (d_cmax, E)
    vn_pos_idx: np.ndarray       # (d_vmax, n) edge id at each VN position
    vn_pos_mask: np.ndarray      # (d_vmax, n)


_TABLE_ATTR = "_nbpd_tables"


def tables_for(graph) -> GraphTables:
    cached = getattr(graph, _TABLE_ATTR, None)
    if cached is not None:
        return cached
    E = graph.num_edges
    n, d_vmax = graph.vn_edge_table.shape
    m, d_cmax = graph.cn_edge_table.shape
    edge_ids = np.arange(E, dtype=np.int64)

    vn_tab_e = graph.vn_edge_table[graph.edge_vn]        # (E, d_vmax)
    vn_valid = vn_tab_e != E
    vn_mask = vn_valid & (vn_tab_e != edge_ids[:, None])
    vn_idx = np.where(vn_valid, vn_tab_e, 0)

    cn_tab_e = graph.cn_edge_table[graph.edge_cn]        # (E, d_cmax)
    cn_valid = cn_tab_e != E
    cn_mask = cn_valid & (cn_tab_e != edge_ids[:, None])
    cn_idx = np.where(cn_valid, cn_tab_e, 0)

    pos_valid = graph.vn_edge_table != E                 # (n, d_vmax)
    pos_idx = np.where(pos_valid, graph.vn_edge_table, 0)

    t = GraphTables(
        edge_vn=graph.edge_vn,
        vn_sib_idx=np.ascontiguousarray(vn_idx.T),
        vn_sib_mask=np.ascontiguousarray(vn_mask.T),
        cn_sib_idx=np.ascontiguousarray(cn_idx.T),
        cn_sib_mask=np.ascontiguousarray(cn_mask.T),
        vn_pos_idx=np.ascontiguousarray(pos_idx.T),
        vn_pos_mask=np.ascontiguousarray(pos_valid.T),
    )
    object.__setattr__(graph, _TABLE_ATTR, t)
    return t


class PlainOps:
    """Direct numpy execution of the engine primitives.

    Handles are plain float64 arrays of shape (B, n) or (B, E); parameter
    vectors are 1-D and broadcast along the batch axis.
    """

    @staticmethod
    def input(value):
        return value

    param = input

    @staticmethod
    def constant(value):
        return value

    @staticmethod
    def add(a, b):
        return a + b

    @staticmethod
    def mul(a, b):
        return a * b

    @staticmethod
    def scale(a, s: float):
        return a * s

    @staticmethod
    def gather_cols(x, idx):
        return x[:, idx]

    @staticmethod
    def masked_gather(x, idx, mask, fill: float):
        return np.where(mask, x[:, idx], fill)

    @staticmethod
    def tanh(x):
        return np.tanh(x)

    @staticmethod
    def atanh_clipped(x):
        return np.arctanh(np.clip(x, -1.0 + ATANH_EPS, 1.0 - ATANH_EPS))

    @staticmethod
    def clip_sat(x):
        return np.clip(x, -LLR_SAT, LLR_SAT)

    @staticmethod
    def abs(x):
        return np.abs(x)

    @staticmethod
    def relu(x):
        return np.maximum(x, 0.0)

    @staticmethod
    def affine(x, w, b):
        return x @ w.T + b

    @staticmethod
    def stack_cols(cols):
        return np.stack([c.reshape(-1) for c in cols], axis=1)

    @staticmethod
    def reshape(x, shape):
        return x.reshape(shape)

    @staticmethod
    def set_cols_per_row(x, cols, values):
        out = x.copy()
        out[np.arange(out.shape[0]), cols] = values
        return out

    @staticmethod
    def bce_with_logits(mu, bits):
        z = -mu  # logit of "bit is 1"
        return np.maximum(z, 0.0) - z * bits + np.log1p(np.exp(-np.abs(z)))

    @staticmethod
    def sum_all(x):
        return np.asarray(x.sum())


def vn_step(ops, t: GraphTables, w_v2c, base_n, c2v):
    """Variable-to-check messages, Eq. form w_v2c * (w_ch*mu_ch + sum extrinsic)."""
    s = ops.gather_cols(base_n, t.edge_vn)
    for i in range(t.vn_sib_idx.shape[0]):
        s = ops.add(s, ops.masked_gather(c2v, t.vn_sib_idx[i], t.vn_sib_mask[i], 0.0))
    return ops.clip_sat(ops.mul(w_v2c, s))


def cn_step(ops, t: GraphTables, w_c2v, v2c, ones_e):
    """Check-to-variable messages, 2 * w_c2v * atanh(prod tanh(v2c / 2))."""
    th = ops.tanh(ops.scale(v2c, 0.5))
    p = ones_e
    for i in range(t.cn_sib_idx.shape[0]):
        p = ops.mul(p, ops.masked_gather(th, t.cn_sib_idx[i], t.cn_sib_mask[i], 1.0))
    return ops.clip_sat(ops.mul(w_c2v, ops.scale(ops.atanh_clipped(p), 2.0)))


def posterior_step(ops, t: GraphTables, base_n, c2v):
    """A-posteriori LLRs: w_ch*mu_ch + sum of all incoming messages."""
    post = base_n
    for i in range(t.vn_pos_idx.shape[0]):
        post = ops.add(post, ops.masked_gather(c2v, t.vn_pos_idx[i], t.vn_pos_mask[i], 0.0))
    return ops.clip_sat(post)


def unrolled_nbp(ops, t: GraphTables, w_ch, w_v2c, w_c2v, mu_ch, l_max: int,
                 batch: int, num_edges: int):
    """Run l_max flooding iterations; returns (per-iteration posteriors, final c2v).

    `mu_ch` is a (B, n) handle; weights are 1-D handles. Check-to-variable
    messages start at zero, so the first VN update reduces to the weighted
    channel term.
    """
    base_n = ops.mul(w_ch, mu_ch)
    c2v = ops.constant(np.zeros((batch, num_edges)))
    ones_e = ops.constant(np.ones((batch, num_edges)))
    posteriors = []
    for _ in range(l_max):
        v2c = vn_step(ops, t, w_v2c, base_n, c2v)
        c2v = cn_step(ops, t, w_c2v, v2c, ones_e)
        posteriors.append(posterior_step(ops, t, base_n, c2v))
    return posteriors, c2v
