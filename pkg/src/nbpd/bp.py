"""Weighted (neural) belief propagation over a Tanner graph.

Flooding schedule, spatially untied weights shared across iterations. With
all weights at 1.0 the updates reduce to plain sum-product BP.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import _engine
from ._engine import PlainOps, tables_for
from .channel import LLR_SAT
from .graph import TannerGraph, count_weights, syndrome_ok_batch

__all__ = [
    "WeightSet", "DecodeResult", "vn_update", "cn_update", "posterior_llr",
    "decode_nbp", "decode_nbp_batch", "count_weights",
    "weights_to_json", "weights_from_json", "hard_decision",
]

WEIGHTS_FORMAT = "nbpd-weights-v1"


@dataclass
class WeightSet:
    """Channel and per-edge message weights, tied over iterations."""

    w_ch: np.ndarray   # (n,)
    w_v2c: np.ndarray  # (E,)
    w_c2v: np.ndarray  # (E,)

    def __post_init__(self):
        self.w_ch = np.asarray(self.w_ch, dtype=np.float64)
        self.w_v2c = np.asarray(self.w_v2c, dtype=np.float64)
        self.w_c2v = np.asarray(self.w_c2v, dtype=np.float64)
        for name in ("w_ch", "w_v2c", "w_c2v"):
            arr = getattr(self, name)
            if not np.isfinite(arr).all():
                raise ValueError(f"{name} contains non-finite entries")

    @classmethod
    def uniform(cls, graph: TannerGraph) -> "WeightSet":
        return cls(
            w_ch=np.ones(graph.n),
            w_v2c=np.ones(graph.num_edges),
            w_c2v=np.ones(graph.num_edges),
        )

    def copy(self) -> "WeightSet":
        return WeightSet(self.w_ch.copy(), self.w_v2c.copy(), self.w_c2v.copy())

    def size(self) -> int:
        return self.w_ch.size + self.w_v2c.size + self.w_c2v.size

    def validate_for(self, graph: TannerGraph):
        if self.w_ch.shape != (graph.n,) or self.w_v2c.shape != (graph.num_edges,) \
                or self.w_c2v.shape != (graph.num_edges,):
            raise ValueError("weight shapes do not match the graph")


@dataclass
class DecodeResult:
    """Output of one (batched) NBP run at a fixed iteration count."""

    posteriors_per_iteration: list[np.ndarray]  # each (B, n) or (n,)
    final_hard_decision: np.ndarray             # (B, n) or (n,) uint8
    converged_at: np.ndarray | int | None       # per-frame first zero-syndrome iter
    final_c2v_messages: np.ndarray              # (B, E) or (E,)

    @property
    def final_posterior(self) -> np.ndarray:
        return self.posteriors_per_iteration[-1]


def hard_decision(posterior: np.ndarray) -> np.ndarray:
    """(1 - sign(mu)) / 2 with sign(0) = +1, i.e. bit 1 iff mu < 0."""
    return (np.asarray(posterior) < 0).astype(np.uint8)


def _as_batch(x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return x[None, :], True
    return x, False


def vn_update(graph: TannerGraph, weights: WeightSet, mu_ch, c2v) -> np.ndarray:
    """Variable-to-check messages for one flooding layer."""
    t = tables_for(graph)
    mu_b, squeeze = _as_batch(mu_ch)
    c2v_b, _ = _as_batch(c2v)
    _check_sizes(graph, mu_b, c2v_b)
    base_n = PlainOps.mul(weights.w_ch, mu_b)
    out = _engine.vn_step(PlainOps, t, weights.w_v2c, base_n, c2v_b)
    return out[0] if squeeze else out


def cn_update(graph: TannerGraph, weights: WeightSet, v2c) -> np.ndarray:
    """Check-to-variable messages for one flooding layer."""
    t = tables_for(graph)
    v2c_b, squeeze = _as_batch(v2c)
    if v2c_b.shape[1] != graph.num_edges:
        raise ValueError(f"expected {graph.num_edges} edge messages, got {v2c_b.shape[1]}")
    ones = np.ones_like(v2c_b)
    out = _engine.cn_step(PlainOps, t, weights.w_c2v, v2c_b, ones)
    return out[0] if squeeze else out


def posterior_llr(graph: TannerGraph, weights: WeightSet, mu_ch, c2v) -> np.ndarray:
    """A-posteriori LLRs from the channel term and all incoming messages."""
    t = tables_for(graph)
    mu_b, squeeze = _as_batch(mu_ch)
    c2v_b, _ = _as_batch(c2v)
    _check_sizes(graph, mu_b, c2v_b)
    base_n = PlainOps.mul(weights.w_ch, mu_b)
    out = _engine.posterior_step(PlainOps, t, base_n, c2v_b)
    return out[0] if squeeze else out


def _check_sizes(graph, mu_b, c2v_b):
    if mu_b.shape[1] != graph.n:
        raise ValueError(f"expected {graph.n} channel LLRs, got {mu_b.shape[1]}")
    if c2v_b.shape[1] != graph.num_edges:
        raise ValueError(f"expected {graph.num_edges} edge messages, got {c2v_b.shape[1]}")


def decode_nbp_batch(graph: TannerGraph, weights: WeightSet, mu_ch: np.ndarray,
                     l_max: int, early_exit: bool = False) -> DecodeResult:
    """Batched flooding NBP decode of (B, n) channel LLRs.

    With early_exit, each frame's output is frozen at its first
    zero-syndrome iteration and iteration stops once every frame has
    converged; without it all l_max layers run and are recorded.
    """
    if l_max < 1:
        raise ValueError("l_max must be >= 1")
    weights.validate_for(graph)
    mu_b, _ = _as_batch(mu_ch)
    _check_sizes(graph, mu_b, np.empty((1, graph.num_edges)))
    t = tables_for(graph)
    B = mu_b.shape[0]
    base_n = weights.w_ch * mu_b
    c2v = np.zeros((B, graph.num_edges))
    ones_e = np.ones((B, graph.num_edges))

    posteriors: list[np.ndarray] = []
    converged = np.full(B, -1, dtype=np.int64)
    frozen_hd = np.zeros((B, graph.n), dtype=np.uint8)
    for it in range(1, l_max + 1):
        v2c = _engine.vn_step(PlainOps, t, weights.w_v2c, base_n, c2v)
        c2v = _engine.cn_step(PlainOps, t, weights.w_c2v, v2c, ones_e)
        post = _engine.posterior_step(PlainOps, t, base_n, c2v)
        posteriors.append(post)
        if early_exit:
            hd = hard_decision(post)
            live = converged < 0
            ok = syndrome_ok_batch(graph, hd[live])
            idx = np.nonzero(live)[0][ok]
            converged[idx] = it
            frozen_hd[idx] = hd[idx]
            if (converged >= 0).all():
                break
    final_post = posteriors[-1]
    final_hd = hard_decision(final_post)
    if early_exit:
        done = converged >= 0
        final_hd = np.where(done[:, None], frozen_hd, final_hd)
    conv = np.where(converged >= 0, converged, -1)
    return DecodeResult(
        posteriors_per_iteration=posteriors,
        final_hard_decision=final_hd,
        converged_at=conv if early_exit else None,
        final_c2v_messages=c2v,
    )


def decode_nbp(graph: TannerGraph, weights: WeightSet, mu_ch, l_max: int,
               early_exit: bool = False) -> DecodeResult:
    """Single-frame NBP decode; see decode_nbp_batch for semantics."""
    res = decode_nbp_batch(graph, weights, np.asarray(mu_ch, dtype=np.float64),
                           l_max, early_exit)
    conv = res.converged_at
    if conv is not None:
        conv = int(conv[0]) if conv[0] >= 0 else None
    return DecodeResult(
        posteriors_per_iteration=[p[0] for p in res.posteriors_per_iteration],
        final_hard_decision=res.final_hard_decision[0],
        converged_at=conv,
        final_c2v_messages=res.final_c2v_messages[0],
    )


def weights_to_json(graph: TannerGraph, weights: WeightSet) -> str:
    doc = {
        "format": WEIGHTS_FORMAT,
        "n": graph.n,
        "m": graph.m,
        "E": graph.num_edges,
        "w_ch": weights.w_ch.tolist(),
        "w_v2c": weights.w_v2c.tolist(),
        "w_c2v": weights.w_c2v.tolist(),
    }
    return json.dumps(doc)


def weights_from_json(text: str, graph: TannerGraph | None = None) -> WeightSet:
    doc = json.loads(text)
    if doc.get("format") != WEIGHTS_FORMAT:
        raise ValueError(f"unsupported weight file format: {doc.get('format')!r}")
    ws = WeightSet(
        w_ch=np.array(doc["w_ch"], dtype=np.float64),
        w_v2c=np.array(doc["w_v2c"], dtype=np.float64),
        w_c2v=np.array(doc["w_c2v"], dtype=np.float64),
    )
    declared = (doc.get("n"), doc.get("m"), doc.get("E"))
    if (ws.w_ch.size, ws.w_v2c.size) != (declared[0], declared[2]):
        raise ValueError("weight vector lengths disagree with the declared n/E")
    if graph is not None:
        if declared != (graph.n, graph.m, graph.num_edges):
            raise ValueError(
                f"weight file is for n={declared[0]}, m={declared[1]}, E={declared[2]}, "
                f"graph has n={graph.n}, m={graph.m}, E={graph.num_edges}"
            )
        ws.validate_for(graph)
    return ws
