"""Reverse-mode differentiation over recorded array operations.

A Tape implements the same primitive set as the plain numpy engine mode, so
a recorded forward pass reproduces the direct decoder computation bit for
bit while retaining everything needed for the backward sweep. Nodes are
appended in execution order, which is already topological.

Gradient conventions: saturating clips (message clip, atanh argument guard)
pass zero gradient where the clip is active; |x| uses sign(x) with
sign(0) = +1; detached factors (the decimation sign gate) enter as
constants and receive no gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ATANH_EPS, LLR_SAT


@dataclass
class TVar:
    """Handle to one tape node."""

    tape: "Tape"
    idx: int

    @property
    def value(self) -> np.ndarray:
        return self.tape.values[self.idx]


@dataclass
class _Node:
    op: str
    parents: tuple[int, ...]
    aux: tuple = ()


@dataclass
class Tape:
    nodes: list[_Node] = field(default_factory=list)
    values: list[np.ndarray] = field(default_factory=list)
    param_ids: list[int] = field(default_factory=list)

    # -- node creation -------------------------------------------------

    def _push(self, op: str, value, parents: tuple[int, ...], aux: tuple = ()) -> TVar:
        self.nodes.append(_Node(op, parents, aux))
        self.values.append(value)
        return TVar(self, len(self.nodes) - 1)

    def input(self, value) -> TVar:
        return self._push("leaf", np.asarray(value, dtype=np.float64), ())

    def param(self, value) -> TVar:
        v = self._push("leaf", np.asarray(value, dtype=np.float64), ())
        self.param_ids.append(v.idx)
        return v

    def constant(self, value) -> TVar:
        return self._push("const", np.asarray(value, dtype=np.float64), ())

    # -- engine primitives (mirror PlainOps) ----------------------------

    def add(self, a: TVar, b: TVar) -> TVar:
        return self._push("add", a.value + b.value, (a.idx, b.idx))

    def mul(self, a: TVar, b: TVar) -> TVar:
        return self._push("mul", a.value * b.value, (a.idx, b.idx))

    def scale(self, a: TVar, s: float) -> TVar:
        return self._push("scale", a.value * s, (a.idx,), (s,))

    def gather_cols(self, x: TVar, idx) -> TVar:
        return self._push("gather", x.value[:, idx], (x.idx,), (idx,))

    def masked_gather(self, x: TVar, idx, mask, fill: float) -> TVar:
        val = np.where(mask, x.value[:, idx], fill)
        return self._push("mgather", val, (x.idx,), (idx, mask))

    def tanh(self, x: TVar) -> TVar:
        return self._push("tanh", np.tanh(x.value), (x.idx,))

    def atanh_clipped(self, x: TVar) -> TVar:
        lo, hi = -1.0 + ATANH_EPS, 1.0 - ATANH_EPS
        clipped = np.clip(x.value, lo, hi)
        inside = (x.value > lo) & (x.value < hi)
        return self._push("atanh", np.arctanh(clipped), (x.idx,), (clipped, inside))

    def clip_sat(self, x: TVar) -> TVar:
        inside = (x.value > -LLR_SAT) & (x.value < LLR_SAT)
        return self._push("clip", np.clip(x.value, -LLR_SAT, LLR_SAT), (x.idx,), (inside,))

    # -- decimation / loss primitives -----------------------------------

    def abs(self, x: TVar) -> TVar:
        return self._push("abs", np.abs(x.value), (x.idx,))

    def relu(self, x: TVar) -> TVar:
        return self._push("relu", np.maximum(x.value, 0.0), (x.idx,))

    def affine(self, x: TVar, w: TVar, b: TVar) -> TVar:
        return self._push("affine", x.value @ w.value.T + b.value,
                          (x.idx, w.idx, b.idx))

    def stack_cols(self, cols: list[TVar]) -> TVar:
        val = np.stack([c.value.reshape(-1) for c in cols], axis=1)
        shapes = tuple(c.value.shape for c in cols)
        return self._push("stack", val, tuple(c.idx for c in cols), (shapes,))

    def reshape(self, x: TVar, shape) -> TVar:
        return self._push("reshape", x.value.reshape(shape), (x.idx,),
                          (x.value.shape,))

    def set_cols_per_row(self, x: TVar, cols: np.ndarray, values: np.ndarray) -> TVar:
        out = x.value.copy()
        rows = np.arange(out.shape[0])
        out[rows, cols] = values
        return self._push("setcols", out, (x.idx,), (cols,))

    def bce_with_logits(self, mu: TVar, bits: np.ndarray) -> TVar:
        """Elementwise cross-entropy: positive LLR means bit 0."""
        z = -mu.value  # logit of "bit is 1"
        val = np.maximum(z, 0.0) - z * bits + np.log1p(np.exp(-np.abs(z)))
        return self._push("bce", val, (mu.idx,), (bits,))

    def sum_all(self, x: TVar) -> TVar:
        return self._push("sum", np.asarray(x.value.sum()), (x.idx,))

    # -- reverse sweep ---------------------------------------------------

    def backward(self, loss: TVar) -> dict[int, np.ndarray]:
        """Gradients of a scalar loss w.r.t. every `param` leaf, by node id."""
        if loss.tape is not self:
            raise ValueError("loss node belongs to a different tape")
        if self.values[loss.idx].size != 1:
            raise ValueError("loss must be scalar")
        grads: dict[int, np.ndarray] = {loss.idx: np.ones_like(self.values[loss.idx])}
        for nid in range(loss.idx, -1, -1):
            g = grads.pop(nid, None)
            if g is None:
                continue
            node = self.nodes[nid]
            op = node.op
            if op in ("leaf", "const"):
                if op == "leaf":
                    grads[nid] = g  # keep: collected below
                continue
            if op == "add":
                a, b = node.parents
                self._accum(grads, a, g)
                self._accum(grads, b, g)
            elif op == "mul":
                a, b = node.parents
                self._accum(grads, a, self._unbroadcast(g * self.values[b], self.values[a].shape))
                self._accum(grads, b, self._unbroadcast(g * self.values[a], self.values[b].shape))
            elif op == "scale":
                self._accum(grads, node.parents[0], g * node.aux[0])
            elif op == "gather":
                (idx,) = node.aux
                gx = np.zeros_like(self.values[node.parents[0]])
                np.add.at(gx, (slice(None), idx), g)
                self._accum(grads, node.parents[0], gx)
            elif op == "mgather":
                idx, mask = node.aux
                gx = np.zeros_like(self.values[node.parents[0]])
                np.add.at(gx, (slice(None), idx[mask]), g[:, mask])
                self._accum(grads, node.parents[0], gx)
            elif op == "tanh":
                y = self.values[nid]
                self._accum(grads, node.parents[0], g * (1.0 - y * y))
            elif op == "atanh":
                clipped, inside = node.aux
                self._accum(grads, node.parents[0],
                            g * inside / (1.0 - clipped * clipped))
            elif op == "clip":
                (inside,) = node.aux
                self._accum(grads, node.parents[0], g * inside)
            elif op == "abs":
                x = self.values[node.parents[0]]
                self._accum(grads, node.parents[0], g * np.where(x < 0, -1.0, 1.0))
            elif op == "relu":
                x = self.values[node.parents[0]]
                self._accum(grads, node.parents[0], g * (x > 0))
            elif op == "affine":
                xid, wid, bid = node.parents
                x, w = self.values[xid], self.values[wid]
                self._accum(grads, xid, g @ w)
                self._accum(grads, wid, g.T @ x)
                self._accum(grads, bid, g.sum(axis=0))
            elif op == "stack":
                (shapes,) = node.aux
                for j, pid in enumerate(node.parents):
                    self._accum(grads, pid, g[:, j].reshape(shapes[j]))
            elif op == "reshape":
                (orig,) = node.aux
                self._accum(grads, node.parents[0], g.reshape(orig))
            elif op == "setcols":
                (cols,) = node.aux
                gx = g.copy()
                gx[np.arange(gx.shape[0]), cols] = 0.0
                self._accum(grads, node.parents[0], gx)
            elif op == "bce":
                (bits,) = node.aux
                mu = self.values[node.parents[0]]
                self._accum(grads, node.parents[0],
                            g * (_sigmoid(mu) - (1.0 - bits)))
            elif op == "sum":
                x = self.values[node.parents[0]]
                self._accum(grads, node.parents[0], np.broadcast_to(g, x.shape))
            else:  # pragma: no cover
                raise AssertionError(f"unknown op {op}")
        return {pid: grads.get(pid, np.zeros_like(self.values[pid]))
                for pid in self.param_ids}

    @staticmethod
    def _accum(grads: dict, nid: int, g: np.ndarray):
        if nid in grads:
            grads[nid] = grads[nid] + g
        else:
            grads[nid] = g

    @staticmethod
    def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
        """Reduce a gradient back to a broadcast operand's shape."""
        if g.shape == shape:
            return g
        # Only (X,) broadcast against (B, X) occurs in the engine.
        extra = g.ndim - len(shape)
        g = g.sum(axis=tuple(range(extra)))
        for ax, s in enumerate(shape):
            if s == 1 and g.shape[ax] != 1:
                g = g.sum(axis=ax, keepdims=True)
        return g


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def backward(tape: Tape, loss: TVar) -> dict[int, np.ndarray]:
    """Module-level convenience wrapper around Tape.backward."""
    return tape.backward(loss)
