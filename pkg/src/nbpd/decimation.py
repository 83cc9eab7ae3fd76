"""Two-stage decimated NBP decoding.

Stage one grows a binary decoding tree by repeatedly pinning the least
reliable variable node's channel LLR to +/-saturation (both signs explored).
Stage two nudges every variable node's channel LLR by a learned amount from
a small MLP, keeping the posterior's sign. Candidates from all leaves are
ranked by correlation with the raw channel outputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .bp import DecodeResult, WeightSet, decode_nbp_batch, hard_decision
from .channel import LLR_SAT
from .graph import TannerGraph

MLP_FORMAT = "nbpd-mlp-v1"
HIDDEN = 16  # neurons in each of the two hidden layers


@dataclass
class NbpdConfig:
    """Decoder shape: iterations per NBP run, list and learned decimations."""

    l_max: int
    n_d: int = 0
    n_ld: int = 0

    def validate(self, n: int | None = None):
        if self.l_max < 1:
            raise ValueError("l_max must be >= 1")
        if self.n_d < 0 or self.n_ld < 0:
            raise ValueError("decimation counts must be non-negative")
        if n is not None and self.n_d > n:
            raise ValueError(f"n_d={self.n_d} exceeds block length {n}")


@dataclass
class BranchState:
    """One decoding-tree branch: its channel LLRs and decimation record."""

    mu_ch: np.ndarray
    decimated: set[int] = field(default_factory=set)
    decimation_history: list[tuple[int, int]] = field(default_factory=list)
    last_result: DecodeResult | None = None

    def copy(self) -> "BranchState":
        return BranchState(
            mu_ch=self.mu_ch.copy(),
            decimated=set(self.decimated),
            decimation_history=list(self.decimation_history),
            last_result=self.last_result,
        )


@dataclass
class DecimatorParams:
    """Parameters of the decimation MLP: two ReLU layers of 16, linear out."""

    layer1_w: np.ndarray  # (16, 1 + d_max)
    layer1_b: np.ndarray  # (16,)
    layer2_w: np.ndarray  # (16, 16)
    layer2_b: np.ndarray  # (16,)
    layer3_w: np.ndarray  # (1, 16)
    layer3_b: float

    def __post_init__(self):
        self.layer1_w = np.asarray(self.layer1_w, dtype=np.float64)
        self.layer1_b = np.asarray(self.layer1_b, dtype=np.float64)
        self.layer2_w = np.asarray(self.layer2_w, dtype=np.float64)
        self.layer2_b = np.asarray(self.layer2_b, dtype=np.float64)
        self.layer3_w = np.asarray(self.layer3_w, dtype=np.float64).reshape(1, HIDDEN)
        self.layer3_b = float(self.layer3_b)
        shapes = (self.layer1_w.shape[0], self.layer2_w.shape, self.layer3_w.shape)
        if shapes != (HIDDEN, (HIDDEN, HIDDEN), (1, HIDDEN)):
            raise ValueError(f"unexpected MLP shapes: {shapes}")
        for a in (self.layer1_w, self.layer1_b, self.layer2_w, self.layer2_b,
                  self.layer3_w):
            if not np.isfinite(a).all():
                raise ValueError("MLP parameters contain non-finite entries")

    @property
    def d_max(self) -> int:
        return int(self.layer1_w.shape[1] - 1)

    @classmethod
    def zeros(cls, d_max: int) -> "DecimatorParams":
        return cls(
            layer1_w=np.zeros((HIDDEN, 1 + d_max)),
            layer1_b=np.zeros(HIDDEN),
            layer2_w=np.zeros((HIDDEN, HIDDEN)),
            layer2_b=np.zeros(HIDDEN),
            layer3_w=np.zeros((1, HIDDEN)),
            layer3_b=0.0,
        )

    @classmethod
    def init_random(cls, d_max: int, seed: int) -> "DecimatorParams":
        """Symmetric-uniform weights scaled by 1/sqrt(fan_in); zero biases."""
        rng = np.random.default_rng(seed)

        def layer(out_dim, in_dim):
            bound = 1.0 / np.sqrt(in_dim)
            return rng.uniform(-bound, bound, size=(out_dim, in_dim))

        return cls(
            layer1_w=layer(HIDDEN, 1 + d_max),
            layer1_b=np.zeros(HIDDEN),
            layer2_w=layer(HIDDEN, HIDDEN),
            layer2_b=np.zeros(HIDDEN),
            layer3_w=layer(1, HIDDEN),
            layer3_b=0.0,
        )

    def size(self) -> int:
        return (self.layer1_w.size + self.layer1_b.size + self.layer2_w.size
                + self.layer2_b.size + self.layer3_w.size + 1)


def count_decimator_params(d_max: int) -> int:
    """MLP parameter count for input width 1 + d_max, biases included."""
    if d_max < 1:
        raise ValueError("d_max must be >= 1")
    return HIDDEN * (1 + d_max) + HIDDEN + HIDDEN * HIDDEN + HIDDEN + HIDDEN + 1


def complexity(l_max: int, n_d: int, n_ld: int, avg_cn_degree: float, m: int) -> float:
    """Check-node-centric complexity of NBP-D(l_max, n_d, n_ld)."""
    if min(l_max, n_d, n_ld, m) < 0 or avg_cn_degree < 0:
        raise ValueError("arguments must be non-negative")
    return avg_cn_degree * m * l_max * (2 ** (n_d + 1) - 1 + n_ld * 2**n_d)


def least_reliable_vn(posteriors, exclude=()) -> int:
    """Index of the smallest |posterior| outside `exclude`; ties to lowest index."""
    posteriors = np.asarray(posteriors, dtype=np.float64)
    rel = np.abs(posteriors)
    excluded = list(exclude)
    if len(excluded) >= posteriors.size:
        raise ValueError("every VN is excluded")
    if excluded:
        rel = rel.copy()
        rel[excluded] = np.inf
    return int(np.argmin(rel))


def split_branch(b: BranchState, v: int) -> tuple[BranchState, BranchState]:
    """Two children of b with mu_ch[v] pinned to +/-LLR_SAT."""
    if v in b.decimated:
        raise ValueError(f"VN {v} is already decimated")
    plus, minus = b.copy(), b.copy()
    plus.mu_ch[v] = LLR_SAT
    minus.mu_ch[v] = -LLR_SAT
    for child, sign in ((plus, +1), (minus, -1)):
        child.decimated.add(v)
        child.decimation_history.append((v, sign))
        child.last_result = None
    return plus, minus


def mlp_forward(params: DecimatorParams, features) -> float | np.ndarray:
    """Evaluate the decimation MLP on one feature vector or a (R, F) batch."""
    x = np.asarray(features, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != 1 + params.d_max:
        raise ValueError(f"expected {1 + params.d_max} features, got {x.shape[1]}")
    h = np.maximum(x @ params.layer1_w.T + params.layer1_b, 0.0)
    h = np.maximum(h @ params.layer2_w.T + params.layer2_b, 0.0)
    out = h @ params.layer3_w.T + params.layer3_b
    return float(out[0, 0]) if single else out[:, 0]


def decimation_features(graph: TannerGraph, mu_ch: np.ndarray,
                        c2v: np.ndarray) -> np.ndarray:
    """Per-VN feature rows: channel LLR then incoming messages, zero-padded.

    Incoming check messages appear in ascending CN-index order; VNs of
    degree below d_max are padded with zeros. Accepts batched (B, n) /
    (B, E) inputs, returning (B * n, 1 + d_max) with frame-major rows.
    """
    batched = mu_ch.ndim == 2
    mu_b = mu_ch if batched else mu_ch[None, :]
    c2v_b = c2v if batched else c2v[None, :]
    B = mu_b.shape[0]
    d_max = graph.d_vmax
    tab = graph.vn_edge_table  # (n, d_max), padded with E
    valid = tab != graph.num_edges
    safe = np.where(valid, tab, 0)
    msgs = np.where(valid[None, :, :], c2v_b[:, safe], 0.0)  # (B, n, d_max)
    feats = np.concatenate([mu_b[:, :, None], msgs], axis=2)
    return feats.reshape(B * graph.n, 1 + d_max)


def learned_decimate(graph: TannerGraph, params: DecimatorParams,
                     b: BranchState) -> BranchState:
    """Nudge every VN's channel LLR toward its posterior sign by |f_MLP|."""
    if b.last_result is None:
        raise ValueError("branch has no decode result to decimate from")
    post = b.last_result.final_posterior
    c2v = b.last_result.final_c2v_messages
    feats = decimation_features(graph, b.mu_ch, c2v)
    f = mlp_forward(params, feats)
    sign = np.where(post < 0, -1.0, 1.0)  # sign(0) = +1
    out = b.copy()
    out.mu_ch = np.clip(b.mu_ch + sign * np.abs(f), -LLR_SAT, LLR_SAT)
    out.last_result = None
    return out


def select_candidate(y, candidates) -> int:
    """Index maximizing sum_j y_j * (-1)^{c_j}; ties to the lowest index."""
    if len(candidates) == 0:
        raise ValueError("empty candidate list")
    y = np.asarray(y, dtype=np.float64)
    cand = np.asarray(candidates)
    if cand.shape[1] != y.shape[0]:
        raise ValueError("candidate length does not match y")
    corr = (1.0 - 2.0 * cand.astype(np.float64)) @ y
    return int(np.argmax(corr))


@dataclass
class NbpdResult:
    """Selected codeword plus the full candidate list and branch states."""

    codeword: np.ndarray
    candidates: list[np.ndarray]
    selected_index: int
    branches: list[BranchState]


def nbp_d_decode(graph: TannerGraph, weights: WeightSet, mu_ch, y,
                 cfg: NbpdConfig, params: DecimatorParams | None = None,
                 ) -> NbpdResult:
    """Full two-stage decimated decode of a single frame.

    Every NBP run uses exactly cfg.l_max iterations (no early exit) so the
    final-layer messages feeding the decimation MLP are always defined.
    """
    cfg.validate(graph.n)
    if cfg.n_ld > 0 and params is None:
        raise ValueError("learned decimation requested but no MLP parameters given")
    mu_ch = np.asarray(mu_ch, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)

    branches = [BranchState(mu_ch=mu_ch.copy())]
    for _ in range(cfg.n_d):
        next_plus: list[BranchState] = []
        next_minus: list[BranchState] = []
        for b in branches:
            b.last_result = _decode_branch(graph, weights, b.mu_ch, cfg.l_max)
            v = least_reliable_vn(b.last_result.final_posterior, b.decimated)
            plus, minus = split_branch(b, v)
            next_plus.append(plus)
            next_minus.append(minus)
        branches = next_plus + next_minus

    for _ in range(cfg.n_ld):
        for j, b in enumerate(branches):
            b.last_result = _decode_branch(graph, weights, b.mu_ch, cfg.l_max)
            branches[j] = learned_decimate(graph, params, b)

    candidates: list[np.ndarray] = []
    for b in branches:
        b.last_result = _decode_branch(graph, weights, b.mu_ch, cfg.l_max)
        candidates.append(b.last_result.final_hard_decision)
    idx = select_candidate(y, candidates)
    return NbpdResult(
        codeword=candidates[idx].copy(),
        candidates=candidates,
        selected_index=idx,
        branches=branches,
    )


def _decode_branch(graph, weights, mu_ch, l_max) -> DecodeResult:
    res = decode_nbp_batch(graph, weights, mu_ch[None, :], l_max, early_exit=False)
    return DecodeResult(
        posteriors_per_iteration=[p[0] for p in res.posteriors_per_iteration],
        final_hard_decision=res.final_hard_decision[0],
        converged_at=None,
        final_c2v_messages=res.final_c2v_messages[0],
    )


def nbp_d_decode_batch(graph: TannerGraph, weights: WeightSet,
                       mu_ch: np.ndarray, y: np.ndarray, cfg: NbpdConfig,
                       params: DecimatorParams | None = None,
                       decode_fn=None):
    """Batched twin of nbp_d_decode for Monte Carlo runs.

    `decode_fn(mu_batch) -> (final posterior, final c2v)` may be supplied to
    swap in an accelerated decoder; the default uses the numpy engine and is
    then output-identical to per-frame nbp_d_decode. Returns
    (selected codewords (B, n), decimated VN trail (branch, B, n_d),
    decimation signs (branch, B, n_d)).
    """
    cfg.validate(graph.n)
    if cfg.n_ld > 0 and params is None:
        raise ValueError("learned decimation requested but no MLP parameters given")
    if decode_fn is None:
        def decode_fn(mu):
            r = decode_nbp_batch(graph, weights, mu, cfg.l_max, early_exit=False)
            return r.final_posterior, r.final_c2v_messages

    B, n = mu_ch.shape
    rows = np.arange(B)
    branches = [{"mu": mu_ch.copy(), "mask": np.zeros((B, n), dtype=bool),
                 "vns": [], "signs": []}]
    for _ in range(cfg.n_d):
        plus_list, minus_list = [], []
        for br in branches:
            post, _ = decode_fn(br["mu"])
            rel = np.where(br["mask"], np.inf, np.abs(post))
            k = np.argmin(rel, axis=1)
            mask = br["mask"].copy()
            mask[rows, k] = True
            plus = {"mu": br["mu"].copy(), "mask": mask,
                    "vns": br["vns"] + [k], "signs": br["signs"] + [np.ones(B)]}
            minus = {"mu": br["mu"].copy(), "mask": mask.copy(),
                     "vns": br["vns"] + [k], "signs": br["signs"] + [-np.ones(B)]}
            plus["mu"][rows, k] = LLR_SAT
            minus["mu"][rows, k] = -LLR_SAT
            plus_list.append(plus)
            minus_list.append(minus)
        branches = plus_list + minus_list

    for _ in range(cfg.n_ld):
        for br in branches:
            post, c2v = decode_fn(br["mu"])
            feats = decimation_features(graph, br["mu"], c2v)
            f = mlp_forward(params, feats).reshape(B, n)
            sign = np.where(post < 0, -1.0, 1.0)
            br["mu"] = np.clip(br["mu"] + sign * np.abs(f), -LLR_SAT, LLR_SAT)

    cands = []
    for br in branches:
        post, _ = decode_fn(br["mu"])
        cands.append(hard_decision(post))
    corr = np.stack([((1.0 - 2.0 * c) * y).sum(axis=1) for c in cands])  # (nb, B)
    best = np.argmax(corr, axis=0)
    codewords = np.stack([cands[best[b]][b] for b in range(B)])
    if cfg.n_d:
        vns = np.stack([np.stack(br["vns"], axis=1) for br in branches])
        signs = np.stack([np.stack(br["signs"], axis=1) for br in branches])
    else:
        vns = np.zeros((1, B, 0), dtype=np.int64)
        signs = np.zeros((1, B, 0))
    return codewords, vns, signs


def mlp_to_json(params: DecimatorParams) -> str:
    doc = {
        "format": MLP_FORMAT,
        "d_max": params.d_max,
        "layer1_w": params.layer1_w.tolist(),
        "layer1_b": params.layer1_b.tolist(),
        "layer2_w": params.layer2_w.tolist(),
        "layer2_b": params.layer2_b.tolist(),
        "layer3_w": params.layer3_w.tolist(),
        "layer3_b": params.layer3_b,
    }
    return json.dumps(doc)


def mlp_from_json(text: str) -> DecimatorParams:
    doc = json.loads(text)
    if doc.get("format") != MLP_FORMAT:
        raise ValueError(f"unsupported MLP file format: {doc.get('format')!r}")
    params = DecimatorParams(
        layer1_w=np.array(doc["layer1_w"], dtype=np.float64),
        layer1_b=np.array(doc["layer1_b"], dtype=np.float64),
        layer2_w=np.array(doc["layer2_w"], dtype=np.float64),
        layer2_b=np.array(doc["layer2_b"], dtype=np.float64),
        layer3_w=np.array(doc["layer3_w"], dtype=np.float64),
        layer3_b=doc["layer3_b"],
    )
    if params.d_max != doc["d_max"]:
        raise ValueError("layer1_w width disagrees with declared d_max")
    return params
