"""Training of the decoder weights and the decimation MLP.

Stage one fits the message-passing weights by unrolling the decoder and
minimizing the layer-averaged bitwise cross-entropy with Adam. Stage two
freezes those weights and trains the decimation MLP along the genie path:
at every list decimation only the branch whose pinned sign matches the
transmitted bit is unrolled.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._engine import PlainOps, tables_for, unrolled_nbp
from .autodiff import Tape, TVar
from .bp import WeightSet
from .channel import LLR_SAT
from .decimation import DecimatorParams, NbpdConfig
from .graph import TannerGraph, derive_generator, encode_batch


@dataclass
class TrainConfig:
    steps: int = 200
    batch_size: int = 128
    learning_rate: float = 1e-3
    l_max: int = 50
    ebn0_range_db: tuple[float, float] = (2.0, 5.0)
    seed: int = 0
    codeword_mode: str = "zero"  # "zero" or "random"

    def validate(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.ebn0_range_db[1] < self.ebn0_range_db[0]:
            raise ValueError("empty Eb/N0 range")
        if self.codeword_mode not in ("zero", "random"):
            raise ValueError(f"unknown codeword_mode {self.codeword_mode!r}")
        if self.l_max < 1:
            raise ValueError("l_max must be >= 1")


@dataclass
class AdamState:
    """First/second moment estimates per parameter array plus step count."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
        )


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: AdamState, lr: float) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update; returns fresh parameter arrays."""
    if set(params) != set(grads):
        raise ValueError("parameter and gradient keys disagree")
    t = state.t + 1
    new_params = {}
    for k, p in params.items():
        g = grads[k]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape mismatch for {k}")
        state.m[k] = state.beta1 * state.m[k] + (1 - state.beta1) * g
        state.v[k] = state.beta2 * state.v[k] + (1 - state.beta2) * g * g
        m_hat = state.m[k] / (1 - state.beta1**t)
        v_hat = state.v[k] / (1 - state.beta2**t)
        new_params[k] = p - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    state.t = t
    return new_params, state


def multiloss(per_layer_posteriors, true_bits) -> float:
    """Bitwise cross-entropy averaged over layers and bits (and frames)."""
    layers = [np.asarray(p, dtype=np.float64) for p in per_layer_posteriors]
    bits = np.asarray(true_bits, dtype=np.float64)
    if not layers:
        raise ValueError("no posterior layers")
    total = 0.0
    for p in layers:
        if p.shape != layers[0].shape:
            raise ValueError("posterior layers have inconsistent shapes")
        if p.shape[-1] != bits.shape[-1]:
            raise ValueError("posterior length does not match bits")
        total += float(PlainOps.bce_with_logits(p, bits).sum())
    count = len(layers) * layers[0].size
    return total / count


def tape_multiloss(tape: Tape, posts: list[TVar], bits: np.ndarray) -> TVar:
    total = None
    for p in posts:
        s = tape.sum_all(tape.bce_with_logits(p, bits))
        total = s if total is None else tape.add(total, s)
    count = len(posts) * posts[0].value.size
    return tape.scale(total, 1.0 / count)


def _value(h):
    return h.value if isinstance(h, TVar) else h


def genie_nbpd_forward(ops, graph: TannerGraph, weight_handles, mlp_handles,
                       mu_h, cfg: NbpdConfig, true_bits: np.ndarray,
                       forced_choices: list[np.ndarray] | None = None):
    """Unroll the genie-path decoder: NBP runs, correct-sign pinning, learned
    decimation, final decode.

    Returns (all per-layer posterior handles, list-stage choice trace). The
    discrete decimation choices (argmin of reliability) and the posterior
    sign gate are read from values and enter the graph as constants;
    `forced_choices` replays a recorded trace so that finite-difference
    probes differentiate the same fixed piecewise branch.
    """
    t = tables_for(graph)
    w_ch, w_v2c, w_c2v = weight_handles
    bits = np.asarray(true_bits, dtype=np.float64)
    B, n = bits.shape
    E = graph.num_edges
    rows = np.arange(B)
    sat_target = LLR_SAT * (1.0 - 2.0 * bits)

    all_posts = []
    decimated = np.zeros((B, n), dtype=bool)
    trace: list[np.ndarray] = []
    for i in range(cfg.n_d):
        posts, _ = unrolled_nbp(ops, t, w_ch, w_v2c, w_c2v, mu_h, cfg.l_max, B, E)
        all_posts.extend(posts)
        if forced_choices is not None:
            k = forced_choices[i]
        else:
            rel = np.where(decimated, np.inf, np.abs(_value(posts[-1])))
            k = np.argmin(rel, axis=1)
        trace.append(k)
        decimated[rows, k] = True
        mu_h = ops.set_cols_per_row(mu_h, k, sat_target[rows, k])

    for _ in range(cfg.n_ld):
        posts, c2v = unrolled_nbp(ops, t, w_ch, w_v2c, w_c2v, mu_h, cfg.l_max, B, E)
        all_posts.extend(posts)
        cols = [mu_h]
        for j in range(t.vn_pos_idx.shape[0]):
            cols.append(ops.masked_gather(c2v, t.vn_pos_idx[j], t.vn_pos_mask[j], 0.0))
        x = ops.stack_cols(cols)
        w1, b1, w2, b2, w3, b3 = mlp_handles
        h = ops.relu(ops.affine(x, w1, b1))
        h = ops.relu(ops.affine(h, w2, b2))
        f = ops.reshape(ops.affine(h, w3, b3), (B, n))
        sign = np.where(_value(posts[-1]) < 0, -1.0, 1.0)
        delta = ops.mul(ops.constant(sign), ops.abs(f))
        mu_h = ops.clip_sat(ops.add(mu_h, delta))

    posts, _ = unrolled_nbp(ops, t, w_ch, w_v2c, w_c2v, mu_h, cfg.l_max, B, E)
    all_posts.extend(posts)
    return all_posts, trace


def forward_with_tape(graph: TannerGraph, weights: WeightSet,
                      params: DecimatorParams | None, mu_ch: np.ndarray,
                      cfg: NbpdConfig, true_bits: np.ndarray | None = None,
                      forced_choices=None):
    """Record the unrolled decoder on a fresh tape.

    Without MLP params this is a plain NBP unroll (cfg decimation counts
    must be zero); with params it follows the genie path, which requires
    the transmitted bits. Returns (per-layer posterior handles, tape, trace).
    """
    cfg.validate(graph.n)
    weights.validate_for(graph)
    mu_b = np.asarray(mu_ch, dtype=np.float64)
    if mu_b.ndim == 1:
        mu_b = mu_b[None, :]
    tape = Tape()
    w_handles = (tape.param(weights.w_ch), tape.param(weights.w_v2c),
                 tape.param(weights.w_c2v))
    mu_h = tape.input(mu_b)
    if params is None:
        if cfg.n_d or cfg.n_ld:
            raise ValueError("decimation requested without MLP parameters")
        posts, _ = unrolled_nbp(tape, tables_for(graph), *w_handles, mu_h,
                                cfg.l_max, mu_b.shape[0], graph.num_edges)
        return posts, tape, []
    if true_bits is None:
        raise ValueError("genie-path unroll requires the transmitted bits")
    bits = np.asarray(true_bits, dtype=np.float64)
    if bits.ndim == 1:
        bits = bits[None, :]
    mlp_handles = (tape.param(params.layer1_w), tape.param(params.layer1_b),
                   tape.param(params.layer2_w), tape.param(params.layer2_b),
                   tape.param(params.layer3_w),
                   tape.param(np.array([params.layer3_b])))
    posts, trace = genie_nbpd_forward(tape, graph, w_handles, mlp_handles,
                                      mu_h, cfg, bits, forced_choices)
    return posts, tape, trace


def plain_nbp_posteriors(graph: TannerGraph, weights: WeightSet,
                         mu_ch: np.ndarray, l_max: int) -> list[np.ndarray]:
    """Direct-execution twin of the recorded NBP forward."""
    mu_b = mu_ch[None, :] if mu_ch.ndim == 1 else mu_ch
    posts, _ = unrolled_nbp(PlainOps, tables_for(graph), weights.w_ch,
                            weights.w_v2c, weights.w_c2v, mu_b, l_max,
                            mu_b.shape[0], graph.num_edges)
    return posts


def plain_genie_posteriors(graph: TannerGraph, weights: WeightSet,
                           params: DecimatorParams, mu_ch: np.ndarray,
                           cfg: NbpdConfig, true_bits: np.ndarray,
                           forced_choices=None):
    """Direct-execution twin of the recorded genie-path forward."""
    mu_b = mu_ch[None, :] if mu_ch.ndim == 1 else mu_ch
    bits = true_bits[None, :] if true_bits.ndim == 1 else true_bits
    w_handles = (weights.w_ch, weights.w_v2c, weights.w_c2v)
    mlp_handles = (params.layer1_w, params.layer1_b, params.layer2_w,
                   params.layer2_b, params.layer3_w, np.array([params.layer3_b]))
    return genie_nbpd_forward(PlainOps, graph, w_handles, mlp_handles, mu_b,
                              cfg, bits, forced_choices)


def sample_training_batch(graph: TannerGraph, cfg: TrainConfig,
                          rng: np.random.Generator, gen=None):
    """Transmitted bits and channel LLRs for one batch.

    Eb/N0 is drawn uniformly per frame from the configured interval; the
    rate for the noise scaling comes from the code dimension.
    """
    if gen is None:
        gen = derive_generator(graph)
    B, n = cfg.batch_size, graph.n
    if cfg.codeword_mode == "random":
        msgs = rng.integers(0, 2, size=(B, gen.k))
        bits = encode_batch(gen, msgs)
    else:
        bits = np.zeros((B, n), dtype=np.uint8)
    rate = gen.k / n
    symbols = 1.0 - 2.0 * bits.astype(np.float64)
    ebn0 = rng.uniform(cfg.ebn0_range_db[0], cfg.ebn0_range_db[1], size=(B, 1))
    sigma = np.sqrt(1.0 / (2.0 * rate * 10.0 ** (ebn0 / 10.0)))
    y = symbols + sigma * rng.standard_normal((B, n))
    mu = np.clip(2.0 * y / sigma**2, -LLR_SAT, LLR_SAT)
    return bits, mu


def train_nbp(graph: TannerGraph, cfg: TrainConfig) -> WeightSet:
    """Fit the NBP weights from all-ones initialization."""
    cfg.validate()
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence((cfg.seed, 1))))
    gen = derive_generator(graph)
    params = {"w_ch": np.ones(graph.n), "w_v2c": np.ones(graph.num_edges),
              "w_c2v": np.ones(graph.num_edges)}
    state = AdamState.init(params)
    t = tables_for(graph)
    for _ in range(cfg.steps):
        bits, mu = sample_training_batch(graph, cfg, rng, gen)
        tape = Tape()
        handles = {k: tape.param(v) for k, v in params.items()}
        posts, _ = unrolled_nbp(tape, t, handles["w_ch"], handles["w_v2c"],
                                handles["w_c2v"], tape.input(mu), cfg.l_max,
                                cfg.batch_size, graph.num_edges)
        loss = tape_multiloss(tape, posts, bits.astype(np.float64))
        grads = tape.backward(loss)
        gdict = {k: grads[h.idx] for k, h in handles.items()}
        params, state = adam_step(params, gdict, state, cfg.learning_rate)
    return WeightSet(**params)


def train_decimator(graph: TannerGraph, frozen: WeightSet, cfg: TrainConfig,
                    nbpd_cfg: NbpdConfig) -> DecimatorParams:
    """Fit the decimation MLP along the genie path with frozen NBP weights."""
    cfg.validate()
    nbpd_cfg.validate(graph.n)
    if nbpd_cfg.n_ld < 1:
        raise ValueError("n_ld must be >= 1 to train the decimator")
    frozen.validate_for(graph)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence((cfg.seed, 2))))
    gen = derive_generator(graph)
    mlp = DecimatorParams.init_random(graph.d_vmax, cfg.seed)
    params = {"l1w": mlp.layer1_w, "l1b": mlp.layer1_b, "l2w": mlp.layer2_w,
              "l2b": mlp.layer2_b, "l3w": mlp.layer3_w,
              "l3b": np.array([mlp.layer3_b])}
    state = AdamState.init(params)
    order = ("l1w", "l1b", "l2w", "l2b", "l3w", "l3b")
    for _ in range(cfg.steps):
        bits, mu = sample_training_batch(graph, cfg, rng, gen)
        tape = Tape()
        w_handles = (tape.param(frozen.w_ch), tape.param(frozen.w_v2c),
                     tape.param(frozen.w_c2v))
        mlp_handles = tuple(tape.param(params[k]) for k in order)
        posts, _ = genie_nbpd_forward(tape, graph, w_handles, mlp_handles,
                                      tape.input(mu), nbpd_cfg,
                                      bits.astype(np.float64))
        loss = tape_multiloss(tape, posts, bits.astype(np.float64))
        grads = tape.backward(loss)
        # WeightSet gradients are computed but discarded: weights stay frozen.
        gdict = {k: grads[h.idx] for k, h in zip(order, mlp_handles)}
        params, state = adam_step(params, gdict, state, cfg.learning_rate)
    return DecimatorParams(
        layer1_w=params["l1w"], layer1_b=params["l1b"],
        layer2_w=params["l2w"], layer2_b=params["l2b"],
        layer3_w=params["l3w"], layer3_b=float(params["l3b"][0]),
    )
