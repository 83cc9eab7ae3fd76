"""Monte Carlo block/bit error rate estimation with Wilson confidence intervals."""

from __future__ import annotations

import io
import re
import time
from dataclasses import dataclass, field

import numpy as np

from .bp import WeightSet, weights_from_json
from .channel import LLR_SAT, frame_rng
from .decimation import DecimatorParams, NbpdConfig, mlp_from_json, nbp_d_decode_batch
from .graph import TannerGraph, derive_generator, encode_batch, parse_alist
from .kernels import FastDecoder

CSV_HEADER = "decoder,ebn0_db,frames,block_errors,bit_errors,bler,ber,ci95_low,ci95_high,wall_seconds"

DECODER_KINDS = ("bp", "nbp", "nbp-d", "uncoded")


@dataclass
class BlerRecord:
    ebn0_db: float
    frames: int
    block_errors: int
    bit_errors: int
    bler: float
    ber: float
    ci95_low: float
    ci95_high: float
    wall_seconds: float


@dataclass
class SimConfig:
    decoder: str = "bp"          # bp | nbp | nbp-d | uncoded
    l_max: int = 50
    n_d: int = 0
    n_ld: int = 0
    ebn0_db: list[float] = field(default_factory=list)
    min_block_errors: int = 100
    max_frames: int = 10_000_000
    seed: int = 0
    codeword_mode: str = "zero"  # zero | random
    alist_path: str | None = None
    weights_path: str | None = None
    mlp_path: str | None = None
    chunk_size: int = 512
    uncoded_block_length: int = 1024

    def validate(self):
        if self.decoder not in DECODER_KINDS:
            raise ValueError(f"unknown decoder {self.decoder!r}")
        if self.min_block_errors < 1 or self.max_frames < 1:
            raise ValueError("stop rule must require at least one error and one frame")
        if self.codeword_mode not in ("zero", "random"):
            raise ValueError(f"unknown codeword_mode {self.codeword_mode!r}")
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be >= 1")

    def decoder_label(self) -> str:
        if self.decoder == "uncoded":
            return "uncoded"
        if self.decoder == "nbp-d":
            return f"NBP-D({self.l_max},{self.n_d},{self.n_ld})"
        return f"{self.decoder.upper()}({self.l_max})"


def parse_decoder_spec(spec: str) -> tuple[str, int, int, int]:
    """Parse labels like BP(50), NBP(10) or NBP-D(10,4,1)."""
    s = spec.strip()
    if s.lower() == "uncoded":
        return "uncoded", 0, 0, 0
    m = re.fullmatch(r"(?i)(BP|NBP)\((\d+)\)", s)
    if m:
        return m.group(1).lower(), int(m.group(2)), 0, 0
    m = re.fullmatch(r"(?i)NBP-D\((\d+)\s*,\s*(\d+)\s*,\s*(\d+)\)", s)
    if m:
        return "nbp-d", int(m.group(1)), int(m.group(2)), int(m.group(3))
    raise ValueError(f"cannot parse decoder spec {spec!r}")


def wilson_ci(errors: int, trials: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if trials == 0:
        return 0.0, 1.0
    phat = errors / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (phat + z2 / (2 * trials)) / denom
    half = z * np.sqrt(phat * (1 - phat) / trials + z2 / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass
class SimResources:
    """Loaded, reusable decoding state for one configuration."""

    graph: TannerGraph | None = None
    weights: WeightSet | None = None
    params: DecimatorParams | None = None
    gen: object | None = None
    fast: FastDecoder | None = None

    @classmethod
    def from_config(cls, cfg: SimConfig, graph: TannerGraph | None = None,
                    weights: WeightSet | None = None,
                    params: DecimatorParams | None = None) -> "SimResources":
        cfg.validate()
        if cfg.decoder == "uncoded":
            return cls()
        if graph is None:
            if cfg.alist_path is None:
                raise ValueError("decoder requires a graph or alist_path")
            with open(cfg.alist_path) as f:
                graph = parse_alist(f.read())
        if weights is None:
            if cfg.decoder == "bp":
                weights = WeightSet.uniform(graph)
            elif cfg.weights_path is not None:
                with open(cfg.weights_path) as f:
                    weights = weights_from_json(f.read(), graph)
            else:
                weights = WeightSet.uniform(graph)
        if params is None and cfg.mlp_path is not None:
            with open(cfg.mlp_path) as f:
                params = mlp_from_json(f.read())
        if cfg.decoder == "nbp-d" and cfg.n_ld > 0 and params is None:
            raise ValueError("NBP-D with learned decimation needs MLP parameters")
        res = cls(graph=graph, weights=weights, params=params)
        res.gen = derive_generator(graph)
        res.fast = FastDecoder(graph, weights)
        return res


def _frame_batch(cfg: SimConfig, res: SimResources, point_key: int,
                 first_frame: int, count: int, sigma: float):
    """Transmitted bits and observations for frames [first, first+count).

    Each frame draws from its own counter-based substream: message bits
    first (random codeword mode), then the noise vector.
    """
    if cfg.decoder == "uncoded":
        n = cfg.uncoded_block_length
        k = n
    else:
        n = res.graph.n
        k = res.gen.k
    bits = np.empty((count, n), dtype=np.uint8)
    noise = np.empty((count, n))
    msgs = np.empty((count, k), dtype=np.uint8) if cfg.codeword_mode == "random" else None
    for i in range(count):
        rng = frame_rng(cfg.seed, point_key, first_frame + i)
        if msgs is not None:
            msgs[i] = rng.integers(0, 2, size=k)
        noise[i] = rng.standard_normal(n)
    if cfg.decoder == "uncoded":
        bits = msgs if msgs is not None else np.zeros((count, n), dtype=np.uint8)
    elif msgs is not None:
        bits = encode_batch(res.gen, msgs).astype(np.uint8)
    else:
        bits[:] = 0
    symbols = 1.0 - 2.0 * bits.astype(np.float64)
    y = symbols + sigma * noise
    llr = np.clip(2.0 * y / sigma**2, -LLR_SAT, LLR_SAT)
    return bits, y, llr


def _decode_chunk(cfg: SimConfig, res: SimResources, y, llr) -> np.ndarray:
    if cfg.decoder == "uncoded":
        return (llr < 0).astype(np.uint8)
    if cfg.decoder in ("bp", "nbp"):
        _, _, _, hd = res.fast.decode(llr, cfg.l_max, early_exit=True)
        return hd
    nbpd = NbpdConfig(cfg.l_max, cfg.n_d, cfg.n_ld)

    def decode_fn(mu):
        post, c2v, _, _ = res.fast.decode(mu, cfg.l_max, early_exit=False)
        return post, c2v

    codewords, _, _ = nbp_d_decode_batch(res.graph, res.weights, llr, y, nbpd,
                                         res.params, decode_fn=decode_fn)
    return codewords


def run_point(cfg: SimConfig, ebn0_db: float,
              res: SimResources | None = None) -> BlerRecord:
    """Simulate one Eb/N0 point until the stop rule fires."""
    cfg.validate()
    if res is None:
        res = SimResources.from_config(cfg)
    if cfg.decoder == "uncoded":
        rate = 1.0
        n = cfg.uncoded_block_length
    else:
        rate = res.gen.k / res.graph.n
        n = res.graph.n
    sigma = float(np.sqrt(1.0 / (2.0 * rate * 10.0 ** (ebn0_db / 10.0))))
    point_key = int(round(ebn0_db * 1000))

    t0 = time.perf_counter()
    frames = 0
    block_errors = 0
    bit_errors = 0
    while frames < cfg.max_frames and block_errors < cfg.min_block_errors:
        count = min(cfg.chunk_size, cfg.max_frames - frames)
        bits, y, llr = _frame_batch(cfg, res, point_key, frames, count, sigma)
        decided = _decode_chunk(cfg, res, y, llr)
        diff = decided != bits
        bit_errors += int(diff.sum())
        block_errors += int(diff.any(axis=1).sum())
        frames += count
    wall = time.perf_counter() - t0
    lo, hi = wilson_ci(block_errors, frames)
    return BlerRecord(
        ebn0_db=float(ebn0_db),
        frames=frames,
        block_errors=block_errors,
        bit_errors=bit_errors,
        bler=block_errors / frames,
        ber=bit_errors / (frames * n),
        ci95_low=lo,
        ci95_high=hi,
        wall_seconds=wall,
    )


def records_to_csv(label: str, records: list[BlerRecord]) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for r in records:
        buf.write(
            f"{label},{r.ebn0_db:g},{r.frames},{r.block_errors},{r.bit_errors},"
            f"{r.bler:.10g},{r.ber:.10g},{r.ci95_low:.10g},{r.ci95_high:.10g},"
            f"{r.wall_seconds:.3f}\n"
        )
    return buf.getvalue()


def run_sweep(cfg: SimConfig, csv_path: str | None = None,
              res: SimResources | None = None) -> tuple[list[BlerRecord], str]:
    """One record per configured Eb/N0 point, plus the CSV rendering."""
    cfg.validate()
    if res is None:
        res = SimResources.from_config(cfg)
    records = [run_point(cfg, e, res) for e in cfg.ebn0_db]
    csv_text = records_to_csv(cfg.decoder_label(), records)
    if csv_path is not None:
        with open(csv_path, "w") as f:
            f.write(csv_text)
    return records, csv_text


def ci_separated(a: BlerRecord, b: BlerRecord) -> bool:
    """True if a's interval lies strictly below b's (no overlap)."""
    return a.ci95_high < b.ci95_low
