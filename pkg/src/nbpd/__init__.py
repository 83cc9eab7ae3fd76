"""Decoders and training for neural belief propagation with decimation."""

from .bp import (
    DecodeResult,
    WeightSet,
    cn_update,
    count_weights,
    decode_nbp,
    decode_nbp_batch,
    posterior_llr,
    vn_update,
    weights_from_json,
    weights_to_json,
)
from .channel import LLR_SAT, ChannelObservation, channel_llr, ebn0_to_sigma, modulate, transmit
from .decimation import (
    BranchState,
    DecimatorParams,
    NbpdConfig,
    complexity,
    count_decimator_params,
    learned_decimate,
    least_reliable_vn,
    mlp_forward,
    mlp_from_json,
    mlp_to_json,
    nbp_d_decode,
    select_candidate,
    split_branch,
)
from .graph import (
    GeneratorMatrix,
    TannerGraph,
    derive_generator,
    encode,
    enumerate_codewords,
    parse_alist,
    serialize_alist,
    syndrome_ok,
)
from .oracle import Codebook, exact_bit_map, ml_decode
from .simulate import BlerRecord, SimConfig, run_point, run_sweep
from .training import (
    AdamState,
    TrainConfig,
    adam_step,
    forward_with_tape,
    multiloss,
    train_decimator,
    train_nbp,
)

__version__ = "0.1.0"
