"""Frame interpolation from codec motion vectors.

Pipeline: sidecar MV ingestion -> flow densification and smoothing ->
half-flow warping and blending -> residual refinement over a restricted
operator vocabulary -> int8 quantization simulation with per-operator
instrumentation.  Includes synthetic data with analytic ground truth,
brute-force oracles, quality metrics, and a CPU op benchmark harness.
"""

from .core_types import FlowField, Image, Tensor, float_to_u8
from .errors import (BadMagicError, ConfigError, FusionError, InvalidInput,
                     MVFIError, ParseError, ShapeError, SpecError,
                     TruncatedStreamError)
from .metrics import cos_sim, psnr, ssim
from .mv_ingest import (BlockVector, MVRecord, frames_with_vectors,
                        parse_sidecar, select_vectors, serialize_sidecar)
from .prealign import PrealignResult, SmoothingProfile, prealign_pair, smooth_flow
from .synth import SynthSpec, Triplet, gen_block_mvs, gen_sequence, gen_triplet

__version__ = "0.1.0"

__all__ = [
    "BadMagicError", "BlockVector", "ConfigError", "FlowField", "FusionError",
    "Image", "InvalidInput", "MVFIError", "MVRecord", "ParseError",
    "PrealignResult", "ShapeError", "SmoothingProfile", "SpecError",
    "SynthSpec", "Tensor", "Triplet", "TruncatedStreamError", "cos_sim",
    "float_to_u8", "frames_with_vectors", "gen_block_mvs", "gen_sequence",
    "gen_triplet", "parse_sidecar", "prealign_pair", "psnr", "select_vectors",
    "serialize_sidecar", "smooth_flow", "ssim", "__version__",
]
