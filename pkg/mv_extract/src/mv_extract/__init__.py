"""Motion-vector side-data extraction to sidecar CSV plus decoded frames."""
from .drivers import (DecodedFrame, decode_with_mvs, decoder_available,
                      encode_route_available, encoder_available)
from .errors import ExtractError, InvalidJob, UnsupportedCodecError
from .extract import (EncodeSettings, ExtractJob, ExtractResult,
                      TripletResult, encode_triplet, extract_stream)
from .gop import FrameInfo, decode_positions, ref_distance
from .sidecar import HEADER, RawVector, sidecar_text, vector_row, write_sidecar

__all__ = [
    "DecodedFrame", "EncodeSettings", "ExtractError", "ExtractJob",
    "ExtractResult", "FrameInfo", "HEADER", "InvalidJob", "RawVector",
    "TripletResult", "UnsupportedCodecError", "decode_positions",
    "decode_with_mvs", "decoder_available", "encode_route_available",
    "encode_triplet", "encoder_available", "extract_stream", "ref_distance",
    "sidecar_text", "vector_row", "write_sidecar",
]
