"""Contour-based IP-frame codec for semantic segmentation video."""
from .codec import (
    CodecConfig,
    CodecError,
    EncodedFrame,
    EncodedVideo,
    FrameType,
    VideoHeader,
    coded_size_bits,
    decode_video,
    encode_video,
)
from .entropy import Bitstream, decode_symbols, encode_symbols
from .frames import (
    MotionRecord,
    apply_motion,
    dequantize_and_sum,
    diff_encode,
    estimate_motion,
    quantize_deltas,
)
from .maps import InstanceContour, extract_instances, rasterize
from .metrics import RdPoint, bpp, kbps, miou, rd_sweep
from .simplify import simplify
from .streaming import ChannelModel, Packet, depacketize, packetize, simulate_and_decode
from .synthetic import SyntheticSceneSpec, generate_corpus

__version__ = "0.1.0"
