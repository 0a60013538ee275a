"""flickerforge: rolling-shutter flicker synthesis, estimation, and removal."""

from .composite import (DynamicPair, ForegroundClip, Placement, alpha_over,
                        composite_dynamic_pair, place_clip_frame)
from .core import (EstimationError, FlickerForgeError, ValidationError,
                   srgb_decode, srgb_encode, substream)
from .deflicker import (DeflickerResult, FusionConfig, deflicker_burst,
                        deflicker_single, frame_gains)
from .estimate import (EstimatedFlicker, RowProfile, estimate_frequency,
                       fit_flicker, row_profile)
from .manifest import (DatasetConfig, ValidationReport, assign_splits,
                       generate_dataset, validate_manifest)
from .metrics import MetricReport, evaluate_pair, psnr, ssim, summarize
from .pngio import ImageIOError, png_bit_depth, read_matte_png, read_png, \
    write_matte_png, write_png
from .synth import (BurstSpec, SynthesizedBurst, apply_flicker, resize,
                    resize_frequency_scale, sample_training_triplet,
                    shake_warp, synth_burst)
from .waveform import (DUTY_GRID, FlickerSpec, GainProfile, WaveformMode,
                       effective_value, gain_profile, waveform_value)

__version__ = "0.1.0"

__all__ = [
    "BurstSpec", "DatasetConfig", "DeflickerResult", "DynamicPair",
    "EstimatedFlicker", "EstimationError", "FlickerForgeError",
    "FlickerSpec", "ForegroundClip", "FusionConfig", "GainProfile",
    "ImageIOError", "MetricReport", "Placement", "RowProfile",
    "SynthesizedBurst", "ValidationError", "ValidationReport",
    "WaveformMode", "DUTY_GRID", "alpha_over", "apply_flicker",
    "assign_splits", "composite_dynamic_pair", "deflicker_burst",
    "deflicker_single", "effective_value", "estimate_frequency",
    "evaluate_pair", "fit_flicker", "frame_gains", "gain_profile",
    "generate_dataset", "place_clip_frame", "png_bit_depth", "psnr",
    "read_matte_png", "read_png", "resize", "resize_frequency_scale",
    "row_profile",
    "sample_training_triplet", "shake_warp", "srgb_decode", "srgb_encode",
    "ssim", "substream", "summarize", "synth_burst", "validate_manifest",
    "waveform_value", "write_matte_png", "write_png",
]
