"""Style transfer by warping a style image to maximise mutual information with a content image."""

from .errors import DimensionError, FormatError, IoError, NonFiniteError, PixshufError
from .image import Image, downsample2x, load_image, resize_bilinear, save_image, to_luma
from .metrics import color_hist_chi2, ssim_luma
from .mi import HistogramConfig, JointHistogram, entropy, joint_histogram, mi_and_gradient, mutual_information
from .optimizer import LevelSchedule, OptimizerState, adam_step, optimize_level, run_pyramid, smoothness_penalty
from .stylize import MIChannels, StylizeConfig, StylizeReport, stylize
from .warp import (
    DisplacementField,
    SamplingMode,
    load_field,
    save_field,
    upsample_field,
    warp,
    warp_input_gradient,
)

__version__ = "0.1.0"
