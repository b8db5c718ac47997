"""Learned image codec whose bit allocation follows per-channel task importance.

The package couples a small convolutional autoencoder with three coding-side
mechanisms: a channel importance scorer that gates the latent, an uneven
channel grouping with per-group quantization scales, and a group-sequential
entropy model that predicts each group's distribution from the groups decoded
before it.  Task adapters let one trained codec serve several downstream
vision tasks.
"""

from taskcodec.grouping import GroupSpec, default_group_spec, group_and_scale, ungroup_and_rescale
from taskcodec.importance import ChannelScorer, rank_channels
from taskcodec.adapters import ChannelAttentionBlock, TaskAdapterBank
from taskcodec.entropy import quantize, gaussian_window_likelihood, LIKELIHOOD_FLOOR
from taskcodec.context import GroupedEntropyModel, EntropyParams, RateReport
from taskcodec.codec import ImageCodec, load_checkpoint, save_checkpoint
from taskcodec.losses import channel_order_loss, basic_loss, total_loss, LossWeights
from taskcodec.bd import RateAccuracyCurve, bd_accuracy, build_curve

__all__ = [
    "GroupSpec",
    "default_group_spec",
    "group_and_scale",
    "ungroup_and_rescale",
    "ChannelScorer",
    "rank_channels",
    "ChannelAttentionBlock",
    "TaskAdapterBank",
    "quantize",
    "gaussian_window_likelihood",
    "LIKELIHOOD_FLOOR",
    "GroupedEntropyModel",
    "EntropyParams",
    "RateReport",
    "ImageCodec",
    "load_checkpoint",
    "save_checkpoint",
    "channel_order_loss",
    "basic_loss",
    "total_loss",
    "LossWeights",
    "RateAccuracyCurve",
    "bd_accuracy",
    "build_curve",
]

__version__ = "0.1.0"
