"""Hotword biasing: phrase encoder, cross-attention decoder, swap
augmentation, gap penalty, and the mixed speech/text training loop."""

from cifbias.bias.augment import make_bias_targets, swap_augment
from cifbias.bias.losses import gap_loss, total_loss
from cifbias.bias.model import BiasDecode, BiasModel, bias_decode, bias_encode
from cifbias.bias.train import (BiasTrainConfig, batch_bias_loss, bias_train,
                                text_embed)

__all__ = [
    "BiasDecode",
    "BiasModel",
    "BiasTrainConfig",
    "batch_bias_loss",
    "bias_decode",
    "bias_encode",
    "bias_train",
    "gap_loss",
    "make_bias_targets",
    "swap_augment",
    "text_embed",
    "total_loss",
]
