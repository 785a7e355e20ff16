"""Numpy networks, policy heads and optimizer."""

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .distributions import (DistributionParams, beta_moments, entropy_term, log_prob,
                            sample, softmax_policy)
from .layers import LayerStack, identity_stack, relu6
from .nets import AcceptNet, OfferNet, build_accept_net, build_offer_net
from .optim import AdamState, adam_step

__all__ = [
    "AcceptNet", "AdamState", "CheckpointError", "DistributionParams", "LayerStack",
    "OfferNet", "adam_step", "beta_moments", "build_accept_net", "build_offer_net",
    "entropy_term", "identity_stack", "load_checkpoint", "log_prob", "relu6", "sample",
    "save_checkpoint", "softmax_policy",
]
