"""Minimal dense/convolutional network stack (numpy, CPU, float32).

Re-exports the operation-level API: graph construction, forward/backward,
the Euclidean-distance loss, Adam, the training loop, and weight file I/O.
"""

from .model import (
    Graph,
    NetworkError,
    build_control_net,
    euclidean_loss,
    euclidean_loss_grad,
    forward,
    backward,
    loss_and_grads,
    param_count,
    init_params,
    validate_params,
)
from .optim import AdamState, adam_step
from .training import TrainConfig, TrainingError, train, evaluate_loss, batch_tensor
from .weights import WeightsError, load_weights, save_weights

__all__ = [
    "AdamState",
    "Graph",
    "NetworkError",
    "TrainConfig",
    "TrainingError",
    "WeightsError",
    "adam_step",
    "backward",
    "batch_tensor",
    "build_control_net",
    "euclidean_loss",
    "euclidean_loss_grad",
    "evaluate_loss",
    "forward",
    "init_params",
    "load_weights",
    "loss_and_grads",
    "param_count",
    "save_weights",
    "train",
    "validate_params",
]
