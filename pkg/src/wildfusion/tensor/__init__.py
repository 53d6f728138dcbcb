from .core import ComputationTape, Tensor, apply_primitive, backward, grad_enabled, no_grad
from .gradcheck import finite_difference_check
from .ops import (
    ShapeError,
    add,
    avg_pool,
    batch_norm,
    concat,
    conv2d,
    cross_entropy_loss,
    global_avg_pool,
    global_max_pool,
    linear,
    max_pool,
    mul,
    relu,
    sigmoid,
    softmax,
)
from .optim import SGD, OptimizerState, lr_at, sgd_step

__all__ = [
    "ComputationTape",
    "OptimizerState",
    "SGD",
    "ShapeError",
    "Tensor",
    "add",
    "apply_primitive",
    "avg_pool",
    "backward",
    "batch_norm",
    "concat",
    "conv2d",
    "cross_entropy_loss",
    "finite_difference_check",
    "global_avg_pool",
    "global_max_pool",
    "grad_enabled",
    "linear",
    "lr_at",
    "max_pool",
    "mul",
    "no_grad",
    "relu",
    "sgd_step",
    "sigmoid",
    "softmax",
]
