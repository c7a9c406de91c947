from .adam import AdamState, NonFiniteGradientError, adam_step
from .gradcheck import finite_difference_check, numeric_gradient, relative_error
from .layers import (BILSTM, FF, SOFTMAX, Layer, LayerSpec, ShapeError, bilstm, bilstm_backward,
                     bilstm_forward, feedforward_backward, feedforward_forward, ff, init_layer_params,
                     init_params, softmax_out)

__all__ = [
    "AdamState", "NonFiniteGradientError", "adam_step",
    "finite_difference_check", "numeric_gradient", "relative_error",
    "BILSTM", "FF", "SOFTMAX", "Layer", "LayerSpec", "ShapeError",
    "bilstm", "bilstm_backward", "bilstm_forward", "feedforward_backward",
    "feedforward_forward", "ff", "init_layer_params", "init_params", "softmax_out",
]
