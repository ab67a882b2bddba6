from . import ops
from .core import NonFiniteError, Tensor, as_tensor, no_grad
from .gradcheck import GradCheckReport, grad_check, random_projection, relative_error
from .nn import ParamStore, multi_head_attention

__all__ = [
    "GradCheckReport",
    "NonFiniteError",
    "ParamStore",
    "Tensor",
    "as_tensor",
    "grad_check",
    "multi_head_attention",
    "no_grad",
    "ops",
    "random_projection",
    "relative_error",
]
