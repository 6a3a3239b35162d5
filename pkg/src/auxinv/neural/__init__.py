"""From-scratch neural language models on a numpy autodiff core."""

from .tensor import NumericFault, ShapeError, Tensor  # noqa: F401
from .models import NeuralLM, NeuralLMConfig  # noqa: F401
from .train import batchify, encode_stream, evaluate_stream, train_lm  # noqa: F401
