"""
Dense float64 arithmetic with reverse-mode differentiation and optimizers.
"""
import numpy as np

from icdcoder.numerics.tensor import Tensor, Tape, as_tensor, current_tape
from icdcoder.numerics.ops import (
    add, sub, mul, matmul, transpose, reshape, sum, mean, exp, log, sigmoid,
    tanh, log_sigmoid, gelu, softmax, cross_entropy, take, embedding,
    layer_norm, PROB_FLOOR)
from icdcoder.numerics.optim import (
    OptimizerState, Optimizer, optimizer_step, clip_grad_norm)
from icdcoder.numerics.gradcheck import gradient_check


def backward(tape, loss, params=None):
    return tape.backward(loss, params=params)


def init_uniform(rng, shape, bound, name=None):
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True,
                  name=name)


def init_normal(rng, shape, std, name=None):
    return Tensor(rng.normal(0.0, std, size=shape), requires_grad=True,
                  name=name)


def init_zeros(shape, name=None, value=0.0):
    return Tensor(np.full(shape, value), requires_grad=True, name=name)
