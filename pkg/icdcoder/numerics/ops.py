"""
Differentiable primitives.

Every function takes and returns :class:`Tensor` values (plain numbers and
arrays are wrapped) and registers its gradient rule on the active tape.
"""
import numpy as np

from icdcoder.exceptions import ClassIndexError, DimensionError
from icdcoder.numerics.tensor import Tensor, as_tensor, current_tape

PROB_FLOOR = 1e-12
_GELU_C = np.sqrt(2.0 / np.pi)


def _result(data, parents, backward):
    out = Tensor(data)
    tape = current_tape()
    if tape is not None and any(p.requires_grad for p in parents):
        out.requires_grad = True
        tape.record(out, parents, backward)
    return out


def _unbroadcast(grad, shape):
    """
    Sum ``grad`` down to ``shape`` after numpy broadcasting.
    """
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape)
                 if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _broadcast_shape(a, b, op):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError('cannot %s shapes %s and %s' % (op, a.shape,
                                                             b.shape))


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, 'add')

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)
    return _result(a.data + b.data, (a, b), backward)


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, 'subtract')

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)
    return _result(a.data - b.data, (a, b), backward)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, 'multiply')

    def backward(g):
        return (_unbroadcast(g * b.data, a.shape),
                _unbroadcast(g * a.data, b.shape))
    return _result(a.data * b.data, (a, b), backward)


def matmul(a, b):
    """
    Matrix product over the last two axes, broadcasting leading axes.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError('cannot multiply %s by %s' % (a.shape, b.shape))

    def backward(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)
    return _result(np.matmul(a.data, b.data), (a, b), backward)


def transpose(x, axes=None):
    x = as_tensor(x)
    if axes is None:
        axes = tuple(reversed(range(x.ndim)))
    inverse = tuple(np.argsort(axes))

    def backward(g):
        return (np.transpose(g, inverse),)
    return _result(np.transpose(x.data, axes), (x,), backward)


def reshape(x, shape):
    x = as_tensor(x)
    try:
        data = x.data.reshape(shape)
    except ValueError:
        raise DimensionError('cannot reshape %s to %s' % (x.shape, shape))

    def backward(g):
        return (g.reshape(x.shape),)
    return _result(data, (x,), backward)


def sum(x, axis=None, keepdims=False):
    x = as_tensor(x)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)
    return _result(x.data.sum(axis=axis, keepdims=keepdims), (x,), backward)


def mean(x, axis=None, keepdims=False):
    x = as_tensor(x)
    if axis is None:
        count = x.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        count = int(np.prod([x.shape[i] for i in axes]))
    return mul(sum(x, axis=axis, keepdims=keepdims), 1.0 / count)


def exp(x):
    x = as_tensor(x)
    out = np.exp(x.data)

    def backward(g):
        return (g * out,)
    return _result(out, (x,), backward)


def log(x):
    """
    Natural logarithm; defined for positive inputs only.
    """
    x = as_tensor(x)

    def backward(g):
        return (g / x.data,)
    return _result(np.log(x.data), (x,), backward)


def sigmoid(x):
    x = as_tensor(x)
    out = 0.5 * (1.0 + np.tanh(0.5 * x.data))

    def backward(g):
        return (g * out * (1.0 - out),)
    return _result(out, (x,), backward)


def tanh(x):
    x = as_tensor(x)
    out = np.tanh(x.data)

    def backward(g):
        return (g * (1.0 - out * out),)
    return _result(out, (x,), backward)


def log_sigmoid(x):
    x = as_tensor(x)
    out = -np.logaddexp(0.0, -x.data)

    def backward(g):
        return (g * 0.5 * (1.0 - np.tanh(0.5 * x.data)),)
    return _result(out, (x,), backward)


def gelu(x):
    """
    GELU, tanh approximation.
    """
    x = as_tensor(x)
    inner = _GELU_C * (x.data + 0.044715 * x.data ** 3)
    t = np.tanh(inner)
    out = 0.5 * x.data * (1.0 + t)

    def backward(g):
        dinner = _GELU_C * (1.0 + 3 * 0.044715 * x.data ** 2)
        return (g * (0.5 * (1.0 + t) + 0.5 * x.data * (1.0 - t * t) * dinner),)
    return _result(out, (x,), backward)


def softmax(logits, axis=-1):
    """
    Softmax along ``axis``, shifted by the maximum for stability.
    """
    logits = as_tensor(logits)
    shifted = logits.data - logits.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)
    return _result(out, (logits,), backward)


def cross_entropy(probs, gold, weights=None):
    """
    Mean of ``-ln(probs[gold])`` over the leading axes of ``probs``.

    Probabilities are clamped from below at ``PROB_FLOOR``. ``weights``
    (same shape as ``gold``) turns the mean into a weighted mean; a zero
    total weight gives a constant zero loss.
    """
    probs = as_tensor(probs)
    gold = np.asarray(gold, dtype=np.int64)
    classes = probs.shape[-1]
    if gold.shape != probs.shape[:-1]:
        raise DimensionError('gold labels %s do not match probabilities %s' %
                             (gold.shape, probs.shape))
    if gold.size and (gold.min() < 0 or gold.max() >= classes):
        raise ClassIndexError('gold class index out of range 0..%d' %
                              (classes - 1))
    if weights is None:
        weights = np.ones(gold.shape)
    weights = np.asarray(weights, dtype=np.float64)
    total = weights.sum()
    if total <= 0:
        return Tensor(0.0)
    picked = np.take_along_axis(probs.data, gold[..., None], axis=-1)[..., 0]
    clamped = np.maximum(picked, PROB_FLOOR)
    loss = float((weights * -np.log(clamped)).sum() / total)

    def backward(g):
        grad = np.zeros_like(probs.data)
        local = np.where(picked >= PROB_FLOOR, -weights / (clamped * total), 0.0)
        np.put_along_axis(grad, gold[..., None], (g * local)[..., None],
                          axis=-1)
        return (grad,)
    return _result(loss, (probs,), backward)


def take(x, indices, axis=0):
    """
    Gather entries of ``x`` along ``axis``; repeated indices accumulate
    their gradients.
    """
    x = as_tensor(x)
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size and (indices.min() < 0 or indices.max() >= x.shape[axis]):
        raise DimensionError('index out of range for axis %d of %s' %
                             (axis, x.shape))
    k = indices.ndim

    def backward(g):
        grad = np.zeros_like(x.data)
        target = np.moveaxis(grad, axis, 0)
        source = np.moveaxis(g, list(range(axis, axis + k)), list(range(k)))
        np.add.at(target, indices, source)
        return (grad,)
    return _result(np.take(x.data, indices, axis=axis), (x,), backward)


def embedding(table, ids):
    return take(table, ids, axis=0)


def layer_norm(x, gamma, beta, eps=1e-5):
    """
    Normalise over the last axis, then scale by ``gamma`` and shift by
    ``beta``.
    """
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    inv_std = 1.0 / np.sqrt((centered ** 2).mean(axis=-1, keepdims=True) + eps)
    xhat = centered * inv_std

    def backward(g):
        gxhat = g * gamma.data
        gx = inv_std * (gxhat - gxhat.mean(axis=-1, keepdims=True) -
                        xhat * (gxhat * xhat).mean(axis=-1, keepdims=True))
        return (gx, _unbroadcast(g * xhat, gamma.shape),
                _unbroadcast(g, beta.shape))
    return _result(xhat * gamma.data + beta.data, (x, gamma, beta), backward)
