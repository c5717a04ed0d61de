import logging

import numpy as np

from icdcoder.exceptions import ContractError, DimensionError

logger = logging.getLogger(__name__)

KINDS = ('sgd', 'adam')


class OptimizerState(object):
    """
    Learning rate plus, for Adam, the moment estimates and step counter.

    :param kind: ``'sgd'`` or ``'adam'``.
    :param lr: learning rate, must be positive.
    :param betas: Adam decay rates, each strictly inside (0, 1).
    """

    def __init__(self, kind='adam', lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        if kind not in KINDS:
            raise ContractError('unknown optimizer %r' % kind)
        if not lr > 0:
            raise ContractError('learning rate must be positive, got %r' % lr)
        if not all(0 < b < 1 for b in betas):
            raise ContractError('adam betas must lie in (0, 1), got %r' %
                                (betas,))
        self.kind = kind
        self.lr = lr
        self.betas = tuple(betas)
        self.eps = eps
        self.step = 0
        self.m = {}
        self.v = {}


def optimizer_step(state, params, grads):
    """
    Update ``params`` in place from ``grads`` and return them.

    SGD applies ``theta -= lr * g``; Adam applies the bias-corrected update.
    A ``None`` gradient leaves the parameter untouched.
    """
    if len(params) != len(grads):
        raise DimensionError('%d parameters but %d gradients' %
                             (len(params), len(grads)))
    state.step += 1
    for index, (param, grad) in enumerate(zip(params, grads)):
        if grad is None:
            continue
        if grad.shape != param.shape:
            raise DimensionError(
                'gradient %s does not match parameter %s%s' % (
                    grad.shape, param.shape,
                    param.name and ' (%s)' % param.name or ''))
        if state.kind == 'sgd':
            param.data -= state.lr * grad
            continue
        b1, b2 = state.betas
        m = state.m.get(index)
        if m is None:
            m = state.m[index] = np.zeros_like(param.data)
            state.v[index] = np.zeros_like(param.data)
        v = state.v[index]
        m *= b1
        m += (1 - b1) * grad
        v *= b2
        v += (1 - b2) * grad * grad
        m_hat = m / (1 - b1 ** state.step)
        v_hat = v / (1 - b2 ** state.step)
        param.data -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params


def clip_grad_norm(params, max_norm):
    """
    Rescale all gradients together so their global L2 norm is at most
    ``max_norm``. Returns the norm before clipping.
    """
    grads = [p.grad for p in params if p.grad is not None]
    norm = float(np.sqrt(np.sum([np.sum(g * g) for g in grads])))
    if not np.isfinite(norm):
        raise ContractError('non-finite gradient norm')
    if norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        for g in grads:
            g *= scale
    return norm


class Optimizer(object):
    """
    Binds an :class:`OptimizerState` to a fixed parameter list.

    ``decay_steps`` enables a linear learning-rate decay to zero over that
    many steps, the schedule used for the shallow model.
    """

    def __init__(self, params, kind='adam', lr=1e-3, decay_steps=None,
                 **kwargs):
        self.params = list(params)
        self.state = OptimizerState(kind=kind, lr=lr, **kwargs)
        self.base_lr = lr
        self.decay_steps = decay_steps

    @property
    def lr(self):
        return self.state.lr

    def _decay(self):
        if self.decay_steps:
            progress = min(1.0, self.state.step / float(self.decay_steps))
            self.state.lr = max(self.base_lr * (1.0 - progress),
                                self.base_lr * 1e-4)

    def step(self):
        optimizer_step(self.state, self.params, [p.grad for p in self.params])
        self._decay()

    def sparse_step(self, table, rows, grad):
        """
        SGD update of selected ``rows`` of a large ``table`` at the current
        learning rate. Repeated rows accumulate.
        """
        if grad.shape != (len(rows),) + table.shape[1:]:
            raise DimensionError('row gradient %s does not match %d rows of %s'
                                 % (grad.shape, len(rows), table.shape))
        np.subtract.at(table.data, rows, self.state.lr * grad)

    def zero_grad(self):
        for p in self.params:
            p.grad = None
