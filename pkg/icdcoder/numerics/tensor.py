"""
Dense float64 tensors and the reverse-mode computation tape.

Operations only record themselves while a :class:`Tape` is active and at
least one input requires a gradient. Outside a tape a tensor is a plain
immutable value, which is what makes trained parameters safe to share
between prediction threads.
"""
import threading

import numpy as np

from icdcoder.exceptions import ContractError

_local = threading.local()


def current_tape():
    stack = getattr(_local, 'tapes', None)
    return stack[-1] if stack else None


class Tensor(object):
    """
    A float64 array with an optional gradient.

    :param data: anything ``numpy.asarray`` accepts.
    :param requires_grad: mark the tensor as a trainable leaf.
    :param name: label used in checkpoints and error messages.
    """
    __slots__ = ('data', 'grad', 'requires_grad', 'name')

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data.reshape(-1)[0])

    def numpy(self):
        return self.data

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        label = self.name and ' %s' % self.name or ''
        return '<Tensor%s shape=%s>' % (label, self.shape)

    def __add__(self, other):
        from icdcoder.numerics import ops
        return ops.add(self, other)

    def __radd__(self, other):
        from icdcoder.numerics import ops
        return ops.add(other, self)

    def __sub__(self, other):
        from icdcoder.numerics import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from icdcoder.numerics import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from icdcoder.numerics import ops
        return ops.mul(self, other)

    def __rmul__(self, other):
        from icdcoder.numerics import ops
        return ops.mul(other, self)

    def __matmul__(self, other):
        from icdcoder.numerics import ops
        return ops.matmul(self, other)

    def __neg__(self):
        from icdcoder.numerics import ops
        return ops.mul(self, -1.0)


def as_tensor(value):
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


class Node(object):
    __slots__ = ('out', 'parents', 'backward')

    def __init__(self, out, parents, backward):
        self.out = out
        self.parents = parents
        self.backward = backward


class Tape(object):
    """
    Ordered record of primitive operations for one forward pass.

    Use as a context manager; operations executed inside the block are
    appended in execution order, which is already a topological order::

        with Tape() as tape:
            loss = ops.cross_entropy(ops.softmax(x @ w), gold)
        tape.backward(loss, params=[w])
    """

    def __init__(self):
        self.nodes = []
        self._produced = set()

    def __enter__(self):
        stack = getattr(_local, 'tapes', None)
        if stack is None:
            stack = _local.tapes = []
        stack.append(self)
        return self

    def __exit__(self, *exc_info):
        _local.tapes.pop()
        return False

    def record(self, out, parents, backward):
        """
        Record ``out = f(*parents)``; ``backward(g)`` returns one gradient
        (or ``None``) per parent.
        """
        self.nodes.append(Node(out, parents, backward))
        self._produced.add(id(out))

    def backward(self, loss, params=None):
        """
        Propagate d(loss)/d(x) back through the recorded nodes.

        Every leaf reached gets its ``grad`` set. Tensors in ``params`` that
        the loss does not depend on get a zero gradient. Returns the list of
        gradients for ``params`` when given.
        """
        if loss.size != 1:
            raise ContractError(
                'backward needs a scalar loss, got shape %s' % (loss.shape,))
        grads = {id(loss): np.ones_like(loss.data)}
        leaves = {}
        for node in reversed(self.nodes):
            g = grads.pop(id(node.out), None)
            if g is None:
                continue
            for parent, pg in zip(node.parents, node.backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg
                if key not in self._produced:
                    leaves[key] = parent
        for key, leaf in leaves.items():
            leaf.grad = grads[key]
        if loss.requires_grad and id(loss) not in self._produced:
            loss.grad = np.ones_like(loss.data)
        if params is None:
            return None
        result = []
        for p in params:
            if id(p) not in leaves and p is not loss:
                p.grad = np.zeros_like(p.data)
            result.append(p.grad)
        return result
