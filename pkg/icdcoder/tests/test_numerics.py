import numpy as np
from django.test import SimpleTestCase

from icdcoder import numerics as nx
from icdcoder.exceptions import ClassIndexError, ContractError, DimensionError
from icdcoder.utils import make_rng

TOLERANCE = 1e-4
IDS = np.array([[0, 4], [4, 2]])


def leaf(rng, *shape, **kwargs):
    low = kwargs.get('low', -1.0)
    return nx.Tensor(rng.uniform(low, 1.0, size=shape), requires_grad=True)


class GradientTests(SimpleTestCase):
    """
    Tape gradients of every primitive agree with central differences.
    """

    def setUp(self):
        self.rng = make_rng(0, 'tests', self._testMethodName)

    def check(self, f, *params):
        error = nx.gradient_check(f, list(params), rng=self.rng)
        self.assertLess(error, TOLERANCE)

    def test_elementwise(self):
        a, b = leaf(self.rng, 3, 4), leaf(self.rng, 4)
        self.check(lambda: nx.sum(nx.mul(nx.add(a, b), nx.sub(a, b))), a, b)
        self.check(lambda: nx.sum(-a * 2.0 - b), a, b)

    def test_matmul(self):
        a, b = leaf(self.rng, 2, 3, 4), leaf(self.rng, 4, 5)
        self.check(lambda: nx.sum(nx.tanh(a @ b)), a, b)

    def test_shape_ops(self):
        a = leaf(self.rng, 2, 3, 4)
        w = leaf(self.rng, 2, 4, 3)
        self.check(lambda: nx.sum(nx.transpose(a, (0, 2, 1)) * w), a, w)
        self.check(lambda: nx.sum(nx.reshape(a, (6, 4)) @ nx.reshape(
            w, (4, 6))), a, w)

    def test_reductions(self):
        a = leaf(self.rng, 3, 5)
        self.check(lambda: nx.sum(nx.exp(nx.mean(a, axis=1))), a)
        self.check(lambda: nx.sum(nx.sum(a, axis=0, keepdims=True) * a), a)

    def test_nonlinearities(self):
        a = leaf(self.rng, 4, 3)
        p = leaf(self.rng, 4, 3, low=0.1)
        self.check(lambda: nx.sum(nx.sigmoid(a) * nx.log(p)), a, p)
        self.check(lambda: nx.sum(nx.log_sigmoid(a) + nx.gelu(a)), a)

    def test_softmax_cross_entropy(self):
        logits = leaf(self.rng, 6, 4)
        gold = np.array([0, 1, 2, 3, 3, 1])
        self.check(lambda: nx.cross_entropy(nx.softmax(logits), gold),
                   logits)
        weights = np.array([1.0, 0.0, 2.0, 1.0, 0.5, 0.0])
        self.check(lambda: nx.cross_entropy(nx.softmax(logits), gold,
                                            weights=weights), logits)

    def test_take(self):
        """
        Repeated indices accumulate their gradients.
        """
        table = leaf(self.rng, 5, 3)
        ids = np.array([[0, 2, 2], [4, 0, 1]])
        self.check(lambda: nx.sum(nx.tanh(nx.embedding(table, ids))), table)
        w = leaf(self.rng, 5, 2)
        self.check(lambda: nx.sum(nx.take(table, [1, 1], axis=1) * w),
                   table, w)

    def test_layer_norm(self):
        x = leaf(self.rng, 3, 6)
        gamma, beta = leaf(self.rng, 6), leaf(self.rng, 6)
        w = leaf(self.rng, 3, 6)
        self.check(lambda: nx.sum(nx.layer_norm(x, gamma, beta) * w),
                   x, gamma, beta)

    def test_seeded_points(self):
        """
        Ten seeded points per primitive, not just the first one drawn.
        """
        cases = [
            ((3, 4), (3, 4),
             lambda a, b: nx.sum(nx.mul(nx.add(a, b), nx.sub(a, b)))),
            ((3, 4), (4, 2), lambda a, b: nx.sum(nx.tanh(a @ b))),
            ((2, 3), (2, 3),
             lambda a, b: nx.sum(nx.sigmoid(a) * nx.exp(b))),
            ((2, 3), (2, 3),
             lambda a, b: nx.sum(nx.log(nx.sigmoid(a)) + nx.gelu(b))),
            ((2, 3), (2, 3),
             lambda a, b: nx.sum(nx.log_sigmoid(a) * nx.mean(b, axis=0))),
            ((2, 3), (3, 2),
             lambda a, b: nx.sum(nx.transpose(a) * nx.reshape(b, (3, 2)))),
            ((3, 4), (4, 3),
             lambda a, b: nx.cross_entropy(nx.softmax(a @ b), [0, 2, 1])),
            ((3, 4), (4,),
             lambda a, b: nx.sum(nx.layer_norm(a, b, b) * a)),
            ((5, 3), (3,),
             lambda a, b: nx.sum(nx.embedding(a, IDS) * b)),
        ]
        for seed in range(10):
            rng = make_rng(seed, 'tests', 'points')
            for shape_a, shape_b, f in cases:
                a, b = leaf(rng, *shape_a), leaf(rng, *shape_b)
                with self.subTest(seed=seed, shapes=(shape_a, shape_b)):
                    self.check(lambda: f(a, b), a, b)


class TapeTests(SimpleTestCase):

    def test_scalar_loss(self):
        x = nx.Tensor(np.ones(3), requires_grad=True)
        with nx.Tape() as tape:
            y = x * 2.0
        self.assertRaises(ContractError, tape.backward, y)

    def test_unused_param(self):
        """
        Parameters the loss does not depend on get a zero gradient.
        """
        x = nx.Tensor(np.ones(3), requires_grad=True)
        unused = nx.Tensor(np.ones(2), requires_grad=True)
        with nx.Tape() as tape:
            loss = nx.sum(x * x)
        grads = tape.backward(loss, params=[x, unused])
        np.testing.assert_array_equal(grads[0], 2 * np.ones(3))
        np.testing.assert_array_equal(grads[1], np.zeros(2))

    def test_no_tape(self):
        """
        Outside a tape operations record nothing.
        """
        x = nx.Tensor(np.ones(3), requires_grad=True)
        y = x * 2.0
        self.assertFalse(y.requires_grad)
        self.assertIsNone(nx.current_tape())

    def test_shape_errors(self):
        a, b = nx.Tensor(np.ones((2, 3))), nx.Tensor(np.ones((2, 3)))
        self.assertRaisesMessage(DimensionError, '(2, 3)', nx.matmul, a, b)
        self.assertRaises(DimensionError, nx.add, a, np.ones(4))
        self.assertRaises(DimensionError, nx.reshape, a, (4, 2))

    def test_cross_entropy_gold(self):
        probs = nx.softmax(nx.Tensor(np.zeros((2, 3))))
        self.assertRaises(ClassIndexError, nx.cross_entropy, probs, [0, 3])
        self.assertRaises(DimensionError, nx.cross_entropy, probs, [0])
        loss = nx.cross_entropy(probs, [0, 2])
        self.assertAlmostEqual(loss.item(), np.log(3))

    def test_cross_entropy_floor(self):
        probs = nx.Tensor([[1.0, 0.0]])
        loss = nx.cross_entropy(probs, [1])
        self.assertAlmostEqual(loss.item(), -np.log(nx.PROB_FLOOR))

    def test_softmax_stable(self):
        probs = nx.softmax(nx.Tensor([[1000.0, 1000.0, -1000.0]])).data
        np.testing.assert_allclose(probs, [[0.5, 0.5, 0.0]])

    def test_softmax_values(self):
        probs = nx.softmax(nx.Tensor([1.0, 2.0, 3.0])).data
        np.testing.assert_allclose(
            probs, [0.09003057, 0.24472847, 0.66524096], atol=1e-8)

    def test_matmul_oracle(self):
        for seed in range(5):
            rng = make_rng(seed, 'tests', 'matmul')
            n, k, m = (int(v) for v in rng.integers(1, 7, size=3))
            a, b = rng.normal(size=(n, k)), rng.normal(size=(k, m))
            expected = np.zeros((n, m))
            for i in range(n):
                for j in range(m):
                    for t in range(k):
                        expected[i, j] += a[i, t] * b[t, j]
            result = nx.matmul(nx.Tensor(a), nx.Tensor(b)).data
            np.testing.assert_allclose(result, expected, atol=1e-12)


class OptimizerTests(SimpleTestCase):

    def test_sgd(self):
        p = nx.Tensor(np.array([1.0, 2.0]), requires_grad=True)
        state = nx.OptimizerState('sgd', lr=0.5)
        nx.optimizer_step(state, [p], [np.array([1.0, -2.0])])
        np.testing.assert_allclose(p.data, [0.5, 3.0])

    def test_adam_first_step(self):
        """
        The bias-corrected first Adam step moves every coordinate by about
        the learning rate, against the gradient sign.
        """
        p = nx.Tensor(np.zeros(3), requires_grad=True)
        state = nx.OptimizerState('adam', lr=0.01)
        nx.optimizer_step(state, [p], [np.array([0.5, -3.0, 0.0])])
        np.testing.assert_allclose(p.data, [-0.01, 0.01, 0.0], atol=1e-6)
        self.assertEqual(state.step, 1)

    def test_none_gradient(self):
        p = nx.Tensor(np.ones(2), requires_grad=True)
        nx.optimizer_step(nx.OptimizerState('sgd', lr=1.0), [p], [None])
        np.testing.assert_array_equal(p.data, np.ones(2))

    def test_invalid_state(self):
        self.assertRaises(ContractError, nx.OptimizerState, 'rmsprop')
        self.assertRaises(ContractError, nx.OptimizerState, 'sgd', lr=0)
        self.assertRaises(ContractError, nx.OptimizerState, 'adam',
                          betas=(0.9, 1.0))

    def test_gradient_shape(self):
        p = nx.Tensor(np.ones(2), requires_grad=True)
        state = nx.OptimizerState('sgd', lr=1.0)
        self.assertRaises(DimensionError, nx.optimizer_step, state, [p],
                          [np.ones(3)])
        self.assertRaises(DimensionError, nx.optimizer_step, state, [p], [])

    def test_clip_grad_norm(self):
        a = nx.Tensor(np.zeros(2), requires_grad=True)
        b = nx.Tensor(np.zeros(1), requires_grad=True)
        a.grad, b.grad = np.array([3.0, 0.0]), np.array([4.0])
        self.assertAlmostEqual(nx.clip_grad_norm([a, b], 1.0), 5.0)
        np.testing.assert_allclose(a.grad, [0.6, 0.0])
        np.testing.assert_allclose(b.grad, [0.8])
        self.assertAlmostEqual(nx.clip_grad_norm([a, b], 10.0), 1.0)
        np.testing.assert_allclose(b.grad, [0.8])

    def test_clip_non_finite(self):
        a = nx.Tensor(np.zeros(1), requires_grad=True)
        a.grad = np.array([np.nan])
        self.assertRaises(ContractError, nx.clip_grad_norm, [a], 1.0)

    def test_linear_decay(self):
        p = nx.Tensor(np.zeros(1), requires_grad=True)
        p.grad = np.zeros(1)
        optimizer = nx.Optimizer([p], kind='sgd', lr=1.0, decay_steps=4)
        rates = []
        for _ in range(4):
            optimizer.step()
            rates.append(optimizer.lr)
        np.testing.assert_allclose(rates, [0.75, 0.5, 0.25, 1e-4])

    def test_sparse_step(self):
        table = nx.Tensor(np.ones((4, 2)), requires_grad=True)
        optimizer = nx.Optimizer([], kind='sgd', lr=0.5)
        optimizer.sparse_step(table, np.array([1, 1, 3]),
                              np.array([[1.0, 1.0], [1.0, 0.0], [2.0, 2.0]]))
        np.testing.assert_allclose(table.data, [[1, 1], [0, 0.5], [1, 1],
                                                [0, 0]])
        self.assertRaises(DimensionError, optimizer.sparse_step, table,
                          np.array([0]), np.ones((2, 2)))
