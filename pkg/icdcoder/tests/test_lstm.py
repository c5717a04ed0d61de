import os
import shutil
import tempfile

import numpy as np
from django.test import SimpleTestCase

from icdcoder import numerics as nx
from icdcoder import generator, textprep
from icdcoder.exceptions import DimensionError, InputError
from icdcoder.models import (
    LstmClassifier, LstmParameters, lstm_cell, lstm_forward, lstm_predict,
    lstm_train, load_model, position_class_probs)
from icdcoder.models.lstm import _run, encode_batch
from icdcoder.tests.setup import corpora
from icdcoder.utils import make_rng


class LstmGradientTests(SimpleTestCase):

    def setUp(self):
        self.p = LstmParameters.init(5, 4, 3, seed=2)
        self.rng = make_rng(2, 'tests', 'lstm')

    def test_cell(self):
        x = nx.Tensor(self.rng.normal(size=(2, 5)), requires_grad=True)
        h = nx.Tensor(self.rng.normal(size=(2, 4)), requires_grad=True)
        c = nx.Tensor(self.rng.normal(size=(2, 4)), requires_grad=True)

        def loss():
            h_new, c_new = lstm_cell(x, h, c, self.p)
            return nx.sum(h_new * c_new)
        error = nx.gradient_check(loss, [x, h, c] + self.p.tensors()[:12],
                                  max_coords=10, rng=self.rng)
        self.assertLess(error, 1e-4)

    def test_sequence_loss(self):
        """
        Backpropagation through a length-7 sequence and the head.
        """
        inputs = np.zeros((7, 1, 5))
        inputs[np.arange(7), 0, [0, 1, 2, 3, 4, 0, 1]] = 1.0

        def loss():
            final = _run(inputs, None, self.p)[-1]
            logits = final @ self.p.head_weight + self.p.head_bias
            return nx.cross_entropy(nx.softmax(logits), [2])
        error = nx.gradient_check(loss, self.p.tensors(), max_coords=10,
                                  rng=self.rng)
        self.assertLess(error, 1e-4)


class LstmForwardTests(SimpleTestCase):

    def setUp(self):
        self.vocab = textprep.CharVocabulary('abc')
        self.p = LstmParameters.init(self.vocab.width, 6, 2, seed=1)

    def test_zero_parameters(self):
        """
        All-zero weights keep every gate at one half and the state at zero.
        """
        p = LstmParameters.zeros(4, 3, 2)
        states = lstm_forward(np.eye(4), p)
        np.testing.assert_array_equal(states, np.zeros((4, 3)))
        matrix = position_class_probs(np.eye(4), p, ['I25', 'E11'])
        np.testing.assert_allclose(matrix.probs, np.full((4, 2), 0.5))

    def test_shapes(self):
        seq = textprep.char_encode('abcab', self.vocab)
        self.assertEqual(lstm_forward(seq, self.p).shape, (5, 6))
        matrix = position_class_probs(seq, self.p)
        self.assertEqual(matrix.shape, (5, 2))
        np.testing.assert_allclose(matrix.probs.sum(axis=1), np.ones(5))
        self.assertEqual(matrix.classes, ['0', '1'])

    def test_prefix(self):
        """
        Each position only sees the characters up to it.
        """
        full = lstm_forward(textprep.char_encode('abcab', self.vocab), self.p)
        prefix = lstm_forward(textprep.char_encode('abc', self.vocab), self.p)
        np.testing.assert_allclose(full[:3], prefix)

    def test_padding_mask(self):
        """
        A padded batch gives every sequence the final state it has alone.
        """
        texts = ['abcab', 'ca', 'b']
        inputs, mask = encode_batch(texts, self.vocab)
        finals = _run(inputs, mask, self.p)[-1].data
        for row, text in zip(finals, texts):
            alone = lstm_forward(textprep.char_encode(text, self.vocab),
                                 self.p)
            np.testing.assert_allclose(row, alone[-1])

    def test_errors(self):
        self.assertRaises(InputError, lstm_forward, np.zeros((0, 4)), self.p)
        self.assertRaises(DimensionError, lstm_cell, np.zeros(3),
                          np.zeros(6), np.zeros(6), self.p)
        self.assertRaises(DimensionError, lstm_cell, np.zeros(4),
                          np.zeros(6), np.zeros(5), self.p)
        self.assertRaises(InputError, lstm_predict, '', self.p, self.vocab)
        matrix = position_class_probs(np.eye(4), self.p, ['I25', 'E11'])
        self.assertRaises(InputError, matrix.column, 'J44')

    def test_ood_characters(self):
        prediction = lstm_predict('xyz', self.p, self.vocab, ['I25', 'E11'])
        same = lstm_predict('zzz', self.p, self.vocab, ['I25', 'E11'])
        np.testing.assert_array_equal(prediction.probs, same.probs)


class LstmTrainingTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super(LstmTrainingTests, cls).setUpClass()
        spec = corpora.spec(corpora.ORDER_CLASSES, per_class=20, seed=4)
        cls.dataset = generator.generate_corpus(spec)
        cls.vocab = textprep.build_char_vocab(cls.dataset)
        cls.classes = cls.dataset.codes
        cls.model = lstm_train(cls.dataset.entries, cls.vocab, cls.classes,
                               hidden=16, epochs=25, lr=0.02, batch_size=8,
                               seed=4)

    def test_log(self):
        epochs = self.model.log.epochs
        self.assertEqual(len(epochs), 25)
        self.assertLess(epochs[-1]['loss'], epochs[0]['loss'])
        self.assertIn('grad_norm', epochs[0])

    def test_order_sensitive(self):
        """
        Texts with the same characters in a different order are told apart.
        """
        self.assertEqual(self.model.predict('knie links schmerz').label,
                         'M01')
        self.assertEqual(self.model.predict('schmerz links knie').label,
                         'M02')

    def test_heatmap_final_row(self):
        text = 'knie rechts schmerz'
        matrix = self.model.position_class_probs(text)
        self.assertEqual(matrix.shape, (len(text), 2))
        np.testing.assert_allclose(matrix.final,
                                   self.model.predict_proba(text))

    def test_deterministic(self):
        again = lstm_train(self.dataset.entries, self.vocab, self.classes,
                           hidden=16, epochs=2, lr=0.02, batch_size=8, seed=4)
        other = lstm_train(self.dataset.entries, self.vocab, self.classes,
                           hidden=16, epochs=2, lr=0.02, batch_size=8, seed=4)
        for a, b in zip(again.params.tensors(), other.params.tensors()):
            np.testing.assert_array_equal(a.data, b.data)

    def test_checkpoint(self):
        directory = tempfile.mkdtemp()
        self.addCleanup(shutil.rmtree, directory)
        path = os.path.join(directory, 'lstm.ckpt')
        self.model.save(path)
        loaded = load_model(path)
        self.assertIsInstance(loaded, LstmClassifier)
        self.assertEqual(loaded.vocab, self.vocab)
        self.assertEqual(loaded.hyperparameters['hidden'], 16)
        text = 'schmerz knie bds'
        np.testing.assert_array_equal(loaded.predict_proba(text),
                                      self.model.predict_proba(text))
