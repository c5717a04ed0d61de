import os
import shutil
import tempfile

import numpy as np
from django.test import SimpleTestCase

from icdcoder import embeddings, textprep
from icdcoder.exceptions import (
    ConfigurationError, DataError, InputError)
from icdcoder.models import BowClassifier, bow_predict, bow_train, load_model
from icdcoder.tests.setup import corpora


def pretrained(dataset, dim=16, epochs=0, seed=0):
    corpus = [textprep.normalize_tokenize(t) for t in dataset.texts]
    dictionary = textprep.TokenDictionary.build(corpus, buckets=200)
    return embeddings.skipgram_pretrain(corpus, dictionary, dim=dim,
                                        epochs=epochs, seed=seed)


class BowTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super(BowTests, cls).setUpClass()
        cls.dataset = corpora.separable(count=4, per_class=15)
        cls.classes = cls.dataset.codes
        cls.emb = pretrained(cls.dataset)
        cls.model = bow_train(cls.dataset.entries, cls.emb, cls.classes,
                              epochs=15, lr=0.5, seed=3)

    def test_untrained_is_uniform(self):
        model = BowClassifier(self.emb, self.classes)
        probs = model.predict_proba('akute links bronchitis')
        np.testing.assert_allclose(probs, np.full(4, 0.25))
        self.assertEqual(model.predict('x').label, 'A01')

    def test_fits_separable(self):
        correct = sum(self.model.predict(e.text).label == e.code
                      for e in self.dataset)
        self.assertGreaterEqual(correct, 0.9 * len(self.dataset))

    def test_loss_decreases(self):
        losses = self.model.log.losses
        self.assertEqual(len(losses), 15)
        self.assertLess(losses[-1], losses[0])

    def test_predict(self):
        prediction = bow_predict('gastritis rechts', self.model)
        self.assertEqual(prediction.label, 'B02')
        self.assertAlmostEqual(prediction.probs.sum(), 1.0)
        self.assertEqual(prediction.top(2)[0][0], 'B02')

    def test_token_order(self):
        """
        Reordering the tokens of a text leaves its prediction unchanged.
        """
        forward = self.model.predict_proba('akute links bronchitis')
        for text in ('bronchitis akute links', 'links, bronchitis akute'):
            np.testing.assert_allclose(self.model.predict_proba(text),
                                       forward, atol=1e-12)

    def test_no_tokens(self):
        """
        Text without any token embeds as the zero vector; the bias decides.
        """
        probs = self.model.predict_proba('-- / --')
        bias = self.model.bias.data
        expected = np.exp(bias - bias.max())
        np.testing.assert_allclose(probs, expected / expected.sum())

    def test_input_untouched(self):
        """
        Training works on a copy of the pretrained table.
        """
        fresh = pretrained(self.dataset)
        np.testing.assert_array_equal(self.emb.input.data, fresh.input.data)

    def test_freeze(self):
        model = bow_train(self.dataset.entries, self.emb, self.classes,
                          epochs=2, seed=3, freeze=True)
        np.testing.assert_array_equal(model.embedding.input.data,
                                      self.emb.input.data)
        self.assertTrue(model.hyperparameters['freeze'])

    def test_deterministic(self):
        model = bow_train(self.dataset.entries, self.emb, self.classes,
                          epochs=15, lr=0.5, seed=3)
        np.testing.assert_array_equal(model.weight.data,
                                      self.model.weight.data)

    def test_batches(self):
        model = bow_train(self.dataset.entries, self.emb, self.classes,
                          epochs=3, lr=0.5, seed=3, batch_size=8)
        self.assertEqual(len(model.log.losses), 3)

    def test_errors(self):
        self.assertRaises(InputError, bow_train, [], self.emb, self.classes)
        self.assertRaises(InputError, bow_train, self.dataset.entries,
                          self.emb, [])
        self.assertRaises(DataError, bow_train, self.dataset.entries,
                          self.emb, self.classes[:2])
        self.assertRaises(InputError, BowClassifier, self.emb,
                          ['B02', 'A01'])
        no_dictionary = embeddings.EmbeddingMatrix(self.emb.input)
        self.assertRaises(ConfigurationError, BowClassifier, no_dictionary,
                          self.classes)

    def test_checkpoint(self):
        directory = tempfile.mkdtemp()
        self.addCleanup(shutil.rmtree, directory)
        path = os.path.join(directory, 'model.ckpt')
        self.model.save(path)
        with open(path, 'rb') as f:
            self.assertEqual(f.read(9), b'ICDCKPT1\n')
        loaded = load_model(path)
        self.assertIsInstance(loaded, BowClassifier)
        self.assertEqual(loaded.classes, self.classes)
        for entry in self.dataset.entries[:10]:
            np.testing.assert_array_equal(
                loaded.predict_proba(entry.text),
                self.model.predict_proba(entry.text))
        again = os.path.join(directory, 'again.ckpt')
        loaded.save(again)
        with open(path, 'rb') as a, open(again, 'rb') as b:
            self.assertEqual(a.read(), b.read())
