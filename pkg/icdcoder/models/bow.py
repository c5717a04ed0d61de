"""
Shallow baseline: averaged word and subword embeddings under a linear
softmax head.
"""
import logging

import numpy as np

from icdcoder import numerics as nx
from icdcoder.embeddings import EmbeddingMatrix, averaging_matrix, entry_rows
from icdcoder.exceptions import ConfigurationError, InputError
from icdcoder.models.base import (
    Classifier, TrainingLog, check_classes, label_indices, minibatches)
from icdcoder.textprep import TokenDictionary, normalize_tokenize
from icdcoder.utils import make_rng

logger = logging.getLogger(__name__)


class BowClassifier(Classifier):
    """
    :param embedding: ``EmbeddingMatrix`` whose dictionary is set.
    :param classes: sorted, duplicate-free code list.
    :param weight: head matrix ``(dim, len(classes))``; zeros when omitted.
    :param bias: head bias ``(len(classes),)``; zeros when omitted.
    """
    family = 'bow'

    def __init__(self, embedding, classes, weight=None, bias=None,
                 hyperparameters=None):
        super(BowClassifier, self).__init__(classes)
        if embedding.dictionary is None:
            raise ConfigurationError('the shallow model needs the token '
                                     'dictionary of its embeddings')
        self.embedding = embedding
        self.dictionary = embedding.dictionary
        shape = (embedding.dim, len(self.classes))
        if weight is None:
            weight = np.zeros(shape)
        if bias is None:
            bias = np.zeros(len(self.classes))
        self.weight = nx.Tensor(weight, requires_grad=True, name='head.weight')
        self.bias = nx.Tensor(bias, requires_grad=True, name='head.bias')
        self.hyperparameters = dict(hyperparameters or {})

    def features(self, text):
        rows = entry_rows(normalize_tokenize(text), self.dictionary)
        if not rows:
            return np.zeros(self.embedding.dim)
        return self.embedding.input.data[rows].mean(axis=0)

    def predict_proba(self, text):
        logits = self.features(text) @ self.weight.data + self.bias.data
        return nx.softmax(logits).data

    def header(self):
        return {
            'dictionary': self.dictionary.serialize(),
            'dictionary_digest': self.dictionary.digest,
            'dim': self.embedding.dim,
            'hyperparameters': self.hyperparameters,
        }

    def blocks(self):
        return [('embedding', self.embedding.input.data),
                ('head.weight', self.weight.data),
                ('head.bias', self.bias.data)]

    @classmethod
    def from_checkpoint(cls, header, blocks):
        dictionary = TokenDictionary.parse(header['dictionary'])
        if dictionary.digest != header['dictionary_digest']:
            raise ConfigurationError('token dictionary hash mismatch')
        embedding = EmbeddingMatrix(
            nx.Tensor(blocks['embedding'], requires_grad=True,
                      name='embedding'), dictionary=dictionary)
        return cls(embedding, header['classes'], blocks['head.weight'],
                   blocks['head.bias'], header.get('hyperparameters'))


def bow_predict(text, model):
    """
    Probability vector over the classes and its argmax label.
    """
    return model.predict(text)


def bow_train(train, emb, classes, epochs=5, lr=0.1, seed=0, batch_size=1,
              freeze=False):
    """
    Fit the head (and, unless ``freeze``, the embedding rows) by SGD on the
    mean cross-entropy, with the learning rate decaying linearly to zero.

    :param train: balanced list of ``ProblemEntry``.
    :param emb: pretrained ``EmbeddingMatrix``; the classifier trains a
        copy, the argument is left untouched.
    """
    if not train:
        raise InputError('cannot train on an empty dataset')
    classes = check_classes(classes)
    gold = label_indices(train, classes)
    embedding = EmbeddingMatrix(
        nx.Tensor(emb.input.data.copy(), requires_grad=True, name='embedding'),
        dictionary=emb.dictionary)
    model = BowClassifier(embedding, classes, hyperparameters=dict(
        epochs=epochs, lr=lr, seed=seed, batch_size=batch_size,
        freeze=freeze))
    model.log = log = TrainingLog('bow')
    rows = [entry_rows(normalize_tokenize(e.text), emb.dictionary)
            for e in train]
    batches = (len(train) + batch_size - 1) // batch_size
    optimizer = nx.Optimizer([model.weight, model.bias], kind='sgd', lr=lr,
                             decay_steps=max(1, epochs * batches))
    for epoch in range(epochs):
        log.start_epoch()
        rng = make_rng(seed, 'bow', epoch)
        total = 0.0
        for batch in minibatches(len(train), batch_size, rng):
            unique, A = averaging_matrix([rows[i] for i in batch])
            E = nx.Tensor(embedding.input.data[unique],
                          requires_grad=not freeze)
            with nx.Tape() as tape:
                logits = nx.matmul(A, E) @ model.weight + model.bias
                loss = nx.cross_entropy(nx.softmax(logits), gold[batch])
            tape.backward(loss, params=optimizer.params)
            if not freeze and len(unique):
                optimizer.sparse_step(embedding.input, unique, E.grad)
            optimizer.step()
            total += loss.item() * len(batch)
        log.end_epoch(total / len(train), optimizer.lr)
    return model
