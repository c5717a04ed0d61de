"""
Character-level LSTM classifier over one-hot inputs.

The classification head reads the final hidden state during training. At
interpretation time the same head is applied to every position, which gives
the per-character class probabilities behind the heatmaps.
"""
import logging

import numpy as np

from icdcoder import numerics as nx
from icdcoder.exceptions import ConfigurationError, DimensionError, InputError
from icdcoder.models.base import (
    Classifier, Prediction, TrainingLog, check_classes, label_indices,
    minibatches)
from icdcoder.textprep import CharVocabulary, char_encode
from icdcoder.utils import make_rng

logger = logging.getLogger(__name__)

GATES = ('i', 'f', 'o', 'g')


class LstmParameters(object):
    """
    Gate, recurrent and head weights of a single-layer LSTM.

    ``W[gate]`` is ``H x I``, ``U[gate]`` is ``H x H``, ``b[gate]`` is
    ``H``; the head is ``H x C`` plus a ``C`` bias.
    """

    def __init__(self, W, U, b, head_weight, head_bias):
        self.W, self.U, self.b = W, U, b
        self.head_weight = head_weight
        self.head_bias = head_bias
        self.hidden, self.input_width = W['i'].shape
        if head_weight.shape[0] != self.hidden or \
                head_bias.shape != (head_weight.shape[1],):
            raise DimensionError('head %s / %s does not fit hidden size %d' % (
                head_weight.shape, head_bias.shape, self.hidden))

    @property
    def num_classes(self):
        return self.head_weight.shape[1]

    @classmethod
    def init(cls, input_width, hidden, num_classes, seed=0):
        """
        Uniform weights in ``+-1/sqrt(H)``; forget-gate bias 1.0.
        """
        rng = make_rng(seed, 'lstm', 'init')
        bound = 1.0 / np.sqrt(hidden)
        W, U, b = {}, {}, {}
        for gate in GATES:
            W[gate] = nx.init_uniform(rng, (hidden, input_width), bound,
                                      name='W_%s' % gate)
        for gate in GATES:
            U[gate] = nx.init_uniform(rng, (hidden, hidden), bound,
                                      name='U_%s' % gate)
        for gate in GATES:
            b[gate] = nx.init_zeros(hidden, name='b_%s' % gate,
                                    value=gate == 'f' and 1.0 or 0.0)
        return cls(W, U, b,
                   nx.init_uniform(rng, (hidden, num_classes), bound,
                                   name='head.weight'),
                   nx.init_zeros(num_classes, name='head.bias'))

    @classmethod
    def zeros(cls, input_width, hidden, num_classes):
        W = dict((g, nx.init_zeros((hidden, input_width), name='W_%s' % g))
                 for g in GATES)
        U = dict((g, nx.init_zeros((hidden, hidden), name='U_%s' % g))
                 for g in GATES)
        b = dict((g, nx.init_zeros(hidden, name='b_%s' % g)) for g in GATES)
        return cls(W, U, b, nx.init_zeros((hidden, num_classes),
                                          name='head.weight'),
                   nx.init_zeros(num_classes, name='head.bias'))

    def tensors(self):
        """
        All parameters in checkpoint order.
        """
        return ([self.W[g] for g in GATES] + [self.U[g] for g in GATES] +
                [self.b[g] for g in GATES] +
                [self.head_weight, self.head_bias])

    def transposed(self):
        return _Transposed(self)


class _Transposed(object):
    # Weights laid out for row-vector inputs, computed once per forward pass.

    def __init__(self, p):
        self.W = dict((g, nx.transpose(p.W[g])) for g in GATES)
        self.U = dict((g, nx.transpose(p.U[g])) for g in GATES)
        self.b = p.b
        self.hidden = p.hidden
        self.input_width = p.input_width


def lstm_cell(x, h_prev, c_prev, p):
    """
    One LSTM step; ``x`` is ``I`` or ``B x I``, states ``H`` or ``B x H``.

    Returns the new ``(h, c)``.
    """
    w = p if isinstance(p, _Transposed) else p.transposed()
    x, h_prev, c_prev = (nx.as_tensor(v) for v in (x, h_prev, c_prev))
    single = x.ndim == 1
    if single:
        x = nx.reshape(x, (1, -1))
        h_prev = nx.reshape(h_prev, (1, -1))
        c_prev = nx.reshape(c_prev, (1, -1))
    if x.shape[-1] != w.input_width or h_prev.shape[-1] != w.hidden or \
            c_prev.shape != h_prev.shape:
        raise DimensionError(
            'lstm cell expects input %d and state %d, got %s, %s and %s' % (
                w.input_width, w.hidden, x.shape, h_prev.shape, c_prev.shape))
    pre = dict((g, x @ w.W[g] + h_prev @ w.U[g] + w.b[g]) for g in GATES)
    i = nx.sigmoid(pre['i'])
    f = nx.sigmoid(pre['f'])
    o = nx.sigmoid(pre['o'])
    g = nx.tanh(pre['g'])
    c = f * c_prev + i * g
    h = o * nx.tanh(c)
    if single:
        return nx.reshape(h, (-1,)), nx.reshape(c, (-1,))
    return h, c


def _run(inputs, mask, p):
    """
    Unroll over ``inputs`` of shape ``T x B x I``. ``mask`` (``T x B x 1``)
    freezes the states of sequences that already ended.
    """
    w = p.transposed()
    steps, batch = inputs.shape[0], inputs.shape[1]
    h = nx.Tensor(np.zeros((batch, p.hidden)))
    c = nx.Tensor(np.zeros((batch, p.hidden)))
    states = []
    for t in range(steps):
        h_new, c_new = lstm_cell(inputs[t], h, c, w)
        if mask is None:
            h, c = h_new, c_new
        else:
            keep = 1.0 - mask[t]
            h = h_new * mask[t] + h * keep
            c = c_new * mask[t] + c * keep
        states.append(h)
    return states


def lstm_forward(seq, p):
    """
    Hidden states ``h_1 .. h_T`` (a ``T x H`` array) for one one-hot
    sequence, starting from zero states.
    """
    seq = np.asarray(seq, dtype=np.float64)
    if seq.ndim != 2 or len(seq) == 0:
        raise InputError('lstm_forward needs a non-empty T x I sequence')
    states = _run(seq[:, None, :], None, p)
    return np.stack([h.data[0] for h in states])


class PositionClassMatrix(object):
    """
    ``T x C`` class probabilities, one row per character position.
    """

    def __init__(self, probs, classes, text=None):
        self.probs = probs
        self.classes = list(classes)
        self.text = text

    @property
    def shape(self):
        return self.probs.shape

    def column(self, label):
        try:
            return self.probs[:, self.classes.index(label)]
        except ValueError:
            raise InputError('unknown class %s' % label)

    @property
    def final(self):
        return self.probs[-1]


def position_class_probs(seq, p, classes=None):
    """
    Softmax of the shared head applied to every hidden state.
    """
    states = lstm_forward(seq, p)
    logits = states @ p.head_weight.data + p.head_bias.data
    probs = nx.softmax(logits).data
    if classes is None:
        classes = [str(i) for i in range(p.num_classes)]
    return PositionClassMatrix(probs, classes)


class LstmClassifier(Classifier):
    family = 'lstm'

    def __init__(self, params, vocab, classes, hyperparameters=None):
        super(LstmClassifier, self).__init__(classes)
        if params.num_classes != len(self.classes):
            raise ConfigurationError('%d head outputs for %d classes' % (
                params.num_classes, len(self.classes)))
        if params.input_width != vocab.width:
            raise ConfigurationError(
                'input width %d does not match vocabulary width %d' % (
                    params.input_width, vocab.width))
        self.params = params
        self.vocab = vocab
        self.hyperparameters = dict(hyperparameters or {})

    def position_class_probs(self, text):
        matrix = position_class_probs(char_encode(text, self.vocab),
                                      self.params, self.classes)
        matrix.text = text
        return matrix

    def predict_proba(self, text):
        return self.position_class_probs(text).final

    def header(self):
        return {
            'input_width': self.params.input_width,
            'hidden': self.params.hidden,
            'num_classes': self.params.num_classes,
            'vocab': self.vocab.serialize(),
            'vocab_digest': self.vocab.digest,
            'hyperparameters': self.hyperparameters,
        }

    def blocks(self):
        return [(t.name, t.data) for t in self.params.tensors()]

    @classmethod
    def from_checkpoint(cls, header, blocks):
        vocab = CharVocabulary.parse(header['vocab'])
        if vocab.digest != header['vocab_digest']:
            raise ConfigurationError('vocabulary hash mismatch')

        def tensor(name):
            return nx.Tensor(blocks[name], requires_grad=True, name=name)
        params = LstmParameters(
            dict((g, tensor('W_%s' % g)) for g in GATES),
            dict((g, tensor('U_%s' % g)) for g in GATES),
            dict((g, tensor('b_%s' % g)) for g in GATES),
            tensor('head.weight'), tensor('head.bias'))
        return cls(params, vocab, header['classes'],
                   header.get('hyperparameters'))


def encode_batch(texts, vocab):
    """
    One-hot ``T x B x I`` inputs and the ``T x B x 1`` validity mask for
    texts of uneven length.
    """
    steps = max(len(t) for t in texts)
    inputs = np.zeros((steps, len(texts), vocab.width))
    mask = np.zeros((steps, len(texts), 1))
    for column, text in enumerate(texts):
        ids = vocab.ids(text)
        inputs[np.arange(len(ids)), column, ids] = 1.0
        mask[:len(ids), column] = 1.0
    return inputs, mask


def lstm_train(train, vocab, classes, hidden=256, epochs=20, lr=1e-3,
               batch_size=32, clip=5.0, seed=0):
    """
    Backpropagation through whole sequences with the cross-entropy of the
    final position, Adam updates and global gradient-norm clipping.

    :param train: balanced list of ``ProblemEntry``.
    """
    if not train:
        raise InputError('cannot train on an empty dataset')
    classes = check_classes(classes)
    gold = label_indices(train, classes)
    params = LstmParameters.init(vocab.width, hidden, len(classes), seed)
    model = LstmClassifier(params, vocab, classes, hyperparameters=dict(
        hidden=hidden, epochs=epochs, lr=lr, batch_size=batch_size,
        clip=clip, seed=seed))
    model.log = log = TrainingLog('lstm')
    optimizer = nx.Optimizer(params.tensors(), kind='adam', lr=lr)
    texts = [e.text for e in train]
    for epoch in range(epochs):
        log.start_epoch()
        rng = make_rng(seed, 'lstm', epoch)
        total, norms = 0.0, []
        for batch in minibatches(len(train), batch_size, rng):
            inputs, mask = encode_batch([texts[i] for i in batch], vocab)
            with nx.Tape() as tape:
                final = _run(inputs, mask, params)[-1]
                logits = final @ params.head_weight + params.head_bias
                loss = nx.cross_entropy(nx.softmax(logits), gold[batch])
            tape.backward(loss, params=optimizer.params)
            norms.append(nx.clip_grad_norm(optimizer.params, clip))
            optimizer.step()
            total += loss.item() * len(batch)
        log.end_epoch(total / len(train), optimizer.lr,
                      grad_norm=float(np.mean(norms)))
    return model


def lstm_predict(text, p, vocab, classes=None):
    """
    Probabilities from the final hidden state and the argmax label.
    """
    if not text:
        raise InputError('cannot classify empty text')
    matrix = position_class_probs(char_encode(text, vocab), p, classes)
    probs = matrix.final
    return Prediction(matrix.classes[int(np.argmax(probs))], probs,
                      matrix.classes)
