"""
Character-level transformer encoder: masked-language-model pretraining on
the training texts, then fine-tuning with a classifier head read from the
``[CLS]`` position.

Token ids: the vocabulary characters ``0 .. V-1``, the out-of-dictionary
slot ``V``, then ``[PAD]``, ``[MASK]`` and ``[CLS]``.
"""
import collections
import logging

import numpy as np

from icdcoder import numerics as nx
from icdcoder.exceptions import ConfigurationError, ContractError, InputError
from icdcoder.models.base import (
    Classifier, Prediction, TrainingLog, check_classes, label_indices,
    minibatches)
from icdcoder.textprep import MAX_TEXT_LENGTH, CharVocabulary
from icdcoder.utils import make_rng

logger = logging.getLogger(__name__)

INIT_STD = 0.02
KEY_MASK = -1e9
SPECIALS = ('[PAD]', '[MASK]', '[CLS]')


class TransformerConfig(object):
    """
    :param vocab_width: one-hot width of the character vocabulary (``V+1``).
    :param layers: encoder blocks; ``0`` leaves only the final layer norm.
    :param heads: attention heads; must divide ``dim``.
    :param ff: feed-forward width, ``4 * dim`` when omitted.
    :param max_length: longest id sequence, ``[CLS]`` included.
    """

    def __init__(self, vocab_width, layers=2, heads=4, dim=128, ff=None,
                 max_length=MAX_TEXT_LENGTH + 2):
        if heads < 1 or dim % heads:
            raise ConfigurationError(
                'model dimension %d is not divisible by %d heads' %
                (dim, heads))
        if max_length < 2:
            raise ConfigurationError('max_length must leave room for [CLS]')
        self.vocab_width = vocab_width
        self.layers = layers
        self.heads = heads
        self.dim = dim
        self.ff = ff or 4 * dim
        self.max_length = max_length

    @property
    def pad_id(self):
        return self.vocab_width

    @property
    def mask_id(self):
        return self.vocab_width + 1

    @property
    def cls_id(self):
        return self.vocab_width + 2

    @property
    def tokens(self):
        return self.vocab_width + len(SPECIALS)

    @property
    def head_dim(self):
        return self.dim // self.heads

    def as_dict(self):
        return dict(vocab_width=self.vocab_width, layers=self.layers,
                    heads=self.heads, dim=self.dim, ff=self.ff,
                    max_length=self.max_length)

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


def _layer_shapes(cfg, layer):
    D, F = cfg.dim, cfg.ff
    prefix = 'layer%d.' % layer
    return [
        (prefix + 'ln1.gamma', (D,)), (prefix + 'ln1.beta', (D,)),
        (prefix + 'wq', (D, D)), (prefix + 'bq', (D,)),
        (prefix + 'wk', (D, D)), (prefix + 'bk', (D,)),
        (prefix + 'wv', (D, D)), (prefix + 'bv', (D,)),
        (prefix + 'wo', (D, D)), (prefix + 'bo', (D,)),
        (prefix + 'ln2.gamma', (D,)), (prefix + 'ln2.beta', (D,)),
        (prefix + 'w1', (D, F)), (prefix + 'b1', (F,)),
        (prefix + 'w2', (F, D)), (prefix + 'b2', (D,)),
    ]


def parameter_shapes(cfg, num_classes=None):
    """
    Ordered ``(name, shape)`` pairs of every parameter block.
    """
    shapes = [('tok', (cfg.tokens, cfg.dim)),
              ('pos', (cfg.max_length, cfg.dim))]
    for layer in range(cfg.layers):
        shapes.extend(_layer_shapes(cfg, layer))
    shapes.extend([('ln_f.gamma', (cfg.dim,)), ('ln_f.beta', (cfg.dim,)),
                   ('lm.weight', (cfg.dim, cfg.tokens)),
                   ('lm.bias', (cfg.tokens,))])
    if num_classes is not None:
        shapes.extend([('cls.weight', (cfg.dim, num_classes)),
                       ('cls.bias', (num_classes,))])
    return shapes


def _initial_value(rng, name, shape):
    if name.endswith('.gamma'):
        return np.ones(shape)
    if len(shape) == 1:
        return np.zeros(shape)
    return rng.normal(0.0, INIT_STD, size=shape)


class TransformerParameters(object):
    """
    Named parameter tensors of one encoder, its vocabulary and, once
    fine-tuned, its class list.
    """

    def __init__(self, config, tensors, vocab, classes=None):
        self.config = config
        self.vocab = vocab
        self.classes = list(classes) if classes is not None else None
        self.tensors = collections.OrderedDict(tensors)
        expected = parameter_shapes(
            config, None if self.classes is None else len(self.classes))
        for name, shape in expected:
            if name not in self.tensors:
                raise ConfigurationError('missing transformer block %s' % name)
            if self.tensors[name].shape != shape:
                raise ConfigurationError('block %s has shape %s, expected %s'
                                         % (name, self.tensors[name].shape,
                                            shape))
        if vocab.width != config.vocab_width:
            raise ConfigurationError(
                'vocabulary width %d does not match the encoder (%d)' %
                (vocab.width, config.vocab_width))
        self.log = None

    def __getitem__(self, name):
        return self.tensors[name]

    @property
    def has_classifier(self):
        return self.classes is not None

    @property
    def vocab_digest(self):
        return self.vocab.digest

    @classmethod
    def init(cls, config, vocab, seed=0, classes=None):
        rng = make_rng(seed, 'transformer', 'init')
        tensors = []
        for name, shape in parameter_shapes(config):
            tensors.append((name, nx.Tensor(_initial_value(rng, name, shape),
                                            requires_grad=True, name=name)))
        params = cls(config, tensors, vocab)
        if classes is not None:
            params = params.with_classifier(classes, seed)
        return params

    def with_classifier(self, classes, seed=0):
        """
        A copy of these parameters with a freshly initialised head.
        """
        rng = make_rng(seed, 'transformer', 'head')
        tensors = [(name, nx.Tensor(t.data.copy(), requires_grad=True,
                                    name=name))
                   for name, t in self.tensors.items()
                   if not name.startswith('cls.')]
        tensors.append(('cls.weight', nx.Tensor(
            rng.normal(0.0, INIT_STD, size=(self.config.dim, len(classes))),
            requires_grad=True, name='cls.weight')))
        tensors.append(('cls.bias', nx.init_zeros(len(classes),
                                                  name='cls.bias')))
        return TransformerParameters(self.config, tensors, self.vocab, classes)

    def trainable(self, classifier):
        """
        The tensors one training stage updates: everything but the classifier
        head for the language model, everything but the LM head afterwards.
        """
        skip = classifier and 'lm.' or 'cls.'
        return [t for name, t in self.tensors.items()
                if not name.startswith(skip)]


def encode(text, vocab, config):
    """
    ``[CLS]`` followed by the character ids of ``text``.
    """
    if len(text) > MAX_TEXT_LENGTH or len(text) + 1 > config.max_length:
        raise InputError('text of %d characters exceeds the encoder limit' %
                         len(text))
    return np.concatenate([[config.cls_id], vocab.ids(text)]).astype(np.int64)


def encode_batch(texts, vocab, config):
    """
    ``B x T`` id matrix padded with ``[PAD]``.
    """
    rows = [encode(text, vocab, config) for text in texts]
    width = max(len(r) for r in rows)
    ids = np.full((len(rows), width), config.pad_id, dtype=np.int64)
    for i, row in enumerate(rows):
        ids[i, :len(row)] = row
    return ids


def _split_heads(x, batch, steps, config):
    x = nx.reshape(x, (batch, steps, config.heads, config.head_dim))
    return nx.transpose(x, (0, 2, 1, 3))


def encoder_forward(tokens, p, cfg=None, attention=None):
    """
    Per-position representations of ``tokens`` (``T`` or ``B x T`` ids).

    Pre-layer-norm blocks; ``[PAD]`` keys get no attention weight. When
    ``attention`` is a list, each layer's ``B x A x T x T`` weights are
    appended to it.
    """
    cfg = cfg or p.config
    ids = np.asarray(tokens, dtype=np.int64)
    single = ids.ndim == 1
    if single:
        ids = ids[None, :]
    batch, steps = ids.shape
    if steps > cfg.max_length:
        raise InputError('sequence of %d ids exceeds max_length %d' %
                         (steps, cfg.max_length))
    if ids.size and (ids.min() < 0 or ids.max() >= cfg.tokens):
        raise InputError('token id outside the vocabulary')
    x = nx.take(p['tok'], ids) + nx.take(p['pos'], np.arange(steps))
    key_bias = np.where(ids == cfg.pad_id, KEY_MASK, 0.0)[:, None, None, :]
    scale = 1.0 / np.sqrt(cfg.head_dim)
    for layer in range(cfg.layers):
        w = 'layer%d.' % layer
        h = nx.layer_norm(x, p[w + 'ln1.gamma'], p[w + 'ln1.beta'])
        q = _split_heads(h @ p[w + 'wq'] + p[w + 'bq'], batch, steps, cfg)
        k = _split_heads(h @ p[w + 'wk'] + p[w + 'bk'], batch, steps, cfg)
        v = _split_heads(h @ p[w + 'wv'] + p[w + 'bv'], batch, steps, cfg)
        scores = (q @ nx.transpose(k, (0, 1, 3, 2))) * scale + key_bias
        weights = nx.softmax(scores, axis=-1)
        if attention is not None:
            attention.append(weights.data)
        context = nx.reshape(nx.transpose(weights @ v, (0, 2, 1, 3)),
                             (batch, steps, cfg.dim))
        x = x + context @ p[w + 'wo'] + p[w + 'bo']
        h = nx.layer_norm(x, p[w + 'ln2.gamma'], p[w + 'ln2.beta'])
        x = x + nx.gelu(h @ p[w + 'w1'] + p[w + 'b1']) @ p[w + 'w2'] + \
            p[w + 'b2']
    x = nx.layer_norm(x, p['ln_f.gamma'], p['ln_f.beta'])
    if single:
        return nx.reshape(x, (steps, cfg.dim))
    return x


def _lm_probs(hidden, p):
    return nx.softmax(hidden @ p['lm.weight'] + p['lm.bias'])


def _cls_probs(hidden, p):
    cls = nx.take(hidden, 0, axis=-2)
    return nx.softmax(cls @ p['cls.weight'] + p['cls.bias'])


def mask_tokens(ids, config, mask_rate, rng):
    """
    Select each character position with probability ``mask_rate``; replace
    selected ids by ``[MASK]`` (80%), a random character (10%) or leave
    them (10%).

    Returns the corrupted ids and the float selection mask.
    """
    real = (ids != config.pad_id) & (ids != config.cls_id)
    selected = (rng.random(ids.shape) < mask_rate) & real
    action = rng.random(ids.shape)
    random_ids = rng.integers(0, config.vocab_width, size=ids.shape)
    corrupted = ids.copy()
    corrupted[selected & (action < 0.8)] = config.mask_id
    swap = selected & (action >= 0.8) & (action < 0.9)
    corrupted[swap] = random_ids[swap]
    return corrupted, selected.astype(np.float64)


def mlm_pretrain(corpus, vocab, cfg=None, mask_rate=0.15, epochs=30,
                 lr=1e-3, batch_size=32, seed=0):
    """
    Pretrain an encoder as a masked language model.

    :param corpus: training texts (strings or ``ProblemEntry``).
    :param cfg: ``TransformerConfig``; defaults sized to ``vocab``.

    The loss is the cross-entropy at the selected positions only. Batches
    where nothing is selected make no update. The returned parameters carry
    a ``TrainingLog`` with the masked-token accuracy of every epoch.
    """
    texts = [getattr(entry, 'text', entry) for entry in corpus]
    if not texts:
        raise InputError('cannot pretrain on an empty corpus')
    if not 0 <= mask_rate <= 1:
        raise InputError('mask rate must lie in [0, 1]')
    cfg = cfg or TransformerConfig(vocab.width)
    params = TransformerParameters.init(cfg, vocab, seed)
    params.log = log = TrainingLog('mlm')
    optimizer = nx.Optimizer(params.trainable(classifier=False), kind='adam',
                             lr=lr)
    for epoch in range(epochs):
        log.start_epoch()
        rng = make_rng(seed, 'mlm', epoch)
        total, count, correct = 0.0, 0.0, 0.0
        for batch in minibatches(len(texts), batch_size, rng):
            ids = encode_batch([texts[i] for i in batch], vocab, cfg)
            corrupted, selected = mask_tokens(ids, cfg, mask_rate, rng)
            picked = selected.sum()
            if not picked:
                continue
            with nx.Tape() as tape:
                probs = _lm_probs(encoder_forward(corrupted, params, cfg),
                                  params)
                loss = nx.cross_entropy(probs, ids, weights=selected)
            tape.backward(loss, params=optimizer.params)
            optimizer.step()
            total += loss.item() * picked
            count += picked
            correct += ((probs.data.argmax(axis=-1) == ids) * selected).sum()
        log.end_epoch(total / max(count, 1), optimizer.lr,
                      masked_accuracy=correct / max(count, 1))
    return params


def masked_token_accuracy(params, texts, mask_rate=0.15, seed=0):
    """
    Fraction of masked characters the language model restores.

    Selected positions are replaced by ``[MASK]``; a text with no selected
    position gets one at random so every text is scored.
    """
    cfg = params.config
    rng = make_rng(seed, 'mlm', 'accuracy')
    correct = total = 0
    for text in texts:
        ids = encode(getattr(text, 'text', text), params.vocab, cfg)
        selected = rng.random(len(ids)) < mask_rate
        selected[0] = False
        if not selected.any():
            selected[rng.integers(1, len(ids))] = True
        corrupted = np.where(selected, cfg.mask_id, ids)
        probs = _lm_probs(encoder_forward(corrupted, params, cfg), params)
        guessed = probs.data.argmax(axis=-1)
        correct += int((guessed[selected] == ids[selected]).sum())
        total += int(selected.sum())
    if not total:
        raise InputError('no texts to score')
    return correct / float(total)


class TransformerClassifier(Classifier):
    """
    Encoder plus classifier head; an LM-only checkpoint loads with an empty
    class list and refuses to classify.
    """
    family = 'transformer'

    def __init__(self, params, hyperparameters=None):
        super(TransformerClassifier, self).__init__(params.classes or [],
                                                    allow_empty=True)
        self.params = params
        self.config = params.config
        self.vocab = params.vocab
        self.hyperparameters = dict(hyperparameters or {})
        self.log = params.log

    @property
    def has_classifier(self):
        return self.params.has_classifier

    def predict_proba(self, text):
        if not self.has_classifier:
            raise ConfigurationError('language-model checkpoint has no '
                                     'classifier head')
        return transformer_predict(text, self.params).probs

    def header(self):
        return {
            'config': self.config.as_dict(),
            'vocab': self.vocab.serialize(),
            'vocab_digest': self.vocab.digest,
            'has_classifier': self.has_classifier,
            'hyperparameters': self.hyperparameters,
        }

    def blocks(self):
        return [(name, t.data) for name, t in self.params.tensors.items()]

    @classmethod
    def from_checkpoint(cls, header, blocks):
        vocab = CharVocabulary.parse(header['vocab'])
        if vocab.digest != header['vocab_digest']:
            raise ConfigurationError('vocabulary hash mismatch')
        config = TransformerConfig.from_dict(header['config'])
        classes = header['classes'] if header['has_classifier'] else None
        tensors = [(name, nx.Tensor(data, requires_grad=True, name=name))
                   for name, data in blocks.items()]
        return cls(TransformerParameters(config, tensors, vocab, classes),
                   header.get('hyperparameters'))


def finetune_classifier(pretrained, train, classes, vocab=None, cfg=None,
                        epochs=10, lr=1e-3, batch_size=32, seed=0):
    """
    Fine-tune every encoder weight plus a new classifier head on ``train``.

    :param pretrained: ``TransformerParameters`` from :func:`mlm_pretrain`,
        or ``None`` to start from a seeded random encoder.
    :param vocab: the dataset's character vocabulary; must hash-match the
        pretrained one.
    """
    if not train:
        raise InputError('cannot train on an empty dataset')
    classes = check_classes(classes)
    from_scratch = pretrained is None
    if from_scratch:
        if vocab is None:
            raise ContractError('training from scratch needs a vocabulary')
        pretrained = TransformerParameters.init(
            cfg or TransformerConfig(vocab.width), vocab, seed)
    elif vocab is not None and vocab.digest != pretrained.vocab_digest:
        raise ConfigurationError('dataset vocabulary does not match the '
                                 'pretrained language model')
    params = pretrained.with_classifier(classes, seed)
    gold = label_indices(train, classes)
    params.log = log = TrainingLog('finetune')
    model = TransformerClassifier(params, hyperparameters=dict(
        epochs=epochs, lr=lr, batch_size=batch_size, seed=seed,
        pretrained=not from_scratch))
    optimizer = nx.Optimizer(params.trainable(classifier=True), kind='adam',
                             lr=lr)
    texts = [e.text for e in train]
    for epoch in range(epochs):
        log.start_epoch()
        rng = make_rng(seed, 'finetune', epoch)
        total = 0.0
        for batch in minibatches(len(train), batch_size, rng):
            ids = encode_batch([texts[i] for i in batch], params.vocab,
                               params.config)
            with nx.Tape() as tape:
                hidden = encoder_forward(ids, params)
                loss = nx.cross_entropy(_cls_probs(hidden, params),
                                        gold[batch])
            tape.backward(loss, params=optimizer.params)
            optimizer.step()
            total += loss.item() * len(batch)
        log.end_epoch(total / len(train), optimizer.lr)
    return model


def transformer_predict(text, p, cfg=None):
    """
    Probabilities from the ``[CLS]`` head and the argmax label.
    """
    if not p.has_classifier:
        raise ConfigurationError('language-model parameters have no '
                                 'classifier head')
    ids = encode(text, p.vocab, cfg or p.config)
    if len(ids) < 2:
        raise InputError('cannot classify empty text')
    probs = _cls_probs(encoder_forward(ids, p, cfg), p).data
    return Prediction(p.classes[int(np.argmax(probs))], probs, p.classes)
