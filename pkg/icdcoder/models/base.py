import collections
import concurrent.futures
import logging
import time

import numpy as np

from icdcoder.exceptions import ConfigurationError, DataError, InputError
from icdcoder.models.checkpoint import read_checkpoint, write_checkpoint
from icdcoder.utils import digest

logger = logging.getLogger(__name__)

FAMILIES = {}


class Prediction(collections.namedtuple('Prediction', 'label probs classes')):
    """
    A probability vector over the class list and its argmax label.
    """
    __slots__ = ()

    @property
    def probability(self):
        return float(self.probs[self.classes.index(self.label)])

    def top(self, k):
        order = np.argsort(-self.probs, kind='stable')[:k]
        return [(self.classes[i], float(self.probs[i])) for i in order]


def class_digest(classes):
    return digest('\n'.join(classes))


def check_classes(classes, allow_empty=False):
    classes = list(classes)
    if not classes and not allow_empty:
        raise InputError('empty class list')
    if classes != sorted(set(classes)):
        raise InputError('class list must be sorted and duplicate-free')
    return classes


def label_indices(entries, classes):
    """
    Map the codes of ``entries`` to class indices, naming any unknown code.
    """
    index = dict((c, i) for i, c in enumerate(classes))
    gold = []
    for entry in entries:
        try:
            gold.append(index[entry.code])
        except KeyError:
            raise DataError('label %s is not in the class list' % entry.code)
    return np.array(gold, dtype=np.int64)


def minibatches(count, batch_size, rng):
    order = rng.permutation(count)
    for start in range(0, count, batch_size):
        yield order[start:start + batch_size]


class TrainingLog(object):
    """
    Per-epoch loss, learning rate and wall time of one training run.
    """

    def __init__(self, stage):
        self.stage = stage
        self.epochs = []
        self._started = None

    def start_epoch(self):
        self._started = time.time()

    def end_epoch(self, loss, lr, **extra):
        seconds = time.time() - self._started
        if not np.isfinite(loss):
            logger.warning('%s epoch %d: loss is %r', self.stage,
                           len(self.epochs) + 1, loss)
        record = dict(epoch=len(self.epochs) + 1, loss=loss, lr=lr,
                      seconds=round(seconds, 3))
        record.update(extra)
        self.epochs.append(record)
        logger.info('%s epoch %d: loss %.6f, lr %.6g, %.1fs%s', self.stage,
                    record['epoch'], loss, lr, seconds,
                    ''.join(', %s %.4f' % kv for kv in sorted(extra.items())))

    @property
    def losses(self):
        return [e['loss'] for e in self.epochs]

    def as_dict(self):
        return {'stage': self.stage, 'epochs': self.epochs}


class Classifier(object):
    """
    Base class of the three model families.

    Subclasses set ``family``, implement :meth:`predict_proba`,
    :meth:`header` and :meth:`blocks`, and the ``from_checkpoint``
    classmethod. Trained classifiers are immutable, so predictions may run on
    several threads at once.
    """
    family = None

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        if cls.family:
            FAMILIES[cls.family] = cls

    def __init__(self, classes, allow_empty=False):
        self.classes = check_classes(classes, allow_empty)
        self.log = None

    def predict_proba(self, text):
        raise NotImplementedError(
            'Classifier subclasses must implement this method.')

    def predict(self, text):
        """
        Probabilities and argmax label; ties go to the lowest class index.
        """
        probs = self.predict_proba(text)
        return Prediction(self.classes[int(np.argmax(probs))], probs,
                          self.classes)

    def predict_batch(self, texts, threads=1):
        """
        Predict every text, fanning out over ``threads`` workers. Results
        keep the input order.
        """
        if threads <= 1:
            return [self.predict(text) for text in texts]
        with concurrent.futures.ThreadPoolExecutor(threads) as pool:
            return list(pool.map(self.predict, texts))

    def top_k(self, text, k=5):
        return self.predict(text).top(k)

    def mean_loss(self, entries):
        """
        Mean cross-entropy of the current parameters over ``entries``.
        """
        gold = label_indices(entries, self.classes)
        probs = [self.predict_proba(e.text)[g] for e, g in zip(entries, gold)]
        return float(np.mean(-np.log(np.maximum(probs, 1e-12))))

    def header(self):
        raise NotImplementedError

    def blocks(self):
        raise NotImplementedError

    def save(self, path):
        header = dict(self.header())
        header['family'] = self.family
        header['classes'] = self.classes
        header['class_digest'] = class_digest(self.classes)
        write_checkpoint(path, header, self.blocks())

    @classmethod
    def from_checkpoint(cls, header, blocks):
        raise NotImplementedError


def load_model(path):
    """
    Load a checkpoint of any family.
    """
    header, blocks = read_checkpoint(path)
    family = header.get('family')
    try:
        cls = FAMILIES[family]
    except KeyError:
        raise ConfigurationError('unknown model family %r in %s' %
                                 (family, path))
    classes = header.get('classes', [])
    if header.get('class_digest') != class_digest(classes):
        raise ConfigurationError('class list hash mismatch in %s' % path)
    return cls.from_checkpoint(header, blocks)
