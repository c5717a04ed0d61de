"""
Per-class and macro-averaged precision, recall and F1 over a fixed class
list, with false-positive/false-negative listings and confusion ranking.
"""
import collections
import csv
import json
import logging

import numpy as np
from sklearn.metrics import confusion_matrix, precision_recall_fscore_support

from icdcoder.exceptions import InputError

logger = logging.getLogger(__name__)

KINDS = ('fp', 'fn')
CSV_HEADER = ('code', 'precision', 'recall', 'f1', 'tp', 'fp', 'fn')


class Prediction(collections.namedtuple('Prediction', 'text gold predicted')):
    """
    One evaluated entry.
    """
    __slots__ = ()

    @property
    def correct(self):
        return self.gold == self.predicted


class ClassScore(collections.namedtuple(
        'ClassScore', 'code tp fp fn precision recall f1')):
    __slots__ = ()

    @property
    def support(self):
        return self.tp + self.fn


class EvaluationReport(object):
    """
    :param classes: the class list the scores are averaged over.
    :param counts: ``C x C`` confusion counts, rows gold, columns predicted.
    """

    def __init__(self, classes, counts, exemplars=None, cap=20):
        self.classes = list(classes)
        self.counts = np.asarray(counts, dtype=np.int64)
        self.exemplars = exemplars or {}
        self.cap = cap
        tp = np.diag(self.counts)
        fp = self.counts.sum(axis=0) - tp
        fn = self.counts.sum(axis=1) - tp
        labels = np.arange(len(self.classes))
        if self.counts.sum():
            flat = self.counts.ravel()
            gold = np.repeat(np.repeat(labels, len(labels)), flat)
            predicted = np.repeat(np.tile(labels, len(labels)), flat)
            precision, recall, f1, _ = precision_recall_fscore_support(
                gold, predicted, labels=labels, average=None,
                zero_division=0)
        else:
            precision = recall = f1 = np.zeros(len(labels))
        self.scores = [
            ClassScore(code, int(tp[i]), int(fp[i]), int(fn[i]),
                       float(precision[i]), float(recall[i]), float(f1[i]))
            for i, code in enumerate(self.classes)]

    @property
    def total(self):
        return int(self.counts.sum())

    @property
    def correct(self):
        return int(np.trace(self.counts))

    @property
    def accuracy(self):
        return self.total and self.correct / float(self.total) or 0.0

    def _macro(self, field):
        values = [getattr(s, field) for s in self.scores]
        return float(np.mean(values)) if values else 0.0

    @property
    def macro_precision(self):
        return self._macro('precision')

    @property
    def macro_recall(self):
        return self._macro('recall')

    @property
    def macro_f1(self):
        return self._macro('f1')

    def score(self, code):
        try:
            return self.scores[self.classes.index(code)]
        except ValueError:
            raise InputError('unknown class %s' % code)

    def merge(self, other):
        """
        Combine the counts of two shards evaluated over the same classes.
        """
        if other.classes != self.classes:
            raise InputError('cannot merge reports over different classes')
        exemplars = dict(self.exemplars)
        for key, rows in other.exemplars.items():
            exemplars[key] = (exemplars.get(key, []) + rows)[:self.cap]
        return EvaluationReport(self.classes, self.counts + other.counts,
                                exemplars, self.cap)

    def as_dict(self):
        return {
            'classes': self.classes,
            'evaluated': self.total,
            'accuracy': self.accuracy,
            'macro_precision': self.macro_precision,
            'macro_recall': self.macro_recall,
            'macro_f1': self.macro_f1,
            'per_class': [s._asdict() for s in self.scores],
            'exemplars': dict(('%s/%s' % key, [list(r) for r in rows])
                              for key, rows in sorted(self.exemplars.items())),
        }


def _check_labels(preds, classes):
    known = set(classes)
    for p in preds:
        for label in (p.gold, p.predicted):
            if label not in known:
                raise InputError('label %s is not in the class list' % label)


def evaluate(preds, classes, cap=20):
    """
    One-vs-rest counts for single-label predictions; P, R or F1 with a zero
    denominator count as 0 and the macro averages include such classes.

    :param preds: iterable of :class:`Prediction` (or ``(text, gold,
        predicted)`` triples).
    :param cap: exemplars kept per class and kind.
    """
    preds = [Prediction(*p) for p in preds]
    classes = list(classes)
    if not classes:
        raise InputError('empty class list')
    _check_labels(preds, classes)
    if preds:
        counts = confusion_matrix([p.gold for p in preds],
                                  [p.predicted for p in preds],
                                  labels=classes)
    else:
        counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    exemplars = {}
    for code in classes:
        for kind in KINDS:
            rows = _listing(preds, code, kind, cap)
            if rows:
                exemplars[(code, kind)] = rows
    report = EvaluationReport(classes, counts, exemplars, cap)
    unsupported = [s.code for s in report.scores if not s.support]
    if unsupported:
        logger.warning('%d classes have no test entries: %s',
                       len(unsupported), ', '.join(unsupported))
    logger.info('evaluated %d entries: accuracy %.4f, macro-F1 %.4f',
                report.total, report.accuracy, report.macro_f1)
    return report


def evaluate_sharded(preds, classes, shards, cap=20):
    """
    Evaluate ``shards`` contiguous slices separately and merge the counts.
    """
    preds = list(preds)
    size = max(1, -(-len(preds) // max(1, shards)))
    report = None
    for start in range(0, max(len(preds), 1), size):
        part = evaluate(preds[start:start + size], classes, cap)
        report = part if report is None else report.merge(part)
    return report


def _listing(preds, code, kind, cap):
    rows = []
    for p in preds:
        if len(rows) >= cap:
            break
        if kind == 'fp' and p.predicted == code and p.gold != code or \
                kind == 'fn' and p.gold == code and p.predicted != code:
            rows.append(p)
    return rows


def error_listing(preds, cls, kind, cap=20, classes=None):
    """
    Up to ``cap`` false positives or false negatives of class ``cls``, in
    input order.
    """
    if kind not in KINDS:
        raise InputError('kind must be fp or fn, got %r' % kind)
    preds = [Prediction(*p) for p in preds]
    known = set(classes) if classes is not None else \
        set(p.gold for p in preds) | set(p.predicted for p in preds)
    if cls not in known:
        raise InputError('unknown class %s' % cls)
    return _listing(preds, cls, kind, cap)


def confusion_pairs(preds, top_n=10):
    """
    ``(gold, predicted, count)`` for every confused pair, most frequent
    first, ties by ``(gold, predicted)``.
    """
    counts = collections.Counter((p[1], p[2]) for p in preds if p[1] != p[2])
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [(gold, predicted, n) for (gold, predicted), n in ranked[:top_n]]


def write_json(report, path, extra=None):
    data = report.as_dict()
    if extra:
        data.update(extra)
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        json.dump(data, f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write('\n')


def write_csv(report, path):
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(CSV_HEADER)
        for s in report.scores:
            writer.writerow([s.code, '%.4f' % s.precision, '%.4f' % s.recall,
                             '%.4f' % s.f1, s.tp, s.fp, s.fn])


def format_text(report):
    """
    Aligned table of the classes by descending F1, then the macro averages.
    """
    width = max([len('code')] + [len(c) for c in report.classes])
    line = '%-*s  %9s  %9s  %9s  %6s  %6s  %6s'
    rows = [line % (width, 'code', 'precision', 'recall', 'f1', 'tp', 'fp',
                    'fn')]
    for s in sorted(report.scores, key=lambda s: (-s.f1, s.code)):
        rows.append('%-*s  %9.4f  %9.4f  %9.4f  %6d  %6d  %6d' % (
            width, s.code, s.precision, s.recall, s.f1, s.tp, s.fp, s.fn))
    rows.append('')
    rows.append('macro precision %.4f  recall %.4f  f1 %.4f' % (
        report.macro_precision, report.macro_recall, report.macro_f1))
    rows.append('accuracy %.4f over %d entries' % (report.accuracy,
                                                   report.total))
    return '\n'.join(rows) + '\n'


def write_text(report, path):
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(format_text(report))
