"""
Per-character class-probability traces of the LSTM model.
"""
import csv
import math

import numpy as np

from icdcoder.exceptions import InputError

# Lower bounds of the eight intensity buckets.
RAMP_THRESHOLDS = tuple(i / 8.0 for i in range(8))
FORMATS = ('ansi', 'html', 'csv')


def ramp_bucket(p):
    """
    Ramp step ``0..7`` of probability ``p``: ``min(7, floor(8 * p))``.
    """
    return min(7, max(0, int(math.floor(float(p) * 8))))


class HeatmapDoc(object):
    """
    A text and one probability row per requested class, each as long as the
    text. ``label`` and ``probability`` hold the model's overall prediction.
    """

    def __init__(self, text, rows, label=None, probability=None,
                 format='ansi'):
        self.text = text
        self.rows = [(code, np.asarray(row, dtype=np.float64))
                     for code, row in rows]
        for code, row in self.rows:
            if row.shape != (len(text),):
                raise InputError('row %s has %d values for %d characters' %
                                 (code, row.size, len(text)))
            if row.size and (row.min() < 0 or row.max() > 1):
                raise InputError('row %s holds values outside [0, 1]' % code)
        self.label = label
        self.probability = probability
        self.format = format

    @property
    def classes(self):
        return [code for code, _ in self.rows]

    def row(self, code):
        for label, row in self.rows:
            if label == code:
                return row
        raise InputError('class %s is not in the heatmap' % code)

    def summary(self):
        if self.label is None:
            return ''
        return '%s %.6f' % (self.label, self.probability)


def build_heatmap(text, model, classes):
    """
    Probability rows of ``classes`` at every character of ``text``.

    :param model: a trained LSTM classifier.
    """
    if not hasattr(model, 'position_class_probs'):
        raise InputError('activation heatmaps need an LSTM checkpoint, got '
                         'a %s model' % getattr(model, 'family', 'different'))
    if not classes:
        raise InputError('no classes requested')
    matrix = model.position_class_probs(text)
    rows = [(code, matrix.column(code)) for code in classes]
    final = matrix.final
    best = int(np.argmax(final))
    return HeatmapDoc(text, rows, label=matrix.classes[best],
                      probability=float(final[best]))


def read_csv(path):
    """
    Parse a heatmap CSV back into a :class:`HeatmapDoc`.
    """
    with open(path, encoding='utf-8', newline='') as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError('%s is empty' % path)
        if header[:2] != ['position', 'char']:
            raise InputError('%s is not a heatmap CSV' % path)
        chars, values = [], []
        for row in reader:
            chars.append(row[1])
            values.append([float(v) for v in row[2:]])
    columns = np.array(values).reshape(len(chars), len(header) - 2).T
    return HeatmapDoc(''.join(chars), list(zip(header[2:], columns)),
                      format='csv')
