import csv
import json
import os
import shutil
import tempfile

import numpy as np
from django.test import SimpleTestCase

from icdcoder import evaluation
from icdcoder.exceptions import InputError
from icdcoder.utils import make_rng

CLASSES = ['E10', 'E11', 'I10', 'I25']


def random_preds(count, seed=0, classes=CLASSES):
    rng = make_rng(seed, 'tests', 'evaluation')
    return [evaluation.Prediction('text %d' % i,
                                  classes[rng.integers(len(classes))],
                                  classes[rng.integers(len(classes))])
            for i in range(count)]


def brute_force(preds, classes):
    """
    Per-class scores counted by hand.
    """
    scores = {}
    for c in classes:
        tp = sum(1 for p in preds if p.gold == c and p.predicted == c)
        fp = sum(1 for p in preds if p.gold != c and p.predicted == c)
        fn = sum(1 for p in preds if p.gold == c and p.predicted != c)
        precision = tp / float(tp + fp) if tp + fp else 0.0
        recall = tp / float(tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) \
            if precision + recall else 0.0
        scores[c] = (tp, fp, fn, precision, recall, f1)
    return scores


class EvaluateTests(SimpleTestCase):

    def test_brute_force(self):
        for seed in range(5):
            preds = random_preds(60, seed)
            report = evaluation.evaluate(preds, CLASSES)
            expected = brute_force(preds, CLASSES)
            for code in CLASSES:
                s = report.score(code)
                tp, fp, fn, precision, recall, f1 = expected[code]
                self.assertEqual((s.tp, s.fp, s.fn), (tp, fp, fn))
                self.assertAlmostEqual(s.precision, precision)
                self.assertAlmostEqual(s.recall, recall)
                self.assertAlmostEqual(s.f1, f1)
            self.assertAlmostEqual(
                report.macro_f1, np.mean([expected[c][5] for c in CLASSES]))
            self.assertEqual(report.total, 60)

    def test_perfect(self):
        preds = [('a', c, c) for c in CLASSES]
        report = evaluation.evaluate(preds, CLASSES)
        self.assertEqual(report.macro_f1, 1.0)
        self.assertEqual(report.accuracy, 1.0)

    def test_zero_division(self):
        """
        A class never predicted and never seen scores zero and still counts
        in the macro average.
        """
        preds = [('a', 'E10', 'E10'), ('b', 'E11', 'E11')]
        with self.assertLogs('icdcoder.evaluation', 'WARNING') as logs:
            report = evaluation.evaluate(preds, CLASSES)
        self.assertIn('I10, I25', logs.output[0])
        self.assertEqual(report.score('I25').f1, 0.0)
        self.assertEqual(report.macro_f1, 0.5)

    def test_no_predictions(self):
        report = evaluation.evaluate([], CLASSES)
        self.assertEqual(report.total, 0)
        self.assertEqual(report.macro_f1, 0.0)
        self.assertEqual(report.accuracy, 0.0)

    def test_unknown_label(self):
        self.assertRaisesMessage(InputError, 'J44', evaluation.evaluate,
                                 [('a', 'J44', 'E10')], CLASSES)
        self.assertRaises(InputError, evaluation.evaluate, [], [])
        report = evaluation.evaluate([], CLASSES)
        self.assertRaises(InputError, report.score, 'J44')

    def test_sharded_equals_whole(self):
        preds = random_preds(101, seed=3)
        whole = evaluation.evaluate(preds, CLASSES, cap=5)
        for shards in (1, 2, 7, 200):
            merged = evaluation.evaluate_sharded(preds, CLASSES, shards,
                                                 cap=5)
            np.testing.assert_array_equal(merged.counts, whole.counts)
            self.assertEqual(merged.scores, whole.scores)
            self.assertEqual(merged.exemplars, whole.exemplars)

    def test_merge_different_classes(self):
        a = evaluation.evaluate([], CLASSES)
        b = evaluation.evaluate([], CLASSES[:2])
        self.assertRaises(InputError, a.merge, b)


class ListingTests(SimpleTestCase):

    def setUp(self):
        self.preds = [
            evaluation.Prediction('khk', 'I25', 'I10'),
            evaluation.Prediction('hypertonie', 'I10', 'I10'),
            evaluation.Prediction('dm 2', 'E11', 'E10'),
            evaluation.Prediction('khk 3', 'I25', 'I10'),
            evaluation.Prediction('dm', 'E11', 'E10'),
            evaluation.Prediction('art. hypertonie', 'I10', 'I25'),
        ]

    def test_error_listing(self):
        fps = evaluation.error_listing(self.preds, 'I10', 'fp')
        self.assertEqual([p.text for p in fps], ['khk', 'khk 3'])
        fns = evaluation.error_listing(self.preds, 'I10', 'fn')
        self.assertEqual([p.text for p in fns], ['art. hypertonie'])
        self.assertEqual(len(evaluation.error_listing(self.preds, 'I10',
                                                      'fp', cap=1)), 1)
        self.assertEqual(evaluation.error_listing(
            self.preds, 'J44', 'fn', classes=CLASSES + ['J44']), [])

    def test_listing_errors(self):
        self.assertRaises(InputError, evaluation.error_listing, self.preds,
                          'I10', 'tp')
        self.assertRaises(InputError, evaluation.error_listing, self.preds,
                          'J44', 'fp')

    def test_confusion_pairs(self):
        self.assertEqual(evaluation.confusion_pairs(self.preds), [
            ('E11', 'E10', 2), ('I25', 'I10', 2), ('I10', 'I25', 1)])
        self.assertEqual(evaluation.confusion_pairs(self.preds, top_n=1),
                         [('E11', 'E10', 2)])


class WriterTests(SimpleTestCase):

    def setUp(self):
        self.directory = tempfile.mkdtemp()
        self.addCleanup(shutil.rmtree, self.directory)
        preds = [('a', 'E10', 'E10'), ('b', 'E10', 'E11'),
                 ('c', 'E11', 'E11'), ('d', 'I10', 'I10')]
        self.report = evaluation.evaluate(preds, CLASSES)

    def test_json(self):
        path = os.path.join(self.directory, 'report.json')
        evaluation.write_json(self.report, path, extra={'family': 'bow'})
        with open(path) as f:
            data = json.load(f)
        self.assertEqual(data['family'], 'bow')
        self.assertEqual(data['evaluated'], 4)
        self.assertEqual(data['exemplars']['E10/fn'], [['b', 'E10', 'E11']])
        self.assertEqual([c['code'] for c in data['per_class']], CLASSES)

    def test_csv(self):
        path = os.path.join(self.directory, 'report.csv')
        evaluation.write_csv(self.report, path)
        with open(path, newline='') as f:
            rows = list(csv.reader(f))
        self.assertEqual(tuple(rows[0]), evaluation.CSV_HEADER)
        self.assertEqual(rows[1], ['E10', '1.0000', '0.5000', '0.6667',
                                   '1', '0', '1'])
        self.assertEqual(len(rows), 5)

    def test_text_order(self):
        text = evaluation.format_text(self.report)
        codes = [line.split()[0] for line in text.splitlines()[1:5]]
        self.assertEqual(codes, ['I10', 'E10', 'E11', 'I25'])
        self.assertIn('accuracy 0.7500 over 4 entries', text)
