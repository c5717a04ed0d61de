"""
The ``icdcoder`` subcommands.

Each subcommand is a declarative :class:`~icdcoder.core.Command` class; its
parameters become command-line options and ``--config`` keys.
"""
import contextlib
import copy
import json
import logging
import os

from icdcoder import embeddings, evaluation, explain, generator, pipeline
from icdcoder import textprep
from icdcoder.core import Command
from icdcoder.exceptions import IcdCoderError, InputError, ParamValidationError
from icdcoder.helpers import ModelCommand, SeededCommand
from icdcoder.models import (
    TransformerClassifier, TransformerConfig, bow_train, finetune_classifier,
    load_model, lstm_train, mlm_pretrain)
from icdcoder.params import (
    BooleanParam, ChoiceParam, FloatParam, IntegerParam, ListParam, PathParam,
    StringParam)

logger = logging.getLogger(__name__)

COMMANDS = {}
ORDER = ('gen-corpus', 'pretrain', 'train', 'eval', 'explain')
CLI_BUCKETS = 100000


@contextlib.contextmanager
def stage(name):
    """
    Prefix errors raised inside the block with the pipeline stage name.
    """
    try:
        yield
    except IcdCoderError as e:
        error = copy.copy(e)
        error.args = ('%s: %s' % (name, e),)
        raise error from e


def write_json(data, path):
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        json.dump(data, f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write('\n')


def ensure_dir(path):
    if not os.path.isdir(path):
        os.makedirs(path)
    return path


def training_split(path, seed, stratified=False):
    """
    Load ``path`` and return ``(dataset, train, test)``; ``test`` is
    ``None`` when the file already is a training split.
    """
    with stage('load'):
        dataset = pipeline.load_tsv(path)
    if dataset.split == 'train':
        return dataset, dataset, None
    if dataset.split == 'test':
        raise InputError('split: %s is a test split; training never reads '
                         'test data' % path)
    with stage('split'):
        train, test = pipeline.split_90_10(dataset, seed, stratified)
    return dataset, train, test


class GenCorpus(SeededCommand):
    """
    Generate a labelled synthetic corpus from a generator spec.
    """
    spec = PathParam(required=False, must_exist=True, metavar='SPEC_JSON',
                     help='Generator spec (JSON).')
    builtin = ChoiceParam(choices=sorted(generator.FIXTURES), named=True,
                          required=False,
                          help='Use a built-in spec instead of a file.')
    out = PathParam(named=True, help='TSV file to write.')
    manifest = PathParam(named=True, required=False,
                         help='Manifest JSON; defaults to OUT.manifest.json.')

    class Meta:
        registry = COMMANDS
        help = 'Generate a synthetic labelled corpus.'

    def clean(self, data):
        if ('spec' in data) == ('builtin' in data):
            raise ParamValidationError(
                "gen-corpus needs exactly one of a spec file or --builtin")
        data.setdefault('manifest', data['out'] + '.manifest.json')
        return data

    def run(self, data, seed):
        if 'spec' in data:
            spec = generator.GeneratorSpec.load(data['spec'])
            spec.seed = seed
        else:
            spec = generator.builtin_spec(data['builtin'], seed)
        dataset = generator.generate_corpus(spec)
        pipeline.write_tsv(dataset, data['out'])
        write_json({
            'spec_digest': spec.digest,
            'seed': seed,
            'entries': len(dataset),
            'counts': dataset.class_counts(),
        }, data['manifest'])
        self.stdout.write('%d entries written to %s\n' % (len(dataset),
                                                         data['out']))


class Pretrain(SeededCommand):
    """
    Pretrain skip-gram embeddings or a masked language model on the
    training split of a dataset.
    """
    dataset = PathParam(must_exist=True, help='Labelled TSV dataset.')
    out = PathParam(named=True, help='Output directory.')
    mode = ChoiceParam(choices=('skipgram', 'mlm'), named=True,
                       default='skipgram')
    epochs = IntegerParam(named=True, required=False, min_value=0,
                          help='Default 5 for skipgram, 30 for mlm.')
    lr = FloatParam(named=True, required=False, min_value=0,
                    exclusive_min=True)
    dim = IntegerParam(named=True, required=False, min_value=1,
                       help='Default 100 for skipgram, 128 for mlm.')
    window = IntegerParam(named=True, default=5, min_value=1)
    negatives = IntegerParam(named=True, default=5, min_value=1)
    buckets = IntegerParam(named=True, default=CLI_BUCKETS, min_value=1)
    layers = IntegerParam(named=True, default=2, min_value=0)
    heads = IntegerParam(named=True, default=4, min_value=1)
    mask_rate = FloatParam(named=True, default=0.15, min_value=0,
                           max_value=1)
    max_vocab = IntegerParam(named=True, default=textprep.DEFAULT_VOCAB_SIZE,
                             min_value=1)
    batch_size = IntegerParam(named=True, required=False, min_value=1)
    stratified = BooleanParam(help='Split per code.')

    class Meta:
        registry = COMMANDS
        help = 'Pretrain embeddings or a language model.'

    def run(self, data, seed):
        ensure_dir(data['out'])
        _, train, _ = training_split(data['dataset'], seed,
                                     data['stratified'])
        with stage('pretrain'):
            if data['mode'] == 'skipgram':
                log = self.pretrain_skipgram(data, seed, train)
            else:
                log = self.pretrain_mlm(data, seed, train)
        write_json(log, os.path.join(data['out'], 'pretrain_log.json'))

    def pretrain_skipgram(self, data, seed, train):
        corpus = [textprep.normalize_tokenize(t) for t in train.texts]
        dictionary = textprep.TokenDictionary.build(corpus,
                                                    buckets=data['buckets'])
        epochs = data.get('epochs', 5)
        emb = embeddings.skipgram_pretrain(
            corpus, dictionary, dim=data.get('dim', 100),
            window=data['window'], negatives=data['negatives'],
            epochs=epochs, lr=data.get('lr', 0.05), seed=seed,
            batch_size=data.get('batch_size', 16))
        path = os.path.join(data['out'], 'embeddings.emb')
        embeddings.save_embeddings(emb, path)
        self.stdout.write('embeddings written to %s\n' % path)
        return {'stage': 'skipgram', 'epochs': [
            {'epoch': i + 1, 'loss': loss}
            for i, loss in enumerate(emb.losses)]}

    def pretrain_mlm(self, data, seed, train):
        vocab = textprep.build_char_vocab(train, data['max_vocab'])
        cfg = TransformerConfig(vocab.width, layers=data['layers'],
                                heads=data['heads'], dim=data.get('dim', 128))
        params = mlm_pretrain(
            train.texts, vocab, cfg, mask_rate=data['mask_rate'],
            epochs=data.get('epochs', 30), lr=data.get('lr', 1e-3),
            batch_size=data.get('batch_size', 32), seed=seed)
        model = TransformerClassifier(params, hyperparameters=dict(
            mask_rate=data['mask_rate'], seed=seed))
        path = os.path.join(data['out'], 'lm.ckpt')
        model.save(path)
        self.stdout.write('language model written to %s\n' % path)
        return params.log.as_dict()


class Train(ModelCommand):
    """
    Split, select the top-K codes, balance and train one model family.
    """
    dataset = PathParam(must_exist=True, help='Labelled TSV dataset.')
    out = PathParam(named=True, help='Output directory.')
    top_k = IntegerParam(named=True, default=100, min_value=1)
    epochs = IntegerParam(named=True, required=False, min_value=0,
                          help='Default 5 (bow), 20 (lstm), 10 (transformer).')
    lr = FloatParam(named=True, required=False, min_value=0,
                    exclusive_min=True,
                    help='Default 0.1 (bow, SGD), 1e-3 (lstm and '
                         'transformer, Adam).')
    batch_size = IntegerParam(named=True, required=False, min_value=1,
                              help='Default 1 (bow), 32 otherwise.')
    hidden = IntegerParam(named=True, default=256, min_value=1)
    clip = FloatParam(named=True, default=5.0, min_value=0,
                      exclusive_min=True)
    dim = IntegerParam(named=True, required=False, min_value=1)
    layers = IntegerParam(named=True, default=2, min_value=0)
    heads = IntegerParam(named=True, default=4, min_value=1)
    buckets = IntegerParam(named=True, default=CLI_BUCKETS, min_value=1)
    max_vocab = IntegerParam(named=True, default=textprep.DEFAULT_VOCAB_SIZE,
                             min_value=1)
    pretrain_epochs = IntegerParam(named=True, required=False, min_value=0,
                                   help='Skip-gram (default 5) or MLM '
                                        '(default 0, no pretraining) epochs '
                                        'run inline when no pretrained file '
                                        'is given.')
    mask_rate = FloatParam(named=True, default=0.15, min_value=0,
                           max_value=1)
    embeddings = PathParam(named=True, required=False, must_exist=True,
                           help='EMB1 file from "pretrain --mode skipgram".')
    lm = PathParam(named=True, required=False, must_exist=True,
                   help='Checkpoint from "pretrain --mode mlm".')
    freeze_embeddings = BooleanParam(help='Keep the embeddings fixed.')
    stratified = BooleanParam(help='Split per code.')

    class Meta:
        registry = COMMANDS
        help = 'Train a classifier.'

    def run(self, data, seed):
        out = ensure_dir(data['out'])
        dataset, train, test = training_split(data['dataset'], seed,
                                              data['stratified'])
        pipeline.write_tsv(train, os.path.join(out, 'train.tsv'))
        if test is not None:
            pipeline.write_tsv(test, os.path.join(out, 'test.tsv'))
        if dataset.rejects:
            pipeline.write_rejects(dataset, os.path.join(out, 'rejects.tsv'))
        split = train
        with stage('select-top-k'):
            classes, train = pipeline.select_top_k(train, data['top_k'])
        with stage('balance'):
            balanced = pipeline.upsample_balance(train, seed, classes)
        with stage('train'):
            model, logs = super(Train, self).run(
                dict(data, classes=classes, split=split, train=train,
                     balanced=balanced),
                seed)
        model.save(os.path.join(out, 'model.ckpt'))
        with open(os.path.join(out, 'classes.txt'), 'w', encoding='utf-8',
                  newline='\n') as f:
            f.write(''.join(c + '\n' for c in classes))
        write_json({
            'family': data['family'],
            'seed': seed,
            'classes': len(classes),
            'train_entries': len(train),
            'balanced_entries': len(balanced),
            'stages': [log.as_dict() for log in logs],
        }, os.path.join(out, 'train_log.json'))
        self.stdout.write('%s model over %d codes written to %s\n' % (
            data['family'], len(classes), os.path.join(out, 'model.ckpt')))

    def run_bow(self, data, seed):
        balanced = data['balanced']
        if 'embeddings' in data:
            emb = embeddings.load_embeddings(data['embeddings'])
        else:
            corpus = [textprep.normalize_tokenize(t)
                      for t in data['split'].texts]
            dictionary = textprep.TokenDictionary.build(
                corpus, buckets=data['buckets'])
            emb = embeddings.skipgram_pretrain(
                corpus, dictionary, dim=data.get('dim', 100),
                epochs=data.get('pretrain_epochs', 5), seed=seed)
        model = bow_train(balanced.entries, emb, data['classes'],
                          epochs=data.get('epochs', 5),
                          lr=data.get('lr', 0.1), seed=seed,
                          batch_size=data.get('batch_size', 1),
                          freeze=data['freeze_embeddings'])
        return model, [model.log]

    def run_lstm(self, data, seed):
        vocab = textprep.build_char_vocab(data['split'], data['max_vocab'])
        model = lstm_train(data['balanced'].entries, vocab, data['classes'],
                           hidden=data['hidden'],
                           epochs=data.get('epochs', 20),
                           lr=data.get('lr', 1e-3),
                           batch_size=data.get('batch_size', 32),
                           clip=data['clip'], seed=seed)
        return model, [model.log]

    def run_transformer(self, data, seed):
        balanced = data['balanced']
        logs = []
        # Same characters and split as "pretrain --mode mlm" sees.
        vocab = textprep.build_char_vocab(data['split'], data['max_vocab'])
        pretrained = None
        if 'lm' in data:
            lm = load_model(data['lm'])
            if lm.family != 'transformer':
                raise InputError('%s is not a language-model checkpoint' %
                                 data['lm'])
            pretrained = lm.params
        elif data.get('pretrain_epochs'):
            cfg = TransformerConfig(vocab.width, layers=data['layers'],
                                    heads=data['heads'],
                                    dim=data.get('dim', 128))
            pretrained = mlm_pretrain(
                data['split'].texts, vocab, cfg, mask_rate=data['mask_rate'],
                epochs=data['pretrain_epochs'], seed=seed)
            logs.append(pretrained.log)
        model = finetune_classifier(
            pretrained, balanced.entries, data['classes'], vocab=vocab,
            cfg=TransformerConfig(vocab.width, layers=data['layers'],
                                  heads=data['heads'],
                                  dim=data.get('dim', 128)),
            epochs=data.get('epochs', 10), lr=data.get('lr', 1e-3),
            batch_size=data.get('batch_size', 32), seed=seed)
        logs.append(model.log)
        return model, logs


class Eval(Command):
    """
    Score a checkpoint on a held-out split.
    """
    checkpoint = PathParam(must_exist=True, help='Model checkpoint.')
    dataset = PathParam(must_exist=True, help='Split TSV written by train.')
    out = PathParam(named=True, help='Output directory.')
    split = ChoiceParam(choices=('test', 'train', 'full'), named=True,
                        default='test',
                        help='The split the dataset must be; anything but '
                             'test has to be asked for.')
    cap = IntegerParam(named=True, default=20, min_value=0,
                       help='False positives/negatives listed per class.')
    top_n = IntegerParam(named=True, default=10, min_value=0,
                         help='Confused code pairs listed.')

    class Meta:
        registry = COMMANDS
        help = 'Evaluate a model.'

    def handle(self, data):
        model = load_model(data['checkpoint'])
        if not model.classes:
            raise InputError('%s has no classifier head' % data['checkpoint'])
        with stage('load'):
            dataset = pipeline.load_tsv(data['dataset'])
        if dataset.split != data['split']:
            raise InputError(
                '%s is a %s split; pass --split %s to evaluate it anyway' %
                (data['dataset'], dataset.split, dataset.split))
        dataset = pipeline.restrict(dataset, model.classes)
        predicted = model.predict_batch(dataset.texts, data['threads'])
        preds = [evaluation.Prediction(e.text, e.code, p.label)
                 for e, p in zip(dataset.entries, predicted)]
        report = evaluation.evaluate_sharded(preds, model.classes,
                                             data['threads'], data['cap'])
        out = ensure_dir(data['out'])
        pairs = evaluation.confusion_pairs(preds, data['top_n'])
        evaluation.write_json(report, os.path.join(out, 'report.json'), {
            'family': model.family,
            'split': dataset.split,
            'confusion_pairs': [list(p) for p in pairs],
        })
        evaluation.write_csv(report, os.path.join(out, 'report.csv'))
        evaluation.write_text(report, os.path.join(out, 'report.txt'))
        self.stdout.write('macro-F1 %.4f over %d entries\n' % (
            report.macro_f1, report.total))


class Explain(Command):
    """
    Render a per-character activation heatmap of an LSTM checkpoint.
    """
    checkpoint = PathParam(must_exist=True, help='LSTM checkpoint.')
    text = StringParam(help='Problem-list text, at most 50 characters.')
    classes = ListParam(named=True, required=False,
                        help='Codes to show; the predicted code by default.')
    format = ChoiceParam(choices=explain.FORMATS, named=True, default='ansi')
    out = PathParam(named=True, default='-',
                    help='Output file; "-" for standard output.')

    class Meta:
        registry = COMMANDS
        help = 'Render an activation heatmap.'

    def clean_text(self, value):
        value = value.strip()
        if not value or len(value) > textprep.MAX_TEXT_LENGTH:
            raise ParamValidationError(
                "Value for 'text' must have 1 to %d characters" %
                textprep.MAX_TEXT_LENGTH)
        return value

    def handle(self, data):
        model = load_model(data['checkpoint'])
        if model.family != 'lstm':
            raise InputError('activation heatmaps are only available for '
                             'LSTM checkpoints, %s is a %s model' %
                             (data['checkpoint'], model.family))
        classes = data.get('classes')
        if not classes:
            classes = [model.predict(data['text']).label]
        doc = explain.build_heatmap(data['text'], model, classes)
        doc.format = data['format']
        explain.render(doc, path=data['out'], stream=self.stdout)
        self.stdout.write(doc.summary() + '\n')
