"""
Datasets of labelled problem-list entries and the preparation steps run
before training: loading, the 90/10 split, top-K code selection and
upsampling to the most frequent code.
"""
import collections
import logging
import re

from icdcoder.exceptions import ContractError, DataError, InputError
from icdcoder.textprep import CODE_RE, MAX_TEXT_LENGTH, ProblemEntry
from icdcoder.utils import make_rng

logger = logging.getLogger(__name__)

PROVENANCES = ('real', 'synthetic')
SPLITS = ('full', 'train', 'test')
SPLIT_COMMENT_RE = re.compile(r'^#\s*split=(\w+)(?:\s+seed=(\d+))?')
TRAIN_FRACTION = 0.9


class Dataset(object):
    """
    An ordered list of :class:`ProblemEntry` with its provenance and split
    tags, plus what loading it left out.
    """

    def __init__(self, entries, provenance='real', split='full', seed=None):
        if provenance not in PROVENANCES:
            raise InputError('unknown provenance %r' % provenance)
        if split not in SPLITS:
            raise InputError('unknown split %r' % split)
        self.entries = list(entries)
        self.provenance = provenance
        self.split = split
        self.seed = seed
        self.skipped = 0
        self.duplicates = 0
        self.rejects = []

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, index):
        return self.entries[index]

    def derive(self, entries, split=None, seed=None):
        """
        A dataset with the same provenance holding ``entries``.
        """
        return Dataset(entries, self.provenance, split or self.split,
                       self.seed if seed is None else seed)

    @property
    def codes(self):
        return sorted(set(e.code for e in self.entries))

    @property
    def texts(self):
        return [e.text for e in self.entries]

    def class_counts(self):
        """
        Entries per code, in code order.
        """
        counts = collections.Counter(e.code for e in self.entries)
        return collections.OrderedDict(sorted(counts.items()))


def load_tsv(path, provenance='real'):
    """
    Read a UTF-8 ``text<TAB>code`` file.

    Codeless lines are skipped and counted, ``#`` lines are comments (a
    ``# split=<tag> seed=<n>`` comment sets the split tag), repeated
    ``(text, code)`` pairs are dropped and counted. Lines with an invalid
    code or text are listed in ``rejects`` as ``(line number, reason)``.
    A line without a tab raises :class:`DataError`.
    """
    split, seed = 'full', None
    entries, seen = [], set()
    skipped = duplicates = 0
    rejects = []
    try:
        with open(path, encoding='utf-8', newline='') as f:
            lines = f.read().split('\n')
    except OSError as e:
        raise InputError('cannot read %s: %s' % (path, e.strerror or e))
    except UnicodeDecodeError:
        raise InputError('%s is not valid UTF-8' % path)
    if lines and lines[-1] == '':
        lines.pop()
    for number, line in enumerate(lines, 1):
        line = line.rstrip('\r')
        if line.startswith('#'):
            match = SPLIT_COMMENT_RE.match(line)
            if match:
                split = match.group(1)
                seed = match.group(2) and int(match.group(2))
            continue
        if not line.strip():
            continue
        if '\t' not in line:
            raise DataError('expected "text<TAB>code" in %s' % path,
                            line=number)
        text, code = line.rsplit('\t', 1)
        code = code.strip()
        if not code:
            skipped += 1
            continue
        if not CODE_RE.match(code):
            rejects.append((number, 'invalid code %r' % code))
            continue
        text = text.strip()
        if not text:
            rejects.append((number, 'empty text'))
            continue
        if len(text) > MAX_TEXT_LENGTH:
            rejects.append((number, 'text longer than %d characters' %
                            MAX_TEXT_LENGTH))
            continue
        if (text, code) in seen:
            duplicates += 1
            continue
        seen.add((text, code))
        entries.append(ProblemEntry(text, code))
    if split not in SPLITS:
        raise DataError('unknown split tag %r in %s' % (split, path))
    dataset = Dataset(entries, provenance, split, seed)
    dataset.skipped = skipped
    dataset.duplicates = duplicates
    dataset.rejects = rejects
    logger.info('loaded %s: %d entries, %d skipped, %d duplicates, '
                '%d rejected', path, len(entries), skipped, duplicates,
                len(rejects))
    return dataset


def write_tsv(dataset, path):
    """
    Write ``dataset`` as TSV; split datasets start with their split comment.
    """
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        if dataset.split != 'full':
            f.write('# split=%s seed=%s\n' % (dataset.split, dataset.seed))
        for entry in dataset.entries:
            f.write('%s\t%s\n' % (entry.text, entry.code))


def write_rejects(dataset, path):
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        for number, reason in dataset.rejects:
            f.write('%d\t%s\n' % (number, reason))


def split_90_10(ds, seed, stratified=False):
    """
    Shuffle with ``seed`` and cut after ``floor(0.9 * n)`` entries.

    With ``stratified`` the cut is made per code instead, so every code
    keeps roughly the same share in both halves.
    """
    n = len(ds)
    if n < 10:
        raise InputError('need at least 10 entries to split, got %d' % n)
    rng = make_rng(seed, 'split')
    if not stratified:
        order = rng.permutation(n)
        cut = int(n * TRAIN_FRACTION)
        train_idx, test_idx = order[:cut], order[cut:]
    else:
        groups = collections.defaultdict(list)
        for i, entry in enumerate(ds.entries):
            groups[entry.code].append(i)
        train_idx, test_idx = [], []
        for code in sorted(groups):
            members = groups[code]
            order = rng.permutation(len(members))
            cut = int(len(members) * TRAIN_FRACTION)
            train_idx.extend(members[i] for i in order[:cut])
            test_idx.extend(members[i] for i in order[cut:])
        train_idx.sort()
        test_idx.sort()
    train = ds.derive([ds.entries[i] for i in train_idx], 'train', seed)
    test = ds.derive([ds.entries[i] for i in test_idx], 'test', seed)
    logger.info('split %d entries into %d train and %d test%s', n,
                len(train), len(test), stratified and ' (stratified)' or '')
    return train, test


def select_top_k(train, k=100):
    """
    The ``k`` most frequent codes of ``train`` (ties by code) and ``train``
    restricted to them. Returns every code, with a warning, when there are
    fewer than ``k``.
    """
    if not len(train):
        raise InputError('cannot select codes from an empty dataset')
    counts = train.class_counts()
    if len(counts) < k:
        logger.warning('only %d distinct codes, fewer than k=%d; keeping all',
                       len(counts), k)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    classes = sorted(code for code, _ in ranked[:k])
    logger.info('selected %d codes covering %d of %d entries', len(classes),
                sum(counts[c] for c in classes), len(train))
    return classes, restrict(train, classes)


def restrict(ds, classes):
    """
    Keep only the entries whose code is in ``classes``.
    """
    keep = set(classes)
    entries = [e for e in ds.entries if e.code in keep]
    if len(entries) != len(ds):
        logger.debug('dropped %d %s entries outside the class list',
                     len(ds) - len(entries), ds.split)
    return ds.derive(entries)


def upsample_balance(train, seed, classes=None):
    """
    Replicate every class up to the count of the most frequent one: whole
    copies first, then a seeded sample without replacement for the rest.
    """
    counts = train.class_counts()
    classes = sorted(classes if classes is not None else counts)
    outside = set(counts) - set(classes)
    if outside:
        raise ContractError('entries with codes outside the class list: %s' %
                            ', '.join(sorted(outside)))
    empty = [c for c in classes if not counts.get(c)]
    if empty:
        raise ContractError('no training entries for %s' % ', '.join(empty))
    target = max(counts.values())
    by_code = collections.defaultdict(list)
    for entry in train.entries:
        by_code[entry.code].append(entry)
    entries = []
    for code in classes:
        members = by_code[code]
        copies, remainder = divmod(target, len(members))
        entries.extend(members * copies)
        if remainder:
            rng = make_rng(seed, 'upsample', code)
            picked = sorted(rng.choice(len(members), remainder, replace=False))
            entries.extend(members[i] for i in picked)
    logger.info('upsampled %d entries to %d (%d classes x %d)', len(train),
                len(entries), len(classes), target)
    return train.derive(entries)
