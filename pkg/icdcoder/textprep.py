"""
Input representations: word tokens, subword n-grams and one-hot characters.
"""
import collections
import itertools
import logging
import re
import unicodedata

import numpy as np

from icdcoder.exceptions import DataError, InputError
from icdcoder.utils import digest, fnv1a_32

logger = logging.getLogger(__name__)

MAX_TEXT_LENGTH = 50
DEFAULT_VOCAB_SIZE = 122
DEFAULT_BUCKETS = 2000000
CODE_RE = re.compile(r'^[A-Z][0-9]{2}$')
# Letters (with their combining marks) and decimal digits make up tokens.
TOKEN_CATEGORIES = frozenset(['Lu', 'Ll', 'Lt', 'Lm', 'Lo', 'Mn', 'Mc', 'Me',
                              'Nd'])
# str.lower() maps these to two characters; Unicode simple lowercase does not.
SIMPLE_LOWER = {'\u0130': 'i'}


class ProblemEntry(collections.namedtuple('ProblemEntry', 'text code')):
    """
    One labelled problem-list line: free text plus a three-digit code.
    """
    __slots__ = ()

    def __new__(cls, text, code):
        text = text.strip()
        if not text:
            raise DataError('empty problem text')
        if len(text) > MAX_TEXT_LENGTH:
            raise DataError('text longer than %d characters: %r' %
                            (MAX_TEXT_LENGTH, text))
        if not CODE_RE.match(code):
            raise DataError('invalid three-digit ICD-10 code %r' % code)
        return super(ProblemEntry, cls).__new__(cls, text, code)


def is_token_char(char):
    return unicodedata.category(char) in TOKEN_CATEGORIES


def normalize_tokenize(text):
    """
    Split on anything that is neither a letter nor a digit and lowercase.

    >>> normalize_tokenize('Diab. mellitust Typ 2')
    ['diab', 'mellitust', 'typ', '2']
    """
    return [''.join(SIMPLE_LOWER.get(c) or c.lower() for c in run)
            for is_token, run in itertools.groupby(text, is_token_char)
            if is_token]


class CharVocabulary(object):
    """
    Ordered character dictionary; index ``len(chars)`` is the
    out-of-dictionary slot.
    """

    def __init__(self, chars):
        chars = list(chars)
        if len(set(chars)) != len(chars):
            raise InputError('duplicate characters in vocabulary')
        if any(len(c) != 1 for c in chars):
            raise InputError('vocabulary entries must be single characters')
        self.chars = chars
        self.index = dict((c, i) for i, c in enumerate(chars))

    def __len__(self):
        return len(self.chars)

    def __eq__(self, other):
        return isinstance(other, CharVocabulary) and self.chars == other.chars

    @property
    def ood_index(self):
        return len(self.chars)

    @property
    def width(self):
        return len(self.chars) + 1

    def ids(self, text):
        ood = self.ood_index
        return np.array([self.index.get(c, ood) for c in text],
                        dtype=np.int64)

    def serialize(self):
        return 'V=%d\n' % len(self.chars) + ''.join(c + '\n'
                                                     for c in self.chars)

    @property
    def digest(self):
        return digest(self.serialize())

    @classmethod
    def parse(cls, content):
        lines = content.split('\n')
        header = lines[0]
        if not header.startswith('V='):
            raise InputError('vocabulary must start with a "V=<n>" line')
        try:
            size = int(header[2:])
        except ValueError:
            raise InputError('bad vocabulary header %r' % header)
        chars = lines[1:size + 1]
        if len(chars) != size:
            raise InputError('vocabulary declares %d characters, found %d' %
                             (size, len(chars)))
        return cls(chars)

    def save(self, path):
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            f.write(self.serialize())

    @classmethod
    def load(cls, path):
        """
        Read a vocabulary file; also how a fixed alphabet is supplied.
        """
        with open(path, encoding='utf-8', newline='') as f:
            return cls.parse(f.read())


def build_char_vocab(corpus, max_size=DEFAULT_VOCAB_SIZE):
    """
    The ``max_size`` most frequent characters of the training texts, ties
    broken by ascending code point.

    :param corpus: iterable of ``ProblemEntry`` (or plain strings).
    """
    counts = collections.Counter()
    for entry in corpus:
        counts.update(getattr(entry, 'text', entry))
    if not counts:
        raise InputError('cannot build a character vocabulary from an empty '
                         'corpus')
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], ord(kv[0])))
    vocab = CharVocabulary(c for c, _ in ranked[:max_size])
    logger.debug('character vocabulary: %d of %d distinct characters',
                 len(vocab), len(counts))
    return vocab


def char_encode(text, vocab):
    """
    One-hot rows of width ``V + 1``, one per character of ``text``.
    """
    if not text:
        raise InputError('cannot encode empty text')
    ids = vocab.ids(text)
    encoded = np.zeros((len(ids), vocab.width))
    encoded[np.arange(len(ids)), ids] = 1.0
    return encoded


class TokenDictionary(object):
    """
    Word types seen in training plus a hashed subword bucket table.

    Word ids are dense from 0; bucket ids follow in
    ``[len(words), len(words) + buckets)``.
    """

    def __init__(self, words, buckets=DEFAULT_BUCKETS, nmin=3, nmax=6):
        if buckets < 1:
            raise InputError('bucket count must be positive')
        self.words = list(words)
        self.index = dict((w, i) for i, w in enumerate(self.words))
        self.buckets = buckets
        self.nmin = nmin
        self.nmax = nmax
        self._cache = {}

    def __len__(self):
        return len(self.words)

    @property
    def rows(self):
        return len(self.words) + self.buckets

    @classmethod
    def build(cls, token_lists, **kwargs):
        """
        Words ordered by descending frequency, then alphabetically.
        """
        counts = collections.Counter()
        for tokens in token_lists:
            counts.update(tokens)
        words = [w for w, _ in sorted(counts.items(),
                                      key=lambda kv: (-kv[1], kv[0]))]
        return cls(words, **kwargs)

    def ids(self, token):
        ids = self._cache.get(token)
        if ids is None:
            ids = self._cache[token] = subword_ngrams(
                token, self, self.nmin, self.nmax)
        return ids

    def serialize(self):
        return 'B=%d nmin=%d nmax=%d\n' % (self.buckets, self.nmin,
                                           self.nmax) + \
            ''.join(w + '\n' for w in self.words)

    @property
    def digest(self):
        return digest(self.serialize())

    @classmethod
    def parse(cls, content):
        lines = content.split('\n')
        try:
            fields = dict(bit.split('=') for bit in lines[0].split())
            buckets = int(fields['B'])
            nmin, nmax = int(fields['nmin']), int(fields['nmax'])
        except (KeyError, ValueError):
            raise InputError('bad token dictionary header %r' % lines[0])
        return cls([w for w in lines[1:] if w], buckets=buckets, nmin=nmin,
                   nmax=nmax)


def char_ngrams(token, nmin=3, nmax=6):
    """
    Character n-grams of ``<token>``, shortest first; a token shorter than
    ``nmin`` yields its whole marked form only.
    """
    marked = '<%s>' % token
    if len(token) < nmin:
        return [marked]
    grams = []
    for n in range(nmin, nmax + 1):
        for start in range(len(marked) - n + 1):
            grams.append(marked[start:start + n])
    return grams


def subword_ngrams(token, dictionary, nmin=3, nmax=6):
    """
    Row ids for ``token``: its word id when known, then one hashed bucket
    id per character n-gram.
    """
    offset = len(dictionary.words)
    ids = []
    word_id = dictionary.index.get(token)
    if word_id is not None:
        ids.append(word_id)
    for gram in char_ngrams(token, nmin, nmax):
        ids.append(offset + fnv1a_32(gram) % dictionary.buckets)
    return ids
