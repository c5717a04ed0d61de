"""
Template-based synthetic problem-list corpora.

A spec maps each code to templates whose ``{slot}`` placeholders are filled
from slot value lists. Filled strings then get per-character typos and
abbreviation substitutions, so the labels stay exact while the text looks as
idiosyncratic as real problem lists.
"""
import json
import logging
import re

from icdcoder.exceptions import GenerationError, SchemaError
from icdcoder.pipeline import Dataset
from icdcoder.textprep import CODE_RE, MAX_TEXT_LENGTH, ProblemEntry
from icdcoder.utils import digest, make_rng

logger = logging.getLogger(__name__)

SLOT_RE = re.compile(r'\{(\w+)\}')
TYPO_KINDS = ('swap', 'drop', 'duplicate', 'replace')
TYPO_ALPHABET = 'abcdefghijklmnopqrstuvwxyz'
MAX_DRAWS_PER_ENTRY = 20


class GeneratorSpec(object):
    """
    Validated generator settings; see ``docs/formats.rst`` for the JSON
    schema.
    """
    fields = ('seed', 'classes', 'slots', 'abbreviations', 'typo_rate',
              'abbreviation_rate', 'entries_per_class', 'zipf_exponent',
              'label_noise', 'max_length')

    def __init__(self, classes, seed, slots=None, abbreviations=None,
                 typo_rate=0.0, abbreviation_rate=0.0, entries_per_class=100,
                 zipf_exponent=0.0, label_noise=None,
                 max_length=MAX_TEXT_LENGTH):
        self.classes = classes
        self.seed = seed
        self.slots = slots or {}
        self.abbreviations = abbreviations or {}
        self.typo_rate = typo_rate
        self.abbreviation_rate = abbreviation_rate
        self.entries_per_class = entries_per_class
        self.zipf_exponent = zipf_exponent
        self.label_noise = label_noise or []
        self.max_length = max_length
        self.validate()

    def validate(self):
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or \
                self.seed < 0:
            raise SchemaError('must be a non-negative integer', 'seed')
        if not isinstance(self.classes, dict) or not self.classes:
            raise SchemaError('must map codes to template lists', 'classes')
        for code, templates in self.classes.items():
            path = 'classes.%s' % code
            if not CODE_RE.match(code):
                raise SchemaError('not a three-digit ICD-10 code', path)
            if not isinstance(templates, list) or not templates or \
                    not all(isinstance(t, str) and t.strip()
                            for t in templates):
                raise SchemaError('must be a non-empty list of strings', path)
        self._check_string_lists(self.slots, 'slots')
        self._check_string_lists(self.abbreviations, 'abbreviations')
        for name in ('typo_rate', 'abbreviation_rate'):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not 0 <= value <= 1:
                raise SchemaError('must lie in [0, 1]', name)
        if not isinstance(self.entries_per_class, int) or \
                self.entries_per_class < 1:
            raise SchemaError('must be a positive integer',
                              'entries_per_class')
        if not isinstance(self.zipf_exponent, (int, float)) or \
                self.zipf_exponent < 0:
            raise SchemaError('must be non-negative', 'zipf_exponent')
        if not isinstance(self.max_length, int) or \
                not 1 <= self.max_length <= MAX_TEXT_LENGTH:
            raise SchemaError('must lie in [1, %d]' % MAX_TEXT_LENGTH,
                              'max_length')
        if not isinstance(self.label_noise, list):
            raise SchemaError('must be a list', 'label_noise')
        for i, overlay in enumerate(self.label_noise):
            path = 'label_noise[%d]' % i
            if not isinstance(overlay, dict):
                raise SchemaError('must be an object', path)
            for key in ('label', 'source'):
                if overlay.get(key) not in self.classes:
                    raise SchemaError('unknown class %r' % overlay.get(key),
                                      '%s.%s' % (path, key))
            fraction = overlay.get('fraction')
            if not isinstance(fraction, (int, float)) or \
                    not 0 <= fraction <= 1:
                raise SchemaError('must lie in [0, 1]', path + '.fraction')

    @staticmethod
    def _check_string_lists(mapping, name):
        if not isinstance(mapping, dict):
            raise SchemaError('must be an object', name)
        for key, values in mapping.items():
            if not isinstance(values, list) or not values or \
                    not all(isinstance(v, str) for v in values):
                raise SchemaError('must be a non-empty list of strings',
                                  '%s.%s' % (name, key))

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise SchemaError('generator spec must be a JSON object')
        unknown = sorted(set(data) - set(cls.fields))
        if unknown:
            raise SchemaError('unknown field', unknown[0])
        if 'seed' not in data:
            raise SchemaError('is required', 'seed')
        if 'classes' not in data:
            raise SchemaError('is required', 'classes')
        return cls(**data)

    @classmethod
    def load(cls, path):
        with open(path, encoding='utf-8') as f:
            content = f.read()
        try:
            data = json.loads(content)
        except ValueError as e:
            raise SchemaError('invalid JSON: %s' % e)
        return cls.from_dict(data)

    def as_dict(self):
        return dict((name, getattr(self, name)) for name in self.fields)

    @property
    def digest(self):
        return digest(json.dumps(self.as_dict(), sort_keys=True))

    def class_sizes(self):
        """
        Entries per code; with a Zipf exponent ``s`` the code of rank ``r``
        (in code order) gets ``entries_per_class / r**s``, at least one.
        """
        sizes = {}
        for rank, code in enumerate(sorted(self.classes), 1):
            size = self.entries_per_class / float(rank) ** self.zipf_exponent
            sizes[code] = max(1, int(round(size)))
        return sizes


def fill_template(template, slots, rng, max_length=MAX_TEXT_LENGTH):
    def replace(match):
        name = match.group(1)
        try:
            values = slots[name]
        except KeyError:
            raise GenerationError('template %r uses unknown slot {%s}' %
                                  (template, name))
        return values[rng.integers(len(values))]
    text = SLOT_RE.sub(replace, template)
    if len(text) > max_length:
        raise GenerationError('template %r fills to %d characters, over %d' %
                              (template, len(text), max_length))
    return text


def inject_typos(text, rate, rng):
    """
    Visit every character once; with probability ``rate`` swap it with the
    next one, drop it, duplicate it or replace it, in equal shares.
    """
    if not rate:
        return text
    chars = list(text)
    out = []
    i = 0
    while i < len(chars):
        c = chars[i]
        if rng.random() >= rate:
            out.append(c)
            i += 1
            continue
        kind = TYPO_KINDS[rng.integers(len(TYPO_KINDS))]
        if kind == 'swap' and i + 1 < len(chars):
            out.extend([chars[i + 1], c])
            i += 2
            continue
        if kind == 'duplicate':
            out.extend([c, c])
        elif kind == 'replace':
            out.append(TYPO_ALPHABET[rng.integers(len(TYPO_ALPHABET))])
        elif kind == 'swap':
            out.append(c)
        i += 1
    return ''.join(out)


def abbreviate(text, abbreviations, rate, rng):
    for word in sorted(abbreviations):
        if word in text and rng.random() < rate:
            choices = abbreviations[word]
            text = text.replace(word, choices[rng.integers(len(choices))])
    return text


def _draw_texts(spec, code, size):
    """
    Up to ``size`` distinct texts for ``code``, giving up after
    ``MAX_DRAWS_PER_ENTRY * size`` draws.
    """
    rng = make_rng(spec.seed, 'generate', code)
    templates = spec.classes[code]
    texts = {}
    draws = 0
    while len(texts) < size and draws < MAX_DRAWS_PER_ENTRY * size:
        draws += 1
        template = templates[rng.integers(len(templates))]
        clean = fill_template(template, spec.slots, rng, spec.max_length)
        text = inject_typos(clean, spec.typo_rate, rng)
        text = abbreviate(text, spec.abbreviations, spec.abbreviation_rate,
                          rng)
        texts[text[:spec.max_length].strip() or clean] = None
    if len(texts) < size:
        logger.warning('%s: %d distinct texts after %d draws, %d requested',
                       code, len(texts), draws, size)
    return list(texts)


def generate_corpus(spec):
    """
    Generate a labelled synthetic :class:`Dataset` from ``spec``.

    Each code draws from its own random stream, so adding a class never
    changes the texts of another one. Texts are distinct within a code;
    a code whose templates cannot fill its size gets fewer entries.
    """
    sizes = spec.class_sizes()
    by_code = dict((code, _draw_texts(spec, code, sizes[code]))
                   for code in sorted(spec.classes))
    for overlay in spec.label_noise:
        label, source = overlay['label'], overlay['source']
        rng = make_rng(spec.seed, 'noise', label, source)
        targets = by_code[label]
        present = set(targets)
        pool = [text for text in by_code[source] if text not in present]
        count = min(int(round(overlay['fraction'] * len(targets))),
                    len(pool))
        picked = rng.choice(len(targets), count, replace=False)
        donors = rng.choice(len(pool), count, replace=False)
        for i, j in zip(sorted(picked), donors):
            targets[i] = pool[j]
        logger.debug('copied %d %s texts into %s', count, source, label)
    entries = [ProblemEntry(text, code) for code in sorted(by_code)
               for text in by_code[code]]
    logger.info('generated %d entries over %d codes', len(entries),
                len(by_code))
    return Dataset(entries, provenance='synthetic')


# German problem-list style templates for a handful of frequent codes,
# including the overlapping diabetes trio.
CLINICAL_FIXTURE = {
    'seed': 0,
    'classes': {
        'I25': ['Koronare Herzkrankheit {n} Gefäß',
                'KHK {n}-Gefäßerkrankung',
                'Koronare Herzkrankh. {n} Gefäß – {n} x DES in {vessel}',
                'Chron. ischäm. Herzkrankheit'],
        'E10': ['Diabetes mellitus Typ 1',
                'Diab. mellitus Typ 1, HbA1c: {hba1c} mmol/mol',
                'DM Typ 1 insulinpflichtig'],
        'E11': ['Diabetes mellitus Typ 2',
                'Diab. mellitus Typ 2, HbA1c: {hba1c} mmol/mol',
                'DM Typ 2 mit OAD'],
        'E14': ['Diabetes mellitus',
                'Diab. mellitus, HbA1c: {hba1c} mmol/mol',
                'DM nicht näher bez.'],
        'I10': ['Arterielle Hypertonie',
                'Essentielle Hypertonie, RR {rr}',
                'Art. Hypertonie'],
        'J44': ['COPD GOLD {gold}', 'Chron. obstruktive Lungenerkrankung'],
    },
    'slots': {
        'n': ['1', '2', '3'],
        'vessel': ['LAD', 'RCA', 'RCX'],
        'hba1c': ['43', '48', '53', '58', '64', '75'],
        'rr': ['140/90', '160/95', '135/85'],
        'gold': ['1', '2', '3', '4'],
    },
    'abbreviations': {
        'Diabetes mellitus': ['Diab. mellitus', 'DM'],
        'Herzkrankheit': ['Herzkrankh.', 'HK'],
        'Koronare': ['Kononare', 'Koron.'],
        'Gefäß': ['Gefäss', 'Gef.'],
    },
    'typo_rate': 0.02,
    'abbreviation_rate': 0.3,
    'entries_per_class': 200,
    'label_noise': [{'label': 'E14', 'source': 'E11', 'fraction': 0.2}],
}

FIXTURES = {'clinical': CLINICAL_FIXTURE}


def builtin_spec(name, seed=None):
    try:
        data = dict(FIXTURES[name])
    except KeyError:
        raise SchemaError('unknown built-in spec %r' % name)
    if seed is not None:
        data['seed'] = seed
    return GeneratorSpec.from_dict(data)
