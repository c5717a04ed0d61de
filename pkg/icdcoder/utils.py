import hashlib
import re

import numpy as np

_split_single = r"""
    ([^\s",]*"(?:[^"\\]*(?:\\.[^"\\]*)*)"[^\s,]*|
     [^\s',]*'(?:[^'\\]*(?:\\.[^'\\]*)*)'[^\s,]*|
     [^\s,]+)
"""
_split_single_re = re.compile(_split_single, re.VERBOSE)

CLASS_NAME_RE = re.compile(r'(((?<=[a-z])[A-Z])|([A-Z](?![A-Z]|$)))')

FNV_OFFSET = 2166136261
FNV_PRIME = 16777619


def smarter_split(input):
    """
    Split a comma and/or space separated list, honouring quoted values.

    ``'I25, E11 "a b"'`` yields ``'I25'``, ``'E11'`` and ``'a b'``.
    """
    for match in _split_single_re.finditer(str(input)):
        value = match.group(0)
        if len(value) > 1 and value[0] == value[-1] and value[0] in '"\'':
            value = value[1:-1]
        yield value


def get_default_name(class_name):
    return CLASS_NAME_RE.sub(r'_\1', class_name).lower().strip('_')


def fnv1a_32(text):
    """
    32-bit FNV-1a hash of the UTF-8 bytes of ``text``.
    """
    h = FNV_OFFSET
    for byte in text.encode('utf-8'):
        h ^= byte
        h = (h * FNV_PRIME) & 0xffffffff
    return h


def digest(text):
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


def make_rng(seed, *purpose):
    """
    Return a numpy ``Generator`` for ``seed`` and a purpose path.

    Each (seed, purpose) pair gets an independent PCG64 stream, so adding a
    random draw in one stage never shifts the numbers another stage sees.
    """
    key = tuple(bit if isinstance(bit, int) else fnv1a_32(str(bit))
                for bit in purpose)
    sequence = np.random.SeedSequence(int(seed), spawn_key=key)
    return np.random.Generator(np.random.PCG64(sequence))
