"""
Checkpoint container shared by every model family.

Layout: the magic line ``ICDCKPT1``, an unsigned little-endian 64-bit
header length, the JSON header (sorted keys, UTF-8), then each block listed
in ``header['blocks']`` as little-endian float64 values in row-major order.
"""
import collections
import json
import struct

import numpy as np

from icdcoder.exceptions import InputError

MAGIC = b'ICDCKPT1\n'


def write_checkpoint(path, header, blocks):
    """
    :param header: JSON-serialisable dict; ``blocks`` is added to it.
    :param blocks: ordered ``(name, array)`` pairs.
    """
    header = dict(header)
    header['blocks'] = [[name, list(np.shape(array))]
                        for name, array in blocks]
    payload = json.dumps(header, sort_keys=True, separators=(',', ':'),
                         ensure_ascii=False).encode('utf-8')
    with open(path, 'wb') as f:
        f.write(MAGIC)
        f.write(struct.pack('<Q', len(payload)))
        f.write(payload)
        for _, array in blocks:
            f.write(np.ascontiguousarray(array, dtype='<f8').tobytes())


def read_checkpoint(path):
    """
    Return ``(header, blocks)`` with blocks as an ordered name → array map.
    """
    with open(path, 'rb') as f:
        if f.read(len(MAGIC)) != MAGIC:
            raise InputError('%s is not an icdcoder checkpoint' % path)
        (length,) = struct.unpack('<Q', f.read(8))
        try:
            header = json.loads(f.read(length).decode('utf-8'))
        except ValueError:
            raise InputError('%s has a corrupt header' % path)
        blocks = collections.OrderedDict()
        for name, shape in header['blocks']:
            count = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(f.read(count * 8), dtype='<f8')
            if data.size != count:
                raise InputError('%s is truncated at block %s' % (path, name))
            blocks[name] = data.astype(np.float64).reshape(shape)
    return header, blocks
