"""
Skip-gram embeddings over word ids and hashed subword buckets.
"""
import logging
import os
import struct
import time

import numpy as np

from icdcoder import numerics as nx
from icdcoder.exceptions import ContractError, InputError
from icdcoder.textprep import TokenDictionary
from icdcoder.utils import make_rng

logger = logging.getLogger(__name__)

MAGIC = b'EMB1'
NOISE_POWER = 0.75


class EmbeddingMatrix(object):
    """
    Input rows (words then buckets) and output rows (words only).

    :param input: ``Tensor`` of shape ``(dictionary.rows, dim)``.
    :param output: ``Tensor`` of shape ``(len(dictionary), dim)``, or
        ``None`` once training is over.
    """

    def __init__(self, input, output=None, dictionary=None):
        if dictionary is not None and input.shape[0] != dictionary.rows:
            raise ContractError('%d embedding rows for a dictionary of %d' %
                                (input.shape[0], dictionary.rows))
        self.input = input
        self.output = output
        self.dictionary = dictionary
        self.losses = []

    @property
    def dim(self):
        return self.input.shape[1]

    @property
    def rows(self):
        return self.input.shape[0]

    def save(self, path):
        with open(path, 'wb') as f:
            f.write(MAGIC)
            f.write(struct.pack('<QQ', self.rows, self.dim))
            f.write(self.input.data.astype('<f8').tobytes())

    @classmethod
    def load(cls, path, dictionary=None):
        with open(path, 'rb') as f:
            if f.read(4) != MAGIC:
                raise InputError('%s is not an EMB1 embedding file' % path)
            rows, dim = struct.unpack('<QQ', f.read(16))
            data = np.frombuffer(f.read(rows * dim * 8), dtype='<f8')
        if data.size != rows * dim:
            raise InputError('%s is truncated' % path)
        return cls(nx.Tensor(data.reshape(rows, dim).astype(np.float64),
                             requires_grad=True, name='embedding'),
                   dictionary=dictionary)

    def word_vector(self, token):
        return embed_entry([token], self, self.dictionary)

    def nearest(self, token, topn=10):
        """
        The ``topn`` dictionary words closest to ``token`` by cosine.
        """
        query = self.word_vector(token).data
        words = self.dictionary.words
        vectors = np.stack([self.word_vector(w).data for w in words])
        norms = np.linalg.norm(vectors, axis=1) * np.linalg.norm(query)
        scores = vectors @ query / np.maximum(norms, 1e-12)
        order = np.argsort(-scores, kind='stable')
        return [(words[i], float(scores[i])) for i in order
                if words[i] != token][:topn]


def entry_rows(tokens, dictionary):
    """
    The multiset of input rows of an entry: every token's word id (when
    known) and subword bucket ids.
    """
    rows = []
    for token in tokens:
        rows.extend(dictionary.ids(token))
    return rows


def embed_entry(tokens, emb, dictionary):
    """
    Mean of all input rows of all tokens; the zero vector for no tokens.
    """
    rows = entry_rows(tokens, dictionary)
    if not rows:
        return nx.Tensor(np.zeros(emb.dim))
    return nx.Tensor(emb.input.data[rows].mean(axis=0))


def averaging_matrix(row_lists):
    """
    Return the unique rows and a matrix ``A`` such that ``A @ table[rows]``
    gives the mean row of each list. Empty lists give zero rows.
    """
    arrays = [np.asarray(rows, dtype=np.int64) for rows in row_lists]
    unique = np.unique(np.concatenate(arrays + [np.zeros(0, np.int64)]))
    A = np.zeros((len(arrays), len(unique)))
    for i, rows in enumerate(arrays):
        if len(rows):
            np.add.at(A[i], np.searchsorted(unique, rows), 1.0 / len(rows))
    return unique, A


def noise_distribution(corpus, dictionary):
    counts = np.zeros(len(dictionary))
    for tokens in corpus:
        for token in tokens:
            word_id = dictionary.index.get(token)
            if word_id is not None:
                counts[word_id] += 1
    weights = counts ** NOISE_POWER
    return weights / weights.sum()


def _pairs(tokens, dictionary, window):
    centers, contexts = [], []
    for i, token in enumerate(tokens):
        for j in range(max(0, i - window), min(len(tokens), i + window + 1)):
            if j == i:
                continue
            context = dictionary.index.get(tokens[j])
            if context is None:
                continue
            centers.append(dictionary.ids(token))
            contexts.append(context)
    return centers, contexts


def skipgram_pretrain(corpus, dictionary, dim=100, window=5, negatives=5,
                      epochs=5, lr=0.05, seed=0, batch_size=16):
    """
    Train input and output embeddings with negative sampling.

    :param corpus: list of token lists from ``normalize_tokenize``.
    :param dictionary: ``TokenDictionary`` built on the same split.

    Each centre token is the mean of its word and subword rows; negatives
    come from the unigram distribution raised to 0.75. The learning rate
    decays linearly to zero. The mean per-pair loss of each epoch is kept
    in ``losses`` of the returned matrix.
    """
    corpus = [tokens for tokens in corpus]
    if not corpus:
        raise InputError('cannot pretrain embeddings on an empty corpus')
    init = make_rng(seed, 'skipgram', 'init')
    emb = EmbeddingMatrix(
        nx.init_uniform(init, (dictionary.rows, dim), 1.0 / dim,
                        name='embedding'),
        nx.init_zeros((len(dictionary), dim), name='embedding.output'),
        dictionary)
    if epochs == 0:
        return emb
    noise = noise_distribution(corpus, dictionary)
    batches = (len(corpus) + batch_size - 1) // batch_size
    optimizer = nx.Optimizer([], kind='sgd', lr=lr,
                             decay_steps=epochs * batches)
    for epoch in range(epochs):
        started = time.time()
        rng = make_rng(seed, 'skipgram', epoch)
        order = rng.permutation(len(corpus))
        total, pairs_seen = 0.0, 0
        for start in range(0, len(order), batch_size):
            centers, contexts = [], []
            for index in order[start:start + batch_size]:
                c, o = _pairs(corpus[index], dictionary, window)
                centers.extend(c)
                contexts.extend(o)
            if not centers:
                optimizer.step()
                continue
            sampled = rng.choice(len(dictionary), size=(len(contexts),
                                                        negatives), p=noise)
            total += _skipgram_step(emb, optimizer, centers,
                                    np.asarray(contexts), sampled)
            pairs_seen += len(centers)
        if not np.isfinite(emb.input.data).all():
            raise ContractError('non-finite embedding after epoch %d' %
                                (epoch + 1))
        mean_loss = total / max(pairs_seen, 1)
        emb.losses.append(mean_loss)
        logger.info('skipgram epoch %d/%d: loss %.6f, lr %.5f, %.1fs',
                    epoch + 1, epochs, mean_loss, optimizer.lr,
                    time.time() - started)
    return emb


def _skipgram_step(emb, optimizer, centers, contexts, sampled):
    in_rows, A = averaging_matrix(centers)
    out_rows = np.unique(np.concatenate([contexts, sampled.ravel()]))
    pos = np.searchsorted(out_rows, contexts)
    neg = np.searchsorted(out_rows, sampled)
    E = nx.Tensor(emb.input.data[in_rows], requires_grad=True)
    U = nx.Tensor(emb.output.data[out_rows], requires_grad=True)
    count, dim = len(centers), emb.dim
    with nx.Tape() as tape:
        H = nx.matmul(A, E)
        s_pos = nx.sum(H * nx.take(U, pos), axis=1)
        s_neg = nx.sum(nx.reshape(H, (count, 1, dim)) * nx.take(U, neg),
                       axis=2)
        loss = -(nx.sum(nx.log_sigmoid(s_pos)) +
                 nx.sum(nx.log_sigmoid(-s_neg)))
    tape.backward(loss, params=[E, U])
    optimizer.sparse_step(emb.input, in_rows, E.grad)
    optimizer.sparse_step(emb.output, out_rows, U.grad)
    optimizer.step()
    return loss.item()


def dictionary_path(path):
    """
    The token dictionary stored next to an EMB1 file.
    """
    return os.path.splitext(path)[0] + '.dict'


def save_embeddings(emb, path):
    emb.save(path)
    with open(dictionary_path(path), 'w', encoding='utf-8',
              newline='\n') as f:
        f.write(emb.dictionary.serialize())


def load_embeddings(path):
    """
    Read an EMB1 file together with its token dictionary.
    """
    try:
        with open(dictionary_path(path), encoding='utf-8', newline='') as f:
            dictionary = TokenDictionary.parse(f.read())
    except FileNotFoundError:
        raise InputError('no token dictionary next to %s (expected %s)' %
                         (path, dictionary_path(path)))
    return EmbeddingMatrix.load(path, dictionary)
