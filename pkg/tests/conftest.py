"""Shared fixtures: a small synthetic corpus and a quickly trained space.

The heavy end-to-end training lives in test_acceptance; everything here is
sized for unit-test turnaround (a couple of seconds total).
"""

from __future__ import annotations

import pytest

from slicevec.analysis import PC_OF_NAME
from slicevec.embedding import EmbeddingSpace
from slicevec.slicer import Slice, build_vocabulary, encode_corpus, make_slice
from slicevec.synth import generate_piece, piece_rng
from slicevec.trainer import TrainingConfig, train


def corpus_slices(keys, mode, pieces_per_key, n_bars, seed):
    """In-memory slice lists for a synthetic corpus (no files involved)."""
    pieces = []
    for key in keys:
        root = PC_OF_NAME[key]
        for index in range(pieces_per_key):
            rng = piece_rng(seed, root, mode, index)
            beats = generate_piece(root, mode, n_bars, rng)
            pieces.append([make_slice(beat) for beat in beats])
    return pieces


@pytest.fixture(scope="session")
def three_key_slices():
    return corpus_slices(("C", "G", "F"), "major", 2, 12, seed=5)


@pytest.fixture(scope="session")
def tiny_trained():
    """A small trained model: (space, vocab, corpus, trace)."""
    pieces = corpus_slices(("C", "G", "F"), "major", 2, 12, seed=5)
    vocab = build_vocabulary((s for p in pieces for s in p), max_size=80)
    corpus = encode_corpus(pieces, vocab)
    config = TrainingConfig(
        dims=16, window_c=4, num_skips_k=2, negative_samples=5,
        learning_rate=0.1, batch_size=64, steps=4000, seed=3, loss_every=1000,
    )
    emb, trace = train(corpus, vocab, config)
    space = EmbeddingSpace.from_training(vocab, emb)
    return space, vocab, corpus, trace


@pytest.fixture(scope="session")
def tiny_space(tiny_trained):
    return tiny_trained[0]


def slice_of(form: str) -> Slice:
    return Slice.from_form(form)
