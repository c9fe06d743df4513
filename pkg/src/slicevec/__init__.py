"""slicevec: vector embeddings of polyphonic-music slices.

A "slice" is the set of pitch classes sounding during one beat of a piece.
Treating slices as words, this package trains skip-gram embeddings with
negative sampling over a MIDI corpus, exposes cosine-geometry queries on the
learned space, reproduces harmonic analyses (chord function distances, key
similarity, chord-pair angles), and rewrites pieces by substituting each
beat's slice with a nearby one.

The pipeline, end to end:

    MIDI files -> beat slices -> vocabulary -> token ids -> trained vectors
               -> analysis matrices / substituted MIDI

``slicevec.cli`` wires the stages into subcommands; the library modules can
be used directly.
"""

from slicevec.slicer import Slice, Vocabulary, EncodedCorpus, make_slice
from slicevec.trainer import TrainingConfig, train
from slicevec.embedding import EmbeddingSpace, load_embedding, save_embedding

__version__ = "0.1.0"

__all__ = [
    "Slice",
    "Vocabulary",
    "EncodedCorpus",
    "make_slice",
    "TrainingConfig",
    "train",
    "EmbeddingSpace",
    "load_embedding",
    "save_embedding",
    "__version__",
]
