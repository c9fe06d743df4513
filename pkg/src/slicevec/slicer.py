"""Pitch-class slices, the frequency-ranked vocabulary, and corpus encoding.

A slice is the set of pitch classes sounding during one beat; it plays the
role a word plays in a text model. Slices have a canonical text form (pitch
classes joined by "."), the empty slice is the rest "R", and slices below
the vocabulary frequency cutoff fold into the catch-all token "UNK".
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .midi import MidiPiece, sounding_pitches

UNK_FORM = "UNK"
REST_FORM = "R"


@dataclass(frozen=True)
class Slice:
    """An immutable set of pitch classes, stored strictly ascending."""

    pitch_classes: tuple[int, ...]

    def __post_init__(self):
        pcs = self.pitch_classes
        for pc in pcs:
            if not 0 <= pc <= 11:
                raise ValueError(f"pitch class {pc} outside 0..11")
        if any(pcs[i] >= pcs[i + 1] for i in range(len(pcs) - 1)):
            raise ValueError(f"pitch classes {pcs} not strictly ascending")

    @property
    def form(self) -> str:
        """Canonical text form: "0.4.7" for a C major triad, "R" when empty."""
        if not self.pitch_classes:
            return REST_FORM
        return ".".join(str(pc) for pc in self.pitch_classes)

    @classmethod
    def from_form(cls, form: str) -> "Slice":
        if form == REST_FORM:
            return cls(())
        try:
            pcs = tuple(int(part) for part in form.split("."))
        except ValueError:
            raise ValueError(f"bad slice form {form!r}") from None
        return cls(pcs)

    def transpose(self, semitones: int) -> "Slice":
        return Slice(tuple(sorted((pc + semitones) % 12 for pc in self.pitch_classes)))

    def __str__(self) -> str:
        return self.form


def make_slice(pitches: Iterable[int]) -> Slice:
    """Collapse MIDI pitches to their octave-free pitch-class set."""
    return Slice(tuple(sorted({p % 12 for p in pitches})))


def slices_from_piece(piece: MidiPiece) -> list[Slice]:
    """One slice per beat of the piece, in beat order."""
    return [
        make_slice(sounding_pitches(piece.events, piece.grid, beat))
        for beat in range(piece.grid.piece_length_beats)
    ]


class Vocabulary:
    """Frequency-ranked slice <-> token-id mapping with an UNK cutoff.

    Token 0 is always UNK. Content tokens get ids 1..size-1 in descending
    frequency order; frequency ties are broken by canonical-form
    lexicographic order so rebuilding from the same stream is deterministic.
    """

    def __init__(self, ranked: Sequence[tuple[Slice, int]], unk_count: int):
        """ranked: (slice, count) pairs already in final id order (1, 2, ...)."""
        self._content: list[Slice] = []  # index i holds the slice for token i+1
        self._counts: list[int] = [unk_count]
        self._ids: dict[Slice, int] = {}
        for s, count in ranked:
            if s in self._ids:
                raise ValueError(f"duplicate slice {s.form} in vocabulary")
            self._content.append(s)
            self._ids[s] = len(self._content)
            self._counts.append(count)

    @property
    def size(self) -> int:
        return len(self._content) + 1

    @property
    def unk_id(self) -> int:
        return 0

    def token_of(self, s: Slice) -> int:
        """The slice's id, or unk_id when it is out of vocabulary."""
        return self._ids.get(s, 0)

    def __contains__(self, s: Slice) -> bool:
        return s in self._ids

    def slice_of(self, token: int) -> Slice:
        """The slice for a content token id. UNK has no slice."""
        if token == 0:
            raise KeyError("UNK does not map back to a slice")
        if not 1 <= token < self.size:
            raise KeyError(f"token id {token} out of range")
        return self._content[token - 1]

    def form_of(self, token: int) -> str:
        if token == 0:
            return UNK_FORM
        return self.slice_of(token).form

    def count_of(self, token: int) -> int:
        if not 0 <= token < self.size:
            raise KeyError(f"token id {token} out of range")
        return self._counts[token]

    def counts_array(self) -> np.ndarray:
        return np.asarray(self._counts, dtype=np.int64)

    def items(self) -> Iterator[tuple[int, str, int]]:
        """(id, form, count) triples in id order, UNK first."""
        for token in range(self.size):
            yield token, self.form_of(token), self._counts[token]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Vocabulary):
            return NotImplemented
        return self._content == other._content and self._counts == other._counts

    def __repr__(self) -> str:
        return f"Vocabulary(size={self.size})"


def build_vocabulary(slices: Iterable[Slice], max_size: int) -> Vocabulary:
    """Rank distinct slices by frequency and keep the top max_size - 1.

    Everything below the cutoff aggregates into UNK's count. Ties at the
    cutoff are broken by canonical-form lexicographic order.
    """
    if max_size < 2:
        raise ValueError("max_size must be at least 2 (one content token plus UNK)")
    counts = Counter(slices)
    if not counts:
        raise ValueError("cannot build a vocabulary from an empty slice stream")
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0].form))
    kept = ranked[: max_size - 1]
    unk_count = sum(count for _, count in ranked[max_size - 1 :])
    return Vocabulary(kept, unk_count)


@dataclass
class EncodedCorpus:
    """Token-id sequences per piece. Windows never cross piece boundaries."""

    pieces: list[np.ndarray]  # int32 arrays
    total_tokens: int

    @classmethod
    def from_ids(cls, pieces: Iterable[Sequence[int]]) -> "EncodedCorpus":
        arrays = [np.asarray(p, dtype=np.int32) for p in pieces]
        return cls(arrays, int(sum(len(a) for a in arrays)))

    def trainable_pieces(self) -> list[np.ndarray]:
        """Pieces long enough to yield at least one (center, context) pair."""
        return [p for p in self.pieces if len(p) >= 2]


def encode_corpus(pieces: Iterable[Sequence[Slice]], vocab: Vocabulary) -> EncodedCorpus:
    """Replace each slice by its token id (or unk_id), keeping lengths."""
    return EncodedCorpus.from_ids(
        [[vocab.token_of(s) for s in piece] for piece in pieces]
    )


def decode_piece(ids: Sequence[int], vocab: Vocabulary) -> list[str]:
    """Token ids back to canonical forms; UNK decodes to "UNK"."""
    return [vocab.form_of(int(t)) for t in ids]


# ---------------------------------------------------------------------------
# cache files

CORPUS_MAGIC = "SLICECORPUS"
VOCAB_MAGIC = "SLICEVOCAB"
FORMAT_VERSION = "v1"


def save_corpus(path: str, pieces: Sequence[Sequence[Slice]]) -> None:
    """Text cache: header line, then one line of slice forms per piece."""
    lines = [f"{CORPUS_MAGIC} {FORMAT_VERSION} {len(pieces)}"]
    for piece in pieces:
        lines.append(" ".join(s.form for s in piece))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_corpus(path: str) -> list[list[Slice]]:
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().split()
        if len(header) != 3 or header[0] != CORPUS_MAGIC:
            raise ValueError(f"{path}: not a {CORPUS_MAGIC} file")
        if header[1] != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported version {header[1]}")
        n_pieces = int(header[2])
        pieces = []
        for i in range(n_pieces):
            line = fh.readline()
            if not line:
                raise ValueError(f"{path}: expected {n_pieces} pieces, found {i}")
            pieces.append([Slice.from_form(form) for form in line.split()])
    return pieces


def save_vocabulary(path: str, vocab: Vocabulary) -> None:
    """Text cache: header line, then "<id> <form> <count>" per token."""
    lines = [f"{VOCAB_MAGIC} {FORMAT_VERSION} {vocab.size}"]
    for token, form, count in vocab.items():
        lines.append(f"{token} {form} {count}")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_vocabulary(path: str) -> Vocabulary:
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().split()
        if len(header) != 3 or header[0] != VOCAB_MAGIC:
            raise ValueError(f"{path}: not a {VOCAB_MAGIC} file")
        if header[1] != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported version {header[1]}")
        size = int(header[2])
        ranked: list[tuple[Slice, int]] = []
        unk_count = None
        for expected in range(size):
            parts = fh.readline().split()
            if len(parts) != 3:
                raise ValueError(f"{path}: bad vocabulary line for id {expected}")
            token, form, count = int(parts[0]), parts[1], int(parts[2])
            if token != expected:
                raise ValueError(f"{path}: ids not contiguous at {token}")
            if token == 0:
                if form != UNK_FORM:
                    raise ValueError(f"{path}: token 0 must be {UNK_FORM}, got {form}")
                unk_count = count
            else:
                ranked.append((Slice.from_form(form), count))
    assert unk_count is not None
    return Vocabulary(ranked, unk_count)
