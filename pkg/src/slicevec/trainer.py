"""Skip-gram training with negative sampling over encoded corpora.

The model keeps two matrices: input vectors (centers) and output vectors
(contexts and noise samples). For each (center, context) pair and each
sampled negative token, the loss is

    -log sigmoid(u_ctx . v_cen) - sum_neg log sigmoid(-u_neg . v_cen)

minimized by plain SGD at a fixed learning rate. Batches accumulate their
pair gradients against the matrices as they stood at the start of the batch
and apply the update afterwards, so a batch is one SGD step on the mean
pair loss of the batch.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import _kernels
from .rng import Rng, splitmix64
from .slicer import EncodedCorpus, Vocabulary

NOISE_POWER = 0.75


class NumericalAbortError(RuntimeError):
    """Training hit a non-finite loss or matrix value."""

    def __init__(self, step: int, pair: int):
        self.step = step
        self.pair = pair
        where = f"batch {step}" if step >= 0 else "a standalone step"
        detail = f", pair {pair}" if pair >= 0 else ""
        super().__init__(f"non-finite value during {where}{detail}")


@dataclass(frozen=True)
class TrainingConfig:
    """Hyperparameters. Defaults are the reference configuration."""

    dims: int = 256
    window_c: int = 4  # context positions t-c/2 .. t+c/2, center excluded
    num_skips_k: int = 2  # pairs sampled per center position
    negative_samples: int = 5
    learning_rate: float = 0.1
    batch_size: int = 128
    steps: int = 1_000_000
    seed: int = 1
    loss_every: int = 2000  # batches per loss checkpoint

    def __post_init__(self):
        if self.dims < 1:
            raise ValueError("dims must be >= 1")
        if self.window_c < 2 or self.window_c % 2:
            raise ValueError("window_c must be a positive even integer")
        if not 1 <= self.num_skips_k <= self.window_c:
            raise ValueError("num_skips_k must be in 1..window_c")
        if not 1 <= self.negative_samples <= 64:
            raise ValueError("negative_samples must be in 1..64")
        if not np.isfinite(self.learning_rate) or self.learning_rate < 0:
            raise ValueError("learning_rate must be finite and >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.loss_every < 1:
            raise ValueError("loss_every must be >= 1")

    def with_overrides(self, **kwargs) -> "TrainingConfig":
        return replace(self, **kwargs)


@dataclass
class EmbeddingMatrix:
    """The two learned matrices, always float64 and of equal shape."""

    input_vectors: np.ndarray
    output_vectors: np.ndarray

    @classmethod
    def initialize(cls, vocab_size: int, dims: int, rng: Rng) -> "EmbeddingMatrix":
        """Inputs uniform in [-0.5/dims, +0.5/dims), drawn row-major; outputs zero."""
        inp = np.empty((vocab_size, dims), dtype=np.float64)
        for i in range(vocab_size):
            for d in range(dims):
                inp[i, d] = (rng.next_float() - 0.5) / dims
        out = np.zeros((vocab_size, dims), dtype=np.float64)
        return cls(inp, out)

    def copy(self) -> "EmbeddingMatrix":
        return EmbeddingMatrix(self.input_vectors.copy(), self.output_vectors.copy())

    def all_finite(self) -> bool:
        return bool(
            np.isfinite(self.input_vectors).all()
            and np.isfinite(self.output_vectors).all()
        )


@dataclass
class LossTrace:
    """Average-loss checkpoints: (batches completed, mean pair loss)."""

    checkpoints: list[tuple[int, float]] = field(default_factory=list)

    def __post_init__(self):
        steps = [s for s, _ in self.checkpoints]
        if any(b <= a for a, b in zip(steps, steps[1:])):
            raise ValueError("checkpoint steps must be strictly increasing")

    def save_csv(self, path: str) -> None:
        with open(path, "w", encoding="ascii", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "avg_loss"])
            for step, loss in self.checkpoints:
                writer.writerow([step, repr(loss)])

    @classmethod
    def load_csv(cls, path: str) -> "LossTrace":
        with open(path, "r", encoding="ascii", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["step", "avg_loss"]:
                raise ValueError(f"{path}: not a loss trace CSV")
            return cls([(int(row[0]), float(row[1])) for row in reader])


@dataclass(frozen=True)
class NoiseDistribution:
    """Unigram^0.75 noise distribution with inverse-CDF sampling support."""

    probs: np.ndarray
    cdf: np.ndarray

    @classmethod
    def from_counts(cls, counts: np.ndarray) -> "NoiseDistribution":
        # the count floor keeps every token drawable (UNK may have count 0)
        weights = np.maximum(counts, 1).astype(np.float64) ** NOISE_POWER
        probs = weights / weights.sum()
        cdf = np.cumsum(probs)
        cdf[-1] = 1.0
        return cls(probs, cdf)

    @classmethod
    def from_vocabulary(cls, vocab: Vocabulary) -> "NoiseDistribution":
        return cls.from_counts(vocab.counts_array())


def neg_sample(noise: NoiseDistribution, rng: Rng, exclude: int) -> int:
    """Draw one noise token, resampling while it equals exclude."""
    if len(noise.cdf) < 2:
        raise ValueError("noise distribution needs at least 2 tokens")
    return _kernels._draw_negative_py(noise.cdf, rng, exclude)


@dataclass
class BatchCursor:
    """Iteration state over a flattened corpus for generate_batch.

    Wraps the piece-wise token stream plus the pending-pair buffer and the
    RNG, in the array layout the kernels share. The cursor walks pieces
    cyclically, so batches can be drawn forever.
    """

    tokens: np.ndarray
    starts: np.ndarray
    ends: np.ndarray
    state: np.ndarray  # uint64[1]
    position: np.ndarray  # int64[5]: piece, pos, pend index, pend count, center
    pend: np.ndarray  # int32 scratch for one center's contexts
    total_tokens: int

    @classmethod
    def start(cls, corpus: EncodedCorpus, config: TrainingConfig, rng: Rng) -> "BatchCursor":
        pieces = corpus.trainable_pieces()
        if not pieces:
            raise ValueError("corpus has no piece with at least 2 tokens")
        tokens = np.concatenate(pieces).astype(np.int32, copy=False)
        lengths = np.array([len(p) for p in pieces], dtype=np.int64)
        ends = np.cumsum(lengths)
        starts = ends - lengths
        return cls(
            tokens=tokens,
            starts=starts,
            ends=ends,
            state=np.array([rng.state], dtype=np.uint64),
            position=np.zeros(5, dtype=np.int64),
            pend=np.zeros(config.window_c, dtype=np.int32),
            total_tokens=corpus.total_tokens,
        )


def generate_batch(
    corpus: EncodedCorpus, config: TrainingConfig, cursor: BatchCursor
) -> list[tuple[int, int]]:
    """The next batch_size (center, context) pairs; advances the cursor.

    Each center position contributes min(num_skips_k, available) pairs with
    context offsets drawn without replacement from the +-window_c/2 window,
    truncated at piece boundaries. Pieces shorter than 2 tokens were already
    skipped when the cursor was built.
    """
    if corpus.total_tokens != cursor.total_tokens:
        raise ValueError("cursor was built for a different corpus")
    centers = np.empty(config.batch_size, dtype=np.int32)
    ctxs = np.empty(config.batch_size, dtype=np.int32)
    rng = Rng.from_state(int(cursor.state[0]))
    _kernels._gen_pairs_py(
        cursor.tokens,
        cursor.starts,
        cursor.ends,
        rng,
        cursor.position,
        cursor.pend,
        centers,
        ctxs,
        config.window_c // 2,
        config.num_skips_k,
    )
    cursor.state[0] = rng.state
    return [(int(c), int(t)) for c, t in zip(centers, ctxs)]


def sgd_step(
    emb: EmbeddingMatrix,
    batch: Sequence[tuple[int, int]],
    config: TrainingConfig,
    noise: NoiseDistribution,
    rng: Rng,
) -> float:
    """One SGD step on the batch's mean pair loss; returns that mean loss.

    Negatives are drawn per pair, in batch order, excluding the pair's
    context token. All gradients are taken at the pre-step matrices (so the
    update is learning_rate times the gradient of the mean pair loss); the
    update is then applied, input rows first, then output rows, in pair
    order. emb is mutated in place.
    """
    if not batch:
        raise ValueError("batch must be non-empty")
    centers = np.array([c for c, _ in batch], dtype=np.int32)
    ctxs = np.array([t for _, t in batch], dtype=np.int32)
    n = len(batch)
    n_neg = config.negative_samples
    negs = np.empty((n, n_neg), dtype=np.int32)
    for p in range(n):
        exclude = int(ctxs[p])
        for j in range(n_neg):
            negs[p, j] = neg_sample(noise, rng, exclude)
    inp, out = emb.input_vectors, emb.output_vectors
    cen0 = inp[centers]
    ctx0 = out[ctxs]
    neg0 = out[negs]
    dot_pos = np.einsum("bd,bd->b", cen0, ctx0)
    dot_neg = np.einsum("bd,bjd->bj", cen0, neg0)
    losses = np.logaddexp(0.0, -dot_pos) + np.logaddexp(0.0, dot_neg).sum(axis=1)
    if not np.isfinite(losses).all():
        raise NumericalAbortError(-1, int(np.flatnonzero(~np.isfinite(losses))[0]))
    g_pos = _kernels._sigmoid_np(dot_pos) - 1.0
    g_neg = _kernels._sigmoid_np(dot_neg)
    scale = config.learning_rate / n
    grad_cen = g_pos[:, None] * ctx0 + np.einsum("bj,bjd->bd", g_neg, neg0)
    np.add.at(inp, centers, -scale * grad_cen)
    coef = np.concatenate([g_pos[:, None], g_neg], axis=1)
    rows = np.concatenate([ctxs[:, None], negs], axis=1)
    grad_out = coef[:, :, None] * cen0[:, None, :]
    np.add.at(out, rows.reshape(-1), (-scale * grad_out).reshape(-1, inp.shape[1]))
    return float(losses.sum()) / n


def _validate_corpus(corpus: EncodedCorpus, vocab: Vocabulary) -> None:
    for piece in corpus.pieces:
        if len(piece) and (piece.min() < 0 or piece.max() >= vocab.size):
            raise ValueError("corpus contains token ids outside the vocabulary")


def train(
    corpus: EncodedCorpus,
    vocab: Vocabulary,
    config: TrainingConfig,
    threads: int = 1,
) -> tuple[EmbeddingMatrix, LossTrace]:
    """Run config.steps batches of SGD; returns matrices and loss trace.

    Average loss is recorded every config.loss_every batches (partial
    trailing windows are not recorded). With threads == 1 the run is
    deterministic given the seed. threads > 1 uses lock-free parallel
    updates over piece shards (numba backend only): convergent but racy,
    and not reproducible run to run.
    """
    _validate_corpus(corpus, vocab)
    if vocab.size < 2:
        raise ValueError("vocabulary must have at least 2 tokens")
    rng = Rng(config.seed)
    emb = EmbeddingMatrix.initialize(vocab.size, config.dims, rng)
    if config.steps == 0:
        return emb, LossTrace([])
    cursor = BatchCursor.start(corpus, config, rng)
    noise = NoiseDistribution.from_vocabulary(vocab)
    if threads == 1:
        trace = _train_single(emb, cursor, noise, config)
    elif threads > 1:
        trace = _train_parallel(emb, cursor, noise, config, threads)
    else:
        raise ValueError("threads must be >= 1")
    return emb, trace


def _train_single(
    emb: EmbeddingMatrix,
    cursor: BatchCursor,
    noise: NoiseDistribution,
    config: TrainingConfig,
) -> LossTrace:
    checkpoints: list[tuple[int, float]] = []
    done = 0
    remaining = config.steps
    while remaining > 0:
        chunk = min(config.loss_every, remaining)
        loss_sum, status, abort_step, abort_pair = _kernels.run_window(
            cursor.tokens,
            cursor.starts,
            cursor.ends,
            emb.input_vectors,
            emb.output_vectors,
            noise.cdf,
            cursor.state,
            cursor.position,
            cursor.pend,
            chunk,
            config.batch_size,
            config.window_c // 2,
            config.num_skips_k,
            config.negative_samples,
            config.learning_rate,
            done,
        )
        if status != 0:
            raise NumericalAbortError(abort_step, abort_pair)
        done += chunk
        remaining -= chunk
        if chunk == config.loss_every:
            checkpoints.append((done, loss_sum / config.loss_every))
            if not emb.all_finite():
                raise NumericalAbortError(done - 1, -1)
    return LossTrace(checkpoints)


def _train_parallel(
    emb: EmbeddingMatrix,
    cursor: BatchCursor,
    noise: NoiseDistribution,
    config: TrainingConfig,
    threads: int,
) -> LossTrace:
    if _kernels.BACKEND != "numba":
        raise RuntimeError("parallel training requires the numba backend")
    n_pieces_total = len(cursor.starts)
    if threads > n_pieces_total:
        raise ValueError(
            f"threads ({threads}) cannot exceed trainable pieces ({n_pieces_total})"
        )
    # round-robin piece shards
    shard_idx = [np.arange(s, n_pieces_total, threads) for s in range(threads)]
    max_np = max(len(ix) for ix in shard_idx)
    starts2d = np.zeros((threads, max_np), dtype=np.int64)
    ends2d = np.zeros((threads, max_np), dtype=np.int64)
    n_pieces = np.zeros(threads, dtype=np.int64)
    for s, ix in enumerate(shard_idx):
        n_pieces[s] = len(ix)
        starts2d[s, : len(ix)] = cursor.starts[ix]
        ends2d[s, : len(ix)] = cursor.ends[ix]
    base = int(cursor.state[0])
    states = np.array(
        [splitmix64(base + s) or 1 for s in range(threads)], dtype=np.uint64
    )
    cursors = np.zeros((threads, 5), dtype=np.int64)
    pends = np.zeros((threads, config.window_c), dtype=np.int32)
    shard_steps = np.full(threads, config.steps // threads, dtype=np.int64)
    shard_steps[: config.steps % threads] += 1
    n_cols = int(shard_steps.max()) // config.loss_every + 1
    win_sums = np.zeros((threads, n_cols), dtype=np.float64)
    win_counts = np.zeros((threads, n_cols), dtype=np.int64)
    statuses = np.zeros(threads, dtype=np.int64)
    abort_steps = np.full(threads, -1, dtype=np.int64)
    abort_pairs = np.full(threads, -1, dtype=np.int64)
    _kernels._run_parallel_nb(
        cursor.tokens,
        starts2d,
        ends2d,
        n_pieces,
        emb.input_vectors,
        emb.output_vectors,
        noise.cdf,
        states,
        cursors,
        pends,
        shard_steps,
        config.batch_size,
        config.window_c // 2,
        config.num_skips_k,
        config.negative_samples,
        config.learning_rate,
        config.loss_every,
        win_sums,
        win_counts,
        statuses,
        abort_steps,
        abort_pairs,
    )
    if statuses.any():
        s = int(np.flatnonzero(statuses)[0])
        raise NumericalAbortError(int(abort_steps[s]), int(abort_pairs[s]))
    if not emb.all_finite():
        raise NumericalAbortError(config.steps - 1, -1)
    # merge windows completed by every shard; steps are global equivalents
    checkpoints = []
    for w in range(n_cols):
        if (win_counts[:, w] == config.loss_every).all():
            avg = float(win_sums[:, w].sum()) / (config.loss_every * threads)
            checkpoints.append(((w + 1) * config.loss_every * threads, avg))
    return LossTrace(checkpoints)
