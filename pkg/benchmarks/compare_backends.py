"""Benchmark the numba training kernel against the pure-numpy fallback.

Both backends are fed byte-identical clones of the same inputs: one
synthetic corpus, one initialized matrix pair, one RNG state. Because the
two kernels consume the random stream in lockstep, they train on exactly
the same pair/negative sequence, so besides wall time the script also
reports how far apart the two loss sums and weight matrices end up
(rounding-order noise only).

Run from the repository root:

    python3 benchmarks/compare_backends.py --steps 2000 --batch-size 128

If numba is not importable the numpy timing still runs and the comparison
is skipped.
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from slicevec import _kernels
from slicevec.analysis import CIRCLE_OF_FIFTHS, PC_OF_NAME
from slicevec.rng import Rng
from slicevec.slicer import build_vocabulary, encode_corpus, make_slice
from slicevec.synth import generate_piece, piece_rng
from slicevec.trainer import (
    BatchCursor,
    EmbeddingMatrix,
    NoiseDistribution,
    TrainingConfig,
)


def build_inputs(args: argparse.Namespace) -> dict:
    pieces = []
    for name in CIRCLE_OF_FIFTHS:
        root = PC_OF_NAME[name]
        for index in range(args.pieces_per_key):
            rng = piece_rng(args.seed, root, "major", index)
            beats = generate_piece(root, "major", args.bars, rng)
            pieces.append([make_slice(b) for b in beats])
    flat = [s for piece in pieces for s in piece]
    vocab = build_vocabulary(iter(flat), args.vocab_size)
    corpus = encode_corpus(pieces, vocab)
    config = TrainingConfig(
        dims=args.dims,
        window_c=args.window,
        num_skips_k=args.num_skips,
        negative_samples=args.negative_samples,
        learning_rate=0.1,
        batch_size=args.batch_size,
        steps=args.steps,
        seed=args.seed,
    )
    rng = Rng(config.seed)
    emb = EmbeddingMatrix.initialize(vocab.size, config.dims, rng)
    cursor = BatchCursor.start(corpus, config, rng)
    noise = NoiseDistribution.from_counts(vocab.counts_array())
    return {
        "vocab": vocab,
        "config": config,
        "emb": emb,
        "cursor": cursor,
        "cdf": noise.cdf,
    }


def run_backend(kernel, inputs: dict, n_batches: int) -> dict:
    """Clone every mutable input, run one timed kernel window."""
    config = inputs["config"]
    cursor = inputs["cursor"]
    inp = inputs["emb"].input_vectors.copy()
    out = inputs["emb"].output_vectors.copy()
    state = cursor.state.copy()
    position = cursor.position.copy()
    pend = cursor.pend.copy()
    started = time.perf_counter()
    loss_sum, status, abort_step, abort_pair = kernel(
        cursor.tokens,
        cursor.starts,
        cursor.ends,
        inp,
        out,
        inputs["cdf"],
        state,
        position,
        pend,
        n_batches,
        config.batch_size,
        config.window_c // 2,
        config.num_skips_k,
        config.negative_samples,
        config.learning_rate,
        0,
    )
    elapsed = time.perf_counter() - started
    if status != 0:
        raise RuntimeError(f"non-finite loss at step {abort_step} pair {abort_pair}")
    return {
        "elapsed": elapsed,
        "loss_sum": loss_sum,
        "inp": inp,
        "out": out,
        "state": int(state[0]),
    }


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        description="time the numba training kernel against the numpy fallback"
    )
    parser.add_argument("--steps", type=int, default=2000, help="batches to time")
    parser.add_argument("--batch-size", type=int, default=128)
    parser.add_argument("--dims", type=int, default=64)
    parser.add_argument("--window", type=int, default=4)
    parser.add_argument("--num-skips", type=int, default=2)
    parser.add_argument("--negative-samples", type=int, default=5)
    parser.add_argument("--vocab-size", type=int, default=500)
    parser.add_argument("--pieces-per-key", type=int, default=4)
    parser.add_argument("--bars", type=int, default=26)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument(
        "--repeat", type=int, default=3, help="timed repetitions; best is reported"
    )
    args = parser.parse_args(argv)

    inputs = build_inputs(args)
    vocab = inputs["vocab"]
    pairs = args.steps * args.batch_size
    print(
        f"corpus: {len(CIRCLE_OF_FIFTHS) * args.pieces_per_key} pieces, "
        f"vocab {vocab.size}, dims {args.dims}, "
        f"{args.steps} batches x {args.batch_size} pairs"
    )

    backends = [("numpy", _kernels._run_window_numpy)]
    if _kernels.HAVE_NUMBA:
        backends.append(("numba", _kernels._run_window_nb))
        # JIT-compile outside the timed region
        run_backend(_kernels._run_window_nb, inputs, 1)
    else:
        print(
            "numba backend unavailable (not importable or disabled by "
            "SLICEVEC_BACKEND); timing the numpy fallback only"
        )

    results = {}
    for name, kernel in backends:
        best = None
        for _ in range(args.repeat):
            result = run_backend(kernel, inputs, args.steps)
            if best is None or result["elapsed"] < best["elapsed"]:
                best = result
        results[name] = best
        rate = pairs / best["elapsed"]
        print(
            f"{name:>6}: {best['elapsed']:8.3f} s   "
            f"{rate / 1e6:7.2f} M pairs/s   mean loss {best['loss_sum'] / args.steps:.6f}"
        )

    if len(results) == 2:
        a, b = results["numpy"], results["numba"]
        print(f"speedup: {a['elapsed'] / b['elapsed']:.1f}x (numba over numpy)")
        if a["state"] != b["state"]:
            print("ERROR: integer streams diverged", file=sys.stderr)
            return 1
        loss_rel = abs(a["loss_sum"] - b["loss_sum"]) / max(abs(a["loss_sum"]), 1.0)
        drift = max(
            float(np.max(np.abs(a["inp"] - b["inp"]))),
            float(np.max(np.abs(a["out"] - b["out"]))),
        )
        print(
            f"agreement: identical pair stream; loss-sum rel diff {loss_rel:.2e}; "
            f"max weight drift {drift:.2e}"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
