"""Command line: one pruning + post-training run per invocation.

    toylab run --method depth --rho 0.25 --budget 200000 --seed 0 --out f.curves

The unpruned base model is pretrained once per configuration and cached,
so emitting a grid of curves only pays the base training cost once.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys

import torch

from .data import Corpus, CorpusConfig, build_corpus
from .errors import DivergenceError, ToyLabError
from .model import ToyModelConfig, build_model
from .prune import PruneConfig, prune_model
from .train import (
    RunRecord,
    TrainConfig,
    baseline_loss,
    post_train,
    pretrain,
    write_curves,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="toylab")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="prune a base model and post-train it")
    p.add_argument("--method", required=True,
                   choices=("depth", "width", "semi24"))
    p.add_argument("--rho", type=float, required=True,
                   help="target pruning rate (semi24 requires 0.5)")
    p.add_argument("--budget", type=int, required=True,
                   help="post-training token budget")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="curve file to write")
    p.add_argument("--base-budget", type=int, default=400_000,
                   help="pretraining budget for the unpruned base "
                        "(default 400000)")
    p.add_argument("--record-every", type=int, default=None,
                   help="checkpoint spacing in tokens (default budget/10)")
    p.add_argument("--lr", type=float, default=2e-4)
    p.add_argument("--batch-tokens", type=int, default=8192)
    p.add_argument("--calib-samples", type=int, default=256)
    p.add_argument("--layers", type=int, default=4)
    p.add_argument("--hidden", type=int, default=96)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--vocab", type=int, default=512)
    p.add_argument("--context", type=int, default=128)
    p.add_argument("--corpus-bytes", type=int, default=2_000_000)
    p.add_argument("--cache-dir", default="toylab_cache",
                   help="corpus and base-model cache (default "
                        "toylab_cache)")
    p.add_argument("--family", default="toylab")
    return parser


def base_model_cached(model_config: ToyModelConfig, corpus: Corpus,
                      args, train_config: TrainConfig):
    """Pretrain the unpruned base once per configuration."""
    key = (f"{model_config}|{corpus.identity}|{args.base_budget}"
           f"|{args.lr}|{args.batch_tokens}|{args.seed}")
    digest = hashlib.sha256(key.encode()).hexdigest()[:16]
    path = os.path.join(args.cache_dir, f"base-{digest}.pt")
    model = build_model(model_config, args.seed)
    if os.path.exists(path):
        model.load_state_dict(torch.load(path, weights_only=True))
        return model
    pretrain(model, corpus, args.base_budget, train_config, seed=args.seed)
    os.makedirs(args.cache_dir, exist_ok=True)
    torch.save(model.state_dict(), path)
    return model


def cmd_run(args) -> int:
    model_config = ToyModelConfig(layers=args.layers, hidden=args.hidden,
                                  heads=args.heads, vocab=args.vocab,
                                  context=args.context)
    train_config = TrainConfig(lr=args.lr, batch_tokens=args.batch_tokens)
    # validate before paying the corpus and pretraining cost
    prune_config = PruneConfig(method=args.method, rho=args.rho,
                               calib_samples=args.calib_samples,
                               seed=args.seed)
    corpus = build_corpus(
        CorpusConfig(max_bytes=args.corpus_bytes, vocab=args.vocab),
        cache_path=os.path.join(args.cache_dir, "corpus.npz"))
    print(f"corpus: {corpus.identity}, {len(corpus.tokens)} tokens")

    base = base_model_cached(model_config, corpus, args, train_config)
    l0 = baseline_loss(base, corpus, train_config)
    print(f"base model: {base.n_params} params, eval loss {l0:.4f}")

    diagnostics = (args.out + ".channel_scores.csv"
                   if args.method == "width" else None)
    result = prune_model(base, corpus, prune_config, diagnostics)
    print(f"pruned ({args.method}): {result.n_after}/{result.n0} params "
          f"kept, realized rho {result.rho_realized:.4f}")

    record_every = (args.record_every if args.record_every is not None
                    else max(1, args.budget // 10))
    run = RunRecord(
        run_id=f"{args.method}-r{args.rho:g}-s{args.seed}",
        family=args.family, method=args.method, n0=result.n0,
        rho=result.rho_realized, l0=l0, n_after=result.n_after)
    comments = (f"corpus: {corpus.identity}",
                "l0 split: post-training evaluation split")
    try:
        post_train(result.model, corpus, args.budget, record_every, run,
                   train_config, seed=args.seed + 1,
                   masks=result.masks or None)
    except DivergenceError as exc:
        write_curves(args.out, [run], comments)
        print(f"toylab: aborted, partial curve flagged: {exc}",
              file=sys.stderr)
        return 1
    write_curves(args.out, [run], comments)
    print(f"wrote {len(run.tokens)} checkpoints to {args.out}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return cmd_run(args)
    except (ToyLabError, OSError) as exc:
        print(f"toylab: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
