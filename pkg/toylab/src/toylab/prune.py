"""The three pruning methods: depth (whole layers), width (channels),
and 2:4 semi-structured sparsity.

Calibration activations are accumulated chunk by chunk as sufficient
statistics (cosine sums, absolute-activation sums, squared input norms)
so a 1024-sequence calibration set never has to sit in memory at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from .errors import PruneError, ToyLabError
from .model import ToyModel, ToyModelConfig
from .data import Corpus

DEFAULT_CALIB_SAMPLES = 1024
_CALIB_CHUNK = 64


@dataclass(frozen=True)
class PruneConfig:
    method: str
    rho: float
    calib_samples: int = DEFAULT_CALIB_SAMPLES
    seed: int = 0

    def __post_init__(self):
        if self.method not in ("depth", "width", "semi24"):
            raise ToyLabError(f"unknown method {self.method!r}")
        if not 0.0 < self.rho < 1.0:
            raise ToyLabError("rho must lie in (0, 1)")
        if self.method == "semi24" and self.rho != 0.5:
            raise ToyLabError("semi24 fixes rho at 0.5 on masked matrices")
        if self.calib_samples < 1:
            raise ToyLabError("calib_samples must be >= 1")


@dataclass
class PruneResult:
    model: ToyModel
    method: str
    rho_config: float
    rho_realized: float
    n0: int
    n_after: int
    scores: np.ndarray
    masks: dict[str, torch.Tensor] = field(default_factory=dict)
    removed: tuple[int, ...] = ()


def calibration_batches(corpus: Corpus, model_config: ToyModelConfig,
                        n_samples: int, seed: int) -> list[torch.Tensor]:
    """Deterministic calibration chunks drawn from the training split."""
    rng = np.random.default_rng(seed)
    span = model_config.context
    train = corpus.train_tokens
    if len(train) <= span:
        raise ToyLabError("training split shorter than one context window")
    starts = rng.integers(0, len(train) - span, size=n_samples)
    chunks = []
    for lo in range(0, n_samples, _CALIB_CHUNK):
        part = starts[lo:lo + _CALIB_CHUNK]
        chunks.append(torch.from_numpy(
            np.stack([train[s:s + span] for s in part]).astype(np.int64)))
    return chunks


# =====================================================================
# Depth: remove the most redundant layers
# =====================================================================

def cosine_from_states(x_in: torch.Tensor, x_out: torch.Tensor):
    """(cosine sum, valid count, skipped count) over all positions."""
    flat_in = x_in.reshape(-1, x_in.shape[-1])
    flat_out = x_out.reshape(-1, x_out.shape[-1])
    norm_in = torch.linalg.vector_norm(flat_in, dim=1)
    norm_out = torch.linalg.vector_norm(flat_out, dim=1)
    valid = (norm_in > 0) & (norm_out > 0)
    skipped = int((~valid).sum())
    if int(valid.sum()) == 0:
        return 0.0, 0, skipped
    dots = (flat_in[valid] * flat_out[valid]).sum(dim=1)
    cosines = dots / (norm_in[valid] * norm_out[valid])
    return float(cosines.sum()), int(valid.sum()), skipped


def layer_importance(model: ToyModel, calib_batches) -> np.ndarray:
    """Mean input/output cosine per block; high means near-redundant."""
    n_layers = model.config.layers
    sums = np.zeros(n_layers)
    counts = np.zeros(n_layers, dtype=np.int64)
    with torch.no_grad():
        for batch in calib_batches:
            _, records = model(batch, record=True)
            for i, (x_in, x_out) in enumerate(records["block_io"]):
                s, n, _ = cosine_from_states(x_in, x_out)
                sums[i] += s
                counts[i] += n
    if np.any(counts == 0):
        dead = np.flatnonzero(counts == 0).tolist()
        raise PruneError(f"every position skipped (zero-norm states) for "
                         f"layer(s) {dead}")
    return sums / counts


def select_layers_to_remove(scores: np.ndarray, n_remove: int):
    """Indices of the n_remove highest scores; ties to the lower index."""
    order = np.argsort(-np.asarray(scores), kind="stable")
    return tuple(sorted(int(i) for i in order[:n_remove]))


def prune_depth(model: ToyModel, rho: float,
                calib_batches) -> PruneResult:
    config = model.config
    n_remove = int(round(rho * config.layers))
    if n_remove < 1:
        raise PruneError(f"rho={rho} removes no layer out of "
                         f"{config.layers}")
    if n_remove >= config.layers:
        raise PruneError(f"rho={rho} would remove all {config.layers} "
                         "layers")
    scores = layer_importance(model, calib_batches)
    removed = select_layers_to_remove(scores, n_remove)

    new_config = ToyModelConfig(layers=config.layers - n_remove,
                                hidden=config.hidden, heads=config.heads,
                                vocab=config.vocab, context=config.context,
                                ffn_inner=config.ffn_inner)
    pruned = ToyModel(new_config)
    pruned.tok_emb.load_state_dict(model.tok_emb.state_dict())
    pruned.pos_emb.load_state_dict(model.pos_emb.state_dict())
    pruned.ln_f.load_state_dict(model.ln_f.state_dict())
    pruned.head.load_state_dict(model.head.state_dict())
    survivors = [i for i in range(config.layers) if i not in removed]
    for new_i, old_i in enumerate(survivors):
        pruned.blocks[new_i].load_state_dict(
            model.blocks[old_i].state_dict())

    n0, n_after = model.n_params, pruned.n_params
    return PruneResult(model=pruned, method="depth", rho_config=rho,
                       rho_realized=(n0 - n_after) / n0, n0=n0,
                       n_after=n_after, scores=scores, removed=removed)


# =====================================================================
# Width: remove the least active channels
# =====================================================================

def channel_importance(model: ToyModel, calib_batches,
                       diagnostics_path: str | None = None) -> np.ndarray:
    """Mean absolute normalized activation per hidden channel, summed
    over every layer-norm site."""
    hidden = model.config.hidden
    sums = torch.zeros(hidden, dtype=torch.float64)
    count = 0
    with torch.no_grad():
        for batch in calib_batches:
            _, records = model(batch, record=True)
            for normed in records["ln_outputs"]:
                flat = normed.reshape(-1, hidden)
                sums += flat.abs().sum(dim=0).to(torch.float64)
                count += flat.shape[0]
    if count == 0:
        raise PruneError("calibration produced no activations")
    scores = (sums / count).numpy()
    if diagnostics_path is not None:
        shifted = scores - scores.min()
        peak = shifted.max()
        normalized = shifted / peak if peak > 0 else shifted
        with open(diagnostics_path, "w", encoding="utf-8") as handle:
            handle.write("channel,score,normalized\n")
            for i, (s, n) in enumerate(zip(scores, normalized)):
                handle.write(f"{i},{float(s)!r},{float(n)!r}\n")
    return scores


def select_channels_to_keep(scores: np.ndarray, rho: float,
                            heads: int) -> tuple[int, ...]:
    """Highest-scoring channels, count rounded to a multiple of heads.

    Among equal scores the lowest index is pruned first.
    """
    hidden = len(scores)
    target = hidden * (1.0 - rho)
    kept_count = int(round(target / heads)) * heads
    kept_count = min(max(kept_count, heads), hidden)
    if kept_count == hidden:
        raise PruneError(f"rho={rho} keeps all {hidden} channels after "
                         "rounding to the head multiple")
    order = np.argsort(np.asarray(scores), kind="stable")  # worst first
    pruned = set(order[:hidden - kept_count].tolist())
    return tuple(i for i in range(hidden) if i not in pruned)


def prune_width(model: ToyModel, rho: float, calib_batches,
                diagnostics_path: str | None = None) -> PruneResult:
    config = model.config
    scores = channel_importance(model, calib_batches, diagnostics_path)
    kept = select_channels_to_keep(scores, rho, config.heads)
    idx = torch.as_tensor(kept, dtype=torch.long)

    new_config = ToyModelConfig(layers=config.layers, hidden=len(kept),
                                heads=config.heads, vocab=config.vocab,
                                context=config.context,
                                ffn_inner=config.ffn_inner)
    pruned = ToyModel(new_config)
    with torch.no_grad():
        pruned.tok_emb.weight.copy_(model.tok_emb.weight[:, idx])
        pruned.pos_emb.weight.copy_(model.pos_emb.weight[:, idx])
        pruned.ln_f.weight.copy_(model.ln_f.weight[idx])
        pruned.ln_f.bias.copy_(model.ln_f.bias[idx])
        pruned.head.weight.copy_(model.head.weight[:, idx])
        pruned.head.bias.copy_(model.head.bias)
        h = config.hidden
        for new_block, old_block in zip(pruned.blocks, model.blocks):
            for ln_new, ln_old in ((new_block.ln1, old_block.ln1),
                                   (new_block.ln2, old_block.ln2)):
                ln_new.weight.copy_(ln_old.weight[idx])
                ln_new.bias.copy_(ln_old.bias[idx])
            # q, k, v rows carry the same channel identity as the hidden
            # dim; slicing rows by the kept set repartitions the heads
            # contiguously
            qkv_w = old_block.qkv.weight
            parts_w = [qkv_w[off:off + h][idx][:, idx]
                       for off in (0, h, 2 * h)]
            parts_b = [old_block.qkv.bias[off:off + h][idx]
                       for off in (0, h, 2 * h)]
            new_block.qkv.weight.copy_(torch.cat(parts_w, dim=0))
            new_block.qkv.bias.copy_(torch.cat(parts_b, dim=0))
            new_block.attn_out.weight.copy_(
                old_block.attn_out.weight[idx][:, idx])
            new_block.attn_out.bias.copy_(old_block.attn_out.bias[idx])
            new_block.fc1.weight.copy_(old_block.fc1.weight[:, idx])
            new_block.fc1.bias.copy_(old_block.fc1.bias)
            new_block.fc2.weight.copy_(old_block.fc2.weight[idx])
            new_block.fc2.bias.copy_(old_block.fc2.bias[idx])

    n0, n_after = model.n_params, pruned.n_params
    return PruneResult(model=pruned, method="width", rho_config=rho,
                       rho_realized=(n0 - n_after) / n0, n0=n0,
                       n_after=n_after, scores=scores)


# =====================================================================
# 2:4 semi-structured sparsity
# =====================================================================

def group_mask(weight: torch.Tensor, input_norms: torch.Tensor):
    """Keep 2 of every 4 consecutive input weights per output row.

    Selection score is |w| * norm of that input feature; ties keep the
    lowest indices.
    """
    out_dim, in_dim = weight.shape
    if in_dim % 4 != 0:
        raise PruneError(f"input dimension {in_dim} not divisible by 4")
    scores = weight.abs() * input_norms[None, :]
    grouped = scores.view(out_dim, in_dim // 4, 4)
    # stable argsort on the negated scores keeps the lower index on ties
    order = torch.argsort(-grouped, dim=2, stable=True)
    mask = torch.zeros_like(grouped, dtype=torch.bool)
    mask.scatter_(2, order[:, :, :2], True)
    return mask.view(out_dim, in_dim)


def apply_semi24(model: ToyModel, calib_batches) -> PruneResult:
    """Mask every linear layer to 2:4 sparsity in place."""
    norm_sq: dict[int, torch.Tensor] = {}
    with torch.no_grad():
        for batch in calib_batches:
            _, records = model(batch, record=True)
            for module, x in records["linear_inputs"]:
                flat = x.reshape(-1, x.shape[-1]).to(torch.float64)
                acc = norm_sq.setdefault(
                    id(module), torch.zeros(flat.shape[1],
                                            dtype=torch.float64))
                acc += (flat * flat).sum(dim=0)
    if not norm_sq:
        raise PruneError("calibration recorded no linear inputs")

    n0 = model.n_params
    masks: dict[str, torch.Tensor] = {}
    with torch.no_grad():
        for name, module in model.named_modules():
            if not isinstance(module, torch.nn.Linear):
                continue
            norms = torch.sqrt(norm_sq[id(module)]).to(torch.float32)
            mask = group_mask(module.weight, norms)
            module.weight.mul_(mask)
            masks[f"{name}.weight"] = mask

    n_after = model.n_nonzero
    return PruneResult(model=model, method="semi24", rho_config=0.5,
                       rho_realized=(n0 - n_after) / n0, n0=n0,
                       n_after=n_after,
                       scores=np.zeros(0), masks=masks)


def prune_model(model: ToyModel, corpus: Corpus, config: PruneConfig,
                diagnostics_path: str | None = None) -> PruneResult:
    """Dispatch to the configured method with a calibration set."""
    batches = calibration_batches(corpus, model.config,
                                  config.calib_samples, config.seed)
    if config.method == "depth":
        return prune_depth(model, config.rho, batches)
    if config.method == "width":
        return prune_width(model, config.rho, batches, diagnostics_path)
    return apply_semi24(model, batches)
