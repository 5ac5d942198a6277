"""Tiny decoder-only transformer, sized for CPU experiments.

The forward pass can record the tensors the pruning criteria need: each
block's input/output hidden states, every layer-norm output, and the
input of every linear layer.  Recording returns plain tensors instead of
relying on hook machinery so the pruning code stays easy to follow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import nn

from .errors import ToyLabError


@dataclass(frozen=True)
class ToyModelConfig:
    layers: int = 4
    hidden: int = 96
    heads: int = 4
    vocab: int = 512
    context: int = 128
    # width pruning narrows hidden but leaves the mlp inner width alone,
    # so the inner width is independent of hidden (default 4x)
    ffn_inner: int | None = None

    def __post_init__(self):
        if self.layers < 1 or self.hidden < 8 or self.heads < 1:
            raise ToyLabError("layers >= 1, hidden >= 8, heads >= 1 required")
        if self.hidden % self.heads != 0:
            raise ToyLabError(
                f"hidden {self.hidden} not divisible by heads {self.heads}")
        if self.vocab < 2 or self.context < 2:
            raise ToyLabError("vocab and context must be >= 2")
        if self.ffn_inner is None:
            object.__setattr__(self, "ffn_inner", 4 * self.hidden)
        elif self.ffn_inner < 1:
            raise ToyLabError("ffn_inner must be >= 1")


class Block(nn.Module):
    """Pre-norm attention + MLP with residual connections."""

    def __init__(self, config: ToyModelConfig):
        super().__init__()
        h = config.hidden
        self.heads = config.heads
        self.ln1 = nn.LayerNorm(h)
        self.qkv = nn.Linear(h, 3 * h)
        self.attn_out = nn.Linear(h, h)
        self.ln2 = nn.LayerNorm(h)
        self.fc1 = nn.Linear(h, config.ffn_inner)
        self.fc2 = nn.Linear(config.ffn_inner, h)

    def forward(self, x, records=None):
        normed = self.ln1(x)
        if records is not None:
            records["ln_outputs"].append(normed)
            records["linear_inputs"].append((self.qkv, normed))
        b, t, h = normed.shape
        head_dim = h // self.heads
        q, k, v = self.qkv(normed).split(h, dim=2)
        q = q.view(b, t, self.heads, head_dim).transpose(1, 2)
        k = k.view(b, t, self.heads, head_dim).transpose(1, 2)
        v = v.view(b, t, self.heads, head_dim).transpose(1, 2)
        att = (q @ k.transpose(-2, -1)) / math.sqrt(head_dim)
        causal = torch.triu(torch.ones(t, t, dtype=torch.bool,
                                       device=x.device), diagonal=1)
        att = att.masked_fill(causal, float("-inf"))
        att = torch.softmax(att, dim=-1)
        y = (att @ v).transpose(1, 2).contiguous().view(b, t, h)
        if records is not None:
            records["linear_inputs"].append((self.attn_out, y))
        x = x + self.attn_out(y)

        normed = self.ln2(x)
        if records is not None:
            records["ln_outputs"].append(normed)
            records["linear_inputs"].append((self.fc1, normed))
        inner = torch.nn.functional.gelu(self.fc1(normed))
        if records is not None:
            records["linear_inputs"].append((self.fc2, inner))
        x = x + self.fc2(inner)
        return x


class ToyModel(nn.Module):

    def __init__(self, config: ToyModelConfig):
        super().__init__()
        self.config = config
        self.tok_emb = nn.Embedding(config.vocab, config.hidden)
        self.pos_emb = nn.Embedding(config.context, config.hidden)
        self.blocks = nn.ModuleList(Block(config)
                                    for _ in range(config.layers))
        self.ln_f = nn.LayerNorm(config.hidden)
        self.head = nn.Linear(config.hidden, config.vocab)

    @property
    def n_params(self) -> int:
        return sum(p.numel() for p in self.parameters())

    @property
    def n_nonzero(self) -> int:
        return sum(int(torch.count_nonzero(p)) for p in self.parameters())

    def forward(self, tokens, record=False):
        """Logits of shape (batch, time, vocab); with record=True also a
        dict holding block_io pairs, ln_outputs, and (module, input)
        pairs for every linear layer."""
        b, t = tokens.shape
        if t > self.config.context:
            raise ToyLabError(f"sequence length {t} exceeds context "
                              f"{self.config.context}")
        records = ({"ln_outputs": [], "linear_inputs": [], "block_io": []}
                   if record else None)
        positions = torch.arange(t, device=tokens.device)
        x = self.tok_emb(tokens) + self.pos_emb(positions)[None, :, :]
        for block in self.blocks:
            x_in = x
            x = block(x, records)
            if records is not None:
                records["block_io"].append((x_in, x))
        x = self.ln_f(x)
        if records is not None:
            records["ln_outputs"].append(x)
            records["linear_inputs"].append((self.head, x))
        logits = self.head(x)
        if record:
            return logits, records
        return logits


def language_model_loss(model: ToyModel, tokens: torch.Tensor) -> torch.Tensor:
    """Next-token cross entropy over a (batch, time) token tensor."""
    logits = model(tokens[:, :-1])
    targets = tokens[:, 1:]
    return torch.nn.functional.cross_entropy(
        logits.reshape(-1, logits.shape[-1]), targets.reshape(-1))


def build_model(config: ToyModelConfig, seed: int) -> ToyModel:
    torch.manual_seed(seed)
    return ToyModel(config)
