"""Small deterministic torch models for tests and demos.

These stand in for pretrained encoders: a text transformer with explicit
query/key/value projections, a convolutional image encoder, and a
cross-attention model consuming both modalities. Weights are seeded, the
tokenizer hashes words through sha256 (never Python's salted hash), and all
forwards run at batch size one, so extraction is bit-reproducible.
"""

from __future__ import annotations

import hashlib

import torch
from torch import nn

VOCAB_SIZE = 257
MAX_TOKENS = 16
IMAGE_SIZE = 16


def tokenize(text: str, max_tokens: int = MAX_TOKENS) -> tuple[torch.Tensor, bool]:
    """Hash words into a fixed vocabulary; returns (ids, truncated)."""
    words = text.split()
    truncated = len(words) > max_tokens
    ids = [
        int.from_bytes(hashlib.sha256(w.lower().encode()).digest()[:4], "little")
        % (VOCAB_SIZE - 1)
        + 1
        for w in words[:max_tokens]
    ]
    ids += [0] * (max_tokens - len(ids))
    return torch.tensor(ids, dtype=torch.long).unsqueeze(0), truncated


class SelfAttention(nn.Module):
    def __init__(self, dim: int, heads: int = 2):
        super().__init__()
        self.heads = heads
        self.q = nn.Linear(dim, dim)
        self.k = nn.Linear(dim, dim)
        self.v = nn.Linear(dim, dim)
        self.out = nn.Linear(dim, dim)

    def forward(self, x, context=None):
        context = x if context is None else context
        b, n, d = x.shape
        m = context.shape[1]
        h = self.heads
        q = self.q(x).reshape(b, n, h, d // h).transpose(1, 2)
        k = self.k(context).reshape(b, m, h, d // h).transpose(1, 2)
        v = self.v(context).reshape(b, m, h, d // h).transpose(1, 2)
        attn = torch.softmax(q @ k.transpose(-2, -1) / (d // h) ** 0.5, dim=-1)
        mixed = (attn @ v).transpose(1, 2).reshape(b, n, d)
        return self.out(mixed)


class Block(nn.Module):
    def __init__(self, dim: int):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim)
        self.attn = SelfAttention(dim)
        self.norm2 = nn.LayerNorm(dim)
        self.fc1 = nn.Linear(dim, dim * 2)
        self.act = nn.GELU()
        self.fc2 = nn.Linear(dim * 2, dim)

    def forward(self, x):
        x = x + self.attn(self.norm1(x))
        return x + self.fc2(self.act(self.fc1(self.norm2(x))))


class ToyTextEncoder(nn.Module):
    """Token embedding + positional embedding + transformer blocks."""

    def __init__(self, dim: int = 16, n_blocks: int = 2):
        super().__init__()
        self.embed = nn.Embedding(VOCAB_SIZE, dim)
        self.pos = nn.Embedding(MAX_TOKENS, dim)
        self.blocks = nn.ModuleList(Block(dim) for _ in range(n_blocks))
        self.norm = nn.LayerNorm(dim)

    def forward(self, tokens):
        x = self.embed(tokens) + self.pos(torch.arange(tokens.shape[1]).unsqueeze(0))
        for block in self.blocks:
            x = block(x)
        return self.norm(x).mean(dim=1)


class ToyImageEncoder(nn.Module):
    def __init__(self, dim: int = 16):
        super().__init__()
        self.conv1 = nn.Conv2d(1, 4, 3, stride=2, padding=1)
        self.act1 = nn.ReLU()
        self.conv2 = nn.Conv2d(4, 8, 3, stride=2, padding=1)
        self.act2 = nn.ReLU()
        self.head = nn.Linear(8 * (IMAGE_SIZE // 4) ** 2, dim)

    def forward(self, image):
        x = self.act2(self.conv2(self.act1(self.conv1(image))))
        return self.head(x.flatten(1))


class ToyCrossAttention(nn.Module):
    """Text tokens attend over image patches: an architecturally multimodal toy."""

    def __init__(self, dim: int = 16):
        super().__init__()
        self.embed = nn.Embedding(VOCAB_SIZE, dim)
        self.patch = nn.Conv2d(1, dim, 4, stride=4)
        self.cross = SelfAttention(dim)
        self.norm = nn.LayerNorm(dim)
        self.fc = nn.Linear(dim, dim)

    def forward(self, tokens, image):
        text = self.embed(tokens)
        patches = self.patch(image).flatten(2).transpose(1, 2)
        fused = self.cross(text, context=patches)
        return self.fc(self.norm(fused).mean(dim=1))


class SingleLinear(nn.Module):
    """Smallest possible model: exactly one tensor-producing module."""

    def __init__(self, dim_in: int = 8, dim_out: int = 4):
        super().__init__()
        self.proj = nn.Linear(dim_in, dim_out)

    def forward(self, x):
        return self.proj(x)


def seeded(module_cls, seed: int, **kwargs) -> nn.Module:
    """Instantiate a toy model with seeded random weights, in eval mode."""
    torch.manual_seed(seed)
    model = module_cls(**kwargs)
    model.eval()
    return model
