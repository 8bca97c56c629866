"""Blind multiplicative adversaries.

An adversary multiplies its stochastic gradient element-wise by a vector it
picked before seeing that gradient.  The multiplier here is a pure function
of ``(spec, round, dim)``; nothing in this module ever receives a gradient
except :func:`corrupt`, which only applies an already-chosen multiplier.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ADVERSARY_KINDS = ("none", "invert", "rescale", "sign_randomize", "custom_mask")


@dataclass(frozen=True)
class AdversarySpec:
    kind: str = "none"
    scale: float = 1.0  # rescale factor; must be positive
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ADVERSARY_KINDS:
            raise ValueError(f"unknown adversary kind {self.kind!r}")
        if self.kind == "rescale" and not self.scale > 0:
            raise ValueError(f"rescale factor must be positive, got {self.scale!r}")

    @property
    def honest(self) -> bool:
        return self.kind == "none"

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> "AdversarySpec":
        """``invert``, ``sign_randomize``, ``custom_mask`` or ``rescale:<c>``."""
        kind, _, arg = text.strip().partition(":")
        if kind == "rescale":
            return cls(kind, float(arg) if arg else 1.0, seed)
        if arg:
            raise ValueError(f"adversary {kind!r} takes no argument")
        return cls(kind, seed=seed)

    def __str__(self) -> str:
        return f"rescale:{self.scale!r}" if self.kind == "rescale" else self.kind


def _round_rng(spec: AdversarySpec, round: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([spec.seed, round, ADVERSARY_KINDS.index(spec.kind)]))


def adversary_multiplier(spec: AdversarySpec, round: int, dim: int) -> np.ndarray:
    if spec.kind == "none":
        return np.ones(dim)
    if spec.kind == "invert":
        return -np.ones(dim)
    if spec.kind == "rescale":
        return np.full(dim, float(spec.scale))
    rng = _round_rng(spec, round)
    if spec.kind == "sign_randomize":
        return np.where(rng.random(dim) < 0.5, -1.0, 1.0)
    # custom_mask: random signs with log-uniform magnitudes in [1e-3, 1e3]; never zero.
    signs = np.where(rng.random(dim) < 0.5, -1.0, 1.0)
    return signs * 10.0 ** rng.uniform(-3.0, 3.0, dim)


def corrupt(g_tilde, v_t) -> np.ndarray:
    g_tilde = np.asarray(g_tilde, dtype=np.float64)
    v_t = np.asarray(v_t, dtype=np.float64)
    if g_tilde.shape != v_t.shape:
        raise ValueError(f"gradient shape {g_tilde.shape} does not match multiplier shape {v_t.shape}")
    return v_t * g_tilde
