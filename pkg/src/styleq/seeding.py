"""Hierarchical seed derivation: one root seed, split by purpose."""

from __future__ import annotations

import hashlib

import torch

# Purposes with dedicated rng streams during training.
TRAIN_STREAMS = ("data", "teacher_noise", "reparam", "dropout", "probes", "coin", "init")


def derive_seed(root: int, purpose: str, index: int = 0) -> int:
    """Stable 63-bit child seed for (root, purpose, index)."""
    h = hashlib.sha256(f"{root}/{purpose}/{index}".encode()).digest()
    return int.from_bytes(h[:8], "little") & ((1 << 63) - 1)


def make_generator(root: int, purpose: str, index: int = 0) -> torch.Generator:
    g = torch.Generator()
    g.manual_seed(derive_seed(root, purpose, index))
    return g


class SeedTree:
    """Named torch.Generator streams derived from a root seed.

    Generator states are checkpointable so training can resume bit-exactly.
    """

    def __init__(self, root: int, purposes: tuple[str, ...] = TRAIN_STREAMS):
        self.root = root
        self.generators = {p: make_generator(root, p) for p in purposes}

    def __getitem__(self, purpose: str) -> torch.Generator:
        return self.generators[purpose]

    def state_dict(self) -> dict:
        return {"root": self.root, "states": {p: g.get_state() for p, g in self.generators.items()}}

    def load_state_dict(self, state: dict) -> None:
        self.root = state["root"]
        for p, s in state["states"].items():
            self.generators[p].set_state(s)
