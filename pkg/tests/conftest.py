"""Shared helpers: synthetic banks, free ports, random knowledge builders."""

from __future__ import annotations

import random
import socket
from fractions import Fraction

import pytest

from aeqarm.discretizer import AMINO_ACIDS
from aeqarm.knowledge import LocalKnowledge
from aeqarm.miner import FrequentItemsetLevels
from aeqarm.protein_bank import ProteinRecord
from aeqarm.rulegen import AssociationRule

# Rarity skew comparable to real protein composition: cysteine/tryptophan
# scarce, a few mid-rare residues, the rest uniform. Low-count residues land
# in the first partitions at every site, which is what makes cross-site
# frequent itemsets (and hence globally strong rules) appear.
_WEIGHTS = [0.12 if c in "CW" else (0.35 if c in "HMQY" else 1.0) for c in AMINO_ACIDS]


def synth_bank(
    n: int, seed: int, min_len: int = 30, max_len: int = 440
) -> list[ProteinRecord]:
    rng = random.Random(seed)
    records = []
    for i in range(n):
        length = rng.randint(min_len, max_len)
        seq = "".join(rng.choices(AMINO_ACIDS, weights=_WEIGHTS, k=length))
        records.append(ProteinRecord(f"r{i:05d}", f"r{i:05d} synthetic", seq))
    return records


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


def random_local_knowledge(rng: random.Random, site: str) -> LocalKnowledge:
    """A small, internally consistent local knowledge base."""
    d = rng.randint(50, 200)
    singles = sorted(rng.sample(range(1, 25), rng.randint(3, 8)))
    levels = {1: [((i,), rng.randint(10, d)) for i in singles]}
    n_pairs = rng.randint(0, 6)
    pairs = sorted({tuple(sorted(rng.sample(singles, 2))) for _ in range(n_pairs)})
    if pairs:
        levels[2] = [(p, rng.randint(5, d // 2)) for p in pairs]
    rules = []
    for pair, count in levels.get(2, []):
        if rng.random() < 0.8:
            a, b = pair
            rules.append(
                AssociationRule(
                    antecedent=(a,),
                    consequent=(b,),
                    support=Fraction(count, d),
                    confidence=Fraction(rng.randint(count, d), d),
                    site=site,
                )
            )
    fis = FrequentItemsetLevels(levels=levels, d=d)
    return LocalKnowledge(site=site, fis=fis, rules=rules, d=d)


@pytest.fixture
def rng() -> random.Random:
    return random.Random(0xAE0A)
