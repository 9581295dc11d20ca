#!/usr/bin/env python3
"""Regenerate the bundled toy corpus (64 train / 16 valid / 16 test docs).

Documents are templated scientific-abstract miniatures whose gold
keyphrases are mostly present verbatim, plus one absent keyphrase tied to
the document's domain. Deterministic given the seed; the committed JSONL
files were produced by exactly this script.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from exhird.text import RawSample, save_corpus  # noqa: E402

MODIFIERS = [
    "spectral", "sparse", "robust", "latent", "temporal", "causal",
    "adaptive", "convex", "bayesian", "hierarchical", "stochastic",
    "recursive", "distributed", "incremental", "variational", "geometric",
]

HEADS = [
    "clustering", "regression", "inference", "optimization", "sampling",
    "estimation", "routing", "coding", "embedding", "attention",
    "segmentation", "ranking", "hashing", "matching", "pruning", "decoding",
]

DOMAINS = [
    ("sensor networks", "wireless monitoring"),
    ("image retrieval", "visual search"),
    ("speech recognition", "voice interfaces"),
    ("protein folding", "molecular biology"),
    ("traffic forecasting", "urban mobility"),
    ("fraud detection", "risk analytics"),
    ("text summarization", "document understanding"),
    ("recommender systems", "user modeling"),
]

ABSENT_POOL = [
    "machine learning", "data mining", "signal processing",
    "pattern analysis", "knowledge discovery", "information retrieval",
    "statistical modeling", "feature engineering",
]

# the main phrase recurs, as it does in real abstracts; imperfectly
# trained decoders are drawn back to it at several phrase steps
TEMPLATES = [
    ("{p1} for {domain}",
     "we study {p1} and {p2} for {domain} . our {p1} method is simple "
     "and fast . experiments show {p1} helps ."),
    ("improving {domain} with {p1}",
     "this paper proposes {p1} combined with {p2} . we apply {p1} to "
     "{domain} . results show {p1} outperforms baselines ."),
    ("{p1} and {p2}",
     "we present {p1} and {p2} applied to {domain} . the {p1} component "
     "drives accuracy . we analyse why {p1} works ."),
]


def make_samples(rng: np.random.Generator, count: int) -> list[RawSample]:
    samples = []
    seen = set()
    while len(samples) < count:
        mi, mj = rng.choice(len(MODIFIERS), size=2, replace=False)
        hi, hj = rng.choice(len(HEADS), size=2, replace=False)
        d = int(rng.integers(len(DOMAINS)))
        t = int(rng.integers(len(TEMPLATES)))
        key = (mi, hi, mj, hj, d, t)
        if key in seen:
            continue
        seen.add(key)
        p1 = f"{MODIFIERS[mi]} {HEADS[hi]}"
        p2 = f"{MODIFIERS[mj]} {HEADS[hj]}"
        domain, _alias = DOMAINS[d]
        absent = ABSENT_POOL[d % len(ABSENT_POOL)]
        title, abstract = TEMPLATES[t]
        samples.append(
            RawSample(
                title=title.format(p1=p1, p2=p2, domain=domain),
                abstract=abstract.format(p1=p1, p2=p2, domain=domain),
                keyphrases=(p1, p2, domain, absent),
            )
        )
    return samples


def main() -> None:
    rng = np.random.default_rng(20240817)
    out_dir = Path(__file__).resolve().parents[1] / "src" / "exhird" / "data" / "toy"
    out_dir.mkdir(parents=True, exist_ok=True)
    samples = make_samples(rng, 96)
    save_corpus(samples[:64], out_dir / "train.jsonl")
    save_corpus(samples[64:80], out_dir / "valid.jsonl")
    save_corpus(samples[80:96], out_dir / "test.jsonl")
    print(f"wrote 64/16/16 samples to {out_dir}")


if __name__ == "__main__":
    main()
