"""Full model assembly, decoding entry points, and checkpoint round trip."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .decoder import (
    DecodeLimits,
    DecodeResult,
    HierarchicalDecoder,
    HierarchicalSession,
    SequentialDecoder,
    SequentialSession,
    StepRecord,
    decode_greedy,
    decode_sequential,
)
from .encoder import BiGRUEncoder, EncodedDocument
from .errors import ConfigError, DataError
from .exclusion import ExclusionConfig
from .nn import ParamSet
from .text import Document, TargetProgram, Vocabulary

CHECKPOINT_FORMAT_VERSION = 1


@dataclass
class ModelConfig:
    embed_dim: int = 100
    hidden_dim: int = 300
    encoder_layers: int = 2
    decoder: str = "hierarchical"  # hierarchical | sequential
    dtype: str = "float32"

    def __post_init__(self):
        if self.decoder not in ("hierarchical", "sequential"):
            raise ConfigError(f"unknown decoder mode: {self.decoder!r}")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError(f"unsupported dtype: {self.dtype!r}")
        if self.hidden_dim % 2 != 0:
            raise ConfigError("hidden_dim must be even")

    @property
    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64


class KeyphraseModel:
    """Encoder + (hierarchical | sequential) decoder over a shared embedding."""

    def __init__(self, vocab: Vocabulary, config: ModelConfig, seed: int = 0):
        self.vocab = vocab
        self.config = config
        rng = np.random.default_rng(seed)
        self.params = ParamSet(rng, dtype=config.np_dtype)
        self.embedding = self.params.create(
            "embedding", (len(vocab), config.embed_dim)
        )
        self.encoder = BiGRUEncoder(
            self.params, self.embedding, config.embed_dim, config.hidden_dim,
            layers=config.encoder_layers,
        )
        decoder_cls = (
            HierarchicalDecoder if config.decoder == "hierarchical"
            else SequentialDecoder
        )
        self.decoder = decoder_cls(
            self.params, self.embedding, config.embed_dim, config.hidden_dim,
            len(vocab),
        )

    @property
    def is_hierarchical(self) -> bool:
        return self.config.decoder == "hierarchical"

    def encode(self, doc: Document) -> EncodedDocument:
        return self.encoder.encode(doc)

    def teacher_forced(
        self, doc: Document, program: TargetProgram
    ) -> list[StepRecord]:
        enc = self.encode(doc)
        return self.decoder.teacher_forced(enc, program, self.vocab)

    def decode_document(
        self, doc: Document, limits: DecodeLimits | None = None,
        exclusion: ExclusionConfig | None = None,
    ) -> DecodeResult:
        limits = limits or DecodeLimits()
        window = None
        if exclusion is not None and exclusion.mode == "hard":
            window = exclusion.make_window()
        with ad.no_grad():
            enc = self.encode(doc)
            if self.is_hierarchical:
                session = HierarchicalSession(self.decoder, enc, self.vocab)
                return decode_greedy(session, self.vocab, doc, limits, window)
            session = SequentialSession(self.decoder, enc, self.vocab)
            return decode_sequential(session, self.vocab, doc, limits, window)

    # -- checkpointing ------------------------------------------------------

    def save_checkpoint(
        self, path: str | Path, epoch: int = 0,
        best_perplexity: float | None = None,
        extra_config: dict | None = None,
    ) -> None:
        payload = {
            "format_version": CHECKPOINT_FORMAT_VERSION,
            "model": asdict(self.config),
            "vocab_sha256": self.vocab.sha256(),
            "epoch": epoch,
            "best_perplexity": best_perplexity,
            "run_config": extra_config or {},
            "params": {
                name: {
                    "shape": list(arr.shape),
                    "values": [float(v) for v in arr.reshape(-1)],
                }
                for name, arr in self.params.state_arrays().items()
            },
        }
        Path(path).write_text(
            json.dumps(payload, sort_keys=True, separators=(",", ":")),
            encoding="utf-8",
        )

    @classmethod
    def load_checkpoint(
        cls, path: str | Path, vocab: Vocabulary
    ) -> tuple["KeyphraseModel", dict]:
        p = Path(path)
        if not p.exists():
            raise DataError(f"checkpoint not found: {p}")
        try:
            payload = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DataError(f"malformed checkpoint {p}: {exc}") from exc
        if payload.get("format_version") != CHECKPOINT_FORMAT_VERSION:
            raise DataError(
                f"unsupported checkpoint version: {payload.get('format_version')}"
            )
        if payload["vocab_sha256"] != vocab.sha256():
            raise DataError(
                "checkpoint was trained with a different vocabulary"
            )
        config = ModelConfig(**payload["model"])
        model = cls(vocab, config, seed=0)
        arrays = {
            name: np.asarray(entry["values"], dtype=config.np_dtype).reshape(
                entry["shape"]
            )
            for name, entry in payload["params"].items()
        }
        model.params.load_arrays(arrays)
        meta = {
            "epoch": payload.get("epoch", 0),
            "best_perplexity": payload.get("best_perplexity"),
            "run_config": payload.get("run_config", {}),
        }
        return model, meta
