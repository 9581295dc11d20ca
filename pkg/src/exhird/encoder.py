"""Stacked bidirectional GRU encoder producing per-token memory states."""

from __future__ import annotations

from dataclasses import dataclass

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .errors import EmptyDocumentError
from .nn import GRUCell, ParamSet
from .text import Document


@dataclass
class EncodedDocument:
    """Per-token memory bank plus the boundary states of the top layer.

    memory row k is [forward_k ; backward_k]; forward_last / backward_first
    come from the same top layer and initialize the phrase-level decoder.
    """

    memory: Tensor          # (l_x, d)
    forward_last: Tensor    # (d/2,)
    backward_first: Tensor  # (d/2,)
    doc: Document


class BiGRUEncoder:
    def __init__(self, params: ParamSet, embedding: Parameter,
                 embed_dim: int, hidden_dim: int, layers: int = 2):
        assert hidden_dim % 2 == 0, "encoder hidden size must be even"
        self.embedding = embedding
        self.hidden_dim = hidden_dim
        half = hidden_dim // 2
        self.cells = []
        for layer in range(layers):
            in_size = embed_dim if layer == 0 else hidden_dim
            self.cells.append(
                (
                    GRUCell(params, f"encoder.l{layer}.fwd", in_size, half),
                    GRUCell(params, f"encoder.l{layer}.bwd", in_size, half),
                )
            )

    def encode(self, doc: Document) -> EncodedDocument:
        if len(doc.tokens) == 0:
            raise EmptyDocumentError("cannot encode an empty document")
        dtype = self.embedding.data.dtype
        half = self.hidden_dim // 2
        inputs = [ad.row(self.embedding, tid) for tid in doc.token_ids]
        forward_states: list[Tensor] = []
        backward_states: list[Tensor] = []
        for fwd_cell, bwd_cell in self.cells:
            h = ad.zeros(half, dtype=dtype)
            forward_states = []
            for x in inputs:
                h = fwd_cell(x, h)
                forward_states.append(h)
            h = ad.zeros(half, dtype=dtype)
            backward_states = []
            for x in reversed(inputs):
                h = bwd_cell(x, h)
                backward_states.append(h)
            backward_states.reverse()
            inputs = [
                ad.concat([f, b])
                for f, b in zip(forward_states, backward_states)
            ]
        return EncodedDocument(
            memory=ad.stack_rows(inputs),
            forward_last=forward_states[-1],
            backward_first=backward_states[0],
            doc=doc,
        )


def initial_pd_state(enc: EncodedDocument) -> Tensor:
    """Document representation seeding the phrase-level decoder:
    the forward state at the last position next to the backward state at
    the first position."""
    return ad.concat([enc.forward_last, enc.backward_first])
