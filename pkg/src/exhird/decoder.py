"""Hierarchical (phrase/word) and sequential decoders with copy mechanism.

The phrase-level recurrence consumes the attentional vector of the word
step that closed the previous phrase. Word-level attention scores are
rescaled by the governing phrase-level attention and renormalized, and the
output distribution mixes a vocabulary softmax with the rescaled copy
scores over source words through a learned gate.

Greedy decoding is a small state machine over a session object so that the
termination/masking logic can be exercised with scripted distributions in
tests as well as with real models.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .encoder import EncodedDocument, initial_pd_state
from .exclusion import ExclusionWindow, exclusive_search_mask, window_push
from .nn import GRUCell, ParamSet
from .text import Document, Vocabulary


@dataclass
class AttentionRecord:
    scores: Tensor       # raw bilinear scores over source positions
    phrase_weights: Tensor | None  # governing phrase-level attention (None in sequential mode)
    word_weights: Tensor           # softmax of scores
    rescaled: Tensor               # product-renormalized weights (== word_weights when no phrase level)
    context: Tensor                # attention-weighted memory summary
    attentional: Tensor            # tanh(W [hidden; context])


@dataclass
class OutputDistribution:
    """Mixture distribution over vocabulary + source words."""

    merged: Tensor       # probabilities over V ∪ X
    gate: Tensor         # copy gate in (0, 1)
    vocab_probs: Tensor  # over V
    copy_probs: Tensor   # over the doc's distinct words X

    @property
    def probs(self) -> np.ndarray:
        return self.merged.data


@dataclass
class DecodeLimits:
    max_phrases: int = 20
    max_words_per_phrase: int = 10
    max_tokens: int = 120          # sequential-mode total token cap
    min_phrases: int = 1
    min_words_per_phrase: int = 1  # separator masked until this many words
    mask_words_at_start: bool = True   # j=0 restricted to control tokens / eos
    mask_controls_at_words: bool = True  # j>=1: control tokens and eos banned
    mask_unk: bool = True


@dataclass
class DecodedPhrase:
    words: list[str]
    kind: str  # "present" | "absent"


@dataclass
class DecodeResult:
    phrases: list[DecodedPhrase]
    exclusion_fallbacks: int = 0


@dataclass
class StepRecord:
    """One teacher-forced word-decoder step."""

    phrase_index: int   # 1-based phrase slot (terminator gets the last slot)
    word_index: int     # j; 0 emits the control token
    dist: OutputDistribution
    target_merged_id: int


def rescale_attention(word_weights: Tensor, phrase_weights: Tensor) -> Tensor:
    """Per-position product of word- and phrase-level attention weights,
    renormalized to a distribution over source positions."""
    product = ad.mul(word_weights, phrase_weights)
    return ad.smul(product, ad.recip(ad.sum_all(product)))


class _DecoderCore:
    """Word-level cell, attention, and copy-augmented output layer."""

    def __init__(self, params: ParamSet, embedding: Parameter,
                 embed_dim: int, hidden_dim: int, vocab_size: int):
        self.embedding = embedding
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        self.vocab_size = vocab_size
        self.word_cell = GRUCell(
            params, "decoder.word", hidden_dim + embed_dim, hidden_dim
        )
        self.word_attn_w = params.create(
            "decoder.attn.word", (hidden_dim, hidden_dim)
        )
        self.combine_w = params.create(
            "decoder.attn.combine", (hidden_dim, 2 * hidden_dim)
        )
        self.out_w = params.create("decoder.out.proj", (vocab_size, hidden_dim))
        self.out_b = params.create(
            "decoder.out.bias", (vocab_size,), init="zeros"
        )
        self.gate_w = params.create("decoder.gate.w", (hidden_dim,))
        self.gate_b = params.create("decoder.gate.b", (), init="zeros")
        self.start_embed = params.create("decoder.start_embed", (embed_dim,))

    @property
    def dtype(self):
        return self.embedding.data.dtype

    def token_embedding(self, vocab_id: int) -> Tensor:
        return ad.row(self.embedding, vocab_id)

    def word_attention(
        self, hidden: Tensor, memory: Tensor, phrase_weights: Tensor | None
    ) -> AttentionRecord:
        scores = ad.matvec(memory, ad.vecmat(hidden, self.word_attn_w))
        word_weights = ad.softmax(scores)
        if phrase_weights is None:
            rescaled = word_weights
        else:
            rescaled = rescale_attention(word_weights, phrase_weights)
        context = ad.vecmat(rescaled, memory)
        attentional = ad.tanh(
            ad.matvec(self.combine_w, ad.concat([hidden, context]))
        )
        return AttentionRecord(
            scores=scores,
            phrase_weights=phrase_weights,
            word_weights=word_weights,
            rescaled=rescaled,
            context=context,
            attentional=attentional,
        )

    def output_distribution(
        self, attentional: Tensor, rescaled: Tensor, doc: Document,
        merged_index: np.ndarray,
    ) -> OutputDistribution:
        vocab_probs = ad.softmax(
            ad.add(ad.matvec(self.out_w, attentional), self.out_b)
        )
        gate = ad.sigmoid(ad.add(ad.dot(self.gate_w, attentional), self.gate_b))
        copy_probs = ad.scatter_add(
            rescaled, np.asarray(doc.copy_ids, dtype=np.intp),
            len(doc.copy_vocab),
        )
        merged = ad.add(
            ad.pad_to(ad.smul(vocab_probs, ad.one_minus(gate)), doc.merged_size),
            ad.scatter_add(
                ad.smul(rescaled, gate), merged_index, doc.merged_size
            ),
        )
        return OutputDistribution(
            merged=merged, gate=gate, vocab_probs=vocab_probs,
            copy_probs=copy_probs,
        )


class HierarchicalDecoder(_DecoderCore):
    def __init__(self, params: ParamSet, embedding: Parameter,
                 embed_dim: int, hidden_dim: int, vocab_size: int):
        super().__init__(params, embedding, embed_dim, hidden_dim, vocab_size)
        self.phrase_cell = GRUCell(
            params, "decoder.phrase", hidden_dim, hidden_dim
        )
        self.phrase_attn_w = params.create(
            "decoder.attn.phrase", (hidden_dim, hidden_dim)
        )

    def phrase_step(self, prev_state: Tensor, prev_attentional: Tensor) -> Tensor:
        return self.phrase_cell(prev_attentional, prev_state)

    def phrase_attention(self, state: Tensor, memory: Tensor) -> Tensor:
        return ad.softmax(
            ad.matvec(memory, ad.vecmat(state, self.phrase_attn_w))
        )

    def word_init(self, phrase_state: Tensor) -> Tensor:
        """State for the word step that emits the control token: the word
        cell seeded with the phrase state, fed [zeros ; start embedding]."""
        start_input = ad.concat(
            [ad.zeros(self.hidden_dim, dtype=self.dtype), self.start_embed]
        )
        return self.word_cell(start_input, phrase_state)

    def word_step(self, prev_word_state: Tensor, prev_attentional: Tensor,
                  prev_token_vocab_id: int) -> Tensor:
        step_input = ad.concat(
            [prev_attentional, self.token_embedding(prev_token_vocab_id)]
        )
        return self.word_cell(step_input, prev_word_state)

    def teacher_forced(
        self, enc: EncodedDocument, program, vocab: Vocabulary
    ) -> list[StepRecord]:
        doc = enc.doc
        merged_index = np.asarray(doc.merged_token_ids, dtype=np.intp)
        phrase_state = initial_pd_state(enc)
        attn_end = ad.zeros(self.hidden_dim, dtype=self.dtype)
        records: list[StepRecord] = []
        slots = [(p, False) for p in program.phrases] + [(None, True)]
        for i, (phrase, is_terminator) in enumerate(slots, start=1):
            phrase_state = self.phrase_step(phrase_state, attn_end)
            beta = self.phrase_attention(phrase_state, enc.memory)
            word_state = self.word_init(phrase_state)
            rec = self.word_attention(word_state, enc.memory, beta)
            dist = self.output_distribution(
                rec.attentional, rec.rescaled, doc, merged_index
            )
            if is_terminator:
                records.append(StepRecord(i, 0, dist, vocab.eos_id))
                break
            targets = (
                [vocab.word_to_id[phrase.control_token]]
                + phrase.copy_word_ids
                + [vocab.sep_id]
            )
            inputs = [vocab.word_to_id[phrase.control_token]] + phrase.word_ids
            records.append(StepRecord(i, 0, dist, targets[0]))
            for j in range(1, len(targets)):
                word_state = self.word_step(
                    word_state, rec.attentional, inputs[j - 1]
                )
                rec = self.word_attention(word_state, enc.memory, beta)
                dist = self.output_distribution(
                    rec.attentional, rec.rescaled, doc, merged_index
                )
                records.append(StepRecord(i, j, dist, targets[j]))
            attn_end = rec.attentional
        return records


class SequentialDecoder(_DecoderCore):
    """Single-level decoder generating the whole flattened program."""

    def teacher_forced(
        self, enc: EncodedDocument, program, vocab: Vocabulary
    ) -> list[StepRecord]:
        doc = enc.doc
        merged_index = np.asarray(doc.merged_token_ids, dtype=np.intp)
        state = initial_pd_state(enc)
        prev_attn = ad.zeros(self.hidden_dim, dtype=self.dtype)
        records: list[StepRecord] = []
        steps: list[tuple[int, int, int, int | None]] = []
        prev_input: int | None = None
        for i, phrase in enumerate(program.phrases, start=1):
            targets = (
                [vocab.word_to_id[phrase.control_token]]
                + phrase.copy_word_ids
                + [vocab.sep_id]
            )
            inputs = (
                [vocab.word_to_id[phrase.control_token]]
                + phrase.word_ids
                + [vocab.sep_id]
            )
            for j, target in enumerate(targets):
                steps.append((i, j, target, prev_input))
                prev_input = inputs[j]
        steps.append((len(program.phrases) + 1, 0, vocab.eos_id, prev_input))
        for i, j, target, prev in steps:
            if prev is None:
                step_input = ad.concat(
                    [ad.zeros(self.hidden_dim, dtype=self.dtype),
                     self.start_embed]
                )
            else:
                step_input = ad.concat(
                    [prev_attn, self.token_embedding(prev)]
                )
            state = self.word_cell(step_input, state)
            rec = self.word_attention(state, enc.memory, None)
            dist = self.output_distribution(
                rec.attentional, rec.rescaled, doc, merged_index
            )
            prev_attn = rec.attentional
            records.append(StepRecord(i, j, dist, target))
        return records


# ---------------------------------------------------------------------------
# greedy decoding
# ---------------------------------------------------------------------------

class HierarchicalSession:
    """Stateful wrapper advancing one phrase/word decode over a document."""

    def __init__(self, decoder: HierarchicalDecoder, enc: EncodedDocument,
                 vocab: Vocabulary):
        self.decoder = decoder
        self.enc = enc
        self.vocab = vocab
        self.merged_index = np.asarray(enc.doc.merged_token_ids, dtype=np.intp)
        self._phrase_state = initial_pd_state(enc)
        self._attn_end = ad.zeros(decoder.hidden_dim, dtype=decoder.dtype)
        self._beta: Tensor | None = None
        self._word_state: Tensor | None = None
        self._prev_attn: Tensor | None = None

    def _embed_id(self, merged_id: int) -> int:
        if merged_id < self.decoder.vocab_size:
            return merged_id
        return self.vocab.unk_id

    def _distribution(self, rec: AttentionRecord) -> OutputDistribution:
        self._prev_attn = rec.attentional
        return self.decoder.output_distribution(
            rec.attentional, rec.rescaled, self.enc.doc, self.merged_index
        )

    def begin_phrase(self) -> None:
        self._phrase_state = self.decoder.phrase_step(
            self._phrase_state, self._attn_end
        )
        self._beta = self.decoder.phrase_attention(
            self._phrase_state, self.enc.memory
        )

    def start_distribution(self) -> OutputDistribution:
        self._word_state = self.decoder.word_init(self._phrase_state)
        rec = self.decoder.word_attention(
            self._word_state, self.enc.memory, self._beta
        )
        return self._distribution(rec)

    def step_distribution(self, prev_merged_id: int) -> OutputDistribution:
        self._word_state = self.decoder.word_step(
            self._word_state, self._prev_attn, self._embed_id(prev_merged_id)
        )
        rec = self.decoder.word_attention(
            self._word_state, self.enc.memory, self._beta
        )
        return self._distribution(rec)

    def end_phrase(self) -> None:
        self._attn_end = self._prev_attn


class SequentialSession:
    def __init__(self, decoder: SequentialDecoder, enc: EncodedDocument,
                 vocab: Vocabulary):
        self.decoder = decoder
        self.enc = enc
        self.vocab = vocab
        self.merged_index = np.asarray(enc.doc.merged_token_ids, dtype=np.intp)
        self._state = initial_pd_state(enc)
        self._prev_attn: Tensor | None = None

    def _embed_id(self, merged_id: int) -> int:
        if merged_id < self.decoder.vocab_size:
            return merged_id
        return self.vocab.unk_id

    def step_distribution(self, prev_merged_id: int | None) -> OutputDistribution:
        if prev_merged_id is None:
            step_input = ad.concat(
                [ad.zeros(self.decoder.hidden_dim, dtype=self.decoder.dtype),
                 self.decoder.start_embed]
            )
        else:
            step_input = ad.concat(
                [self._prev_attn,
                 self.decoder.token_embedding(self._embed_id(prev_merged_id))]
            )
        self._state = self.decoder.word_cell(step_input, self._state)
        rec = self.decoder.word_attention(self._state, self.enc.memory, None)
        self._prev_attn = rec.attentional
        return self.decoder.output_distribution(
            rec.attentional, rec.rescaled, self.enc.doc, self.merged_index
        )


def _control_mask(probs: np.ndarray, vocab: Vocabulary, allow_eos: bool,
                  enabled: bool) -> np.ndarray:
    """Restrict a phrase-start distribution to {<p_start>, <a_start>, </s>}."""
    out = np.zeros_like(probs)
    out[vocab.present_start_id] = probs[vocab.present_start_id]
    out[vocab.absent_start_id] = probs[vocab.absent_start_id]
    if allow_eos:
        out[vocab.eos_id] = probs[vocab.eos_id]
    if not enabled:
        out = probs.copy()
        if not allow_eos:
            out[vocab.eos_id] = 0.0
    return out


def _word_mask(probs: np.ndarray, vocab: Vocabulary, limits: DecodeLimits,
               words_so_far: int) -> np.ndarray:
    out = probs.copy()
    out[vocab.pad_id] = 0.0
    if limits.mask_unk:
        out[vocab.unk_id] = 0.0
    if limits.mask_controls_at_words:
        out[vocab.present_start_id] = 0.0
        out[vocab.absent_start_id] = 0.0
        out[vocab.eos_id] = 0.0
    if words_so_far < limits.min_words_per_phrase:
        out[vocab.sep_id] = 0.0
    return out


def _masked(dist: OutputDistribution, probs: np.ndarray) -> OutputDistribution:
    return replace(dist, merged=Tensor(probs, _check=False))


def _argmax(probs: np.ndarray) -> int:
    # ties resolve to the lowest id
    return int(np.argmax(probs))


def _emit_word_token(
    dist: OutputDistribution, vocab: Vocabulary, limits: DecodeLimits,
    window: ExclusionWindow | None, word_index: int, words_so_far: int,
) -> tuple[int, int]:
    """Apply structural + exclusion masks and pick the next word token.

    Returns (token, fallback_count) where fallback_count is 1 when
    exclusion zeroed the whole support and was ignored.
    """
    structural = _masked(
        dist, _word_mask(dist.probs, vocab, limits, words_so_far)
    )
    if float(np.sum(structural.probs)) == 0.0:
        structural = dist  # degenerate script/model: ignore structural masks
    if window is None:
        return _argmax(structural.probs), 0
    excluded = exclusive_search_mask(structural, window, word_index)
    if float(np.sum(excluded.probs)) == 0.0:
        return _argmax(structural.probs), 1
    return _argmax(excluded.probs), 0


def decode_greedy(
    session, vocab: Vocabulary, doc: Document, limits: DecodeLimits,
    window: ExclusionWindow | None = None,
) -> DecodeResult:
    """Greedy hierarchical decode: phrase slots until </s> or the cap."""
    phrases: list[DecodedPhrase] = []
    fallbacks = 0
    for i in range(1, limits.max_phrases + 1):
        session.begin_phrase()
        dist0 = session.start_distribution()
        allow_eos = i > limits.min_phrases
        start_probs = _control_mask(
            dist0.probs, vocab, allow_eos, limits.mask_words_at_start
        )
        token = _argmax(start_probs)
        if token == vocab.eos_id:
            break
        if token == vocab.present_start_id:
            kind, words = "present", []
        elif token == vocab.absent_start_id:
            kind, words = "absent", []
        else:
            # reachable only with mask_words_at_start=False
            kind, words = "absent", [token]
        prev = token
        j = len(words)
        while len(words) < limits.max_words_per_phrase:
            j += 1
            dist = session.step_distribution(prev)
            token, fb = _emit_word_token(
                dist, vocab, limits, window, j, len(words)
            )
            fallbacks += fb
            if token == vocab.sep_id:
                break
            words.append(token)
            prev = token
        session.end_phrase()
        if words:
            phrases.append(
                DecodedPhrase(
                    words=[doc.merged_word(m, vocab) for m in words],
                    kind=kind,
                )
            )
            if window is not None:
                window = window_push(window, words[0])
    return DecodeResult(phrases=phrases, exclusion_fallbacks=fallbacks)


def decode_sequential(
    session, vocab: Vocabulary, doc: Document, limits: DecodeLimits,
    window: ExclusionWindow | None = None,
) -> DecodeResult:
    """Greedy decode of the flattened program with the same splitting and
    exclusion semantics as the hierarchical path."""
    phrases: list[DecodedPhrase] = []
    fallbacks = 0
    emitted = 0
    prev: int | None = None
    slot = 1
    at_start = True
    kind = "absent"
    words: list[int] = []
    j = 0

    def finish_phrase():
        nonlocal window
        if words:
            phrases.append(
                DecodedPhrase(
                    words=[doc.merged_word(m, vocab) for m in words],
                    kind=kind,
                )
            )
            if window is not None:
                window = window_push(window, words[0])

    while emitted < limits.max_tokens and slot <= limits.max_phrases:
        dist = session.step_distribution(prev)
        emitted += 1
        if at_start:
            allow_eos = slot > limits.min_phrases
            probs = _control_mask(
                dist.probs, vocab, allow_eos, limits.mask_words_at_start
            )
            token = _argmax(probs)
            if token == vocab.eos_id:
                break
            words = []
            if token == vocab.present_start_id:
                kind = "present"
            elif token == vocab.absent_start_id:
                kind = "absent"
            else:
                kind = "absent"
                words.append(token)
            prev = token
            j = len(words)
            at_start = False
            continue
        j += 1
        token, fb = _emit_word_token(
            dist, vocab, limits, window, j, len(words)
        )
        fallbacks += fb
        if token == vocab.sep_id:
            finish_phrase()
            slot += 1
            at_start = True
            prev = token
            continue
        words.append(token)
        prev = token
        if len(words) >= limits.max_words_per_phrase:
            # cap reached: close the phrase as if the separator had come
            finish_phrase()
            slot += 1
            at_start = True
            prev = vocab.sep_id
    return DecodeResult(phrases=phrases, exclusion_fallbacks=fallbacks)
