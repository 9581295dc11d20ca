"""Soft and hard exclusion over the first words of recent keyphrases.

Both mechanisms watch a window of the most recent completed keyphrases'
first words (gold ones during teacher-forced training, predicted ones at
inference) and act only on the step that emits the first word of a phrase
(word index 1). The soft mechanism adds -log(1 - p) penalties at training
time; the hard mechanism zeroes windowed first words before the argmax,
without renormalizing.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError


@dataclass(frozen=True)
class ExclusionWindow:
    """Bounded FIFO of first-word merged ids; capacity None means 'all'."""

    capacity: int | None
    first_word_ids: tuple[int, ...] = ()

    def __len__(self) -> int:
        return len(self.first_word_ids)


def window_push(window: ExclusionWindow, first_word_id: int) -> ExclusionWindow:
    ids = window.first_word_ids + (first_word_id,)
    if window.capacity is not None and len(ids) > window.capacity:
        ids = ids[len(ids) - window.capacity:]
    return ExclusionWindow(capacity=window.capacity, first_word_ids=ids)


def exclusive_loss(
    dist, current_target_first_word: int, window: ExclusionWindow,
    word_index: int,
) -> Tensor:
    """Penalty for assigning probability to recent first words.

    Zero unless this is a first-word step with a nonempty window; window
    entries equal to the current target's first word are skipped, and
    repeated entries each contribute their own term.
    """
    dtype = dist.merged.data.dtype
    if word_index != 1 or len(window) == 0:
        return ad.zeros((), dtype=dtype)
    terms = [
        ad.complement_nll(dist.merged, wid)
        for wid in window.first_word_ids
        if wid != current_target_first_word
    ]
    if not terms:
        return ad.zeros((), dtype=dtype)
    if len(terms) == 1:
        return terms[0]
    return ad.add_n(terms)


def exclusive_search_mask(dist, window: ExclusionWindow, word_index: int):
    """Zero the probabilities of windowed first words (no renormalization:
    a plain argmax follows). Returns the distribution unchanged away from
    first-word steps or when the window is empty."""
    if word_index != 1 or len(window) == 0:
        return dist
    probs = dist.merged.data.copy()
    for wid in window.first_word_ids:
        if wid < probs.shape[0]:
            probs[wid] = 0.0
    return replace(dist, merged=Tensor(probs, _check=False))


@dataclass(frozen=True)
class ExclusionConfig:
    mode: str = "none"          # none | soft | hard
    window: int | None = None   # None = "all"

    def __post_init__(self):
        if self.mode not in ("none", "soft", "hard"):
            raise ConfigError(f"unknown exclusion mode: {self.mode!r}")
        if self.window is not None and self.window < 0:
            raise ConfigError("exclusion window must be >= 0 or 'all'")

    def make_window(self) -> ExclusionWindow | None:
        if self.mode == "none":
            return None
        return ExclusionWindow(capacity=self.window)

    @staticmethod
    def parse_window(value) -> int | None:
        if value is None:
            return None
        if isinstance(value, str):
            if value.lower() == "all":
                return None
            if not value.isdigit():
                raise ConfigError(f"window must be an integer or 'all': {value!r}")
            return int(value)
        return int(value)
