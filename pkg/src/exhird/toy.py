"""Locate the bundled toy corpus (64 train / 16 valid / 16 test docs)."""

from pathlib import Path

from .errors import DataError

_SPLITS = ("train", "valid", "test")


def toy_path(split: str) -> Path:
    if split not in _SPLITS:
        raise DataError(f"unknown toy split {split!r}; expected one of {_SPLITS}")
    return Path(__file__).parent / "data" / "toy" / f"{split}.jsonl"
