"""Text pipeline: tokenization, vocabulary, documents, and target programs.

Documents are the concatenated title and abstract tokens (title first).
Tokenization lowercases and splits into maximal alphabetic runs, digit runs,
and single punctuation characters; every maximal digit run becomes the
single token "<digit>". Keyphrases go through the identical pipeline.
"""

from __future__ import annotations

import hashlib
import json
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError, DataError, EmptyDocumentError
from .stem import stem_phrase

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
PRESENT_START = "<p_start>"
ABSENT_START = "<a_start>"
PHRASE_SEP = ";"
EOS_TOKEN = "</s>"

# Fixed order: these occupy the first six lines of every vocabulary file.
SPECIAL_TOKENS = (
    PAD_TOKEN, UNK_TOKEN, PRESENT_START, ABSENT_START, PHRASE_SEP, EOS_TOKEN,
)

DIGIT_TOKEN = "<digit>"

_TOKEN_RE = re.compile(r"[a-z]+|[0-9]+|[^0-9a-z\s]")


def tokenize(text: str) -> list[str]:
    """Lowercase and split into word/digit-run/punctuation tokens."""
    tokens = _TOKEN_RE.findall(text.lower())
    return [DIGIT_TOKEN if t[0].isdigit() else t for t in tokens]


@dataclass(frozen=True)
class RawSample:
    title: str
    abstract: str
    keyphrases: tuple[str, ...] = ()


class Vocabulary:
    """Bijective word/id map with the six special tokens at fixed ids."""

    def __init__(self, words: list[str]):
        if tuple(words[: len(SPECIAL_TOKENS)]) != SPECIAL_TOKENS:
            raise ConfigError(
                f"vocabulary must start with the special tokens {SPECIAL_TOKENS}"
            )
        self.id_to_word: list[str] = list(words)
        self.word_to_id: dict[str, int] = {w: i for i, w in enumerate(words)}
        if len(self.word_to_id) != len(self.id_to_word):
            raise ConfigError("vocabulary contains duplicate tokens")

    def __len__(self) -> int:
        return len(self.id_to_word)

    def __contains__(self, word: str) -> bool:
        return word in self.word_to_id

    def id(self, word: str) -> int:
        return self.word_to_id.get(word, self.unk_id)

    def word(self, idx: int) -> str:
        return self.id_to_word[idx]

    @property
    def pad_id(self) -> int:
        return 0

    @property
    def unk_id(self) -> int:
        return 1

    @property
    def present_start_id(self) -> int:
        return 2

    @property
    def absent_start_id(self) -> int:
        return 3

    @property
    def sep_id(self) -> int:
        return 4

    @property
    def eos_id(self) -> int:
        return 5

    def sha256(self) -> str:
        digest = hashlib.sha256("\n".join(self.id_to_word).encode("utf-8"))
        return digest.hexdigest()

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            "\n".join(self.id_to_word) + "\n", encoding="utf-8"
        )

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        p = Path(path)
        if not p.exists():
            raise DataError(f"vocabulary file not found: {p}")
        words = p.read_text(encoding="utf-8").splitlines()
        return cls(words)


@dataclass
class Document:
    """A preprocessed document with copy-extended ids.

    copy_vocab maps each distinct source word to a document-local extended
    id (order of first occurrence); merged ids live in the space V + OOV,
    where source words already in the vocabulary keep their vocabulary id
    and the remaining ones are appended after the vocabulary.
    """

    tokens: list[str]
    token_ids: list[int]
    copy_ids: list[int]
    copy_vocab: dict[str, int]
    ext_to_merged: list[int]
    oov_words: list[str]
    vocab_size: int

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def merged_size(self) -> int:
        return self.vocab_size + len(self.oov_words)

    @property
    def merged_token_ids(self) -> list[int]:
        return [self.ext_to_merged[e] for e in self.copy_ids]

    def merged_id(self, word: str, vocab: Vocabulary) -> int:
        """Merged-space id of an arbitrary word (vocab id, copy id, or unk)."""
        if word in vocab:
            return vocab.word_to_id[word]
        if word in self.copy_vocab:
            return self.ext_to_merged[self.copy_vocab[word]]
        return vocab.unk_id

    def merged_word(self, merged_id: int, vocab: Vocabulary) -> str:
        if merged_id < self.vocab_size:
            return vocab.word(merged_id)
        return self.oov_words[merged_id - self.vocab_size]

    def stemmed_tokens(self) -> list[str]:
        return stem_phrase(self.tokens)


def preprocess(raw: RawSample, vocab: Vocabulary) -> Document:
    """Tokenize title + abstract and assign vocabulary and copy ids."""
    tokens = tokenize(raw.title) + tokenize(raw.abstract)
    if not tokens:
        raise EmptyDocumentError(
            f"document {raw.title!r} is empty after tokenization"
        )
    copy_vocab: dict[str, int] = {}
    copy_ids = []
    for tok in tokens:
        if tok not in copy_vocab:
            copy_vocab[tok] = len(copy_vocab)
        copy_ids.append(copy_vocab[tok])
    oov_words = [w for w in copy_vocab if w not in vocab]
    oov_rank = {w: i for i, w in enumerate(oov_words)}
    ext_to_merged = [
        vocab.word_to_id[w] if w in vocab else len(vocab) + oov_rank[w]
        for w in copy_vocab
    ]
    return Document(
        tokens=tokens,
        token_ids=[vocab.id(t) for t in tokens],
        copy_ids=copy_ids,
        copy_vocab=copy_vocab,
        ext_to_merged=ext_to_merged,
        oov_words=oov_words,
        vocab_size=len(vocab),
    )


def build_vocabulary(corpus: list[RawSample], size: int = 50000) -> Vocabulary:
    """Keep the `size` most frequent tokens (special tokens included in
    `size`); ties broken lexicographically. Keyphrase tokens are counted
    alongside document tokens since the vocabulary is shared with the
    decoder."""
    if not corpus:
        raise DataError("cannot build a vocabulary from an empty corpus")
    if size < len(SPECIAL_TOKENS):
        raise ConfigError(
            f"vocabulary size {size} is smaller than the "
            f"{len(SPECIAL_TOKENS)} special tokens"
        )
    counts: Counter[str] = Counter()
    for raw in corpus:
        counts.update(tokenize(raw.title))
        counts.update(tokenize(raw.abstract))
        for phrase in raw.keyphrases:
            counts.update(tokenize(phrase))
    for special in SPECIAL_TOKENS:
        counts.pop(special, None)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    keep = [w for w, _ in ranked[: size - len(SPECIAL_TOKENS)]]
    return Vocabulary(list(SPECIAL_TOKENS) + keep)


@dataclass
class PhraseTarget:
    kind: str  # "present" | "absent"
    words: list[str]
    word_ids: list[int]
    copy_word_ids: list[int]
    control_token: str
    first_occurrence: int = -1  # document position for present phrases

    @property
    def target_tokens(self) -> list[str]:
        return [self.control_token] + self.words + [PHRASE_SEP]


@dataclass
class TargetProgram:
    """Ordered, control-token-extended training targets for one document."""

    phrases: list[PhraseTarget]
    terminator: str = EOS_TOKEN
    dropped: int = 0

    def token_count(self) -> int:
        """Number of supervised target tokens, terminator included."""
        return sum(len(p.target_tokens) for p in self.phrases) + 1


def find_subsequence(haystack: list[str], needle: list[str]) -> int:
    """Index of the first contiguous occurrence of needle, or -1."""
    if not needle or len(needle) > len(haystack):
        return -1
    first = needle[0]
    for i in range(len(haystack) - len(needle) + 1):
        if haystack[i] == first and haystack[i : i + len(needle)] == needle:
            return i
    return -1


def build_target_program(
    doc: Document, keyphrases: list[str], vocab: Vocabulary
) -> TargetProgram:
    """Preprocess gold keyphrases into the hierarchical target program.

    A keyphrase counts as present when its stemmed word sequence occurs
    contiguously in the stemmed document. Present phrases come first,
    ordered by first occurrence; absent phrases keep their input order.
    """
    stemmed_doc = doc.stemmed_tokens()
    present: list[PhraseTarget] = []
    absent: list[PhraseTarget] = []
    dropped = 0
    for phrase in keyphrases:
        words = tokenize(phrase)
        if not words:
            dropped += 1
            continue
        pos = find_subsequence(stemmed_doc, stem_phrase(words))
        target = PhraseTarget(
            kind="present" if pos >= 0 else "absent",
            words=words,
            word_ids=[vocab.id(w) for w in words],
            copy_word_ids=[doc.merged_id(w, vocab) for w in words],
            control_token=PRESENT_START if pos >= 0 else ABSENT_START,
            first_occurrence=pos,
        )
        (present if pos >= 0 else absent).append(target)
    present.sort(key=lambda t: t.first_occurrence)
    return TargetProgram(phrases=present + absent, dropped=dropped)


def load_corpus(path: str | Path) -> list[RawSample]:
    """Read a JSON-lines corpus: title, abstract, semicolon-joined keyphrases."""
    p = Path(path)
    if not p.exists():
        raise DataError(f"corpus file not found: {p}")
    samples = []
    with open(p, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{p}:{lineno}: invalid JSON ({exc})") from exc
            for key in ("title", "abstract"):
                if key not in obj:
                    raise DataError(f"{p}:{lineno}: missing field {key!r}")
            raw_kps = obj.get("keyphrases", "")
            phrases = tuple(
                kp.strip() for kp in raw_kps.split(";") if kp.strip()
            )
            samples.append(
                RawSample(
                    title=obj["title"], abstract=obj["abstract"],
                    keyphrases=phrases,
                )
            )
    if not samples:
        raise DataError(f"corpus file {p} contains no samples")
    return samples


def save_corpus(samples: list[RawSample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            fh.write(
                json.dumps(
                    {
                        "title": s.title,
                        "abstract": s.abstract,
                        "keyphrases": ";".join(s.keyphrases),
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
