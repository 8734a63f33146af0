"""Tokenization, part-of-speech tagging, synonym lookup, and token edit distance.

Tagging is a plain lexicon lookup with a priority-ordered tag list per word.
Unknown words default to NOUN, which keeps them mutable during search.
All types here are immutable and all functions are pure.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping

from .errors import EmptyUtteranceError, LexiconFormatError


class PosTag(str, Enum):
    NOUN = "NOUN"
    VERB = "VERB"
    ADJ = "ADJ"
    ADV = "ADV"
    OTHER = "OTHER"


#: Content-word tags: the only positions the search is allowed to mutate.
NVAA_TAGS = frozenset({PosTag.NOUN, PosTag.VERB, PosTag.ADJ, PosTag.ADV})

_STRIP_CHARS = string.punctuation + "‘’“”–—…"


@dataclass(frozen=True)
class Token:
    """One lowercase word plus its part-of-speech tag."""

    surface: str
    pos: PosTag

    def __post_init__(self) -> None:
        if not self.surface or any(c.isspace() for c in self.surface):
            raise ValueError(f"bad token surface: {self.surface!r}")
        if not isinstance(self.pos, PosTag):
            raise ValueError(f"bad pos tag: {self.pos!r}")

    @property
    def is_nvaa(self) -> bool:
        return self.pos is not PosTag.OTHER


@dataclass(frozen=True)
class Utterance:
    """An ordered token sequence plus the raw string it came from.

    ``" ".join(surfaces)`` round-trips the normalized form of ``raw``;
    utterances produced by substitution use that joined form as ``raw``.
    """

    tokens: tuple[Token, ...]
    raw: str

    def __post_init__(self) -> None:
        if not self.tokens:
            raise ValueError("utterance must contain at least one token")

    @property
    def text(self) -> str:
        return " ".join(t.surface for t in self.tokens)

    @property
    def surfaces(self) -> tuple[str, ...]:
        return tuple(t.surface for t in self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)

    def with_token(self, position: int, token: Token) -> "Utterance":
        """Return a copy with ``tokens[position]`` replaced."""
        if not 0 <= position < len(self.tokens):
            raise IndexError(f"position {position} out of range")
        tokens = self.tokens[:position] + (token,) + self.tokens[position + 1 :]
        return Utterance(tokens=tokens, raw=" ".join(t.surface for t in tokens))


class PosLexicon:
    """Word -> priority-ordered part-of-speech tags."""

    def __init__(self, entries: Mapping[str, Iterable[PosTag]]):
        cleaned: dict[str, tuple[PosTag, ...]] = {}
        for word, tags in entries.items():
            tags = tuple(tags)
            if not tags:
                raise ValueError(f"empty tag list for {word!r}")
            if len(set(tags)) != len(tags):
                raise ValueError(f"duplicate tags for {word!r}")
            cleaned[word.lower()] = tags
        self.entries = cleaned

    def tags_for(self, word: str) -> tuple[PosTag, ...]:
        return self.entries.get(word, ())

    def primary_tag(self, word: str) -> PosTag:
        """First listed tag, or NOUN for words the lexicon does not know."""
        tags = self.entries.get(word)
        return tags[0] if tags else PosTag.NOUN

    def __len__(self) -> int:
        return len(self.entries)

    @classmethod
    def load(cls, path: str) -> "PosLexicon":
        """Read a TSV lexicon: ``word<TAB>TAG1,TAG2,...`` with ``#`` comments."""
        entries: dict[str, tuple[PosTag, ...]] = {}
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line.strip() or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise LexiconFormatError(path, line_no, "expected 2 tab-separated fields")
                word, tag_field = parts[0].strip().lower(), parts[1].strip()
                if not word or any(c.isspace() for c in word):
                    raise LexiconFormatError(path, line_no, f"bad word field {parts[0]!r}")
                if word in entries:
                    raise LexiconFormatError(path, line_no, f"duplicate entry for {word!r}")
                tags = []
                for name in tag_field.split(","):
                    name = name.strip().upper()
                    try:
                        tag = PosTag(name)
                    except ValueError:
                        raise LexiconFormatError(path, line_no, f"unknown tag {name!r}") from None
                    if tag in tags:
                        raise LexiconFormatError(path, line_no, f"duplicate tag {name!r}")
                    tags.append(tag)
                if not tags:
                    raise LexiconFormatError(path, line_no, "no tags listed")
                entries[word] = tuple(tags)
        return cls(entries)


class SynonymLexicon:
    """(word, tag) -> synonym set; an entry never contains its own key word."""

    def __init__(self, entries: Mapping[tuple[str, PosTag], Iterable[str]]):
        cleaned: dict[tuple[str, PosTag], frozenset[str]] = {}
        for (word, tag), syns in entries.items():
            word = word.lower()
            # Invariant enforcement: silently drop a self-referential synonym.
            cleaned[(word, tag)] = frozenset(s.lower() for s in syns) - {word}
        self.entries = cleaned

    def __len__(self) -> int:
        return len(self.entries)

    @classmethod
    def load(cls, path: str) -> "SynonymLexicon":
        """Read a TSV lexicon: ``word<TAB>TAG<TAB>syn1,syn2,...``."""
        entries: dict[tuple[str, PosTag], list[str]] = {}
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line.strip() or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 3:
                    raise LexiconFormatError(path, line_no, "expected 3 tab-separated fields")
                word = parts[0].strip().lower()
                if not word or any(c.isspace() for c in word):
                    raise LexiconFormatError(path, line_no, f"bad word field {parts[0]!r}")
                try:
                    tag = PosTag(parts[1].strip().upper())
                except ValueError:
                    raise LexiconFormatError(
                        path, line_no, f"unknown tag {parts[1]!r}"
                    ) from None
                if (word, tag) in entries:
                    raise LexiconFormatError(path, line_no, f"duplicate entry for {word!r}/{tag.value}")
                syns = []
                for syn in parts[2].split(","):
                    syn = syn.strip().lower()
                    if not syn:
                        continue
                    if any(c.isspace() for c in syn):
                        raise LexiconFormatError(path, line_no, f"multi-word synonym {syn!r}")
                    syns.append(syn)
                entries[(word, tag)] = syns
        return cls(entries)


def tokenize(raw: str, lexicon: PosLexicon) -> Utterance:
    """Normalize ``raw`` into a tagged utterance.

    Lowercases, splits on whitespace, strips leading/trailing punctuation per
    token, and drops tokens that end up empty. Each surviving token is tagged
    with the first tag listed in the lexicon, or NOUN when unknown.

    Raises:
        EmptyUtteranceError: if no word tokens remain.
    """
    tokens = []
    for chunk in raw.lower().split():
        word = chunk.strip(_STRIP_CHARS)
        if not word:
            continue
        tokens.append(Token(surface=word, pos=lexicon.primary_tag(word)))
    if not tokens:
        raise EmptyUtteranceError(f"no word tokens in {raw!r}")
    return Utterance(tokens=tuple(tokens), raw=raw)


def nvaa_positions(u: Utterance) -> list[int]:
    """Indices of content-word (noun/verb/adjective/adverb) tokens, ascending."""
    return [i for i, t in enumerate(u.tokens) if t.is_nvaa]


def token_levenshtein(a: Utterance, b: Utterance) -> float:
    """Normalized edit distance between two token sequences.

    Counts insertions, deletions, and substitutions over token surfaces
    (tags are ignored) and divides by the longer length, giving a value
    in [0, 1].
    """
    sa, sb = a.surfaces, b.surfaces
    if sa == sb:
        return 0.0
    prev = list(range(len(sb) + 1))
    for i, wa in enumerate(sa, start=1):
        cur = [i] + [0] * len(sb)
        for j, wb in enumerate(sb, start=1):
            cost = 0 if wa == wb else 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
        prev = cur
    return prev[-1] / max(len(sa), len(sb))


def synonyms_of(word: str, pos: PosTag, lex: SynonymLexicon) -> frozenset[str]:
    """Synonym set for (word, pos), empty when the lexicon has no entry."""
    return lex.entries.get((word.lower(), pos), frozenset())
