"""Word-replacement sampling: one mutated word per sample, four pool strategies.

Sampling always works against the original utterance: a random content-word
position of the original is chosen, a pool of replacement words is built for
the original word there, and the current genome's token at that position is
overwritten. Genomes therefore stay expressible as substitutions against the
original and never change length.
"""

from __future__ import annotations

import random
import threading
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping

from .errors import (
    EmptyPoolError,
    InsufficientDiversityError,
    NoMutablePositionsError,
    NoProposalsError,
)
from .oracles import PROPOSER_PLACEHOLDER, ProposerOracle, SamplePair
from .text import (
    NVAA_TAGS,
    PosLexicon,
    PosTag,
    SynonymLexicon,
    Token,
    Utterance,
    nvaa_positions,
    synonyms_of,
)

# The paper's prompt asks the proposer for exactly five words.
PROPOSER_K = 5


class StrategyKind(Enum):
    UNAWARE = "unaware"
    WORDTYPE_AWARE = "wordtype_aware"
    WORD_AWARE = "word_aware"
    CONTEXT_AWARE = "context_aware"


class Vocabulary:
    """Content words available as replacements, grouped by primary tag."""

    def __init__(self, nvaa_words: Mapping[PosTag, Iterable[str]]):
        grouped: dict[PosTag, frozenset[str]] = {}
        for tag, words in nvaa_words.items():
            if tag not in NVAA_TAGS:
                raise ValueError(f"vocabulary tag must be NVAA, got {tag!r}")
            grouped[tag] = frozenset(w.lower() for w in words)
        self._by_tag = grouped
        self._all = frozenset().union(*grouped.values()) if grouped else frozenset()

    def words_for(self, tag: PosTag) -> frozenset[str]:
        return self._by_tag.get(tag, frozenset())

    def all_words(self) -> frozenset[str]:
        return self._all

    def __len__(self) -> int:
        return len(self._all)

    @classmethod
    def from_pos_lexicon(cls, lexicon: PosLexicon) -> "Vocabulary":
        """Every lexicon word whose primary tag is a content-word tag."""
        grouped: dict[PosTag, set[str]] = {}
        for word, tags in lexicon.entries.items():
            if tags[0] in NVAA_TAGS:
                grouped.setdefault(tags[0], set()).add(word)
        return cls(grouped)


@dataclass(frozen=True)
class WordPool:
    """Candidate replacement words for one position, minus the word replaced."""

    words: frozenset[str]
    provenance: StrategyKind

    def __post_init__(self) -> None:
        if not self.words:
            raise ValueError("word pool must be non-empty")


@dataclass(frozen=True)
class Substitution:
    """One positionwise edit against the original utterance."""

    position: int
    original_word: str
    new_word: str

    def __post_init__(self) -> None:
        if self.position < 0:
            raise ValueError("position must be non-negative")
        if self.original_word == self.new_word:
            raise ValueError("substitution must change the word")


@dataclass(frozen=True)
class Lexicons:
    """Everything sampling needs to look words up."""

    pos: PosLexicon
    synonyms: SynonymLexicon
    vocabulary: Vocabulary

    @classmethod
    def load(
        cls, pos_path: str, synonyms_path: str, vocabulary_path: str | None = None
    ) -> "Lexicons":
        """Load lexicons from TSV files.

        Without a dedicated vocabulary file, the replacement vocabulary is
        derived from the tagging lexicon's primary tags.
        """
        pos = PosLexicon.load(pos_path)
        vocab_source = PosLexicon.load(vocabulary_path) if vocabulary_path else pos
        return cls(
            pos=pos,
            synonyms=SynonymLexicon.load(synonyms_path),
            vocabulary=Vocabulary.from_pos_lexicon(vocab_source),
        )


class Strategy:
    """A sampling strategy; the context-aware kind carries its proposer.

    Context-aware pools are cached per masked sentence so repeated mutations
    of the same position never re-issue a proposer call. The cache is safe
    for concurrent use.
    """

    def __init__(self, kind: StrategyKind, proposer: ProposerOracle | None = None):
        if kind is StrategyKind.CONTEXT_AWARE:
            if proposer is None:
                raise ValueError("context-aware strategy needs a proposer oracle")
        elif proposer is not None:
            raise ValueError(f"{kind.value} strategy takes no proposer")
        self.kind = kind
        self.proposer = proposer
        self._pool_cache: dict[str, tuple[str, ...]] = {}
        self._cache_lock = threading.Lock()

    @property
    def name(self) -> str:
        return self.kind.value

    def __repr__(self) -> str:
        return f"Strategy({self.kind.value})"

    @classmethod
    def unaware(cls) -> "Strategy":
        return cls(StrategyKind.UNAWARE)

    @classmethod
    def wordtype_aware(cls) -> "Strategy":
        return cls(StrategyKind.WORDTYPE_AWARE)

    @classmethod
    def word_aware(cls) -> "Strategy":
        return cls(StrategyKind.WORD_AWARE)

    @classmethod
    def context_aware(cls, proposer: ProposerOracle) -> "Strategy":
        return cls(StrategyKind.CONTEXT_AWARE, proposer=proposer)

    def _proposed_words(self, masked: str, original_word: str) -> tuple[str, ...]:
        with self._cache_lock:
            cached = self._pool_cache.get(masked)
        if cached is not None:
            return cached
        try:
            words = self.proposer.propose(masked, original_word, PROPOSER_K)
        except NoProposalsError:
            words = []
        cleaned = tuple(
            w for w in (word.strip().lower() for word in words)
            if w and not any(c.isspace() for c in w)
        )
        with self._cache_lock:
            self._pool_cache.setdefault(masked, cleaned)
        return cleaned


def mask_utterance(u: Utterance, position: int) -> str:
    """The utterance text with the token at ``position`` replaced by ``WORD``."""
    surfaces = list(u.surfaces)
    surfaces[position] = PROPOSER_PLACEHOLDER
    return " ".join(surfaces)


def build_pool(
    strategy: Strategy, u: Utterance, position: int, lexicons: Lexicons
) -> WordPool:
    """Replacement-word pool for the word at ``position`` of ``u``.

    The word being replaced is always removed from the pool.

    Raises:
        EmptyPoolError: when the strategy yields no usable replacement.
    """
    token = u.tokens[position]
    if not token.is_nvaa:
        raise ValueError(f"position {position} ({token.surface!r}) is not a content word")
    word = token.surface

    if strategy.kind is StrategyKind.UNAWARE:
        words = set(lexicons.vocabulary.all_words())
    elif strategy.kind is StrategyKind.WORDTYPE_AWARE:
        words = set(lexicons.vocabulary.words_for(token.pos))
    elif strategy.kind is StrategyKind.WORD_AWARE:
        words = set(synonyms_of(word, token.pos, lexicons.synonyms))
    else:
        words = set(strategy._proposed_words(mask_utterance(u, position), word))

    words.discard(word)
    if not words:
        raise EmptyPoolError(
            f"no {strategy.name} replacements for {word!r} at position {position}"
        )
    return WordPool(words=frozenset(words), provenance=strategy.kind)


def sample(
    strategy: Strategy,
    u_original: Utterance,
    genome: Utterance,
    rng: random.Random,
    lexicons: Lexicons,
) -> Utterance:
    """Mutate one word of ``genome`` using a pool built from the original.

    Picks a uniformly random content-word position of the original utterance
    and overwrites the genome's token there with a random pool word (tagged
    via the lexicon). Positions with empty pools are retried; if every
    position fails, the mutation degrades to a no-op and the genome is
    returned unchanged.

    Raises:
        NoMutablePositionsError: if the original has no content words.
    """
    if len(genome) != len(u_original):
        raise ValueError("genome and original utterance must have equal length")
    positions = nvaa_positions(u_original)
    if not positions:
        raise NoMutablePositionsError(f"nothing mutable in {u_original.text!r}")

    for position in rng.sample(positions, len(positions)):
        try:
            pool = build_pool(strategy, u_original, position, lexicons)
        except EmptyPoolError:
            continue
        # Also rule out the genome's current token there, so a successful
        # draw always changes exactly one position.
        candidates = sorted(pool.words - {genome.tokens[position].surface})
        if not candidates:
            continue
        new_word = rng.choice(candidates)
        return genome.with_token(
            position, Token(surface=new_word, pos=lexicons.pos.primary_tag(new_word))
        )
    return genome


def initial_population(
    strategy: Strategy,
    pair: SamplePair,
    n: int,
    rng: random.Random,
    lexicons: Lexicons,
    max_attempts: int = 1000,
) -> list[Utterance]:
    """Sample ``n`` pairwise-distinct one-word edits of the original utterance.

    Raises:
        InsufficientDiversityError: if ``max_attempts`` draws cannot produce
            ``n`` distinct candidates (small pools); carries how many were found.
    """
    if n < 1:
        raise ValueError("population size must be >= 1")
    original = pair.original
    found: list[Utterance] = []
    seen = {original.text}
    attempts = 0
    while len(found) < n and attempts < max_attempts:
        attempts += 1
        candidate = sample(strategy, original, original, rng, lexicons)
        if candidate.text in seen:
            continue
        seen.add(candidate.text)
        found.append(candidate)
    if len(found) < n:
        raise InsufficientDiversityError(requested=n, found=len(found), attempts=attempts)
    return found


def substitutions_between(original: Utterance, candidate: Utterance) -> list[Substitution]:
    """Positionwise diff of two equal-length utterances."""
    if len(original) != len(candidate):
        raise ValueError("utterances must have equal length")
    return [
        Substitution(position=i, original_word=a, new_word=b)
        for i, (a, b) in enumerate(zip(original.surfaces, candidate.surfaces))
        if a != b
    ]
