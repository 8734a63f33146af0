"""Bi-objective fitness and the search loops (genetic algorithm and random baseline).

Fitness is the unweighted sum of a class-flip term and an embedding
similarity term. The class-flip term rewards confidence only up to the
decision boundary and applies a -1 penalty to candidates that do not flip
the listener's decision, so any valid candidate outscores every invalid one.
Searches evaluate each distinct utterance once: repeats are served from a
per-run cache and do not consume budget.
"""

from __future__ import annotations

import random
import statistics
from dataclasses import dataclass

from .errors import NotMisclassifiedError
from .oracles import EmbedderOracle, ListenerOracle, ListenerOutput, SamplePair, cosine
from .sampling import Lexicons, Strategy, initial_population, sample
from .text import Utterance, token_levenshtein


@dataclass(frozen=True)
class FitnessRecord:
    """Fitness breakdown for one scored candidate.

    ``similarity`` is the cosine clamped to [0, 1] (the value the fitness
    uses); ``cosine`` keeps the raw unclamped value for reporting.
    """

    classflip: float
    similarity: float
    total: float
    valid: bool
    cosine: float
    p_target: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.similarity <= 1.0:
            raise ValueError(f"similarity {self.similarity} out of [0, 1]")
        if self.total != self.classflip + self.similarity:
            raise ValueError("total must equal classflip + similarity")
        if self.valid and self.classflip != 1.0:
            raise ValueError("valid candidate must have classflip 1.0")
        if not self.valid and self.classflip > 0.0:
            raise ValueError("invalid candidate must have classflip <= 0")


@dataclass(frozen=True)
class GaConfig:
    """Genetic-algorithm knobs; defaults follow the reference experiment scale."""

    population: int = 20
    generations: int = 30
    mutation_rate: float = 0.1
    tournament_size: int = 2
    seed: int = 0

    def __post_init__(self) -> None:
        if self.population < 2:
            raise ValueError("population must be >= 2")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ValueError("mutation_rate must be in [0, 1]")
        if not 2 <= self.tournament_size <= self.population:
            raise ValueError("tournament_size must be in [2, population]")

    @property
    def budget(self) -> int:
        """Distinct-utterance cap: initial population plus offspring slots."""
        return self.population * (self.generations + 1)


@dataclass(frozen=True)
class GenerationStat:
    """Curve point recorded after each generation (or baseline chunk)."""

    success_so_far: bool
    mean_similarity: float
    best_total_so_far: float


@dataclass(frozen=True)
class SearchResult:
    """Outcome of one search run on one sample."""

    best: tuple[Utterance, FitnessRecord] | None
    all_valid: tuple[tuple[Utterance, FitnessRecord], ...]
    evaluations_used: int
    budget_cap: int
    per_generation: tuple[GenerationStat, ...]


def classflip_term(out: ListenerOutput) -> float:
    """Class-flip objective: min(2 * p_target, 1), minus 1 when not flipped.

    A tie counts as not flipped, so the penalty applies.
    """
    base = min(2.0 * out.p_target, 1.0)
    return base if out.prefers_target else base - 1.0


def similarity_term(
    u: Utterance, u_prime: Utterance, embedder: EmbedderOracle
) -> float:
    """Embedding cosine between the two utterances, clamped into [0, 1]."""
    raw = cosine(embedder.embed(u), embedder.embed(u_prime))
    return min(max(raw, 0.0), 1.0)


def fitness(
    pair: SamplePair,
    u_prime: Utterance,
    listener: ListenerOracle,
    embedder: EmbedderOracle,
) -> FitnessRecord:
    """Score one candidate against the pair's original utterance."""
    out = listener.score(pair, u_prime)
    raw = cosine(embedder.embed(pair.original), embedder.embed(u_prime))
    sim = min(max(raw, 0.0), 1.0)
    clf = classflip_term(out)
    return FitnessRecord(
        classflip=clf,
        similarity=sim,
        total=clf + sim,
        valid=out.prefers_target,
        cosine=raw,
        p_target=out.p_target,
    )


class CandidateScorer:
    """Caching fitness evaluator with a distinct-utterance budget meter.

    Re-scoring an already-seen utterance (offspring duplicates, the original
    reappearing through crossover) is a cache hit and costs no budget.
    """

    def __init__(
        self,
        pair: SamplePair,
        listener: ListenerOracle,
        embedder: EmbedderOracle,
        budget_cap: int,
    ):
        self.pair = pair
        self.listener = listener
        self.embedder = embedder
        self.budget_cap = budget_cap
        self.evaluations_used = 0
        self.any_valid = False
        self.best_total = float("-inf")
        self._embeddings: dict[str, tuple[float, ...]] = {}
        self._scored: dict[str, tuple[Utterance, FitnessRecord]] = {}
        self._original_key = pair.original.text

    def assert_misclassified(self) -> ListenerOutput:
        """Verify the explanation task is defined; pre-seed the original's record.

        Raises:
            NotMisclassifiedError: if the listener already prefers the target
                (ties included) on the original utterance.
        """
        record, out = self._compute(self.pair.original)
        if out.p_target >= out.p_distractor:
            raise NotMisclassifiedError(
                f"sample {self.pair.sample_id!r}: p_target={out.p_target:.4f} "
                "on the original utterance"
            )
        self._scored[self._original_key] = (self.pair.original, record)
        return out

    def _embedding(self, u: Utterance) -> tuple[float, ...]:
        key = u.text
        vec = self._embeddings.get(key)
        if vec is None:
            vec = self.embedder.embed(u)
            self._embeddings[key] = vec
        return vec

    def _compute(self, u: Utterance) -> tuple[FitnessRecord, ListenerOutput]:
        out = self.listener.score(self.pair, u)
        raw = cosine(self._embedding(self.pair.original), self._embedding(u))
        sim = min(max(raw, 0.0), 1.0)
        clf = classflip_term(out)
        record = FitnessRecord(
            classflip=clf,
            similarity=sim,
            total=clf + sim,
            valid=out.prefers_target,
            cosine=raw,
            p_target=out.p_target,
        )
        return record, out

    def evaluate(self, u: Utterance) -> FitnessRecord:
        key = u.text
        hit = self._scored.get(key)
        if hit is not None:
            return hit[1]
        record, _ = self._compute(u)
        self._scored[key] = (u, record)
        self.evaluations_used += 1
        if record.valid:
            self.any_valid = True
        if record.total > self.best_total:
            self.best_total = record.total
        return record

    def build_result(self, per_generation: list[GenerationStat]) -> SearchResult:
        all_valid = tuple(
            (u, rec)
            for key, (u, rec) in self._scored.items()
            if rec.valid and key != self._original_key
        )
        best = None
        best_lev = 0.0
        for u, rec in all_valid:
            lev = token_levenshtein(self.pair.original, u)
            if (
                best is None
                or rec.similarity > best[1].similarity
                or (rec.similarity == best[1].similarity and lev < best_lev)
                or (
                    rec.similarity == best[1].similarity
                    and lev == best_lev
                    and u.text < best[0].text
                )
            ):
                best = (u, rec)
                best_lev = lev
        return SearchResult(
            best=best,
            all_valid=all_valid,
            evaluations_used=self.evaluations_used,
            budget_cap=self.budget_cap,
            per_generation=tuple(per_generation),
        )


def crossover(
    parent_a: Utterance, parent_b: Utterance, rng: random.Random
) -> tuple[Utterance, Utterance]:
    """Single-point crossover: children swap suffixes at a random cut.

    Length-1 utterances have no interior cut point and pass through unchanged.
    """
    if len(parent_a) != len(parent_b):
        raise ValueError("parents must have equal length")
    length = len(parent_a)
    if length < 2:
        return parent_a, parent_b
    cut = rng.randint(1, length - 1)
    tokens_a = parent_a.tokens[:cut] + parent_b.tokens[cut:]
    tokens_b = parent_b.tokens[:cut] + parent_a.tokens[cut:]
    child_a = Utterance(tokens=tokens_a, raw=" ".join(t.surface for t in tokens_a))
    child_b = Utterance(tokens=tokens_b, raw=" ".join(t.surface for t in tokens_b))
    return child_a, child_b


def _fitter(
    a: tuple[Utterance, FitnessRecord], b: tuple[Utterance, FitnessRecord]
) -> bool:
    """True when a beats b: higher total, then higher similarity, then text order."""
    if a[1].total != b[1].total:
        return a[1].total > b[1].total
    if a[1].similarity != b[1].similarity:
        return a[1].similarity > b[1].similarity
    return a[0].text < b[0].text


def tournament_select(
    scored: list[tuple[Utterance, FitnessRecord]], k: int, rng: random.Random
) -> Utterance:
    """Draw ``k`` contenders with replacement and return the fittest."""
    if not scored:
        raise ValueError("population must be non-empty")
    best = scored[rng.randrange(len(scored))]
    for _ in range(k - 1):
        contender = scored[rng.randrange(len(scored))]
        if _fitter(contender, best):
            best = contender
    return best[0]


def run_ga(
    pair: SamplePair,
    strategy: Strategy,
    config: GaConfig,
    listener: ListenerOracle,
    embedder: EmbedderOracle,
    lexicons: Lexicons,
    max_init_attempts: int | None = None,
) -> SearchResult:
    """Evolve counterfactual candidates for one misclassified sample.

    One run: an initial population of N distinct one-word edits, then M
    generations of tournament selection, single-point crossover, and
    per-offspring mutation with probability ``mutation_rate``. Offspring
    fully replace the population; the best candidate is tracked across all
    evaluations, so no elitism is needed.

    Raises:
        NotMisclassifiedError: if the listener already prefers the target.
        InsufficientDiversityError: if the initial population cannot be filled.
    """
    rng = random.Random(config.seed)
    scorer = CandidateScorer(pair, listener, embedder, budget_cap=config.budget)
    scorer.assert_misclassified()

    attempts = max_init_attempts or max(1000, 50 * config.population)
    population = initial_population(
        strategy, pair, config.population, rng, lexicons, max_attempts=attempts
    )
    scored = [(u, scorer.evaluate(u)) for u in population]
    per_generation = [_generation_stat(scored, scorer)]

    for _ in range(config.generations):
        mating = [
            tournament_select(scored, config.tournament_size, rng)
            for _ in range(config.population)
        ]
        offspring: list[Utterance] = []
        for i in range(0, len(mating) - 1, 2):
            child_a, child_b = crossover(mating[i], mating[i + 1], rng)
            offspring.extend((child_a, child_b))
        if len(mating) % 2 == 1:
            offspring.append(mating[-1])
        offspring = [
            sample(strategy, pair.original, child, rng, lexicons)
            if rng.random() < config.mutation_rate
            else child
            for child in offspring
        ]
        scored = [(u, scorer.evaluate(u)) for u in offspring]
        per_generation.append(_generation_stat(scored, scorer))

    return scorer.build_result(per_generation)


def _generation_stat(
    scored: list[tuple[Utterance, FitnessRecord]], scorer: CandidateScorer
) -> GenerationStat:
    return GenerationStat(
        success_so_far=scorer.any_valid,
        mean_similarity=statistics.fmean(rec.similarity for _, rec in scored),
        best_total_so_far=scorer.best_total,
    )


def run_random_search(
    pair: SamplePair,
    strategy: Strategy,
    budget: int,
    rng: random.Random,
    listener: ListenerOracle,
    embedder: EmbedderOracle,
    lexicons: Lexicons,
    chunk_size: int = 20,
) -> SearchResult:
    """Random-search baseline at the same evaluation budget as the GA.

    The candidate pool starts as just the original utterance; each attempt
    mutates one word of a uniformly chosen pool member and appends the result.
    A curve point is recorded after every ``chunk_size`` attempts (the pool
    mean similarity, original included), mirroring the GA's per-generation
    bookkeeping.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if chunk_size < 1:
        raise ValueError("chunk_size must be >= 1")
    scorer = CandidateScorer(pair, listener, embedder, budget_cap=budget)
    scorer.assert_misclassified()

    pool = [pair.original]
    pool_similarities = [1.0]
    per_generation: list[GenerationStat] = []
    for attempt in range(1, budget + 1):
        base = pool[rng.randrange(len(pool))]
        candidate = sample(strategy, pair.original, base, rng, lexicons)
        record = scorer.evaluate(candidate)
        pool.append(candidate)
        pool_similarities.append(record.similarity)
        if attempt % chunk_size == 0 or attempt == budget:
            per_generation.append(
                GenerationStat(
                    success_so_far=scorer.any_valid,
                    mean_similarity=statistics.fmean(pool_similarities),
                    best_total_so_far=scorer.best_total,
                )
            )
    return scorer.build_result(per_generation)
