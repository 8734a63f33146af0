"""Quantitative metrics, per-strategy aggregation, and the majority-vote judge.

Means of similarity and edit distance are taken over successful samples only;
a failed sample has no best counterfactual to measure. Aggregate reports say
so in their metadata.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from statistics import fmean
from typing import Iterable, Mapping, Sequence

from .errors import EmptyInputError
from .oracles import (
    SIMILARITY_LABELS,
    EmbedderOracle,
    JudgeOracle,
    JudgeResponse,
    SamplePair,
    build_judge_messages,
    cosine,
)
from .optimize import GenerationStat, SearchResult
from .sampling import Substitution, substitutions_between
from .text import token_levenshtein


@dataclass(frozen=True)
class SampleMetrics:
    """Search outcome for one sample; best-candidate fields exist only on success."""

    sample_id: str
    success: bool
    best_utterance: str | None
    best_similarity: float | None
    best_levenshtein: float | None
    substitutions: tuple[Substitution, ...]

    def __post_init__(self) -> None:
        present = (
            self.best_utterance is not None,
            self.best_similarity is not None,
            self.best_levenshtein is not None,
        )
        if self.success != all(present) or (not self.success and any(present)):
            raise ValueError("best fields must be present exactly when success")


@dataclass(frozen=True)
class AggregateReport:
    """Per-strategy aggregate mirroring the quantitative comparison tables."""

    strategy: str
    sample_count: int
    success_count: int
    success_rate: float
    mean_similarity: float | None
    mean_levenshtein: float | None
    word_pairs: tuple[tuple[tuple[str, str], int], ...]
    replaced_counts: Mapping[str, int]
    inserted_counts: Mapping[str, int]
    success_rate_curve: tuple[float, ...]
    mean_similarity_curve: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "sample_count": self.sample_count,
            "success_count": self.success_count,
            "success_rate": self.success_rate,
            "mean_similarity": self.mean_similarity,
            "mean_levenshtein": self.mean_levenshtein,
            "word_pairs": [
                {"original": pair[0], "replacement": pair[1], "count": count}
                for pair, count in self.word_pairs
            ],
            "replaced_counts": dict(self.replaced_counts),
            "inserted_counts": dict(self.inserted_counts),
            "per_generation": {
                "success_rate": list(self.success_rate_curve),
                "mean_similarity": list(self.mean_similarity_curve),
            },
            "metadata": {"averaging": "successful samples only"},
        }


@dataclass(frozen=True)
class JudgeVerdict:
    """Majority verdict over five independent judge rounds."""

    sample_id: str
    grammatical: bool
    similarity_label: str
    votes: tuple[JudgeResponse, ...]


def compute_sample_metrics(
    pair: SamplePair, result: SearchResult, embedder: EmbedderOracle
) -> SampleMetrics:
    """Distill one search result into reportable per-sample metrics.

    Similarity is recomputed from the embedder (raw cosine, unclamped) and
    the edit distance from scratch, independent of what the search recorded.
    """
    if result.best is None:
        return SampleMetrics(
            sample_id=pair.sample_id,
            success=False,
            best_utterance=None,
            best_similarity=None,
            best_levenshtein=None,
            substitutions=(),
        )
    best, _ = result.best
    raw = cosine(embedder.embed(pair.original), embedder.embed(best))
    return SampleMetrics(
        sample_id=pair.sample_id,
        success=True,
        best_utterance=best.text,
        best_similarity=raw,
        best_levenshtein=token_levenshtein(pair.original, best),
        substitutions=tuple(substitutions_between(pair.original, best)),
    )


def aggregate(
    samples: Sequence[SampleMetrics],
    curves: Sequence[Sequence[GenerationStat]],
    strategy: str,
) -> AggregateReport:
    """Fold per-sample metrics and per-run curves into one strategy row.

    Word-pair ranking is by descending count, ties broken lexicographically.
    Curves are averaged positionwise across the runs that reached each
    generation.

    Raises:
        EmptyInputError: on an empty sample set.
    """
    if not samples:
        raise EmptyInputError("no samples to aggregate")

    successes = [s for s in samples if s.success]
    pair_counts: Counter[tuple[str, str]] = Counter()
    replaced: Counter[str] = Counter()
    inserted: Counter[str] = Counter()
    for metrics in successes:
        for sub in metrics.substitutions:
            pair_counts[(sub.original_word, sub.new_word)] += 1
            replaced[sub.original_word] += 1
            inserted[sub.new_word] += 1

    depth = max((len(c) for c in curves), default=0)
    success_curve = []
    similarity_curve = []
    for g in range(depth):
        at_g = [c[g] for c in curves if len(c) > g]
        success_curve.append(sum(s.success_so_far for s in at_g) / len(at_g))
        similarity_curve.append(fmean(s.mean_similarity for s in at_g))

    return AggregateReport(
        strategy=strategy,
        sample_count=len(samples),
        success_count=len(successes),
        success_rate=len(successes) / len(samples),
        mean_similarity=fmean(s.best_similarity for s in successes) if successes else None,
        mean_levenshtein=fmean(s.best_levenshtein for s in successes) if successes else None,
        word_pairs=tuple(
            sorted(pair_counts.items(), key=lambda item: (-item[1], item[0]))
        ),
        replaced_counts={w: replaced[w] for w in sorted(replaced)},
        inserted_counts={w: inserted[w] for w in sorted(inserted)},
        success_rate_curve=tuple(success_curve),
        mean_similarity_curve=tuple(similarity_curve),
    )


def majority_similarity(labels: Iterable[str]) -> str:
    """Most frequent similarity label; ties go to the lower-similarity leader."""
    counts = Counter(labels)
    if not counts:
        raise ValueError("no labels to vote on")
    top = max(counts.values())
    leaders = [label for label, count in counts.items() if count == top]
    return max(leaders, key=SIMILARITY_LABELS.index)


def judge_with_majority(
    reference: str,
    candidate: str,
    judge: JudgeOracle,
    rounds: int = 5,
    sample_id: str = "",
) -> JudgeVerdict:
    """Run ``rounds`` independent judge calls and majority-vote each field.

    All-or-nothing: any failing round propagates its error so a verdict is
    always backed by the full set of votes.
    """
    if rounds < 1 or rounds % 2 == 0:
        raise ValueError("rounds must be odd and >= 1")
    votes = tuple(judge.judge(reference, candidate) for _ in range(rounds))
    return _verdict_from_votes(sample_id, votes)


def _verdict_from_votes(sample_id: str, votes: tuple[JudgeResponse, ...]) -> JudgeVerdict:
    grammatical = sum(v.grammatical for v in votes) * 2 > len(votes)
    label = majority_similarity(v.similarity for v in votes)
    return JudgeVerdict(
        sample_id=sample_id,
        grammatical=grammatical,
        similarity_label=label,
        votes=votes,
    )


def transcript_lines(
    sample_id: str, reference: str, candidate: str, votes: Sequence[JudgeResponse]
) -> list[dict]:
    """Audit records for one judged sample: one dict per round, prompts included."""
    system_prompt, user_prompt = build_judge_messages(reference, candidate)
    return [
        {
            "sample_id": sample_id,
            "round": i,
            "reference": reference,
            "candidate": candidate,
            "system_prompt": system_prompt,
            "user_prompt": user_prompt,
            "response": {
                "grammatical": vote.grammatical,
                "grammar_reason": vote.grammar_reason,
                "similarity": vote.similarity,
                "similarity_reason": vote.similarity_reason,
            },
        }
        for i, vote in enumerate(votes, start=1)
    ]


def replay_judge_transcripts(lines: Iterable[Mapping]) -> list[JudgeVerdict]:
    """Recompute verdicts from persisted transcript lines.

    Rounds are grouped per sample in file order; the majority logic is the
    same code path used live, so replay always reproduces the original
    verdicts.
    """
    by_sample: dict[str, list[JudgeResponse]] = {}
    for line in lines:
        response = line["response"]
        by_sample.setdefault(line["sample_id"], []).append(
            JudgeResponse(
                grammatical=response["grammatical"],
                grammar_reason=response.get("grammar_reason", ""),
                similarity=response["similarity"],
                similarity_reason=response.get("similarity_reason", ""),
            )
        )
    return [
        _verdict_from_votes(sample_id, tuple(votes))
        for sample_id, votes in by_sample.items()
    ]


def report_csv_rows(reports: Sequence[AggregateReport]) -> list[list[str]]:
    """Header plus one row per strategy, for the summary CSV projection."""
    rows = [["strategy", "success_rate", "mean_similarity", "mean_levenshtein"]]
    for report in reports:
        rows.append(
            [
                report.strategy,
                f"{report.success_rate:.6f}",
                "" if report.mean_similarity is None else f"{report.mean_similarity:.6f}",
                "" if report.mean_levenshtein is None else f"{report.mean_levenshtein:.6f}",
            ]
        )
    return rows
