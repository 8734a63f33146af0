"""Batch experiment runner: strategies x samples, JSONL/JSON/CSV reports.

Per-sample seeds are derived from the config seed and a stable hash of the
sample id, so results do not depend on iteration order or worker count and
repeated runs are byte-identical. Sample lines are flushed one at a time;
an interrupted run leaves only complete JSON lines behind.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import random
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from hashlib import blake2b
from pathlib import Path

from . import synthetic
from .errors import (
    ConfigError,
    DatasetParseError,
    DuplicateSampleIdError,
    EmptyUtteranceError,
    LexiconFormatError,
    UtterflipError,
)
from .evaluate import (
    SampleMetrics,
    aggregate,
    compute_sample_metrics,
    judge_with_majority,
    report_csv_rows,
    transcript_lines,
)
from .optimize import GaConfig, SearchResult, run_ga, run_random_search
from .oracles import (
    EmbedderOracle,
    HttpTransport,
    JudgeOracle,
    ListenerOracle,
    ObjectRef,
    OracleTransport,
    ProposerOracle,
    ReferenceEmbedder,
    ReferenceJudge,
    ReferenceListener,
    ReferenceProposer,
    RemoteEmbedder,
    RemoteJudge,
    RemoteListener,
    RemoteProposer,
    SamplePair,
    SubprocessTransport,
)
from .sampling import Lexicons, Strategy
from .text import PosLexicon, tokenize

STRATEGY_CHOICES = ("unaware", "wordtype_aware", "word_aware", "context_aware", "baseline")

_ENV_BINDINGS = {
    "listener": "UTTERFLIP_LISTENER",
    "embedder": "UTTERFLIP_EMBEDDER",
    "proposer": "UTTERFLIP_PROPOSER",
    "judge": "UTTERFLIP_JUDGE",
}


@dataclass(frozen=True)
class RunConfig:
    """Everything one `run` invocation needs; mirrors the JSON config file."""

    dataset: str
    strategies: tuple[str, ...]
    pos_lexicon: str
    synonym_lexicon: str
    output_dir: str
    ga: GaConfig = field(default_factory=GaConfig)
    vocabulary: str | None = None
    listener: str = "builtin"
    embedder: str = "builtin"
    proposer: str = "builtin"
    judge: str = "builtin"
    workers: int = 1
    judge_enabled: bool = False
    judge_rounds: int = 5
    listener_temperature: float = 1.0
    embedder_dim: int = 256
    retries: int = 3

    def __post_init__(self) -> None:
        if not self.strategies:
            raise ConfigError("at least one strategy must be selected")
        for name in self.strategies:
            if name not in STRATEGY_CHOICES:
                raise ConfigError(
                    f"unknown strategy {name!r}; choose from {', '.join(STRATEGY_CHOICES)}"
                )
        for role in ("listener", "embedder", "proposer", "judge"):
            _check_binding(role, getattr(self, role))
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.judge_rounds < 1 or self.judge_rounds % 2 == 0:
            raise ConfigError("judge_rounds must be odd and >= 1")

    @classmethod
    def from_file(cls, path: str, seed_override: int | None = None) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")

        try:
            ga = GaConfig(**data.get("ga", {}))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad ga section: {exc}") from exc
        if seed_override is not None:
            ga = replace(ga, seed=seed_override)

        oracles = data.get("oracles", {})
        lexicons = data.get("lexicons", {})
        try:
            config = cls(
                dataset=data["dataset"],
                strategies=tuple(data.get("strategies", ())),
                pos_lexicon=lexicons["pos"],
                synonym_lexicon=lexicons["synonyms"],
                vocabulary=lexicons.get("vocabulary"),
                output_dir=data["output_dir"],
                ga=ga,
                listener=_env_or(oracles.get("listener", "builtin"), "listener"),
                embedder=_env_or(oracles.get("embedder", "builtin"), "embedder"),
                proposer=_env_or(oracles.get("proposer", "builtin"), "proposer"),
                judge=_env_or(oracles.get("judge", "builtin"), "judge"),
                workers=data.get("workers", 1),
                judge_enabled=data.get("judge_enabled", False),
                judge_rounds=data.get("judge_rounds", 5),
                listener_temperature=data.get("listener_temperature", 1.0),
                embedder_dim=data.get("embedder_dim", 256),
                retries=data.get("retries", 3),
            )
        except KeyError as exc:
            raise ConfigError(f"config missing required key: {exc}") from exc
        return config


def _env_or(binding: str, role: str) -> str:
    return os.environ.get(_ENV_BINDINGS[role], binding)


def _check_binding(role: str, binding: str) -> None:
    if binding == "builtin" or binding.startswith(("http://", "https://", "subprocess:")):
        return
    raise ConfigError(
        f"{role} binding must be 'builtin', 'subprocess:<cmd>', or an http(s) URL, "
        f"got {binding!r}"
    )


def _transport_for(binding: str, retries: int) -> OracleTransport:
    if binding.startswith(("http://", "https://")):
        return HttpTransport(binding)
    return SubprocessTransport(binding[len("subprocess:") :])


def resolve_listener(binding: str, temperature: float = 1.0, retries: int = 3) -> ListenerOracle:
    if binding == "builtin":
        return ReferenceListener(temperature=temperature)
    return RemoteListener(_transport_for(binding, retries), retries=retries)


def resolve_embedder(binding: str, dim: int = 256, retries: int = 3) -> EmbedderOracle:
    if binding == "builtin":
        return ReferenceEmbedder(dim=dim)
    return RemoteEmbedder(_transport_for(binding, retries), retries=retries)


def resolve_proposer(binding: str, lexicons: Lexicons, retries: int = 3) -> ProposerOracle:
    if binding == "builtin":
        return ReferenceProposer(lexicons.synonyms, lexicons.pos)
    return RemoteProposer(_transport_for(binding, retries), retries=retries)


def resolve_judge(binding: str, retries: int = 3) -> JudgeOracle:
    if binding == "builtin":
        return ReferenceJudge()
    return RemoteJudge(_transport_for(binding, retries), retries=retries)


def _stable_hash(sample_id: str) -> int:
    return int.from_bytes(blake2b(sample_id.encode("utf-8"), digest_size=8).digest(), "big")


def derived_seed(base_seed: int, sample_id: str) -> int:
    """Per-sample seed independent of iteration order and worker count."""
    return base_seed ^ _stable_hash(sample_id)


def ingest_dataset(path: str, pos_lexicon: PosLexicon) -> list[SamplePair]:
    """Parse a JSONL dataset into validated sample pairs.

    Raises:
        DatasetParseError: malformed line, with its line number.
        DuplicateSampleIdError: repeated sample_id.
    """

    def bad(line_no: int, reason: str) -> DatasetParseError:
        return DatasetParseError(path, line_no, reason)

    pairs: list[SamplePair] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise bad(line_no, f"invalid JSON: {exc}") from exc
            if not isinstance(record, dict):
                raise bad(line_no, "record must be a JSON object")
            try:
                sample_id = record["sample_id"]
                target_id = record["target_id"]
                distractor_id = record["distractor_id"]
                utterance = record["utterance"]
            except KeyError as exc:
                raise bad(line_no, f"missing field {exc}") from None
            for name, value in (
                ("sample_id", sample_id),
                ("target_id", target_id),
                ("distractor_id", distractor_id),
                ("utterance", utterance),
            ):
                if not isinstance(value, str) or not value:
                    raise bad(line_no, f"{name} must be a non-empty string")
            if target_id == distractor_id:
                raise bad(line_no, "target_id and distractor_id must differ")
            if sample_id in seen:
                raise DuplicateSampleIdError(f"{path}:{line_no}: duplicate sample_id {sample_id!r}")
            attrs = []
            for key in ("target_attributes", "distractor_attributes"):
                value = record.get(key)
                if value is not None and not isinstance(value, dict):
                    raise bad(line_no, f"{key} must be an object")
                attrs.append(value)
            try:
                pair = SamplePair(
                    sample_id=sample_id,
                    target=ObjectRef(target_id, attrs[0]),
                    distractor=ObjectRef(distractor_id, attrs[1]),
                    original=tokenize(utterance, pos_lexicon),
                )
            except (ValueError, EmptyUtteranceError) as exc:
                raise bad(line_no, str(exc)) from exc
            seen.add(sample_id)
            pairs.append(pair)
    return pairs


def filter_misclassified(
    pairs: list[SamplePair], listener: ListenerOracle
) -> tuple[list[SamplePair], list[SamplePair]]:
    """Split pairs into (misclassified, correctly classified) on the original."""
    kept, dropped = [], []
    for pair in pairs:
        out = listener.score(pair, pair.original)
        (kept if out.p_target < out.p_distractor else dropped).append(pair)
    return kept, dropped


def _build_strategy(name: str, config: RunConfig, lexicons: Lexicons) -> Strategy:
    if name in ("unaware", "baseline"):
        return Strategy.unaware()
    if name == "wordtype_aware":
        return Strategy.wordtype_aware()
    if name == "word_aware":
        return Strategy.word_aware()
    return Strategy.context_aware(
        resolve_proposer(config.proposer, lexicons, retries=config.retries)
    )


def _run_one(
    pair: SamplePair,
    strategy_name: str,
    strategy: Strategy,
    config: RunConfig,
    listener: ListenerOracle,
    embedder: EmbedderOracle,
    lexicons: Lexicons,
) -> tuple[SamplePair, SearchResult | None, SampleMetrics | None, UtterflipError | None]:
    seed = derived_seed(config.ga.seed, pair.sample_id)
    try:
        if strategy_name == "baseline":
            result = run_random_search(
                pair,
                strategy,
                budget=config.ga.budget,
                rng=random.Random(seed),
                listener=listener,
                embedder=embedder,
                lexicons=lexicons,
                chunk_size=config.ga.population,
            )
        else:
            result = run_ga(
                pair,
                strategy,
                replace(config.ga, seed=seed),
                listener=listener,
                embedder=embedder,
                lexicons=lexicons,
            )
        return pair, result, compute_sample_metrics(pair, result, embedder), None
    except UtterflipError as exc:
        return pair, None, None, exc


def _sample_line(
    pair: SamplePair,
    result: SearchResult | None,
    metrics: SampleMetrics | None,
    error: UtterflipError | None,
) -> dict:
    line: dict = {
        "sample_id": pair.sample_id,
        "original": pair.original.text,
        "error": None if error is None else f"{type(error).__name__}: {error}",
        "success": None if metrics is None else metrics.success,
        "best": None,
        "evaluations_used": None if result is None else result.evaluations_used,
        "budget_cap": None if result is None else result.budget_cap,
        "per_generation": None,
    }
    if result is not None:
        line["per_generation"] = [
            {
                "success_so_far": stat.success_so_far,
                "mean_similarity": stat.mean_similarity,
                "best_total_so_far": stat.best_total_so_far,
            }
            for stat in result.per_generation
        ]
    if metrics is not None and metrics.success:
        line["best"] = {
            "utterance": metrics.best_utterance,
            "similarity": metrics.best_similarity,
            "levenshtein": metrics.best_levenshtein,
            "substitutions": [
                {
                    "position": sub.position,
                    "original": sub.original_word,
                    "replacement": sub.new_word,
                }
                for sub in metrics.substitutions
            ],
        }
    return line


def _write_jsonl_line(fh, record: dict) -> None:
    fh.write(json.dumps(record, sort_keys=True) + "\n")
    fh.flush()


def _run_strategy(
    strategy_name: str,
    pairs: list[SamplePair],
    config: RunConfig,
    listener: ListenerOracle,
    embedder: EmbedderOracle,
    lexicons: Lexicons,
    strategy_dir: Path,
):
    strategy = _build_strategy(strategy_name, config, lexicons)
    strategy_dir.mkdir(parents=True, exist_ok=True)

    outcomes = []
    with open(strategy_dir / "samples.jsonl", "w", encoding="utf-8") as fh:
        if config.workers > 1:
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                futures = [
                    pool.submit(
                        _run_one, pair, strategy_name, strategy, config,
                        listener, embedder, lexicons,
                    )
                    for pair in pairs
                ]
                # Consume in submission order so output bytes are stable.
                for future in futures:
                    outcome = future.result()
                    _write_jsonl_line(fh, _sample_line(*outcome))
                    outcomes.append(outcome)
        else:
            for pair in pairs:
                outcome = _run_one(
                    pair, strategy_name, strategy, config, listener, embedder, lexicons
                )
                _write_jsonl_line(fh, _sample_line(*outcome))
                outcomes.append(outcome)

    error_count = sum(1 for _, _, _, error in outcomes if error is not None)
    completed = [(pair, result, metrics) for pair, result, metrics, e in outcomes if e is None]
    report = None
    if completed:
        report = aggregate(
            [metrics for _, _, metrics in completed],
            [result.per_generation for _, result, _ in completed],
            strategy_name,
        )
        with open(strategy_dir / "report.json", "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")

    if config.judge_enabled and completed:
        judge = resolve_judge(config.judge, retries=config.retries)
        _judge_samples(
            (
                (pair.sample_id, pair.original.text, metrics.best_utterance)
                for pair, _, metrics in completed
                if metrics.success
            ),
            judge,
            config.judge_rounds,
            strategy_dir,
        )
    return report, error_count


def _judge_samples(items, judge: JudgeOracle, rounds: int, out_dir: Path) -> int:
    """Judge (sample_id, reference, candidate) triples; returns samples judged."""
    judged = 0
    with open(out_dir / "judge_transcripts.jsonl", "w", encoding="utf-8") as t_fh, open(
        out_dir / "judge_verdicts.jsonl", "w", encoding="utf-8"
    ) as v_fh:
        for sample_id, reference, candidate in items:
            verdict = judge_with_majority(
                reference, candidate, judge, rounds=rounds, sample_id=sample_id
            )
            for line in transcript_lines(sample_id, reference, candidate, verdict.votes):
                _write_jsonl_line(t_fh, line)
            _write_jsonl_line(
                v_fh,
                {
                    "sample_id": sample_id,
                    "grammatical": verdict.grammatical,
                    "similarity": verdict.similarity_label,
                },
            )
            judged += 1
    return judged


def run_experiment(config: RunConfig) -> int:
    """Execute strategies x samples; 0 = clean, 2 = finished with sample errors."""
    lexicons = Lexicons.load(config.pos_lexicon, config.synonym_lexicon, config.vocabulary)
    pairs = ingest_dataset(config.dataset, lexicons.pos)
    listener = resolve_listener(
        config.listener, temperature=config.listener_temperature, retries=config.retries
    )
    embedder = resolve_embedder(config.embedder, dim=config.embedder_dim, retries=config.retries)

    kept, dropped = filter_misclassified(pairs, listener)
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "dropped_samples.json", "w", encoding="utf-8") as fh:
        json.dump(
            {
                "kept": len(kept),
                "dropped": sorted(pair.sample_id for pair in dropped),
                "reason": "listener already prefers the target on the original",
            },
            fh,
            sort_keys=True,
            indent=2,
        )
        fh.write("\n")
    if not kept:
        print("no misclassified samples to explain", file=sys.stderr)
        return 2

    reports = []
    had_errors = False
    for strategy_name in config.strategies:
        report, error_count = _run_strategy(
            strategy_name, kept, config, listener, embedder, lexicons,
            out_dir / strategy_name,
        )
        if report is not None:
            reports.append(report)
        if error_count:
            had_errors = True
            print(
                f"{strategy_name}: {error_count} sample(s) failed", file=sys.stderr
            )

    with open(out_dir / "summary.csv", "w", encoding="utf-8", newline="") as fh:
        csv.writer(fh).writerows(report_csv_rows(reports))
    return 2 if had_errors else 0


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_run(args) -> int:
    config = RunConfig.from_file(args.config, seed_override=args.seed)
    return run_experiment(config)


def _cmd_filter(args) -> int:
    lexicon = PosLexicon.load(args.pos_lexicon) if args.pos_lexicon else PosLexicon({})
    pairs = ingest_dataset(args.dataset, lexicon)
    _check_binding("listener", args.listener)
    listener = resolve_listener(args.listener, temperature=args.temperature)
    kept, dropped = filter_misclassified(pairs, listener)
    kept_ids = {pair.sample_id for pair in kept}
    out_fh = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        with open(args.dataset, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                if json.loads(line)["sample_id"] in kept_ids:
                    out_fh.write(line if line.endswith("\n") else line + "\n")
    finally:
        if args.out:
            out_fh.close()
    print(f"kept {len(kept)} of {len(pairs)} samples", file=sys.stderr)
    for pair in dropped:
        print(f"dropped {pair.sample_id}", file=sys.stderr)
    return 0


def _cmd_judge(args) -> int:
    _check_binding("judge", args.judge)
    judge = resolve_judge(args.judge)
    items = []
    with open(args.report, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            if record.get("success") and record.get("best"):
                items.append(
                    (record["sample_id"], record["original"], record["best"]["utterance"])
                )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    judged = _judge_samples(items, judge, args.rounds, out_dir)
    print(f"judged {judged} sample(s)", file=sys.stderr)
    return 0


def _cmd_report(args) -> int:
    def fmt(value) -> str:
        return "" if value is None else f"{value:.6f}"

    rows = [["strategy", "success_rate", "mean_similarity", "mean_levenshtein"]]
    for path in args.inputs:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        rows.append(
            [
                data["strategy"],
                fmt(data["success_rate"]),
                fmt(data["mean_similarity"]),
                fmt(data["mean_levenshtein"]),
            ]
        )
    with open(args.csv, "w", encoding="utf-8", newline="") as fh:
        csv.writer(fh).writerows(rows)
    return 0


def _cmd_synth(args) -> int:
    paths = synthetic.write_suite(args.out, args.samples, args.seed, args.temperature)
    for name, path in sorted(paths.items()):
        print(f"{name}: {path}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="utterflip",
        description="Search for word-substitution counterfactuals that flip a "
        "referent-identification model, and report on the results.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run strategies x samples from a JSON config")
    p.add_argument("--config", required=True, help="path to the JSON run config")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.set_defaults(handler=_cmd_run)

    p = sub.add_parser("filter", help="keep only samples the listener misclassifies")
    p.add_argument("--dataset", required=True)
    p.add_argument("--listener", default="builtin")
    p.add_argument("--pos-lexicon", default=None)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--out", default=None, help="output JSONL (default: stdout)")
    p.set_defaults(handler=_cmd_filter)

    p = sub.add_parser("judge", help="rate best counterfactuals with a judge oracle")
    p.add_argument("--report", required=True, help="per-sample JSONL from a run")
    p.add_argument("--judge", default="builtin")
    p.add_argument("--rounds", type=int, default=5)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(handler=_cmd_judge)

    p = sub.add_parser("report", help="project aggregate reports into a CSV")
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--csv", required=True)
    p.set_defaults(handler=_cmd_report)

    p = sub.add_parser("synth", help="generate a synthetic evaluation suite")
    p.add_argument("--out", required=True)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--temperature", type=float, default=1.0)
    p.set_defaults(handler=_cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (ConfigError, LexiconFormatError, DatasetParseError, DuplicateSampleIdError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
