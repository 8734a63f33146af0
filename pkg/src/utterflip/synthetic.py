"""Deterministic synthetic suites for desk-scale experiments.

Generates furniture-style descriptions together with attribute-bag objects
arranged so the builtin listener misreads every original utterance. Each
sample hides a handful of "good" replacement words whose insertion raises
the target's score; most samples need two coordinated edits to flip, some
need only one. Lexicons and datasets are written in the package's standard
file formats.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

from .oracles import ObjectRef, SamplePair, reference_listener_score
from .sampling import Lexicons, Vocabulary
from .text import PosLexicon, PosTag, SynonymLexicon, tokenize

ADJECTIVES = (
    "small", "tiny", "little", "big", "large", "huge", "tall", "short",
    "wide", "narrow", "thin", "thick", "round", "flat", "long", "bent",
    "curved", "straight", "deep", "shallow", "slim", "bulky", "compact",
    "broad", "slender", "stout", "oblong", "angular", "smooth", "rough",
    "heavy", "light", "solid", "hollow", "open", "closed", "plain", "fancy",
    "low", "high", "boxy", "bumpy", "chunky", "coarse", "crooked", "dense",
    "dull", "elongated", "even", "firm", "fragile", "glossy", "grainy",
    "lean", "lumpy", "massive", "pointed", "rigid", "rounded", "rugged",
    "shiny", "sleek", "slanted", "sturdy", "tapered", "uneven", "upright",
    "wavy", "wobbly", "worn",
)

NOUNS = (
    "back", "seat", "legs", "leg", "arms", "arm", "base", "top", "frame",
    "shelf", "drawer", "door", "handle", "neck", "body", "edge", "surface",
    "lid", "panel", "rail",
)

VERBS = (
    "has", "have", "is", "looks", "seems", "features", "shows", "holds",
    "stands", "appears",
)

ADVERBS = ("very", "quite", "slightly", "really", "rather", "extremely", "fairly", "somewhat")

FILLERS = ("it", "a", "the", "and", "with", "this", "that", "its", "on", "of")


def _ring_synonyms(words: tuple[str, ...], width: int = 5) -> list[tuple[str, tuple[str, ...]]]:
    """Give every word ``width`` same-tag neighbors as its synonym set.

    The synthetic world needs uniform, dense coverage more than semantic
    plausibility: every content word must offer enough replacements for the
    synonym-pool strategy to fill an initial population.
    """
    n = len(words)
    rows = []
    for i, word in enumerate(words):
        syns = tuple(words[(i + d) % n] for d in range(1, width + 1))
        rows.append((word, syns))
    return rows


SYNONYM_ROWS = tuple(
    (word, tag, syns)
    for tag, vocab in (("ADJ", ADJECTIVES), ("NOUN", NOUNS), ("VERB", VERBS), ("ADV", ADVERBS))
    for word, syns in _ring_synonyms(vocab)
)

# Templates with two adjective slots; a two-word fix always exists.
_TEMPLATES = (
    "it {verb} a {adj1} {noun1} and a {adj2} {noun2}",
    "the {noun1} {verb} {adv} {adj1} and the {noun2} is {adj2}",
    "it is {adv} {adj1} with a {adj2} {noun1}",
    "this {noun1} {verb} a {adj1} {noun2} and is {adj2}",
)


def pos_lexicon_rows() -> list[tuple[str, str]]:
    rows = [(w, "ADJ") for w in ADJECTIVES]
    rows += [(w, "NOUN") for w in NOUNS]
    rows += [(w, "VERB") for w in VERBS]
    rows += [(w, "ADV") for w in ADVERBS]
    rows += [(w, "OTHER") for w in FILLERS]
    return rows


def build_pos_lexicon() -> PosLexicon:
    return PosLexicon({w: (PosTag(tag),) for w, tag in pos_lexicon_rows()})


def build_synonym_lexicon() -> SynonymLexicon:
    return SynonymLexicon({(w, PosTag(tag)): set(syns) for w, tag, syns in SYNONYM_ROWS})


def build_lexicons() -> Lexicons:
    """In-memory equivalent of loading the written suite's lexicon files."""
    pos = build_pos_lexicon()
    return Lexicons(
        pos=pos,
        synonyms=build_synonym_lexicon(),
        vocabulary=Vocabulary.from_pos_lexicon(pos),
    )


def sample_pair_from_record(record: dict, lexicon: PosLexicon) -> SamplePair:
    """Materialize a dataset record into a scored-ready sample pair."""
    return SamplePair(
        sample_id=record["sample_id"],
        target=ObjectRef(record["target_id"], record["target_attributes"]),
        distractor=ObjectRef(record["distractor_id"], record["distractor_attributes"]),
        original=tokenize(record["utterance"], lexicon),
    )


def write_pos_lexicon(path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# word<TAB>TAG1,TAG2,...\n")
        for word, tag in pos_lexicon_rows():
            fh.write(f"{word}\t{tag}\n")


def write_synonym_lexicon(path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# word<TAB>TAG<TAB>syn1,syn2,...\n")
        for word, tag, syns in SYNONYM_ROWS:
            fh.write(f"{word}\t{tag}\t{','.join(syns)}\n")


def _synonyms_of_word(word: str) -> tuple[str, ...]:
    for w, _tag, syns in SYNONYM_ROWS:
        if w == word:
            return syns
    return ()


def generate_dataset(
    count: int, seed: int, temperature: float = 1.0
) -> list[dict]:
    """Build ``count`` misclassified sample records, deterministically.

    Per sample, the two described adjectives favor the distractor (margin
    ``m1 + m2`` against the target) while three hidden vocabulary words carry
    a positive target margin. A small fraction of samples get one boosted
    word strong enough to flip on its own; the rest need two good words
    stacked without any drag words, which is where recombination pays off.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = random.Random(seed)
    lexicon = build_pos_lexicon()
    records = []
    for i in range(count):
        template = rng.choice(_TEMPLATES)
        adj1, adj2 = rng.sample(ADJECTIVES, 2)
        noun1, noun2 = rng.sample(NOUNS, 2)
        text = template.format(
            adj1=adj1,
            adj2=adj2,
            noun1=noun1,
            noun2=noun2,
            verb=rng.choice(("has", "is", "looks")),
            adv=rng.choice(ADVERBS),
        )

        m1 = 1.0 + 0.5 * rng.random()
        m2 = 1.0 + 0.5 * rng.random()
        target_attrs: dict[str, float] = {}
        distractor_attrs: dict[str, float] = {adj1: round(m1, 4), adj2: round(m2, 4)}

        utterance_words = set(text.split())
        candidates = [w for w in ADJECTIVES if w not in utterance_words]
        good: list[str] = []
        # Bias one good word toward a synonym of a described adjective so the
        # synonym-pool strategy stays viable on this suite.
        synonym_goods = [
            w
            for w in _synonyms_of_word(adj1) + _synonyms_of_word(adj2)
            if w in candidates
        ]
        if synonym_goods and rng.random() < 0.5:
            good.append(rng.choice(synonym_goods))
        while len(good) < 3:
            pick = rng.choice(candidates)
            if pick not in good:
                good.append(pick)

        easy = rng.random() < 0.15
        for j, word in enumerate(good):
            if easy and j == 0:
                gamma = min(m1, m2) + 0.25 + 0.3 * rng.random()
            else:
                gamma = 0.3 + 0.65 * rng.random()
            target_attrs[word] = round(gamma, 4)
        # Undirected edits should cost margin: most replacement words lean
        # toward the distractor, so stacking random changes drifts away from
        # a flip instead of toward one.
        for word in candidates:
            if word not in good and rng.random() < 0.8:
                distractor_attrs[word] = round(1.0 + 0.8 * rng.random(), 4)
        for word in NOUNS + VERBS + ADVERBS:
            if word not in utterance_words and rng.random() < 0.8:
                distractor_attrs[word] = round(1.0 + 0.8 * rng.random(), 4)

        record = {
            "sample_id": f"synth-{i:04d}",
            "target_id": f"obj-{i:04d}-t",
            "distractor_id": f"obj-{i:04d}-d",
            "utterance": text,
            "target_attributes": target_attrs,
            "distractor_attributes": distractor_attrs,
        }
        pair = sample_pair_from_record(record, lexicon)
        out = reference_listener_score(pair, pair.original, temperature)
        if out.p_target >= out.p_distractor:
            raise AssertionError(f"sample {i} not misclassified: {out}")
        records.append(record)
    return records


def write_suite(
    out_dir: str | Path, count: int, seed: int, temperature: float = 1.0
) -> dict[str, str]:
    """Write dataset plus lexicons into ``out_dir``; returns the file paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dataset_path = out / "dataset.jsonl"
    pos_path = out / "pos_lexicon.tsv"
    syn_path = out / "synonyms.tsv"
    with open(dataset_path, "w", encoding="utf-8") as fh:
        for record in generate_dataset(count, seed, temperature):
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    write_pos_lexicon(pos_path)
    write_synonym_lexicon(syn_path)
    return {
        "dataset": str(dataset_path),
        "pos_lexicon": str(pos_path),
        "synonyms": str(syn_path),
    }
