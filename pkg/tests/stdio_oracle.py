"""Toy oracle worker speaking the line-oriented JSON protocol on stdin/stdout.

Deterministic rules:
  listener  p_target = 0.8 if the utterance contains "tiny", else 0.2
  embed     3-dim bag: [#tokens, #"tiny", #"small"]
  propose   fixed word list, filtered against the original word
  judge     grammatical unless "bad" appears; label "similar"

Modes (argv[1]): "ok" (default), "crash2" (exit after 2 replies),
"garbage" (reply with non-JSON), "skewed" (listener probabilities sum to
1 + 5e-7, inside the renormalization window).
"""

import json
import sys


def respond(request: dict, mode: str) -> dict:
    kind = request["kind"]
    if kind == "listener":
        words = request["utterance"].split()
        p = 0.8 if "tiny" in words else 0.2
        if mode == "skewed":
            return {"p_target": p, "p_distractor": 1.0 - p + 5e-7}
        return {"p_target": p, "p_distractor": 1.0 - p}
    if kind == "embed":
        words = request["utterance"].split()
        return {"vector": [float(len(words)), float(words.count("tiny")), float(words.count("small"))]}
    if kind == "propose":
        words = ["tiny", "little", "compact", "petite", "slight"]
        return {"words": [w for w in words if w != request["original_word"]][: request["k"]]}
    if kind == "judge":
        grammatical = "bad" not in request["candidate"].split()
        return {
            "grammatical": grammatical,
            "grammar_reason": "" if grammatical else "contains bad",
            "similarity": "similar",
            "similarity_reason": "toy rule",
        }
    raise ValueError(f"unknown kind {kind!r}")


def main() -> None:
    mode = sys.argv[1] if len(sys.argv) > 1 else "ok"
    replies = 0
    for line in sys.stdin:
        if not line.strip():
            continue
        if mode == "garbage":
            print("not json at all")
            sys.stdout.flush()
            continue
        request = json.loads(line)
        print(json.dumps(respond(request, mode)))
        sys.stdout.flush()
        replies += 1
        if mode == "crash2" and replies >= 2:
            sys.exit(1)


if __name__ == "__main__":
    main()
