#!/usr/bin/env python3
"""Regenerate crates/core/tests/data/chrf_golden.jsonl.

Scores come from SacreBLEU's CHRF(word_order=2) with default settings,
one sentence-level score per (hypothesis, reference) pair.
"""
import json
import random
import sys

from sacrebleu.metrics import CHRF

WORDS = (
    "the cat sat on mat a dog ran quickly over lazy fox house garden "
    "tree river bank money bank's don't can't it's über straße café "
    "naïve 東京 日本語 данные мир hello world (hi) \"quoted\" end. "
    "well, yes! no? maybe; co-op e-mail 3.14 100% $5 #tag @user"
).split()

PUNCT = list(".,!?;:()\"'-")


def sentence(rng):
    n = rng.randint(0, 18)
    toks = [rng.choice(WORDS) for _ in range(n)]
    if toks and rng.random() < 0.5:
        toks[-1] = toks[-1] + rng.choice(PUNCT)
    if toks and rng.random() < 0.2:
        toks[0] = rng.choice(PUNCT) + toks[0]
    sep = rng.choice([" ", " ", " ", "  ", "\t", "  "])
    return sep.join(toks)


def perturb(rng, s):
    toks = s.split(" ")
    out = []
    for t in toks:
        r = rng.random()
        if r < 0.1:
            continue
        if r < 0.2:
            out.append(rng.choice(WORDS))
        elif r < 0.25:
            out.append(t)
            out.append(rng.choice(WORDS))
        elif r < 0.3 and len(t) > 1:
            i = rng.randrange(len(t))
            out.append(t[:i] + t[i + 1:])
        else:
            out.append(t)
    return " ".join(out)


def main():
    rng = random.Random(20230601)
    pairs = [
        ("the cat sat", "the cat sat"),
        ("", "the cat sat"),
        ("the cat sat", ""),
        ("", ""),
        ("a", "a"),
        ("a", "b"),
        ("ab", "abc"),
        ("x.", "x ."),
        ("(hi)", "( hi )"),
        ("   ", "the"),
    ]
    while len(pairs) < 200:
        ref = sentence(rng)
        hyp = perturb(rng, ref) if rng.random() < 0.85 else sentence(rng)
        pairs.append((hyp, ref))
    chrf = CHRF(word_order=2)
    out = sys.stdout
    for hyp, ref in pairs:
        score = chrf.sentence_score(hyp, [ref]).score
        out.write(json.dumps({"hypothesis": hyp, "reference": ref, "score": score},
                             ensure_ascii=False) + "\n")


if __name__ == "__main__":
    main()
