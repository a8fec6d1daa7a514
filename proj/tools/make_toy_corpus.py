#!/usr/bin/env python3
"""Regenerates the bundled toy sentiment corpus and synonym lexicon.

Label 1 is positive, 0 negative. Output is deterministic for a given seed.
"""
import argparse
import json
import random
from pathlib import Path

POSITIVE = ["great", "wonderful", "excellent", "brilliant", "superb", "delightful", "amazing", "fantastic",
            "charming", "beautiful", "clever", "funny", "engaging", "gripping", "memorable", "moving"]
NEGATIVE = ["awful", "terrible", "boring", "dull", "bad", "horrible", "tedious", "clumsy",
            "lifeless", "bland", "painful", "weak", "messy", "forgettable", "silly", "tiresome"]

# Faint praise leans negative and offbeat descriptions lean positive, both only mildly.
HEDGE = ["passable", "adequate", "serviceable", "tolerable", "acceptable", "ordinary", "routine", "standard"]
OFFBEAT = ["unconventional", "restrained", "understated", "offbeat", "unusual", "raw", "quiet", "spare"]

NOUNS = ["film", "movie", "plot", "story", "cast", "acting", "script", "ending", "soundtrack", "director",
         "dialogue", "pacing", "camera", "lead", "villain", "premise", "finale", "score", "editing", "sequel"]
VERBS = ["was", "is", "felt", "seemed", "looked", "became", "remained", "sounded"]
FILLER = ["honestly", "overall", "really", "at times", "in the end", "for the most part", "to me", "again"]
OPENERS = ["i thought", "we agreed", "my friend said", "critics claimed", "it turns out", "frankly"]

LEXICON = {
    "great": ["passable", "adequate", "ordinary"],
    "wonderful": ["tolerable", "acceptable", "passable"],
    "excellent": ["serviceable", "adequate", "standard"],
    "brilliant": ["routine", "ordinary", "acceptable"],
    "superb": ["standard", "serviceable", "tolerable"],
    "delightful": ["acceptable", "routine", "passable"],
    "amazing": ["ordinary", "adequate", "standard"],
    "fantastic": ["passable", "routine", "serviceable"],
    "charming": ["tolerable", "ordinary", "adequate"],
    "beautiful": ["acceptable", "standard", "serviceable"],
    "clever": ["routine", "passable", "tolerable"],
    "funny": ["adequate", "ordinary", "acceptable"],
    "engaging": ["serviceable", "standard", "routine"],
    "gripping": ["tolerable", "passable", "ordinary"],
    "memorable": ["adequate", "acceptable", "standard"],
    "moving": ["routine", "serviceable", "tolerable"],
    "awful": ["unconventional", "raw", "unusual"],
    "terrible": ["offbeat", "understated", "quiet"],
    "boring": ["restrained", "quiet", "spare"],
    "dull": ["understated", "spare", "restrained"],
    "bad": ["unusual", "raw", "offbeat"],
    "horrible": ["unconventional", "offbeat", "raw"],
    "tedious": ["spare", "restrained", "quiet"],
    "clumsy": ["raw", "unusual", "unconventional"],
    "lifeless": ["quiet", "understated", "spare"],
    "bland": ["restrained", "understated", "quiet"],
    "painful": ["raw", "unconventional", "unusual"],
    "weak": ["spare", "quiet", "offbeat"],
    "messy": ["unusual", "raw", "unconventional"],
    "forgettable": ["understated", "restrained", "offbeat"],
    "silly": ["offbeat", "unusual", "quiet"],
    "tiresome": ["restrained", "spare", "understated"],
    "film": ["picture", "feature"],
    "movie": ["picture", "flick"],
    "story": ["tale", "narrative"],
    "plot": ["storyline"],
    "script": ["screenplay"],
    "ending": ["conclusion"],
    "cast": ["ensemble"],
    "really": ["truly", "quite"],
    "honestly": ["frankly"],
    "felt": ["seemed"],
}


def clause(rng, adjectives):
    det = rng.choice(["the", "this", "that", "its"])
    parts = [det, rng.choice(NOUNS), rng.choice(VERBS)]
    if rng.random() < 0.3:
        parts.append(rng.choice(["very", "quite", "rather", "so"]))
    parts.append(adjectives[0])
    if len(adjectives) > 1:
        parts += ["and", adjectives[1]]
    return " ".join(parts)


def review(rng, label):
    main, other = (POSITIVE, NEGATIVE) if label == 1 else (NEGATIVE, POSITIVE)
    flavor = OFFBEAT if label == 1 else HEDGE
    if rng.random() < 0.3:
        flavor = HEDGE if label == 1 else OFFBEAT
    adjectives = rng.sample(main, rng.choice([1, 1, 2, 2, 3]))
    if rng.random() < 0.35:
        adjectives.append(rng.choice(flavor))
    contrast = None
    if rng.random() < 0.15:
        contrast = rng.choice(other)
    rng.shuffle(adjectives)

    clauses = []
    while adjectives:
        take = 2 if len(adjectives) > 1 and rng.random() < 0.4 else 1
        clauses.append(clause(rng, adjectives[:take]))
        adjectives = adjectives[take:]
    if contrast is not None:
        clauses.insert(rng.randrange(len(clauses) + 1), clause(rng, [contrast]))
    while sum(len(c.split()) for c in clauses) < 8:
        clauses.append(" ".join([rng.choice(["the", "a"]), rng.choice(NOUNS), "had", "its", "moments"]))

    text = ""
    for i, c in enumerate(clauses):
        if i > 0:
            text += rng.choice([", and ", ", but ", ". ", " and ", "; "])
        text += c
    if rng.random() < 0.4:
        text = rng.choice(OPENERS) + " " + text
    if rng.random() < 0.4:
        text += " " + rng.choice(FILLER)
    text += rng.choice([".", ".", "!", "...", ""])
    return text[0].upper() + text[1:]


def corpus(rng, n, flip_rate):
    rows = []
    for i in range(n):
        label = i % 2
        text = review(rng, label)
        if rng.random() < flip_rate:
            label = 1 - label
        rows.append({"text": text, "label": label})
    rng.shuffle(rows)
    return rows


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as f:
        for r in rows:
            f.write(json.dumps(r, ensure_ascii=False) + "\n")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data"))
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(args.seed)
    write_jsonl(out / "toy_train.jsonl", corpus(rng, 800, 0.03))
    write_jsonl(out / "toy_attack.jsonl", corpus(rng, 800, 0.0))
    write_jsonl(out / "toy_transfer.jsonl", corpus(rng, 400, 0.0))
    with open(out / "lexicon.tsv", "w", encoding="utf-8") as f:
        f.write("# word<TAB>comma-separated synonyms\n")
        for word, syns in LEXICON.items():
            f.write(word + "\t" + ",".join(syns) + "\n")


if __name__ == "__main__":
    main()
