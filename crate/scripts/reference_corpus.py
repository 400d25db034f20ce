#!/usr/bin/env python3
"""Word counts of the fixture corpus according to the `conllu` package.

    python3 scripts/reference_corpus.py
"""
import json
import os

import conllu

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def main():
    path = os.path.join(ROOT, "fixtures/corpus/synthetic.conllu")
    sents = conllu.parse(open(path, encoding="utf-8").read())
    out = [
        {
            "sent_id": s.metadata.get("sent_id"),
            "text": s.metadata.get("text"),
            "words": sum(1 for t in s if isinstance(t["id"], int)),
        }
        for s in sents
    ]
    with open(os.path.join(ROOT, "fixtures/corpus/reference_word_counts.json"), "w") as f:
        json.dump(out, f, indent=1)
        f.write("\n")


if __name__ == "__main__":
    main()
