#!/usr/bin/env python3
"""Produce tokenizer parity goldens with the reference GPT-2 tokenizer.

Two independent references must agree on every fixture sentence: the
algorithm of OpenAI's released `encoder.py` (reproduced below) and
`transformers.GPT2Tokenizer`, both over assets/gpt2/{vocab.json,merges.txt}.
The `regex` module also provides the character-class table.

    python3 scripts/reference_tokenizer.py
"""
import json
import os

import regex
from transformers import GPT2Tokenizer

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def bytes_to_unicode():
    bs = list(range(ord("!"), ord("~") + 1)) + list(range(ord("¡"), ord("¬") + 1)) + list(range(ord("®"), ord("ÿ") + 1))
    cs = bs[:]
    n = 0
    for b in range(2**8):
        if b not in bs:
            bs.append(b)
            cs.append(2**8 + n)
            n += 1
    return dict(zip(bs, [chr(n) for n in cs]))


def get_pairs(word):
    pairs = set()
    prev = word[0]
    for char in word[1:]:
        pairs.add((prev, char))
        prev = char
    return pairs


class Encoder:
    """OpenAI gpt-2 src/encoder.py, without the cache."""

    def __init__(self, encoder, bpe_merges):
        self.encoder = encoder
        self.byte_encoder = bytes_to_unicode()
        self.bpe_ranks = dict(zip(bpe_merges, range(len(bpe_merges))))
        self.pat = regex.compile(r"""'s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+""")

    def bpe(self, token):
        word = tuple(token)
        pairs = get_pairs(word)
        if not pairs:
            return token
        while True:
            bigram = min(pairs, key=lambda pair: self.bpe_ranks.get(pair, float("inf")))
            if bigram not in self.bpe_ranks:
                break
            first, second = bigram
            new_word = []
            i = 0
            while i < len(word):
                try:
                    j = word.index(first, i)
                    new_word.extend(word[i:j])
                    i = j
                except ValueError:
                    new_word.extend(word[i:])
                    break
                if word[i] == first and i < len(word) - 1 and word[i + 1] == second:
                    new_word.append(first + second)
                    i += 2
                else:
                    new_word.append(word[i])
                    i += 1
            word = tuple(new_word)
            if len(word) == 1:
                break
            pairs = get_pairs(word)
        return " ".join(word)

    def encode(self, text):
        bpe_tokens = []
        for token in regex.findall(self.pat, text):
            token = "".join(self.byte_encoder[b] for b in token.encode("utf-8"))
            bpe_tokens.extend(self.encoder[t] for t in self.bpe(token).split(" "))
        return bpe_tokens


def ranges(pred):
    out, start = [], None
    for cp in range(0x110000):
        if 0xD800 <= cp <= 0xDFFF:
            ok = False
        else:
            ok = pred(chr(cp))
        if ok and start is None:
            start = cp
        elif not ok and start is not None:
            out.append([start, cp - 1])
            start = None
    if start is not None:
        out.append([start, 0x10FFFF])
    return out


def main():
    vocab_path = os.path.join(ROOT, "assets/gpt2/vocab.json")
    merges_path = os.path.join(ROOT, "assets/gpt2/merges.txt")
    tok = GPT2Tokenizer(vocab=vocab_path, merges=merges_path)
    with open(merges_path, encoding="utf-8") as f:
        bpe_data = f.read()
    merges = [tuple(line.split()) for line in bpe_data.split("\n")[1:-1]]
    openai = Encoder(json.load(open(vocab_path, encoding="utf-8")), merges)
    texts = json.load(open(os.path.join(ROOT, "fixtures/tokenizer/sentences.json")))
    golden = []
    for t in texts:
        ids = openai.encode(t)
        assert ids == tok.encode(t), t
        assert tok.decode(ids, clean_up_tokenization_spaces=False) == t, t
        golden.append({"text": t, "ids": ids})
    with open(os.path.join(ROOT, "fixtures/tokenizer/golden.json"), "w") as f:
        json.dump({"vocab_size": len(tok), "cases": golden}, f, ensure_ascii=False)
        f.write("\n")

    L = regex.compile(r"\p{L}")
    N = regex.compile(r"\p{N}")
    S = regex.compile(r"\s")
    table = {
        "regex_version": regex.__version__,
        "letter": ranges(lambda c: L.match(c) is not None),
        "number": ranges(lambda c: N.match(c) is not None),
        "space": ranges(lambda c: S.match(c) is not None),
    }
    with open(os.path.join(ROOT, "fixtures/tokenizer/char_classes.json"), "w") as f:
        json.dump(table, f)
        f.write("\n")


if __name__ == "__main__":
    main()
