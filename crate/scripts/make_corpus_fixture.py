#!/usr/bin/env python3
"""Generate the synthetic CoNLL-U fixture corpus.

Sentences come from a handful of encyclopedic templates, each carrying a
hand-checked Universal Dependencies analysis (UPOS tags, heads, relations).
Output is deterministic for a given seed.

    python3 scripts/make_corpus_fixture.py > fixtures/corpus/synthetic.conllu
"""
import argparse
import random

NOUNS = ["engineer", "committee", "company", "architect", "council", "museum",
         "railway", "school", "expedition", "orchestra", "newspaper", "agency"]
OBJECTS = ["bridge", "library", "station", "report", "collection", "factory",
           "theatre", "canal", "hospital", "survey", "monument", "program"]
ADJS = ["old", "new", "large", "small", "regional", "famous", "modern", "local"]
VERBS = ["designed", "built", "opened", "acquired", "funded", "described",
         "restored", "completed", "expanded", "published"]
PLACES = [("Marietta", "Georgia"), ("Towson", "Maryland"), ("Amman", "Jordan"),
          ("Springfield", "Illinois"), ("Lyon", "France"), ("Perth", "Australia"),
          ("Dayton", "Ohio"), ("Kyoto", "Japan"), ("Salem", "Oregon")]
PEOPLE = ["Fisher", "Morgan", "Alvarez", "Okafor", "Lindqvist", "Tanaka",
          "Dubois", "Kowalski", "Hughes", "Moreau"]
ORGS = [(["Baptist", "World", "Alliance"], "BWA"),
        (["Australian", "Maritime", "Safety", "Authority"], "AMSA"),
        (["Environmental", "Protection", "Agency"], "EPA"),
        (["National", "Weather", "Service"], "NWS"),
        (["European", "Space", "Agency"], "ESA")]
YEARS = [str(y) for y in range(1851, 2011, 7)]


class Sentence:
    def __init__(self):
        self.tokens = []  # dicts

    def add(self, form, upos, head, deprel, space=True, xpos="_"):
        self.tokens.append(dict(form=form, upos=upos, head=head, deprel=deprel,
                                space=space, xpos=xpos))
        return len(self.tokens)

    def text(self):
        out = []
        for t in self.tokens:
            out.append(t["form"])
            if t["space"]:
                out.append(" ")
        return "".join(out).rstrip()


def no_space_before(s, idx):
    s.tokens[idx - 2]["space"] = False


def transitive(r):
    s = Sentence()
    # The ADJ NOUN VERB the OBJ in PLACE .
    adj = r.random() < 0.5
    s.add("The", "DET", 3 if adj else 2, "det")
    if adj:
        s.add(r.choice(ADJS), "ADJ", 3, "amod")
    subj = s.add(r.choice(NOUNS), "NOUN", None, "nsubj")
    verb = s.add(r.choice(VERBS), "VERB", 0, "root")
    s.tokens[subj - 1]["head"] = verb
    s.add(r.choice(["the", "a"]), "DET", verb + 2, "det")
    s.add(r.choice(OBJECTS), "NOUN", verb, "obj")
    s.add("in", "ADP", verb + 4, "case")
    s.add(r.choice(PLACES)[0], "PROPN", verb, "obl")
    dot = s.add(".", "PUNCT", verb, "punct")
    no_space_before(s, dot)
    return s


def place_comma(r):
    s = Sentence()
    city, region = r.choice(PLACES)
    if r.random() < 0.5:
        # Production began in CITY , REGION .
        subj = s.add(r.choice(["Production", "Construction", "Work"]), "NOUN", 2, "nsubj")
        verb = s.add("began", "VERB", 0, "root")
        s.add("in", "ADP", 4, "case")
    else:
        # PERSON was born in CITY , REGION .
        s.add(r.choice(PEOPLE), "PROPN", 3, "nsubj:pass")
        s.add("was", "AUX", 3, "aux:pass")
        verb = s.add("born", "VERB", 0, "root")
        s.add("in", "ADP", 5, "case")
    c = s.add(city, "PROPN", verb, "obl")
    comma = s.add(",", "PUNCT", c + 2, "punct")
    no_space_before(s, comma)
    s.add(region, "PROPN", c, "appos")
    dot = s.add(".", "PUNCT", verb, "punct")
    no_space_before(s, dot)
    return s


def acronym(r):
    s = Sentence()
    words, acr = r.choice(ORGS)
    head = 1 + len(words)  # index of the final org word, after "The"
    s.add("The", "DET", head, "det")
    for w in words[:-1]:
        s.add(w, "PROPN", head, "compound")
    s.add(words[-1], "PROPN", None, "nsubj")
    s.add("(", "PUNCT", head + 2, "punct")
    a = s.add(acr, "PROPN", head, "appos")
    no_space_before(s, a)
    close = s.add(")", "PUNCT", a, "punct")
    no_space_before(s, close)
    verb = s.add(r.choice(VERBS), "VERB", 0, "root")
    s.tokens[head - 1]["head"] = verb
    s.add("a", "DET", verb + 2, "det")
    s.add(r.choice(OBJECTS), "NOUN", verb, "obj")
    dot = s.add(".", "PUNCT", verb, "punct")
    no_space_before(s, dot)
    return s


def passive(r):
    s = Sentence()
    # The OBJ was VERB by the NOUN in YEAR .
    s.add("The", "DET", 2, "det")
    s.add(r.choice(OBJECTS), "NOUN", 4, "nsubj:pass")
    s.add("was", "AUX", 4, "aux:pass")
    verb = s.add(r.choice(VERBS), "VERB", 0, "root")
    s.add("by", "ADP", 7, "case")
    s.add("the", "DET", 7, "det")
    s.add(r.choice(NOUNS), "NOUN", verb, "obl:agent")
    s.add("in", "ADP", 9, "case")
    s.add(r.choice(YEARS), "NUM", verb, "obl")
    dot = s.add(".", "PUNCT", verb, "punct")
    no_space_before(s, dot)
    return s


def coordination(r):
    s = Sentence()
    a, b = r.sample(PEOPLE, 2)
    # A and B VERB the ADJ OBJ .
    s.add(a, "PROPN", 4, "nsubj")
    s.add("and", "CCONJ", 3, "cc")
    s.add(b, "PROPN", 1, "conj")
    verb = s.add(r.choice(VERBS), "VERB", 0, "root")
    s.add("the", "DET", 7, "det")
    s.add(r.choice(ADJS), "ADJ", 7, "amod")
    s.add(r.choice(OBJECTS), "NOUN", verb, "obj")
    dot = s.add(".", "PUNCT", verb, "punct")
    no_space_before(s, dot)
    return s


def relative(r):
    s = Sentence()
    # PERSON , who VERB the OBJ , VERB in YEAR .
    p = s.add(r.choice(PEOPLE), "PROPN", 8, "nsubj")
    c1 = s.add(",", "PUNCT", 4, "punct")
    no_space_before(s, c1)
    s.add("who", "PRON", 4, "nsubj")
    s.add(r.choice(VERBS), "VERB", p, "acl:relcl")
    s.add("the", "DET", 6, "det")
    s.add(r.choice(OBJECTS), "NOUN", 4, "obj")
    c2 = s.add(",", "PUNCT", 4, "punct")
    no_space_before(s, c2)
    verb = s.add(r.choice(["retired", "died", "moved", "returned"]), "VERB", 0, "root")
    s.add("in", "ADP", 10, "case")
    s.add(r.choice(YEARS), "NUM", verb, "obl")
    dot = s.add(".", "PUNCT", verb, "punct")
    no_space_before(s, dot)
    return s


def negation(r):
    s = Sentence()
    # The NOUN didn't approve the OBJ .   ("didn't" is a multiword token)
    s.add("The", "DET", 2, "det")
    s.add(r.choice(NOUNS), "NOUN", 5, "nsubj")
    did = s.add("did", "AUX", 5, "aux", space=False)
    s.add("n't", "PART", 5, "advmod")
    verb = s.add(r.choice(["approve", "fund", "restore", "publish"]), "VERB", 0, "root")
    s.add("the", "DET", 7, "det")
    s.add(r.choice(OBJECTS), "NOUN", verb, "obj")
    dot = s.add(".", "PUNCT", verb, "punct")
    no_space_before(s, dot)
    s.mwt = (did, did + 1, "didn't")
    return s


TEMPLATES = [transitive, place_comma, acronym, passive, coordination, relative, negation]


def render(s, sent_id):
    lines = [f"# sent_id = {sent_id}", f"# text = {s.text()}"]
    mwt = getattr(s, "mwt", None)
    for i, t in enumerate(s.tokens, start=1):
        if mwt and i == mwt[0]:
            space = s.tokens[mwt[1] - 1]["space"]
            misc = "_" if space else "SpaceAfter=No"
            lines.append(f"{mwt[0]}-{mwt[1]}\t{mwt[2]}\t_\t_\t_\t_\t_\t_\t_\t{misc}")
        in_mwt = mwt and mwt[0] <= i <= mwt[1]
        misc = "_" if (t["space"] or in_mwt) else "SpaceAfter=No"
        lemma = t["form"].lower() if t["upos"] != "PROPN" else t["form"]
        lines.append("\t".join([str(i), t["form"], lemma, t["upos"], t["xpos"], "_",
                                str(t["head"]), t["deprel"], "_", misc]))
    return "\n".join(lines) + "\n"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--seed", type=int, default=20190601)
    args = ap.parse_args()
    r = random.Random(args.seed)
    out = []
    for k in range(args.n):
        template = TEMPLATES[k % len(TEMPLATES)]
        out.append(render(template(r), f"syn-{k + 1:03d}"))
    print("\n".join(out), end="\n")


if __name__ == "__main__":
    main()
