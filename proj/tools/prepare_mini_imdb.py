#!/usr/bin/env python3
"""Build the mini-IMDB substitute corpus, 100-d embeddings and a WordNet lexicon.

Sources are two public movie-review polarity corpora and the WordNet 3
database files, all fetched as Python source distributions through pip:

  pattern3==3.0.0  test/corpora/polarity-en-pang&lee{1,2}.csv
  wn==0.0.23       wn/data/wordnet-3.3/{data,index}.* and *.exc

Outputs under --out:
  train/{pos,neg}/<id>.txt, test/{pos,neg}/<id>.txt
  vectors.txt   word2vec skip-gram vectors (GloVe text layout)
  lexicon.tsv   lemma<TAB>syn1,syn2,...
"""

import argparse
import csv
import io
import random
import re
import subprocess
import sys
import tarfile
import zlib
from pathlib import Path

SOURCES = {
    "pattern3": "pattern3-3.0.0.tar.gz",
    "wn": "wn-0.0.23.tar.gz",
}
PINS = ["pattern3==3.0.0", "wn==0.0.23"]
REVIEWS = "pattern3-3.0.0/test/corpora/polarity-en-pang&lee1.csv"
SENTENCES = "pattern3-3.0.0/test/corpora/polarity-en-pang&lee2.csv"
WN_DIR = "wn-0.0.23/wn/data/wordnet-3.3/"
POS = ["noun", "verb", "adj", "adv"]


def fetch(cache: Path) -> dict:
    cache.mkdir(parents=True, exist_ok=True)
    missing = [pin for pin, name in zip(PINS, SOURCES.values()) if not (cache / name).exists()]
    if missing:
        cmd = [sys.executable, "-m", "pip", "download", "--no-deps", "--no-binary", ":all:", "-d", str(cache)]
        subprocess.run(cmd + missing, check=True, stdout=subprocess.DEVNULL)
    return {key: tarfile.open(cache / name) for key, name in SOURCES.items()}


def read_member(tar: tarfile.TarFile, name: str) -> str:
    return tar.extractfile(name).read().decode("utf-8-sig")


def read_polarity(text: str):
    rows = []
    for rec in csv.reader(io.StringIO(text)):
        if len(rec) != 2:
            continue
        label = {"1": "pos", "-1": "neg"}.get(rec[0].strip())
        body = " ".join(rec[1].split())
        if label and body:
            rows.append((label, body))
    return rows


# Approximates the C++ tokenizer closely enough for embedding training:
# clitics split off, punctuation separated, inner hyphens/apostrophes kept.
CLITIC = re.compile(r"(?i)^(.+?)(n't|'ll|'re|'ve|'s|'m|'d)$")
PIECE = re.compile(r"\.\.\.|--|\w+(?:[-'’.,:]\w+)*'?|'\w+|[^\w\s]")


def tokenize(text: str):
    out = []
    for piece in PIECE.findall(text):
        m = CLITIC.match(piece)
        if m and m.group(1):
            out.extend([m.group(1), m.group(2)])
        elif len(piece) > 1 and piece.endswith("'") and not piece.startswith("'"):
            out.extend([piece[:-1], "'"])
        else:
            out.append(piece)
    return [t.lower() for t in out]


def train_vectors(docs, out: Path, seed: int, dim: int):
    from gensim.models import Word2Vec

    model = Word2Vec(
        sentences=docs, vector_size=dim, window=5, min_count=1, sg=1, negative=5,
        epochs=20, workers=1, seed=seed, hashfxn=lambda s: zlib.crc32(s.encode("utf-8")),
    )
    with out.open("w", encoding="utf-8") as f:
        for word in sorted(model.wv.key_to_index):
            vec = " ".join(f"{x:.6f}" for x in model.wv[word])
            f.write(f"{word} {vec}\n")


class WordNet:
    def __init__(self, tar: tarfile.TarFile):
        self.synsets = {}  # (pos, offset) -> [lemma, ...]
        self.index = {}  # (pos, lemma) -> [offset, ...]
        self.exc = {}  # (pos, inflected) -> [base, ...]
        for pos in POS:
            for line in read_member(tar, WN_DIR + "data." + pos).splitlines():
                if not line or line.startswith(" "):
                    continue
                f = line.split()
                n = int(f[3], 16)
                words = [re.sub(r"\(.*\)$", "", f[4 + 2 * i]).lower() for i in range(n)]
                self.synsets[(pos, f[0])] = words
            for line in read_member(tar, WN_DIR + "index." + pos).splitlines():
                if not line or line.startswith(" "):
                    continue
                f = line.split()
                n_ptr = int(f[3])
                n_sense = int(f[2])
                offsets = f[6 + n_ptr:6 + n_ptr + n_sense]
                self.index[(pos, f[0])] = offsets
            for line in read_member(tar, WN_DIR + pos + ".exc").splitlines():
                f = line.split()
                if len(f) >= 2:
                    self.exc[(pos, f[0])] = f[1:]

    RULES = {
        "noun": [("s", ""), ("ses", "s"), ("xes", "x"), ("zes", "z"), ("ches", "ch"), ("shes", "sh"),
                 ("men", "man"), ("ies", "y")],
        "verb": [("s", ""), ("ies", "y"), ("es", "e"), ("es", ""), ("ed", "e"), ("ed", ""), ("ing", "e"),
                 ("ing", "")],
        "adj": [("er", ""), ("est", ""), ("er", "e"), ("est", "e")],
        "adv": [],
    }

    def base_forms(self, word: str, pos: str):
        forms = []
        if (pos, word) in self.index:
            forms.append(word)
        for base in self.exc.get((pos, word), []):
            if (pos, base) in self.index and base not in forms:
                forms.append(base)
        for suffix, repl in self.RULES[pos]:
            if word.endswith(suffix) and len(word) > len(suffix):
                base = word[: len(word) - len(suffix)] + repl
                if (pos, base) in self.index and base not in forms:
                    forms.append(base)
        return forms

    def synonyms(self, word: str):
        out = []
        for pos in POS:
            for base in self.base_forms(word, pos):
                for off in self.index[(pos, base)]:
                    for lemma in self.synsets.get((pos, off), []):
                        if "_" in lemma or lemma == word or lemma in out:
                            continue
                        out.append(lemma)
        return out


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", required=True, type=Path)
    ap.add_argument("--cache", type=Path, default=None, help="where the source archives are kept")
    ap.add_argument("--seed", type=int, default=13)
    ap.add_argument("--test-size", type=int, default=1000)
    ap.add_argument("--dim", type=int, default=100)
    args = ap.parse_args()

    out = args.out
    stamp = out / ".complete"
    if stamp.exists():
        print(f"{out} already prepared")
        return 0
    tars = fetch(args.cache or out / "cache")

    reviews = read_polarity(read_member(tars["pattern3"], REVIEWS))
    sentences = read_polarity(read_member(tars["pattern3"], SENTENCES))
    rows = [("r", i, lab, body) for i, (lab, body) in enumerate(reviews)]
    rows += [("s", i, lab, body) for i, (lab, body) in enumerate(sentences)]
    rng = random.Random(args.seed)
    rng.shuffle(rows)
    test, train = rows[: args.test_size], rows[args.test_size:]

    for split, part in (("train", train), ("test", test)):
        for lab in ("pos", "neg"):
            (out / split / lab).mkdir(parents=True, exist_ok=True)
        for kind, i, lab, body in part:
            (out / split / lab / f"{kind}{i:05d}.txt").write_text(body + "\n", encoding="utf-8")

    train_tokens = [tokenize(body) for _, _, _, body in train]
    train_vectors(train_tokens, out / "vectors.txt", args.seed, args.dim)

    wn = WordNet(tars["wn"])
    words = set()
    for _, _, _, body in rows:
        words.update(t for t in tokenize(body) if t.isalpha())
    with (out / "lexicon.tsv").open("w", encoding="utf-8") as f:
        for word in sorted(words):
            syns = wn.synonyms(word)
            if syns:
                f.write(word + "\t" + ",".join(syns) + "\n")

    stamp.write_text("ok\n")
    print(f"train {len(train)} / test {len(test)} examples written to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
