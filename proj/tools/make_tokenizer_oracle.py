#!/usr/bin/env python3
"""Freeze reference treebank tokenizations of 100 sentences.

Sentences come from the tagged OANC sample shipped in the pattern3 sdist,
detokenized back to running text. Output: raw<TAB>space-joined tokens.
"""

import sys
import tarfile

from nltk.tokenize import TreebankWordTokenizer
from nltk.tokenize.treebank import TreebankWordDetokenizer

MEMBER = "pattern3-3.0.0/test/corpora/tagged-en-oanc.txt"


def main(archive, out_path):
    text = tarfile.open(archive).extractfile(MEMBER).read().decode("utf-8")
    detok, tok = TreebankWordDetokenizer(), TreebankWordTokenizer()
    picked = []
    for line in text.splitlines():
        words = [w.rsplit("/", 1)[0] for w in line.split()]
        if not 6 <= len(words) <= 40:
            continue
        raw = detok.detokenize(words)
        if "\t" in raw:
            continue
        picked.append((raw, tok.tokenize(raw)))
    # Prefer sentences exercising clitics, quotes and numbers, then fill up.
    tricky = [p for p in picked if any(c in p[0] for c in "'\"$%") or any(ch.isdigit() for ch in p[0])]
    plain = [p for p in picked if p not in tricky]
    chosen = tricky[:60] + plain[: 100 - min(60, len(tricky))]
    with open(out_path, "w", encoding="utf-8") as f:
        for raw, toks in chosen[:100]:
            f.write(raw + "\t" + " ".join(toks) + "\n")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
