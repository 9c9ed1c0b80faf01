#!/usr/bin/env python3
"""Fetch and convert the lexical resources shipped under data/.

Sources:
  * NRC Emotion Lexicon (EmoLex), as bundled in the `nrclex` wheel on PyPI.
  * Princeton WordNet 3.1 database files, as bundled in the `wordnet-db`
    package on npm.

Outputs (all UTF-8, one record per line):
  emolex.tsv          word<TAB>emotion<TAB>0|1   (EmoLex word-level layout)
  synonyms.tsv        word<TAB>synonym           (WordNet synset co-members)
  wordnet_sentences.txt  glosses and usage examples, one sentence per line
"""
import argparse
import json
import re
import subprocess
import sys
import tarfile
import tempfile
import zipfile
from pathlib import Path

EMOTIONS = ["anger", "anticipation", "disgust", "fear", "joy", "negative",
            "positive", "sadness", "surprise", "trust"]
WORD_RE = re.compile(r"^[a-z][a-z'-]*$")


def fetch_nrclex(work: Path) -> dict:
    subprocess.run([sys.executable, "-m", "pip", "download", "--no-deps",
                    "--dest", str(work), "nrclex==4.1.0"], check=True)
    wheel = next(work.glob("nrclex-*.whl"))
    with zipfile.ZipFile(wheel) as zf:
        return json.loads(zf.read("nrclex/data/nrc_en.json"))


def fetch_wordnet(work: Path) -> Path:
    subprocess.run(["npm", "pack", "wordnet-db@3.1.14"], cwd=work, check=True)
    tgz = next(work.glob("wordnet-db-*.tgz"))
    with tarfile.open(tgz) as tf:
        tf.extractall(work)
    return work / "package" / "dict"


def parse_synsets(dict_dir: Path):
    """Yields (lemmas, gloss) per synset."""
    for pos in ("noun", "verb", "adj", "adv"):
        with open(dict_dir / f"data.{pos}", encoding="utf-8") as fh:
            for line in fh:
                if line.startswith("  "):
                    continue
                head, _, gloss = line.partition(" | ")
                fields = head.split()
                count = int(fields[3], 16)
                lemmas = []
                for i in range(count):
                    lemma = fields[4 + 2 * i].lower()
                    lemma = re.sub(r"\(.*\)$", "", lemma)
                    lemmas.append(lemma)
                yield lemmas, gloss.strip()


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data"))
    ap.add_argument("--max-sentences", type=int, default=40000)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    with tempfile.TemporaryDirectory() as tmp:
        work = Path(tmp)
        lex = fetch_nrclex(work)
        dict_dir = fetch_wordnet(work)

        words = sorted(w for w in lex if WORD_RE.match(w))
        with open(out / "emolex.tsv", "w", encoding="utf-8") as fh:
            for w in words:
                labels = set(lex[w])
                for e in EMOTIONS:
                    fh.write(f"{w}\t{e}\t{1 if e in labels else 0}\n")

        vocab = set(words)
        pairs = set()
        sentences = []
        for lemmas, gloss in parse_synsets(dict_dir):
            singles = [l for l in lemmas if WORD_RE.match(l)]
            for w in singles:
                if w not in vocab:
                    continue
                for s in singles:
                    if s != w:
                        pairs.add((w, s))
            for part in gloss.split(";"):
                part = part.strip().strip('"').strip()
                if len(part.split()) >= 3:
                    sentences.append(part)
        with open(out / "synonyms.tsv", "w", encoding="utf-8") as fh:
            for w, s in sorted(pairs):
                fh.write(f"{w}\t{s}\n")
        # Deterministic thinning keeps the file small while spanning all POS files.
        step = max(1, len(sentences) // args.max_sentences)
        with open(out / "wordnet_sentences.txt", "w", encoding="utf-8") as fh:
            for s in sentences[::step][: args.max_sentences]:
                fh.write(s.replace("\n", " ") + "\n")
    print(f"emolex words: {len(words)}, synonym pairs: {len(pairs)}, "
          f"sentences written: {min(len(sentences[::step]), args.max_sentences)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
