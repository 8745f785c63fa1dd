"""Regenerate the bundled JSON corpus from the builder functions."""
import argparse
from pathlib import Path

from likefair.corpus import CORPUS_DIR, write_corpus


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=CORPUS_DIR)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    for path in write_corpus(args.out):
        print(path)


if __name__ == "__main__":
    main()
