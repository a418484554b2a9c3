#!/usr/bin/env python3
"""Export the 8x8 optical digits dataset to the CSV layout read by `load_digits_csv`.

Each line holds 64 raw pixel intensities (0-16) followed by the integer label.
The training split is the 80% side of a seeded train/test split, which gives
1437 samples. A 50-row miniature of the same split is written for tests.

    python3 scripts/export_digits.py            # writes data/digits_train.csv + data/digits_mini.csv
    python3 scripts/export_digits.py --out x.csv --rows 200
"""
import argparse
import csv
import pathlib

from sklearn.datasets import load_digits
from sklearn.model_selection import train_test_split


def write(path, features, labels, header):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header:
            w.writerow([f"pixel{i}" for i in range(64)] + ["label"])
        for row, label in zip(features, labels):
            w.writerow([int(v) for v in row] + [int(label)])


def main():
    root = pathlib.Path(__file__).resolve().parent.parent
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", type=pathlib.Path)
    ap.add_argument("--rows", type=int)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    digits = load_digits()
    x_train, _, y_train, _ = train_test_split(
        digits.data, digits.target, test_size=0.2, random_state=args.seed
    )
    if args.out is not None:
        n = args.rows or len(y_train)
        write(args.out, x_train[:n], y_train[:n], header=True)
        return
    write(root / "data" / "digits_train.csv", x_train, y_train, header=True)
    write(root / "data" / "digits_mini.csv", x_train[:50], y_train[:50], header=False)


if __name__ == "__main__":
    main()
