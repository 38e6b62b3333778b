#!/usr/bin/env python3
"""Builds the balanced MNIST subset in IDX format.

Source: the `mnist` npm package 1.1.0 (MIT, Copyright (c) 2015 Juan Cazala),
whose src/digits/<d>.json files hold flattened 28x28 digits as floats in [0, 1].

usage: make_subset.py <package>/src/digits <out-dir>
"""

import json
import struct
import sys
from pathlib import Path

TRAIN_PER_CLASS = 200
TEST_PER_CLASS = 50
SIDE = 28


def load_digits(src: Path):
    out = []
    for d in range(10):
        flat = json.loads((src / f"{d}.json").read_text())["data"]
        n = len(flat) // (SIDE * SIDE)
        out.append([flat[i * SIDE * SIDE:(i + 1) * SIDE * SIDE] for i in range(n)])
    return out


def write(out: Path, stem: str, images, labels):
    with open(out / f"{stem}-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 2051, len(images), SIDE, SIDE))
        for img in images:
            f.write(bytes(max(0, min(255, round(v * 255))) for v in img))
    with open(out / f"{stem}-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 2049, len(labels)))
        f.write(bytes(labels))


def main():
    src, out = Path(sys.argv[1]), Path(sys.argv[2])
    digits = load_digits(src)
    for stem, lo, hi in [("train", 0, TRAIN_PER_CLASS),
                         ("test", TRAIN_PER_CLASS, TRAIN_PER_CLASS + TEST_PER_CLASS)]:
        images, labels = [], []
        # interleave classes: index k * 10 + d holds the k-th selected image of digit d
        for k in range(lo, hi):
            for d in range(10):
                images.append(digits[d][k])
                labels.append(d)
        write(out, stem, images, labels)


if __name__ == "__main__":
    main()
