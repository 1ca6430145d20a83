#!/usr/bin/env python3
"""Build a small MNIST subset in IDX format from the npm `mnist` package.

The package (mnist@1.1.0) ships 10,000 digits as src/digits/<k>.json, each a
flat list of 28x28 intensities in [0, 1]. Every `--test-every`-th sample of
each class goes to the test split, the rest to the training split.

    npm pack mnist@1.1.0 && tar xzf mnist-1.1.0.tgz
    python3 tools/make_mnist_subset.py --src package/src/digits --out data/mnist-subset
"""

import argparse
import json
import pathlib
import struct

SIDE = 28


def write_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), SIDE, SIDE))
        for img in images:
            f.write(bytes(img))


def write_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--src", required=True, type=pathlib.Path, help="directory with 0.json .. 9.json")
    ap.add_argument("--out", required=True, type=pathlib.Path)
    ap.add_argument("--test-every", type=int, default=5)
    args = ap.parse_args()

    splits = {"train": ([], [], []), "test": ([], [], [])}
    for digit in range(10):
        flat = json.loads((args.src / f"{digit}.json").read_text())["data"]
        if len(flat) % (SIDE * SIDE):
            raise SystemExit(f"{digit}.json: length {len(flat)} is not a multiple of {SIDE * SIDE}")
        for i in range(len(flat) // (SIDE * SIDE)):
            pixels = flat[i * SIDE * SIDE:(i + 1) * SIDE * SIDE]
            img = [min(255, max(0, round(v * 255))) for v in pixels]
            split = "test" if i % args.test_every == args.test_every - 1 else "train"
            images, labels, ranks = splits[split]
            ranks.append(sum(1 for d in labels if d == digit))
            images.append(img)
            labels.append(digit)

    # Interleave classes deterministically so prefixes stay balanced.
    args.out.mkdir(parents=True, exist_ok=True)
    for split, prefix in (("train", "train"), ("test", "t10k")):
        images, labels, ranks = splits[split]
        order = sorted(range(len(labels)), key=lambda k: (ranks[k], labels[k]))
        write_images(args.out / f"{prefix}-images-idx3-ubyte", [images[k] for k in order])
        write_labels(args.out / f"{prefix}-labels-idx1-ubyte", [labels[k] for k in order])
        print(f"{split}: {len(labels)} images")


if __name__ == "__main__":
    main()
