#!/usr/bin/env python3
"""Convert the digits shipped with the npm `mnist` package into IDX files.

The package stores each class as a JSON file {"data": [...]} holding flattened
28x28 images with intensities in [0,1] rounded to three decimals. Values are
mapped back to bytes (x * 255, rounded) and the classes are interleaved with a
fixed shuffle so the file is not sorted by class.

usage: npm_mnist_to_idx.py <package dir> <output dir>
"""
import json
import pathlib
import struct
import sys

import numpy as np


def main() -> int:
    if len(sys.argv) != 3:
        print(__doc__, file=sys.stderr)
        return 2
    pkg = pathlib.Path(sys.argv[1])
    out = pathlib.Path(sys.argv[2])
    digits = pkg / "src" / "digits"
    images, labels = [], []
    for d in range(10):
        flat = np.asarray(json.loads((digits / f"{d}.json").read_text())["data"], dtype=np.float64)
        if flat.size % 784:
            raise SystemExit(f"{d}.json: length {flat.size} is not a multiple of 784")
        block = flat.reshape(-1, 784)
        images.append(np.clip(np.rint(block * 255.0), 0, 255).astype(np.uint8))
        labels.append(np.full(block.shape[0], d, dtype=np.uint8))
    X = np.concatenate(images)
    y = np.concatenate(labels)
    order = np.random.default_rng(0).permutation(len(y))
    X, y = X[order], y[order]

    out.mkdir(parents=True, exist_ok=True)
    with open(out / "mnist-images.idx", "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(y), 28, 28))
        f.write(X.tobytes())
    with open(out / "mnist-labels.idx", "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(y)))
        f.write(y.tobytes())
    counts = np.bincount(y, minlength=10)
    print(f"wrote {len(y)} images; per class {counts.tolist()}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
