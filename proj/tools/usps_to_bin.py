#!/usr/bin/env python3
"""Pack USPS digits into the little-endian container the loader reads.

Accepted inputs:
  usps.h5           groups train/ and test/ with datasets data (N x 256) and target
  usps / usps.t     libsvm text, labels 1..10 (mapped to 0..9), values in [-1,1]
Several inputs are concatenated in the order given (train + test = 9298 samples).

usage: usps_to_bin.py <output.bin> <input> [<input> ...]
"""
import pathlib
import struct
import sys

import numpy as np

MAGIC = 0x53505355


def read_h5(path):
    import h5py

    xs, ys = [], []
    with h5py.File(path, "r") as f:
        for split in ("train", "test"):
            if split in f:
                xs.append(np.asarray(f[split]["data"], dtype=np.float64))
                ys.append(np.asarray(f[split]["target"], dtype=np.int64))
    return np.concatenate(xs), np.concatenate(ys)


def read_libsvm(path):
    rows, labels = [], []
    for line in pathlib.Path(path).read_text().splitlines():
        parts = line.split()
        if not parts:
            continue
        labels.append(int(float(parts[0])) - 1)
        row = np.zeros(256)
        for item in parts[1:]:
            k, v = item.split(":")
            row[int(k) - 1] = float(v)
        rows.append(row)
    return np.asarray(rows), np.asarray(labels)


def main() -> int:
    if len(sys.argv) < 3:
        print(__doc__, file=sys.stderr)
        return 2
    xs, ys = [], []
    for name in sys.argv[2:]:
        X, y = read_h5(name) if name.endswith((".h5", ".hdf5")) else read_libsvm(name)
        xs.append(X)
        ys.append(y)
    X = np.concatenate(xs).astype(np.float32)
    y = np.concatenate(ys).astype(np.uint32)
    if X.shape[1] != 256:
        raise SystemExit(f"expected 256 pixels per sample, got {X.shape[1]}")
    with open(sys.argv[1], "wb") as f:
        f.write(struct.pack("<III", MAGIC, X.shape[0], X.shape[1]))
        f.write(X.astype("<f4").tobytes())
        f.write(y.astype("<u4").tobytes())
    print(f"wrote {X.shape[0]} samples")
    return 0


if __name__ == "__main__":
    sys.exit(main())
