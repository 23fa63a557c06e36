#!/usr/bin/env python3
"""Convert the per-digit JSON files of the `mnist` npm package into IDX files.

Each input file <digit>.json holds {"data": [784 floats per image, ...]} with
pixels in [0, 1]. Images from all digits are shuffled with a fixed seed and
written as one IDX image file and one IDX label file.
"""

import argparse
import json
import random
import struct
from pathlib import Path


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("digits_dir", type=Path, help="directory containing 0.json .. 9.json")
    ap.add_argument("out_dir", type=Path)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    samples = []
    for digit in range(10):
        data = json.loads((args.digits_dir / f"{digit}.json").read_text())["data"]
        if len(data) % 784:
            raise SystemExit(f"{digit}.json: pixel count {len(data)} is not a multiple of 784")
        for i in range(0, len(data), 784):
            samples.append((digit, data[i : i + 784]))
    random.Random(args.seed).shuffle(samples)

    args.out_dir.mkdir(parents=True, exist_ok=True)
    n = len(samples)
    with open(args.out_dir / "images-idx3-ubyte", "wb") as img:
        img.write(struct.pack(">IIII", 0x803, n, 28, 28))
        for _, pixels in samples:
            img.write(bytes(round(min(max(p, 0.0), 1.0) * 255) for p in pixels))
    with open(args.out_dir / "labels-idx1-ubyte", "wb") as lab:
        lab.write(struct.pack(">II", 0x801, n))
        lab.write(bytes(d for d, _ in samples))
    print(f"wrote {n} images to {args.out_dir}")


if __name__ == "__main__":
    main()
