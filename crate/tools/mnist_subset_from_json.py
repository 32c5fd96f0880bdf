#!/usr/bin/env python3
"""Build the desk-scale MNIST subset in IDX format.

Converts the 10,000 bundled MNIST samples from the `mnist` npm package
(https://github.com/cazala/mnist, pixel floats rounded to 3 decimals) back
into byte-exact IDX files. The rounding is injective on 0..255, so
round(v * 255) recovers the original pixel bytes.

Usage:
    python3 tools/mnist_subset_from_json.py <node_modules/mnist/src/digits> <out_dir>

Outputs train-images-idx3-ubyte / train-labels-idx1-ubyte plus SHA256SUMS.
The full dataset (60k train / 10k test) is fetched by tools/fetch_mnist.sh.
"""

import hashlib
import json
import struct
import sys
from pathlib import Path


def load_digit(digits_dir: Path, d: int):
    flat = json.loads((digits_dir / f"{d}.json").read_text())["data"]
    assert len(flat) % 784 == 0
    samples = []
    for i in range(len(flat) // 784):
        px = flat[i * 784 : (i + 1) * 784]
        row = bytes(round(v * 255) for v in px)
        # confirm the 3-decimal rounding is invertible
        for v, b in zip(px, row):
            assert abs(v - round(b / 255, 3)) < 1e-9, (v, b)
        samples.append(row)
    return samples


def main():
    digits_dir = Path(sys.argv[1])
    out_dir = Path(sys.argv[2])
    out_dir.mkdir(parents=True, exist_ok=True)

    per_digit = [load_digit(digits_dir, d) for d in range(10)]
    counts = [len(s) for s in per_digit]
    total = sum(counts)
    print("per-digit counts:", counts, "total:", total)

    # round-robin over digits so the file is not class-sorted
    images, labels = [], []
    for i in range(max(counts)):
        for d in range(10):
            if i < counts[d]:
                images.append(per_digit[d][i])
                labels.append(d)

    img_path = out_dir / "train-images-idx3-ubyte"
    lbl_path = out_dir / "train-labels-idx1-ubyte"
    with open(img_path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, total, 28, 28))
        for row in images:
            f.write(row)
    with open(lbl_path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, total))
        f.write(bytes(labels))

    with open(out_dir / "SHA256SUMS", "w") as f:
        for p in (img_path, lbl_path):
            h = hashlib.sha256(p.read_bytes()).hexdigest()
            f.write(f"{h}  {p.name}\n")
            print(h, p.name)


if __name__ == "__main__":
    main()
