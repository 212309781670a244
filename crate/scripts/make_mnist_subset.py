#!/usr/bin/env python3
"""Write a class-balanced MNIST subset as IDX files.

Source: the 5,000-image MNIST CSV bundled with the `mlxtend` wheel
(mlxtend/data/data/mnist_5k.csv.gz, 500 images per digit, one row of
784 pixels followed by the label).

    pip download mlxtend --no-deps -d /tmp/mlx
    python3 -c "import zipfile; zipfile.ZipFile(next(__import__('glob').iglob('/tmp/mlx/*.whl'))).extractall('/tmp/mlx')"
    python3 scripts/make_mnist_subset.py /tmp/mlx/mlxtend/data/data/mnist_5k.csv.gz data/mnist 200
"""
import gzip
import random
import struct
import sys
from pathlib import Path


def main():
    src, out_dir, per_class = sys.argv[1], Path(sys.argv[2]), int(sys.argv[3])
    rows = [list(map(int, r.split(","))) for r in gzip.open(src, "rt").read().split()]
    by_class = {}
    for r in rows:
        by_class.setdefault(r[-1], []).append(r[:-1])
    picked = [(pix, lab) for lab in sorted(by_class) for pix in by_class[lab][:per_class]]
    random.Random(0).shuffle(picked)
    out_dir.mkdir(parents=True, exist_ok=True)
    n = len(picked)
    with open(out_dir / "train-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x803, n, 28, 28))
        for pix, _ in picked:
            f.write(bytes(pix))
    with open(out_dir / "train-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x801, n))
        f.write(bytes(lab for _, lab in picked))
    print(f"wrote {n} images to {out_dir}")


if __name__ == "__main__":
    main()
