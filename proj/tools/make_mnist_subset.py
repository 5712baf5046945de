#!/usr/bin/env python3
"""Write the 5000-image MNIST subset bundled with mlxtend as gzipped IDX files.

The subset has 500 images per digit. The first 400 of each digit go to the
train split and the remaining 100 to the test split.

    python3 tools/make_mnist_subset.py [out_dir]

mlxtend is imported if installed; otherwise its wheel is fetched with pip into
a temporary directory and read without installing it.
"""

import glob
import gzip
import io
import struct
import subprocess
import sys
import tempfile
import zipfile
from pathlib import Path

CSV_MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"
TRAIN_PER_CLASS = 400


def read_csv_bytes():
    try:
        import mlxtend.data

        return (Path(mlxtend.data.__file__).parent / "data" / "mnist_5k.csv.gz").read_bytes()
    except ImportError:
        pass
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "--no-deps", "-q", "-d", tmp, "mlxtend"],
            check=True,
        )
        wheel = glob.glob(str(Path(tmp) / "mlxtend-*.whl"))[0]
        return zipfile.ZipFile(wheel).read(CSV_MEMBER)


def write_idx(path, images, labels):
    n = len(labels)
    with gzip.GzipFile(path[0], "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x803, n, 28, 28))
        for row in images:
            f.write(bytes(row))
    with gzip.GzipFile(path[1], "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x801, n))
        f.write(bytes(labels))


def main():
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "data/mnist5k")
    out.mkdir(parents=True, exist_ok=True)
    text = gzip.decompress(read_csv_bytes()).decode()
    seen = [0] * 10
    split = {"train": ([], []), "test": ([], [])}
    for line in text.splitlines():
        fields = [int(float(v)) for v in line.split(",")]
        label = fields[-1]
        name = "train" if seen[label] < TRAIN_PER_CLASS else "test"
        seen[label] += 1
        split[name][0].append(fields[:-1])
        split[name][1].append(label)
    for name, (images, labels) in split.items():
        write_idx(
            (out / f"{name}-images-idx3-ubyte.gz", out / f"{name}-labels-idx1-ubyte.gz"),
            images,
            labels,
        )
        print(f"{name}: {len(labels)} images -> {out}")


if __name__ == "__main__":
    main()
