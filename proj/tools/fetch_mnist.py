#!/usr/bin/env python3
"""Build MNIST-format IDX files from the `mnist` npm package.

The package ships 10,000 MNIST digits as JSON (pixel intensities in [0, 1],
784 per image, one file per class). They are pooled, shuffled with a fixed
seed and split 8,000 / 2,000 into train-* and t10k-* IDX files (gzip).

    python3 tools/fetch_mnist.py [--out data/mnist] [--package DIR]

Without --package, `npm pack mnist@1.1.0` fetches the package.
"""

import argparse
import gzip
import json
import pathlib
import random
import struct
import subprocess
import tarfile
import tempfile

PIXELS = 784


def load_digits(package_dir):
    images, labels = [], []
    for digit in range(10):
        path = package_dir / "src" / "digits" / f"{digit}.json"
        flat = json.loads(path.read_text())["data"]
        if len(flat) % PIXELS:
            raise SystemExit(f"{path}: {len(flat)} values is not a multiple of {PIXELS}")
        for i in range(0, len(flat), PIXELS):
            images.append(bytes(min(255, max(0, round(v * 255))) for v in flat[i:i + PIXELS]))
            labels.append(digit)
    return images, labels


def write_idx(path, magic, dims, payload):
    with gzip.GzipFile(path, "wb", compresslevel=9, mtime=0) as f:
        f.write(struct.pack(">I", magic))
        for d in dims:
            f.write(struct.pack(">I", d))
        f.write(payload)


def fetch_package(workdir):
    subprocess.run(["npm", "pack", "mnist@1.1.0", "--silent"], cwd=workdir, check=True,
                   stdout=subprocess.DEVNULL)
    tgz = next(pathlib.Path(workdir).glob("mnist-*.tgz"))
    with tarfile.open(tgz) as t:
        t.extractall(workdir)
    return pathlib.Path(workdir) / "package"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="data/mnist")
    ap.add_argument("--package", help="unpacked npm package directory")
    ap.add_argument("--train", type=int, default=8000)
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        pkg = pathlib.Path(args.package) if args.package else fetch_package(tmp)
        images, labels = load_digits(pkg)

    order = list(range(len(images)))
    random.Random(args.seed).shuffle(order)
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for stem, idx in (("train", order[:args.train]), ("t10k", order[args.train:])):
        write_idx(out / f"{stem}-images-idx3-ubyte.gz", 0x803, (len(idx), 28, 28),
                  b"".join(images[i] for i in idx))
        write_idx(out / f"{stem}-labels-idx1-ubyte.gz", 0x801, (len(idx),),
                  bytes(labels[i] for i in idx))
        print(f"{out}/{stem}-*: {len(idx)} images")


if __name__ == "__main__":
    main()
