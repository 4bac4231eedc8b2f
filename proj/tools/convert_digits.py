#!/usr/bin/env python3
"""Convert third-party digit dumps into the loaders' on-disk formats.

Two converters:

  mnist-json DIGITS_DIR OUT_DIR [--train N] [--test N]
      DIGITS_DIR holds one JSON file per class (0.json .. 9.json), each a
      {"data": [...]} dict whose value is a flat list of pixel floats in
      [0, 1], 784 per image (the layout shipped by the npm "mnist" package).
      Emits IDX files (train-images-idx3-ubyte, train-labels-idx1-ubyte,
      test-images-idx3-ubyte, test-labels-idx1-ubyte). Images are interleaved
      round-robin across classes, so any prefix is close to class-balanced;
      the first N_train images become the train split, the next N_test the
      test split. Floats are mapped back to bytes with round(v * 255), which
      is exact for this source.

  usps-text TRAIN_TXT TEST_TXT OUT_DIR
      TRAIN_TXT/TEST_TXT are the widely circulated USPS text files
      (often named zip.train / zip.test, optionally gzipped): one record per
      line, a float class label followed by 256 floats in [-1, 1] for a
      16x16 image. Emits train.usps / test.usps containers:
      "USPS" magic, little-endian uint32 count/height/width, count*256
      float32 pixels in [0, 1] (mapped via (v + 1) / 2), then count label
      bytes.
"""

import argparse
import gzip
import json
import struct
import sys
from pathlib import Path


def write_idx_images(path: Path, images: list[bytes], rows: int, cols: int) -> None:
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(images), rows, cols))
        for img in images:
            f.write(img)


def write_idx_labels(path: Path, labels: list[int]) -> None:
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x801, len(labels)))
        f.write(bytes(labels))


def convert_mnist_json(digits_dir: Path, out_dir: Path, n_train: int, n_test: int) -> None:
    per_class: list[list[bytes]] = []
    for c in range(10):
        flat = json.load(open(digits_dir / f"{c}.json"))["data"]
        if len(flat) % 784 != 0:
            raise SystemExit(f"{c}.json: length {len(flat)} is not a multiple of 784")
        imgs = []
        for i in range(0, len(flat), 784):
            imgs.append(bytes(round(v * 255) for v in flat[i : i + 784]))
        per_class.append(imgs)

    interleaved: list[tuple[int, bytes]] = []
    cursors = [0] * 10
    while any(cursors[c] < len(per_class[c]) for c in range(10)):
        for c in range(10):
            if cursors[c] < len(per_class[c]):
                interleaved.append((c, per_class[c][cursors[c]]))
                cursors[c] += 1

    if len(interleaved) < n_train + n_test:
        raise SystemExit(
            f"only {len(interleaved)} images available, need {n_train + n_test}"
        )
    train = interleaved[:n_train]
    test = interleaved[n_train : n_train + n_test]

    out_dir.mkdir(parents=True, exist_ok=True)
    write_idx_images(out_dir / "train-images-idx3-ubyte", [i for _, i in train], 28, 28)
    write_idx_labels(out_dir / "train-labels-idx1-ubyte", [c for c, _ in train])
    write_idx_images(out_dir / "test-images-idx3-ubyte", [i for _, i in test], 28, 28)
    write_idx_labels(out_dir / "test-labels-idx1-ubyte", [c for c, _ in test])
    print(f"wrote {n_train} train / {n_test} test images to {out_dir}")


def read_usps_text(path: Path) -> tuple[list[int], list[list[float]]]:
    opener = gzip.open if path.suffix == ".gz" else open
    labels, images = [], []
    with opener(path, "rt") as f:
        for lineno, line in enumerate(f, 1):
            fields = line.split()
            if not fields:
                continue
            if len(fields) != 257:
                raise SystemExit(f"{path}:{lineno}: expected 257 fields, got {len(fields)}")
            labels.append(int(float(fields[0])))
            pixels = [(float(v) + 1.0) / 2.0 for v in fields[1:]]
            if not all(0.0 <= p <= 1.0 for p in pixels):
                raise SystemExit(f"{path}:{lineno}: pixel outside [-1, 1]")
            images.append(pixels)
    return labels, images


def write_usps(path: Path, labels: list[int], images: list[list[float]]) -> None:
    with open(path, "wb") as f:
        f.write(b"USPS")
        f.write(struct.pack("<III", len(images), 16, 16))
        for img in images:
            f.write(struct.pack(f"<{len(img)}f", *img))
        f.write(bytes(labels))


def convert_usps_text(train_txt: Path, test_txt: Path, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for src, dst in ((train_txt, "train.usps"), (test_txt, "test.usps")):
        labels, images = read_usps_text(src)
        write_usps(out_dir / dst, labels, images)
        print(f"wrote {len(images)} images to {out_dir / dst}")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_mnist = sub.add_parser("mnist-json", help="per-class JSON dumps -> IDX")
    p_mnist.add_argument("digits_dir", type=Path)
    p_mnist.add_argument("out_dir", type=Path)
    p_mnist.add_argument("--train", type=int, default=8000)
    p_mnist.add_argument("--test", type=int, default=2000)

    p_usps = sub.add_parser("usps-text", help="zip.train/zip.test text -> USPS container")
    p_usps.add_argument("train_txt", type=Path)
    p_usps.add_argument("test_txt", type=Path)
    p_usps.add_argument("out_dir", type=Path)

    args = parser.parse_args()
    if args.command == "mnist-json":
        convert_mnist_json(args.digits_dir, args.out_dir, args.train, args.test)
    else:
        convert_usps_text(args.train_txt, args.test_txt, args.out_dir)


if __name__ == "__main__":
    sys.exit(main())
