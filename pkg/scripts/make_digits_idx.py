#!/usr/bin/env python3
"""Export the bundled scikit-learn 8x8 digits dataset as IDX files.

Produces images-idx3-ubyte / labels-idx1-ubyte in the same binary format
as the standard MNIST distribution, so the full pipeline (IDX parsing,
binarization, PCA, training) can run end to end without a network
download. Pixel intensities (0..16) are rescaled to the 0..255 range.
"""
import argparse
import os
import struct

import numpy as np
from sklearn.datasets import load_digits


def write_idx_images(path, images):
    images = np.asarray(images, dtype=np.uint8)
    n, rows, cols = images.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, rows, cols))
        f.write(images.tobytes())


def write_idx_labels(path, labels):
    labels = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, labels.shape[0]))
        f.write(labels.tobytes())


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="data", help="output directory")
    args = parser.parse_args()

    bunch = load_digits()
    images = np.round(bunch.images * (255.0 / 16.0)).astype(np.uint8)
    labels = bunch.target.astype(np.uint8)

    os.makedirs(args.out, exist_ok=True)
    img_path = os.path.join(args.out, "images-idx3-ubyte")
    lab_path = os.path.join(args.out, "labels-idx1-ubyte")
    write_idx_images(img_path, images)
    write_idx_labels(lab_path, labels)
    print(f"wrote {img_path} ({images.shape[0]} images, "
          f"{images.shape[1]}x{images.shape[2]})")
    print(f"wrote {lab_path}")


if __name__ == "__main__":
    main()
