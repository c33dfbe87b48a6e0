#!/usr/bin/env python3
# Copyright 2026 The FedRoad Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Builds the desk-scale digit subset in IDX format.

Source: the MNIST digits bundled in the `mnist` npm package
(`npm pack mnist && tar xzf mnist-*.tgz`), one JSON file per digit with
28x28 intensities in [0, 1]. The first TRAIN_PER_CLASS samples of each digit
go to the training split, the next TEST_PER_CLASS to the test split, with
classes interleaved so every prefix is roughly balanced.
"""
import argparse
import json
import os
import struct

TRAIN_PER_CLASS = 300
TEST_PER_CLASS = 100
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
    ap = argparse.ArgumentParser()
    ap.add_argument("package_dir", help="extracted npm `mnist` package")
    ap.add_argument("out_dir")
    args = ap.parse_args()

    per_digit = []
    for digit in range(10):
        with open(os.path.join(args.package_dir, "src", "digits", f"{digit}.json")) as f:
            raw = json.load(f)["data"]
        n = len(raw) // (SIDE * SIDE)
        samples = []
        for k in range(n):
            chunk = raw[k * SIDE * SIDE:(k + 1) * SIDE * SIDE]
            samples.append([min(255, max(0, int(round(v * 255)))) for v in chunk])
        per_digit.append(samples)

    def interleave(start, count):
        images, labels = [], []
        for k in range(start, start + count):
            for digit in range(10):
                images.append(per_digit[digit][k])
                labels.append(digit)
        return images, labels

    os.makedirs(args.out_dir, exist_ok=True)
    tr_x, tr_y = interleave(0, TRAIN_PER_CLASS)
    te_x, te_y = interleave(TRAIN_PER_CLASS, TEST_PER_CLASS)
    write_images(os.path.join(args.out_dir, "train-images-idx3-ubyte"), tr_x)
    write_labels(os.path.join(args.out_dir, "train-labels-idx1-ubyte"), tr_y)
    write_images(os.path.join(args.out_dir, "t10k-images-idx3-ubyte"), te_x)
    write_labels(os.path.join(args.out_dir, "t10k-labels-idx1-ubyte"), te_y)


if __name__ == "__main__":
    main()
