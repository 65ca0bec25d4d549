#!/usr/bin/env python3
"""Generate the synthetic portrait corpus used by the face scenario.

Each class is a fixed composition of smooth blobs (a face-like template);
images within a class add seeded per-image intensity jitter and a small
translation, so classes overlap but stay separable. Deterministic output.
"""

import argparse
import pathlib

import numpy as np


def class_template(rng, size):
    yy, xx = np.mgrid[0:size, 0:size].astype(float) / size
    img = np.zeros((size, size))
    for _ in range(rng.integers(4, 7)):
        cx, cy = rng.uniform(0.15, 0.85, 2)
        sx, sy = rng.uniform(0.05, 0.25, 2)
        amp = rng.uniform(0.4, 1.0)
        img += amp * np.exp(-((xx - cx) ** 2 / (2 * sx**2) + (yy - cy) ** 2 / (2 * sy**2)))
    return img / img.max()


def jitter(rng, template):
    shift = rng.integers(-1, 2, size=2)
    img = np.roll(template, shift, axis=(0, 1))
    img = img * rng.uniform(0.85, 1.15) + rng.normal(0.0, 0.03, img.shape)
    return np.clip(img, 0.0, 1.0)


def write_pgm(path, img):
    gray = np.round(img * 255).astype(int)
    lines = [f"{' '.join(str(v) for v in row)}" for row in gray]
    path.write_text("P2\n{} {}\n255\n{}\n".format(img.shape[1], img.shape[0], "\n".join(lines)))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="data/faces", type=pathlib.Path)
    ap.add_argument("--classes", default=5, type=int)
    ap.add_argument("--per-class", default=10, type=int)
    ap.add_argument("--size", default=24, type=int)
    ap.add_argument("--seed", default=20260814, type=int)
    args = ap.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    for c in range(args.classes):
        template = class_template(rng, args.size)
        for i in range(args.per_class):
            write_pgm(args.out / f"s{c:02d}_{i}.pgm", jitter(rng, template))
    print(f"wrote {args.classes * args.per_class} images to {args.out}")


if __name__ == "__main__":
    main()
