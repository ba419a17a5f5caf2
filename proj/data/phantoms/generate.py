#!/usr/bin/env python3
"""Regenerates the procedural raster fixtures in this directory.

kidney_labels.txt  7-region kidney-in-gelatin label map (100 x 100, 0.5 mm pixels)
abdomen.pgm        synthetic abdominal cross-section, 8-bit grayscale (128 x 128)
"""
import os

import numpy as np
from scipy import ndimage

here = os.path.dirname(os.path.abspath(__file__))


def kidney():
    n = 100
    px = 50.0 / n
    ys, xs = np.mgrid[0:n, 0:n]
    x = (xs + 0.5) * px
    y = 50.0 - (ys + 0.5) * px
    cx, cy, a, b = 24.0, 25.5, 14.0, 10.0
    rho = np.sqrt(((x - cx) / a) ** 2 + ((y - cy) / b) ** 2)
    theta = np.arctan2((y - cy) / b, (x - cx) / a)

    lab = np.zeros((n, n), dtype=int)
    inside = rho <= 1.0
    hilum_cut = np.hypot(x - (cx + a + 1.0), y - cy) < 6.5
    kidney = inside & ~hilum_cut

    lab[kidney] = 1  # cortex
    lab[kidney & (rho > 0.92)] = 5  # capsule
    sector = np.floor((theta + np.pi) / (2 * np.pi) * 7).astype(int)
    frac = (theta + np.pi) / (2 * np.pi) * 7 - sector
    pyramid = (frac > 0.18) & (frac < 0.82)
    lab[kidney & pyramid & (rho < 0.72) & (rho >= 0.48)] = 2  # outer medulla
    lab[kidney & pyramid & (rho < 0.48) & (rho >= 0.3)] = 3  # inner medulla
    sinus = kidney & (rho < 0.3)
    lab[sinus] = 4
    channel = (np.abs(y - cy) < 1.6) & (x > cx) & (x < cx + a) & ~(rho > 1.0)
    lab[(kidney | hilum_cut & inside) & channel] = 6  # hilum vessels
    lab[channel & (x < cx + a - 1.0) & (x > cx + 2.0)] = 6

    with open(os.path.join(here, "kidney_labels.txt"), "w") as f:
        f.write("# kidney label map: 0 gelatin, 1 cortex, 2 outer medulla, 3 inner medulla,\n")
        f.write("# 4 renal sinus, 5 capsule, 6 hilum vessels\n")
        f.write(f"{n} {n}\n")
        for row in lab:
            f.write(" ".join(str(v) for v in row) + "\n")


def abdomen():
    n = 128
    rng = np.random.default_rng(20180601)
    ys, xs = np.mgrid[0:n, 0:n]
    u = (xs + 0.5) / n * 2 - 1
    v = 1 - (ys + 0.5) / n * 2
    img = np.zeros((n, n))

    def ell(cx, cy, a, b, ang=0.0):
        c, s = np.cos(ang), np.sin(ang)
        du, dv = u - cx, v - cy
        return ((du * c + dv * s) / a) ** 2 + ((-du * s + dv * c) / b) ** 2 <= 1.0

    body = ell(0, 0, 0.96, 0.78)
    img[body] = 0.30  # subcutaneous fat
    img[ell(0, 0, 0.88, 0.70)] = 0.45  # muscle wall
    img[ell(0, 0.02, 0.80, 0.62)] = 0.38  # cavity
    # bowel loops
    for _ in range(26):
        cx, cy = rng.uniform(-0.55, 0.55), rng.uniform(-0.05, 0.5)
        r = rng.uniform(0.05, 0.11)
        loop = ell(cx, cy, r, r * rng.uniform(0.7, 1.3), rng.uniform(0, np.pi))
        img[loop & ell(0, 0.02, 0.80, 0.62)] = rng.uniform(0.25, 0.65)
    img[ell(-0.38, 0.18, 0.34, 0.26, 0.3)] = 0.78  # liver
    img[ell(0.45, 0.15, 0.16, 0.22, -0.4)] = 0.70  # spleen
    img[ell(-0.30, -0.32, 0.13, 0.19, 0.35)] = 0.62  # kidneys
    img[ell(0.30, -0.32, 0.13, 0.19, -0.35)] = 0.62
    img[ell(0.0, -0.42, 0.15, 0.13)] = 1.00  # vertebral body
    img[ell(0.0, -0.60, 0.06, 0.08)] = 0.92  # spinous process
    img[ell(0.0, -0.42, 0.05, 0.05)] = 0.55  # canal
    img[ell(0.07, -0.20, 0.05, 0.05)] = 0.88  # aorta
    img[ell(-0.09, -0.19, 0.06, 0.045)] = 0.72  # vena cava
    img[ell(0.42, -0.52, 0.16, 0.08, 0.5)] = 0.5  # paraspinal muscle
    img[ell(-0.42, -0.52, 0.16, 0.08, -0.5)] = 0.5
    img = ndimage.gaussian_filter(img, 0.9)
    img += ndimage.gaussian_filter(rng.normal(0.0, 0.05, img.shape), 1.2) * body
    img = np.clip(img, 0.0, None)
    img = np.round(img / img.max() * 255).astype(np.uint8)

    with open(os.path.join(here, "abdomen.pgm"), "wb") as f:
        f.write(b"P5\n# synthetic abdominal cross-section\n%d %d\n255\n" % (n, n))
        f.write(img.tobytes())


if __name__ == "__main__":
    kidney()
    abdomen()
