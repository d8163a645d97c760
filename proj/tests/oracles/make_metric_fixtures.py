#!/usr/bin/env python3
# Copyright 2026 The OmniSR Toolkit Authors.
#
#    Licensed under the Apache License, Version 2.0 (the "License");
#    you may not use this file except in compliance with the License.
#    You may obtain a copy of the License at
#
#         http://www.apache.org/licenses/LICENSE-2.0
#
#    Unless required by applicable law or agreed to in writing, software
#    distributed under the License is distributed on an "AS IS" BASIS,
#    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
#    See the License for the specific language governing permissions and
#    limitations under the License.
"""Generates the metric fixtures and their reference values.

Writes two 8-bit RGB PNGs (a smooth pattern and a noisy copy) plus
reference_metrics.txt holding luma PSNR and SSIM computed with numpy and
scikit-image, shave 4. Also writes a larger test image and the PSNR of its
x4 bicubic down/up round trip, using a bicubic written here from the kernel
definition (Catmull-Rom a = -0.5, support widened when shrinking, edge
clamping, half-pixel centres). Run from the repository root:

    python3 tests/oracles/make_metric_fixtures.py
"""

import pathlib

import numpy as np
from PIL import Image
from skimage.metrics import structural_similarity

SHAVE = 4
OUT = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


def luma(rgb):
    rgb = rgb.astype(np.float64) / 255.0
    return (65.481 * rgb[..., 0] + 128.553 * rgb[..., 1] + 24.966 * rgb[..., 2] + 16.0) / 255.0


def cubic(x, a=-0.5):
    x = np.abs(x)
    return np.where(x <= 1, (a + 2) * x**3 - (a + 3) * x**2 + 1,
                    np.where(x < 2, a * x**3 - 5 * a * x**2 + 8 * a * x - 4 * a, 0.0))


def resize_axis(img, out_len, axis):
    in_len = img.shape[axis]
    ratio = in_len / out_len
    stretch = max(ratio, 1.0)
    weights = np.zeros((out_len, in_len))
    for o in range(out_len):
        centre = (o + 0.5) * ratio - 0.5
        lo = int(np.floor(centre - 2 * stretch)) + 1
        hi = int(np.ceil(centre + 2 * stretch)) - 1
        taps = np.arange(lo, hi + 1)
        w = cubic((taps - centre) / stretch)
        w /= w.sum()
        np.add.at(weights[o], np.clip(taps, 0, in_len - 1), w)
    return np.moveaxis(np.tensordot(weights, np.moveaxis(img, axis, 0), axes=1), 0, axis)


def bicubic(img, out_h, out_w):
    return resize_axis(resize_axis(img, out_h, 0), out_w, 1)


def main():
    rng = np.random.default_rng(2026)
    h, w = 40, 48
    yy, xx = np.mgrid[0:h, 0:w]
    base = np.stack([
        128 + 100 * np.sin(xx / 5.0) * np.cos(yy / 7.0),
        128 + 90 * np.cos((xx + yy) / 9.0),
        60 + 2.5 * xx + 1.5 * yy,
    ], axis=-1)
    ref = np.clip(np.round(base), 0, 255).astype(np.uint8)
    noisy = np.clip(np.round(base + rng.normal(0, 6, base.shape)), 0, 255).astype(np.uint8)
    OUT.mkdir(parents=True, exist_ok=True)
    Image.fromarray(ref, "RGB").save(OUT / "metric_ref.png")
    Image.fromarray(noisy, "RGB").save(OUT / "metric_test.png")

    a = luma(ref)[SHAVE:-SHAVE, SHAVE:-SHAVE]
    b = luma(noisy)[SHAVE:-SHAVE, SHAVE:-SHAVE]
    mse = np.mean((a - b) ** 2)
    psnr = 10 * np.log10(1.0 / mse)
    ssim = structural_similarity(a, b, data_range=1.0, gaussian_weights=True, sigma=1.5,
                                 use_sample_covariance=False)
    # Set5-sized stand-in: 8-bit HR, float LR, SR clamped to [0, 1].
    hh, hw = 96, 128
    yy, xx = np.mgrid[0:hh, 0:hw]
    scene = np.stack([
        120 + 90 * np.sin(xx / 6.0 + yy / 11.0),
        130 + 80 * np.cos(np.hypot(xx - 60, yy - 40) / 5.0),
        100 + 70 * np.sign(np.sin(xx / 9.0)) * np.cos(yy / 13.0),
    ], axis=-1)
    scene += rng.normal(0, 3, scene.shape)
    hr8 = np.clip(np.round(scene), 0, 255).astype(np.uint8)
    Image.fromarray(hr8, "RGB").save(OUT / "bicubic_hr.png")
    hr = hr8.astype(np.float64) / 255.0
    lr = bicubic(hr, hh // 4, hw // 4)
    sr = np.clip(bicubic(lr, hh, hw), 0.0, 1.0)
    ya = luma(hr * 255.0)[SHAVE:-SHAVE, SHAVE:-SHAVE]
    yb = luma(sr * 255.0)[SHAVE:-SHAVE, SHAVE:-SHAVE]
    bicubic_psnr = 10 * np.log10(1.0 / np.mean((ya - yb) ** 2))

    (OUT / "reference_metrics.txt").write_text(
        f"psnr {psnr:.10f}\nssim {ssim:.10f}\nbicubic_x4_psnr {bicubic_psnr:.10f}\n")
    print(f"psnr {psnr:.6f} ssim {ssim:.6f} bicubic_x4_psnr {bicubic_psnr:.6f}")


if __name__ == "__main__":
    main()
