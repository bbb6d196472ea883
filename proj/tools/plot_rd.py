#!/usr/bin/env python3
"""Plot rate-distortion reports written by `ntc rdcurve -o report.json`.

    plot_rd.py report.json [more.json ...] -o rd.png

Each report becomes one curve; the label is the report's file name.
"""

import argparse
import json
import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def load(path):
    with open(path) as f:
        report = json.load(f)
    points = sorted(report["points"], key=lambda p: p["bpp"])
    return pathlib.Path(path).stem, points


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("reports", nargs="+")
    ap.add_argument("-o", "--output", default="rd.png")
    args = ap.parse_args()

    curves = [load(p) for p in args.reports]
    has_ssim = any(p["ms_ssim"] is not None for _, pts in curves for p in pts)
    fig, axes = plt.subplots(1, 2 if has_ssim else 1, figsize=(11 if has_ssim else 6, 4.5), squeeze=False)

    ax = axes[0][0]
    for label, pts in curves:
        xs = [p["bpp"] for p in pts if p["psnr"] is not None]
        ys = [p["psnr"] for p in pts if p["psnr"] is not None]
        ax.plot(xs, ys, marker="o", label=label)
    ax.set_xlabel("rate (bit/px)")
    ax.set_ylabel("PSNR (dB)")
    ax.grid(True, alpha=0.3)
    ax.legend()

    if has_ssim:
        ax = axes[0][1]
        for label, pts in curves:
            xs = [p["bpp"] for p in pts if p["ms_ssim"] is not None]
            ys = [p["ms_ssim"] for p in pts if p["ms_ssim"] is not None]
            ax.plot(xs, ys, marker="o", label=label)
        ax.set_xlabel("rate (bit/px)")
        ax.set_ylabel("MS-SSIM")
        ax.grid(True, alpha=0.3)
        ax.legend()

    fig.tight_layout()
    fig.savefig(args.output, dpi=120)
    print(args.output)


if __name__ == "__main__":
    main()
