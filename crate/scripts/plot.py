#!/usr/bin/env python3
"""Figures from cvqkd output directories.

    python3 scripts/plot.py OUT_DIR [--save PREFIX]

Draws whatever CSVs are present: fer_sweep.csv (FER against beta per model)
and campaign_summary.csv (mean SKR against beta per setting, adaptive as a
dashed line).
"""

import argparse
import os

import matplotlib

import pandas as pd


def fer_panel(ax, df):
    for model, g in df.groupby("model", sort=False):
        ax.errorbar(g["beta"], g["fer"], yerr=g["ci95"], marker="o", ms=3, capsize=2, label=model)
    ax.set_yscale("log")
    ax.set_xlabel("beta")
    ax.set_ylabel("FER")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()


def skr_panel(ax, df):
    for sid, g in df.groupby("setting_id"):
        fixed = g[g["mode"] == "fixed"]
        label = f"sigma_I={g['sigma_I'].iloc[0]}, beta_j={g['beta_jitter'].iloc[0]}"
        line = ax.errorbar(fixed["beta"], fixed["mean_skr"], yerr=fixed["ci95"], marker="o", ms=3, capsize=2, label=label)
        adaptive = g[g["mode"] == "adaptive"]
        if not adaptive.empty:
            ax.axhline(adaptive["mean_skr"].iloc[0], ls="--", color=line[0].get_color())
    ax.set_xlabel("beta")
    ax.set_ylabel("SKR (bits/symbol)")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize="small")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out_dir")
    ap.add_argument("--save", help="write PREFIX_fer.png / PREFIX_skr.png instead of showing")
    args = ap.parse_args()
    if args.save:
        matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    panels = [
        ("fer_sweep.csv", "fer", fer_panel),
        ("campaign_summary.csv", "skr", skr_panel),
    ]
    found = False
    for name, tag, draw in panels:
        path = os.path.join(args.out_dir, name)
        if not os.path.exists(path):
            continue
        found = True
        fig, ax = plt.subplots(figsize=(6, 4))
        draw(ax, pd.read_csv(path))
        fig.tight_layout()
        if args.save:
            fig.savefig(f"{args.save}_{tag}.png", dpi=150)
    if not found:
        raise SystemExit(f"no known CSVs in {args.out_dir}")
    if not args.save:
        plt.show()


if __name__ == "__main__":
    main()
