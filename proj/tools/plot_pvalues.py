#!/usr/bin/env python3
"""Plots per-coordinate p-value trajectories from a fit run log (run.jsonl)."""

import argparse
import json

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("runlog", help="run.jsonl written by sindex-cli fit")
    ap.add_argument("--coords", default="1,2,3,4,5,6", help="1-based coordinates to draw")
    ap.add_argument("--alpha", type=float, default=0.05)
    ap.add_argument("--out", default="pvalues.png")
    args = ap.parse_args()

    coords = [int(c) for c in args.coords.split(",")]
    steps, pvals = [], {c: [] for c in coords}
    with open(args.runlog) as f:
        for line in f:
            if not line.strip():
                continue
            report = json.loads(line)
            steps.append(report["step"])
            entries = report["per_coordinate"]
            for c in coords:
                pvals[c].append(entries[c - 1]["p_value"])

    fig, ax = plt.subplots(figsize=(6, 4))
    for c in coords:
        ax.plot(steps, pvals[c], marker="o", label=f"coordinate {c}")
    ax.axhline(args.alpha, color="grey", linestyle="--", linewidth=1)
    ax.set_xlabel("batch index s")
    ax.set_ylabel("p-value")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)


if __name__ == "__main__":
    main()
