#!/usr/bin/env python3
"""Plot the CSV outputs of `clc sweep-beta`, `clc learn-beta` and `clc compare`.

Usage: plot_figures.py [--sweep DIR] [--learn DIR] [--compare DIR] [--out DIR]
"""

import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def plot_sweep(src: Path, out: Path) -> None:
    df = pd.read_csv(src / "sweep.csv")
    fig, ax = plt.subplots(figsize=(6, 4))
    for (a_true, group), color in zip(df.groupby("a_true"), plt.rcParams["axes.prop_cycle"].by_key()["color"]):
        ok = group[group.status == "ok"]
        ax.plot(ok.beta_1, ok.J_r, "o-", ms=3, color=color, label=f"A = {a_true:g}")
        ax.axhline(group.riccati_optimal.iloc[0], color=color, ls="--", lw=0.8)
    ax.set_xlabel(r"$\beta_1$")
    ax.set_ylabel(r"$J_r$")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out / "sweep_beta.png", dpi=150)


def plot_learn(src: Path, out: Path) -> None:
    df = pd.read_csv(src / "beta_trace.csv")
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(df.k, df.beta_1, "o-", ms=3)
    ax.set_xlabel("iteration")
    ax.set_ylabel(r"$\beta_1$")
    fig.tight_layout()
    fig.savefig(out / "beta_trace.png", dpi=150)


def plot_compare(src: Path, out: Path) -> None:
    df = pd.read_csv(src / "compare.csv")
    fig, ax = plt.subplots(figsize=(6, 4))
    for method, group in df.groupby("method"):
        # Median best-so-far cost across seeds on the union of episode counts.
        curves = [g.set_index("episodes").best_Jr for _, g in group.groupby("seed")]
        grid = sorted(set().union(*(c.index for c in curves)))
        aligned = pd.concat([c.reindex(grid).ffill() for c in curves], axis=1)
        ax.plot(grid, aligned.median(axis=1), label=method)
    ax.axhline(df.riccati_optimal.iloc[0], color="k", ls="--", lw=0.8, label="optimal")
    ax.set_xscale("log")
    ax.set_xlabel("episodes")
    ax.set_ylabel(r"best $J_r$ so far")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out / "compare.png", dpi=150)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sweep", type=Path)
    parser.add_argument("--learn", type=Path)
    parser.add_argument("--compare", type=Path)
    parser.add_argument("--out", type=Path, default=Path("."))
    args = parser.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    if args.sweep:
        plot_sweep(args.sweep, args.out)
    if args.learn:
        plot_learn(args.learn, args.out)
    if args.compare:
        plot_compare(args.compare, args.out)


if __name__ == "__main__":
    main()
