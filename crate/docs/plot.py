"""Render the CSV series written by `fgsan plot-data`.

usage: python docs/plot.py PLOT_DIR [OUT_DIR]
"""

import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def loss_curves(plot_dir: Path, out_dir: Path) -> None:
    for path in sorted(plot_dir.glob("loss_curve*.csv")):
        df = pd.read_csv(path)
        fig, (ax_loss, ax_acc) = plt.subplots(1, 2, figsize=(10, 4))
        ax_loss.plot(df["epoch"], df["train_loss"], label="total")
        ax_loss.plot(df["epoch"], df["train_bce"], label="bce")
        ax_loss.plot(df["epoch"], df["train_kl"], label="kl")
        ax_loss.set_xlabel("epoch")
        ax_loss.set_ylabel("training loss")
        ax_loss.legend()
        ax_acc.plot(df["epoch"], df["val_acc"])
        ax_acc.set_xlabel("epoch")
        ax_acc.set_ylabel("validation accuracy")
        ax_acc.set_ylim(0, 1)
        fig.suptitle(path.stem)
        fig.tight_layout()
        fig.savefig(out_dir / f"{path.stem}.png", dpi=120)
        plt.close(fig)


def metric_bars(plot_dir: Path, out_dir: Path) -> None:
    path = plot_dir / "metric_bars.csv"
    if not path.exists():
        return
    df = pd.read_csv(path)
    means = df.pivot(index="metric", columns="variant", values="mean")
    stds = df.pivot(index="metric", columns="variant", values="std")
    order = [m for m in ["acc", "prec", "sen", "spec"] if m in means.index]
    ax = means.loc[order].plot.bar(yerr=stds.loc[order], capsize=3, figsize=(8, 4), rot=0)
    ax.set_ylabel("score")
    ax.set_ylim(0, 1)
    ax.figure.tight_layout()
    ax.figure.savefig(out_dir / "metric_bars.png", dpi=120)
    plt.close(ax.figure)


def main() -> None:
    if len(sys.argv) < 2:
        sys.exit(__doc__)
    plot_dir = Path(sys.argv[1])
    out_dir = Path(sys.argv[2]) if len(sys.argv) > 2 else plot_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    loss_curves(plot_dir, out_dir)
    metric_bars(plot_dir, out_dir)


if __name__ == "__main__":
    main()
