"""Optional PNG figures drawn from the CSV outputs of a run."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

_META = {"Software": None}


def _save(fig, out, name):
    fig.tight_layout()
    fig.savefig(out.path(f"figures/{name}.png"), dpi=100, metadata=_META)
    plt.close(fig)


def _weekly(out, df):
    df = df[df["area"] == "all"]
    topics = [c for c in df.columns if c not in ("area", "week", "hotspots", "total", "excluded")]
    fig, ax = plt.subplots(figsize=(9, 4))
    ax.bar(range(len(df)), df["hotspots"], color="0.75", label="hotspots")
    ax.set_ylabel("hotspots per week")
    ax.set_xticks(range(len(df)))
    ax.set_xticklabels(df["week"], rotation=90, fontsize=6)
    ax2 = ax.twinx()
    for t in topics:
        ax2.plot(range(len(df)), df[t], marker=".", label=t)
    ax2.set_ylabel("posts per week")
    ax2.legend(loc="upper left", fontsize=7)
    _save(fig, out, "weekly_series")


def _pdf(out, label, df):
    fig, ax = plt.subplots(figsize=(6, 4))
    for direction, g in df.groupby("direction", sort=True):
        ax.step(g["bin_start"], g["density"], where="post", label=direction)
    ax.set_xlabel("distance (km)")
    ax.set_ylabel("density")
    ax.set_title(label)
    ax.legend(fontsize=7)
    _save(fig, out, f"distance_pdf_{label}")


def _cdfs(out, frames):
    fig, ax = plt.subplots(figsize=(6, 4))
    for cls, df in frames:
        if len(df):
            ax.step(df["distance_km"], df["cdf"], where="post", label=cls)
    ax.set_xscale("symlog")
    ax.set_xlabel("centroid distance (km)")
    ax.set_ylabel("CDF")
    ax.legend(fontsize=7)
    _save(fig, out, "distance_cdf")


def _diversity(out, df):
    fig, ax = plt.subplots(figsize=(8, 4))
    x = range(len(df))
    ax.bar(x, df["inside"], label="inside")
    ax.bar(x, df["outside"], bottom=df["inside"], label="outside")
    ax.set_xticks(list(x))
    ax.set_xticklabels(df["day"], rotation=90, fontsize=6)
    ax.set_ylabel("regions visited")
    ax.legend(fontsize=7)
    _save(fig, out, "region_diversity")


def render_figures(out) -> list:
    """Draw every figure whose source CSV exists; returns the figure names."""
    root = out.root
    done = []
    if (root / "weekly_series.csv").exists():
        _weekly(out, pd.read_csv(root / "weekly_series.csv"))
        done.append("weekly_series")
    for path in sorted(root.glob("distance_pdf_*.csv")):
        df = pd.read_csv(path)
        if len(df):
            label = path.stem[len("distance_pdf_"):]
            _pdf(out, label, df)
            done.append(path.stem)
    cdfs = sorted(root.glob("distance_cdf_*.csv"))
    if cdfs:
        _cdfs(out, [(p.stem[len("distance_cdf_"):], pd.read_csv(p)) for p in cdfs])
        done.append("distance_cdf")
    if (root / "region_diversity.csv").exists():
        _diversity(out, pd.read_csv(root / "region_diversity.csv"))
        done.append("region_diversity")
    return done
