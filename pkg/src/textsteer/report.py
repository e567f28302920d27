"""Render chart payloads to image files and delimited output.

The service and library emit chart payloads as data; this module turns them
into matplotlib figures (radial topic chart, category bar chart) plus a CSV
of per-document rows, for the CLI report path.
"""
from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def write_csv(payload: dict, path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "topic", "category"])
        for doc in payload["docs"]:
            writer.writerow([doc["id"], doc["topic"], doc.get("category") or ""])
    return path


def render_radial(payload: dict, path) -> Path:
    """Topic wedges sized by document count; category bands as an outer ring."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(7, 7), subplot_kw={"projection": "polar"})
    ax.set_theta_zero_location("N")
    ax.set_theta_direction(-1)
    cmap = plt.get_cmap("tab20")
    import math

    for i, region in enumerate(payload["regions"]):
        theta0 = math.radians(region["start_angle"])
        width = math.radians(region["angle"])
        ax.bar(theta0 + width / 2, 1.0, width=width, bottom=0.0,
               color=cmap(i % 20), edgecolor="white", linewidth=1.0, alpha=0.8)
        if region["angle"] >= 10:
            ax.text(theta0 + width / 2, 0.55, f"{region['topic']}\n({region['count']})",
                    ha="center", va="center", fontsize=8)
        for j, band in enumerate(region.get("subregions", [])):
            if band["width"] <= 0:
                continue
            b0 = math.radians(band["start_angle"])
            bw = math.radians(band["width"])
            ax.bar(b0 + bw / 2, 0.25, width=bw, bottom=1.05,
                   color=cmap((j * 2 + 1) % 20), edgecolor="white", linewidth=0.5)
    ax.set_ylim(0, 1.4)
    ax.set_xticks([])
    ax.set_yticks([])
    ax.set_title("Topics" + (" and categories" if any(
        "subregions" in r for r in payload["regions"]) else ""))
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def render_bar(payload: dict, path) -> Path:
    path = Path(path)
    bars = payload.get("bar", [])
    fig, ax = plt.subplots(figsize=(6, 4))
    labels = [str(b["category"]) for b in bars]
    counts = [b["count"] for b in bars]
    ax.bar(labels, counts, color="#4878cf")
    ax.set_ylabel("documents")
    ax.set_title("Category counts")
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def generate_report(payload: dict, out_dir) -> list[Path]:
    """Write the radial figure, bar figure (if categories), and doc CSV."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = [render_radial(payload, out_dir / "topics_radial.png"),
             write_csv(payload, out_dir / "documents.csv")]
    if payload.get("bar"):
        files.append(render_bar(payload, out_dir / "categories_bar.png"))
    return files
