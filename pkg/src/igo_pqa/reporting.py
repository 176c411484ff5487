"""Score tables, bin summaries, histograms, and the metric report text.

CSV columns are fixed (frame_id, raw_score, igo_pqa, bin) and floats
are written with repr-faithful precision so a rerun produces a
byte-identical file.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import MalformedScores, MissingFile
from .metrics import MetricReport
from .scoring import BINS, QualityRecord

SCORE_HEADER = ["frame_id", "raw_score", "igo_pqa", "bin"]


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def write_scores_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SCORE_HEADER)
        for rec in records:
            writer.writerow([rec.frame_id, _fmt(rec.raw_score),
                             _fmt(rec.igo_pqa), rec.bin])


def read_scores_csv(path) -> list:
    path = Path(path)
    if not path.exists():
        raise MissingFile(f"scores file not found: {path}")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != SCORE_HEADER:
        raise MalformedScores(f"{path}: expected header {SCORE_HEADER}")
    if len(rows) == 1:
        raise MalformedScores(f"{path}: no score rows")
    records = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 4 or row[3] not in BINS:
            raise MalformedScores(f"{path}:{lineno}: bad row {row}")
        try:
            records.append(QualityRecord(
                frame_id=row[0],
                raw_score=float(row[1]),
                igo_pqa=float(row[2]),
                bin=row[3],
            ))
        except ValueError as exc:
            raise MalformedScores(f"{path}:{lineno}: {exc}") from exc
    return records


def bin_counts(records) -> dict:
    counts = {name: 0 for name in BINS}
    for rec in records:
        counts[rec.bin] += 1
    return counts


def score_histogram(scores, n_bins: int = 20):
    """Counts over equal-width bins spanning [0, 100]."""
    counts, edges = np.histogram(
        np.asarray(scores, dtype=np.float64), bins=n_bins, range=(0.0, 100.0))
    return counts, edges


def write_histogram_csv(counts, edges, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_low", "bin_high", "count"])
        for i, count in enumerate(counts):
            writer.writerow([_fmt(edges[i]), _fmt(edges[i + 1]), int(count)])


SVG_WIDTH = 640
SVG_HEIGHT = 360
SVG_MARGIN = 40


def histogram_svg(counts, edges, title: str = "score distribution") -> str:
    """Standalone SVG bar chart; no plotting library, no display server."""
    counts = [int(c) for c in counts]
    peak = max(max(counts), 1)
    plot_w = SVG_WIDTH - 2 * SVG_MARGIN
    plot_h = SVG_HEIGHT - 2 * SVG_MARGIN
    bar_w = plot_w / len(counts)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" '
        f'height="{SVG_HEIGHT}" viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">',
        f'<text x="{SVG_WIDTH / 2}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{title}</text>',
        f'<line x1="{SVG_MARGIN}" y1="{SVG_HEIGHT - SVG_MARGIN}" '
        f'x2="{SVG_WIDTH - SVG_MARGIN}" y2="{SVG_HEIGHT - SVG_MARGIN}" '
        'stroke="black"/>',
        f'<line x1="{SVG_MARGIN}" y1="{SVG_MARGIN}" x2="{SVG_MARGIN}" '
        f'y2="{SVG_HEIGHT - SVG_MARGIN}" stroke="black"/>',
    ]
    for i, count in enumerate(counts):
        h = plot_h * count / peak
        x = SVG_MARGIN + i * bar_w
        y = SVG_HEIGHT - SVG_MARGIN - h
        parts.append(
            f'<rect x="{x:.2f}" y="{y:.2f}" width="{bar_w * 0.9:.2f}" '
            f'height="{h:.2f}" fill="#4878a8"/>'
        )
    for value in (0, 50, 100):
        x = SVG_MARGIN + plot_w * value / 100.0
        parts.append(
            f'<text x="{x:.2f}" y="{SVG_HEIGHT - SVG_MARGIN + 16}" '
            f'text-anchor="middle" font-family="sans-serif" '
            f'font-size="11">{value}</text>'
        )
    parts.append(
        f'<text x="{SVG_MARGIN - 6}" y="{SVG_MARGIN + 4}" text-anchor="end" '
        f'font-family="sans-serif" font-size="11">{peak}</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts)


def format_metric_table(report: MetricReport) -> str:
    """Aligned text block with the familiar three-column layout."""
    header = f"{'PLCC':>10} {'SRCC':>10} {'Avg. L1':>10} {'n':>6}"
    row = (f"{report.plcc:>10.4f} {report.srcc:>10.4f} "
           f"{report.mean_l1:>10.4f} {report.n:>6d}")
    return header + "\n" + row


def write_metrics_json(report: MetricReport, path) -> None:
    with open(path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_loss_csv(loss_curve, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss"])
        for epoch, loss in enumerate(loss_curve):
            writer.writerow([epoch, _fmt(loss)])
