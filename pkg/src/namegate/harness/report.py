"""Benchmark results: one `BenchReport` holds labelled rows of metrics
plus the raw samples; it can render itself as JSON, an aligned text
table, and a long-format CSV of samples."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional


def percentile(samples: list[float], q: float) -> float:
    """Linear-interpolated percentile, q in [0, 100]."""
    if not samples:
        raise ValueError("no samples")
    data = sorted(samples)
    if len(data) == 1:
        return data[0]
    pos = (len(data) - 1) * q / 100.0
    lo = int(pos)
    hi = min(lo + 1, len(data) - 1)
    frac = pos - lo
    return data[lo] * (1 - frac) + data[hi] * frac


def summarize(samples: list[float]) -> dict[str, float]:
    if not samples:
        return {}
    mean = sum(samples) / len(samples)
    return {
        "mean_us": round(mean, 3),
        "p50_us": round(percentile(samples, 50), 3),
        "p95_us": round(percentile(samples, 95), 3),
        "min_us": round(min(samples), 3),
        "max_us": round(max(samples), 3),
    }


@dataclass
class BenchRow:
    label: str
    n: int
    metrics: dict[str, float]


@dataclass
class BenchReport:
    bench: str
    seed: Optional[int]
    params: dict
    rows: list[BenchRow] = field(default_factory=list)
    samples: dict[str, list[float]] = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    created: str = field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds")
    )

    def add_samples(self, label: str, samples: list[float], **metrics) -> BenchRow:
        row = BenchRow(label, len(samples), {**summarize(samples), **metrics})
        self.rows.append(row)
        self.samples[label] = list(samples)
        return row

    def add_counters(self, label: str, n: int, **metrics) -> BenchRow:
        row = BenchRow(label, n, dict(metrics))
        self.rows.append(row)
        return row

    # -- renderings --------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "bench": self.bench,
            "created": self.created,
            "seed": self.seed,
            "params": self.params,
            "rows": [
                {"label": r.label, "n": r.n, **r.metrics} for r in self.rows
            ],
            "extra": self.extra,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)

    def table(self) -> str:
        columns = ["label", "n"]
        for row in self.rows:
            for key in row.metrics:
                if key not in columns:
                    columns.append(key)
        grid = [columns]
        for row in self.rows:
            cells = [row.label, str(row.n)]
            for key in columns[2:]:
                value = row.metrics.get(key, "")
                cells.append(f"{value:.3f}" if isinstance(value, float) else str(value))
            grid.append(cells)
        widths = [max(len(line[i]) for line in grid) for i in range(len(columns))]
        lines = []
        for i, cells in enumerate(grid):
            lines.append(
                "  ".join(cell.ljust(widths[j]) for j, cell in enumerate(cells)).rstrip()
            )
            if i == 0:
                lines.append("  ".join("-" * w for w in widths))
        return "\n".join(lines)

    def write_json(self, path: Path | str) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json() + "\n")
        return path

    def write_samples_csv(self, path: Path | str) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["bench", "label", "index", "value_us"])
            for label, values in self.samples.items():
                for i, value in enumerate(values):
                    writer.writerow([self.bench, label, i, f"{value:.3f}"])
        return path

    def save(self, out: Path | str, *, figures: bool = True) -> list[Path]:
        """Write report.json plus the CSV and figures next to it."""
        out = Path(out)
        written = [self.write_json(out)]
        written.append(self.write_samples_csv(out.with_name(out.stem + "_samples.csv")))
        if figures:
            from . import plots

            written.extend(plots.render(self, out.parent, stem=out.stem))
        return written
