"""Figure rendering for bench reports (headless matplotlib)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .report import BenchReport, percentile  # noqa: E402


def render(report: BenchReport, out_dir: Path | str, *, stem: str = "report") -> list[Path]:
    """Render the figures appropriate for this bench; returns paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    if any(report.samples.values()):
        paths.append(_latency_figure(report, out_dir / f"{stem}_latency.png"))
    if report.bench == "caching":
        paths.append(_ticket_policy_figure(report, out_dir / f"{stem}_exchanges.png"))
    if report.bench == "content-cache":
        paths.append(_content_cache_figure(report, out_dir / f"{stem}_counters.png"))
    return paths


def _latency_figure(report: BenchReport, path: Path) -> Path:
    labels = [label for label, values in report.samples.items() if values]
    means = [sum(report.samples[k]) / len(report.samples[k]) for k in labels]
    p95s = [percentile(report.samples[k], 95) for k in labels]
    fig, ax = plt.subplots(figsize=(7, 0.6 * len(labels) + 2))
    y = range(len(labels))
    ax.barh(y, means, color="#4878a8", label="mean")
    ax.scatter(p95s, list(y), color="#b8443c", zorder=3, marker="|", s=200, label="p95")
    ax.set_yticks(list(y))
    ax.set_yticklabels(labels)
    ax.invert_yaxis()
    ax.set_xlabel("microseconds")
    ax.set_title(f"{report.bench}: latency per operation")
    ax.legend(loc="lower right")
    ax.grid(axis="x", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _ticket_policy_figure(report: BenchReport, path: Path) -> Path:
    labels = [row.label for row in report.rows]
    phases = [
        ("exchanges_content", "content", "#4878a8"),
        ("exchanges_authorize", "authorize", "#d09a3c"),
        ("exchanges_signon", "sign-on", "#b8443c"),
    ]
    rates = [row.metrics.get("req_per_s", 0.0) for row in report.rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    x = list(range(len(labels)))
    bottom = [0] * len(labels)
    for key, name, color in phases:
        values = [row.metrics.get(key, 0) for row in report.rows]
        ax1.bar(x, values, bottom=bottom, label=name, color=color)
        bottom = [b + v for b, v in zip(bottom, values)]
    ax1.set_xticks(x)
    ax1.set_xticklabels(labels)
    ax1.set_title("exchanges per policy")
    ax1.legend()
    ax2.bar(x, rates, color="#54926e")
    ax2.set_xticks(x)
    ax2.set_xticklabels(labels)
    ax2.set_title("requests per second")
    for ax in (ax1, ax2):
        ax.grid(axis="y", alpha=0.3)
    fig.suptitle("ticket caching policy comparison")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _content_cache_figure(report: BenchReport, path: Path) -> Path:
    labels = [row.label for row in report.rows]
    produced = [row.metrics.get("produce_calls", 0) for row in report.rows]
    hits = [row.metrics.get("cache_hits", 0) for row in report.rows]
    rates = [row.metrics.get("req_per_s", 0.0) for row in report.rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    x = range(len(labels))
    width = 0.38
    ax1.bar([i - width / 2 for i in x], produced, width, label="producer calls",
            color="#b8443c")
    ax1.bar([i + width / 2 for i in x], hits, width, label="cache hits",
            color="#4878a8")
    ax1.set_xticks(list(x))
    ax1.set_xticklabels(labels)
    ax1.set_title("where requests were served")
    ax1.legend()
    ax2.bar(x, rates, color="#54926e")
    ax2.set_xticks(list(x))
    ax2.set_xticklabels(labels)
    ax2.set_title("requests per second")
    for ax in (ax1, ax2):
        ax.grid(axis="y", alpha=0.3)
    fig.suptitle("content store policy comparison")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
