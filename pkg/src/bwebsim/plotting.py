"""SVG output: hand-written polylines for path families, matplotlib for report curves.

Both writers are byte-deterministic for identical input.
"""

from __future__ import annotations

import io
import math
from collections import OrderedDict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .geometry import PathFamily  # noqa: E402

_RC = {
    "svg.hashsalt": "bwebsim",
    "svg.fonttype": "none",
    "path.simplify": False,
}


def family_svg(K: PathFamily, width: int = 600, height: int = 600, margin: int = 20) -> str:
    """Render the regular paths of ``K``: space horizontal, time increasing upward.

    One ``<polyline>`` per stored path.
    """
    regular = K.regular()
    if regular:
        xs = [v for p in regular for v in p.values.tolist()]
        ts = [v for p in regular for v in p.times.tolist()]
        x_lo, x_hi, t_lo, t_hi = min(xs), max(xs), min(ts), max(ts)
    else:
        x_lo, x_hi, t_lo, t_hi = 0.0, 1.0, 0.0, 1.0
    sx = (width - 2 * margin) / ((x_hi - x_lo) or 1.0)
    st = (height - 2 * margin) / ((t_hi - t_lo) or 1.0)
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
        '<g fill="none" stroke="black" stroke-width="1" stroke-linejoin="round">',
    ]
    for p in regular:
        pts = " ".join(
            f"{margin + (x - x_lo) * sx:.3f},{height - margin - (t - t_lo) * st:.3f}"
            for t, x in zip(p.times.tolist(), p.values.tolist())
        )
        if p.times.size == 1:
            pts = pts + " " + pts
        lines.append(f'<polyline points="{pts}"/>')
    lines += ["</g>", "</svg>", ""]
    return "\n".join(lines)


def _num(v):
    if v in ("", None):
        return math.nan
    return float(v)


def _groups(rows):
    """Curve rows grouped by (name, note) preserving file order; rows without x are summary rows."""
    out = OrderedDict()
    for r in rows:
        if r.get("x", "") == "":
            continue
        key = (r["name"], r.get("note", "") if r["name"] == "T1_surface" else "")
        out.setdefault(key, []).append(r)
    return out


def reports_svg(rows: list[dict]) -> str:
    """Plot every curve found in a report table with SE error bars; B1/B2 curves use a log eps axis."""
    groups = _groups(rows)
    by_name = OrderedDict()
    for (name, note), rs in groups.items():
        by_name.setdefault(name, []).append((note, rs))
    with plt.rc_context(_RC):
        n = max(len(by_name), 1)
        fig, axes = plt.subplots(n, 1, figsize=(6, 3.2 * n), squeeze=False)
        if not by_name:
            summary = [r for r in rows if r.get("verdict") in ("pass", "fail")]
            ax = axes[0, 0]
            labels = [r["name"] for r in summary]
            vals = [1.0 if r["verdict"] == "pass" else 0.0 for r in summary]
            ax.bar(range(len(vals)), vals, color=["tab:green" if v else "tab:red" for v in vals])
            ax.set_xticks(range(len(vals)), labels, rotation=45, ha="right", fontsize=7)
            ax.set_ylim(0, 1.1)
            ax.set_ylabel("pass")
        for ax, (name, series) in zip(axes[:, 0], by_name.items()):
            for note, rs in series:
                x = [_num(r["x"]) for r in rs]
                y = [_num(r["estimate"]) for r in rs]
                e = [_num(r["std_error"]) for r in rs]
                ax.errorbar(x, y, yerr=e, marker="o", ms=3, capsize=2, label=note or "estimate")
                tgt = [_num(r.get("target", "")) for r in rs]
                if any(not math.isnan(v) for v in tgt):
                    ax.plot(x, tgt, "k--", lw=1, label=f"reference {note}".strip())
            if name.startswith(("B1", "B2")):
                ax.set_xscale("log")
                ax.set_xlabel("eps")
            elif name.startswith("T1"):
                ax.set_xlabel("t")
            else:
                ax.set_xlabel("x")
            ax.set_title(name, fontsize=9)
            ax.legend(fontsize=7)
        fig.tight_layout()
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
        plt.close(fig)
    return buf.getvalue()


def count_svg(rows: list[dict]) -> str:
    """Scatter of eta per query row."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6, 3.2))
        x = [int(r["query"]) for r in rows]
        ax.plot(x, [int(r["eta"]) for r in rows], "o", ms=3, label="eta")
        ax.plot(x, [int(r["n"]) for r in rows], "x", ms=3, label="|N|")
        ax.set_xlabel("query")
        ax.legend(fontsize=7)
        fig.tight_layout()
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
        plt.close(fig)
    return buf.getvalue()
