"""Regret curves as a single self-contained SVG document."""

from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 720, 440
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 40, 50
PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def emit_svg(traces, title: str, eta: float, eps: float) -> str:
    """Cumulative regret against t, one polyline per trace plus a bold mean.

    ``traces`` is a list of 1-d arrays (value at t = 1..T).  The mean line is
    drawn only when there is more than one trace.
    """
    traces = [np.asarray(tr, dtype=float) for tr in traces]
    if not traces:
        raise ValueError("emit_svg needs at least one trace")
    T = max(len(tr) for tr in traces)
    lo = min(float(np.min(tr)) for tr in traces)
    hi = max(float(np.max(tr)) for tr in traces)
    lo, hi = min(lo, 0.0), max(hi, 0.0)
    if hi - lo < 1e-12:
        hi = lo + 1.0
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def sx(t):
        return LEFT + (t - 1) / max(T - 1, 1) * pw

    def sy(v):
        return TOP + (hi - v) / (hi - lo) * ph

    def points(tr):
        t = np.arange(1, len(tr) + 1)
        return " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in zip(sx(t), sy(tr)))

    head = f"{title}  (eta={eta:.6g}, eps={eps:.6g})"
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.0f}" y="22" text-anchor="middle" font-family="sans-serif" '
        f'font-size="14">{escape(head)}</text>',
        # axes
        f'<line x1="{LEFT}" y1="{TOP + ph}" x2="{LEFT + pw}" y2="{TOP + ph}" stroke="black"/>',
        f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{TOP + ph}" stroke="black"/>',
        f'<line x1="{LEFT}" y1="{_fmt(sy(0.0))}" x2="{LEFT + pw}" y2="{_fmt(sy(0.0))}" '
        f'stroke="#cccccc" stroke-dasharray="4,3"/>',
        f'<text x="{LEFT + pw / 2:.0f}" y="{HEIGHT - 12}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">t</text>',
        f'<text x="16" y="{TOP + ph / 2:.0f}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="12" transform="rotate(-90 16 {TOP + ph / 2:.0f})">cumulative regret</text>',
    ]
    for v in (lo, hi):
        out.append(f'<text x="{LEFT - 6}" y="{_fmt(sy(v) + 4)}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="11">{v:.4g}</text>')
    for t in (1, T):
        out.append(f'<text x="{_fmt(sx(t))}" y="{TOP + ph + 16}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="11">{t}</text>')
    for i, tr in enumerate(traces):
        out.append(f'<polyline class="seed" fill="none" stroke="{PALETTE[i % len(PALETTE)]}" '
                   f'stroke-width="1" stroke-opacity="0.6" points="{points(tr)}"/>')
    if len(traces) > 1:
        n = min(len(tr) for tr in traces)
        mean = np.mean(np.vstack([tr[:n] for tr in traces]), axis=0)
        out.append(f'<polyline class="mean" fill="none" stroke="black" stroke-width="3" '
                   f'points="{points(mean)}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
