"""Dependency-free SVG learning-curve charts.

The output is a pure function of the input CSV bytes: coordinates are
printed with fixed precision and nothing time- or platform-dependent is
written.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

COLUMNS = ("iteration", "best_so_far", "iter_mean", "iter_stderr")

WIDTH, HEIGHT = 640, 400
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 70, 20, 30, 50


class CurveParseError(ValueError):
    def __init__(self, path, line: int, message: str):
        self.path, self.line = str(path), line
        super().__init__(f"{path}:{line}: {message}")


@dataclass(frozen=True)
class CurveData:
    title: str
    iteration: tuple
    best_so_far: tuple
    iter_mean: tuple
    iter_stderr: tuple


def parse_curve(text: str, path="<curve>") -> CurveData:
    """Parse the learning-curve CSV schema; ``#`` lines are comments."""
    header = None
    cols = {c: [] for c in COLUMNS}
    title = Path(str(path)).stem
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            continue
        fields = [f.strip() for f in line.split(",")]
        if header is None:
            if tuple(fields) != COLUMNS:
                raise CurveParseError(path, lineno, f"expected header {','.join(COLUMNS)}, got {line!r}")
            header = fields
            continue
        if len(fields) != len(COLUMNS):
            raise CurveParseError(path, lineno, f"expected {len(COLUMNS)} fields, got {len(fields)}")
        try:
            values = [float(f) for f in fields]
        except ValueError:
            raise CurveParseError(path, lineno, f"non-numeric field in {line!r}") from None
        if not all(math.isfinite(v) for v in values):
            raise CurveParseError(path, lineno, "non-finite value")
        if values[3] < 0:
            raise CurveParseError(path, lineno, "negative standard error")
        for c, v in zip(COLUMNS, values):
            cols[c].append(v)
    if header is None:
        raise CurveParseError(path, 1, "empty curve file")
    if not cols["iteration"]:
        raise CurveParseError(path, 2, "curve has no data rows")
    return CurveData(title, *(tuple(cols[c]) for c in COLUMNS))


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _scale(lo, hi, a, b):
    if hi == lo:
        mid = (a + b) / 2.0
        return lambda v: mid
    return lambda v: a + (v - lo) * (b - a) / (hi - lo)


def _nice_ticks(lo, hi, n=5):
    if hi == lo:
        return [lo]
    step = 10 ** math.floor(math.log10((hi - lo) / n))
    for mult in (1, 2, 5, 10):
        if (hi - lo) / (step * mult) <= n:
            step *= mult
            break
    start = math.ceil(lo / step) * step
    ticks, t = [], start
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 10))
        t += step
    return ticks


def render_svg(curve: CurveData) -> str:
    """Best-so-far polyline plus iteration mean with a shaded one-stderr band."""
    xs = curve.iteration
    lower = [m - s for m, s in zip(curve.iter_mean, curve.iter_stderr)]
    upper = [m + s for m, s in zip(curve.iter_mean, curve.iter_stderr)]
    ylo = min(min(lower), min(curve.best_so_far))
    yhi = max(max(upper), max(curve.best_so_far))
    pad = 0.05 * (yhi - ylo) if yhi > ylo else 1.0
    ylo, yhi = ylo - pad, yhi + pad
    x0, x1 = MARGIN_LEFT, WIDTH - MARGIN_RIGHT
    y0, y1 = HEIGHT - MARGIN_BOTTOM, MARGIN_TOP
    sx = _scale(min(xs), max(xs), x0, x1)
    sy = _scale(ylo, yhi, y0, y1)

    def points(ys):
        return " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in zip(xs, ys))

    band = points(upper) + " " + " ".join(
        f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in zip(reversed(xs), reversed(lower)))
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH // 2}" y="18" text-anchor="middle" font-family="sans-serif" '
        f'font-size="14">{_escape(curve.title)}</text>',
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
    ]
    for t in _nice_ticks(ylo, yhi):
        y = _fmt(sy(t))
        out.append(f'<line x1="{x0 - 4}" y1="{y}" x2="{x0}" y2="{y}" stroke="black"/>')
        out.append(f'<text x="{x0 - 6}" y="{y}" text-anchor="end" dominant-baseline="middle" '
                   f'font-family="sans-serif" font-size="10">{t:g}</text>')
    for t in _nice_ticks(min(xs), max(xs)):
        x = _fmt(sx(t))
        out.append(f'<line x1="{x}" y1="{y0}" x2="{x}" y2="{y0 + 4}" stroke="black"/>')
        out.append(f'<text x="{x}" y="{y0 + 16}" text-anchor="middle" font-family="sans-serif" '
                   f'font-size="10">{t:g}</text>')
    out += [
        f'<text x="{(x0 + x1) // 2}" y="{HEIGHT - 10}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="12">iteration</text>',
        f'<text x="16" y="{(y0 + y1) // 2}" text-anchor="middle" font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {(y0 + y1) // 2})">return</text>',
        f'<polygon class="stderr-band" points="{band}" fill="#1f77b4" fill-opacity="0.2" stroke="none"/>',
        f'<polyline class="iter-mean" points="{points(curve.iter_mean)}" fill="none" stroke="#1f77b4" '
        f'stroke-width="1"/>',
        f'<polyline class="best-so-far" points="{points(curve.best_so_far)}" fill="none" stroke="#d62728" '
        f'stroke-width="2"/>',
        "</svg>",
    ]
    return "\n".join(out) + "\n"


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def render_curve_file(csv_path, svg_path) -> Path:
    """Render one curve CSV; nothing is written if parsing fails."""
    csv_path, svg_path = Path(csv_path), Path(svg_path)
    try:
        text = csv_path.read_bytes().decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CurveParseError(csv_path, 1, f"not UTF-8 ({exc})") from None
    svg = render_svg(parse_curve(text, csv_path))
    svg_path.parent.mkdir(parents=True, exist_ok=True)
    svg_path.write_text(svg, encoding="utf-8")
    return svg_path


def polyline_points(svg: str, cls: str = "best-so-far") -> list[tuple[float, float]]:
    """Coordinates of the polyline with the given class in an emitted chart."""
    marker = f'class="{cls}" points="'
    start = svg.index(marker) + len(marker)
    body = svg[start:svg.index('"', start)]
    return [tuple(float(v) for v in pair.split(",")) for pair in body.split()]
