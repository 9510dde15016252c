"""Minimal dependency-free SVG path emission for field figures."""

from __future__ import annotations


def _path_d(points) -> str:
    bits = []
    for i, (x, y) in enumerate(points):
        cmd = "M" if i == 0 else "L"
        bits.append(f"{cmd}{x:.6g},{y:.6g}")
    return " ".join(bits)


def polylines_to_svg(path, curves, x_range, y_range, width=900, height=300):
    """Write labelled polylines as one SVG.

    curves: iterable of (points, style) with points an (N, 2) sequence in
    data coordinates and style a dict of SVG attributes (stroke, width,
    dasharray).  Data coordinates are mapped to the viewport with y up.
    """
    x0, x1 = x_range
    y0, y1 = y_range
    sx = width / (x1 - x0)
    sy = height / (y1 - y0)

    def to_view(p):
        return ((p[0] - x0) * sx, (y1 - p[1]) * sy)

    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" '
             f'viewBox="0 0 {width} {height}">']
    for points, style in curves:
        pts = [to_view(p) for p in points]
        if len(pts) < 2:
            continue
        stroke = style.get("stroke", "#000")
        swidth = style.get("width", 1.0)
        dash = style.get("dasharray")
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        lines.append(f'<path d="{_path_d(pts)}" fill="none" '
                     f'stroke="{stroke}" stroke-width="{swidth}"{extra}/>')
    lines.append("</svg>")
    text = "\n".join(lines)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
