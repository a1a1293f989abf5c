"""Minimal deterministic SVG 1.1 writer."""

import math
from typing import Iterable, List, Tuple
from xml.sax.saxutils import escape


class SVG:
    def __init__(self):
        self.svg = ""

    def header(self, width: int, height: int):
        self.svg += f"""<?xml version="1.0" standalone="no"?>
<!DOCTYPE svg PUBLIC "-//W3C//DTD SVG 1.1//EN" "http://www.w3.org/Graphics/SVG/1.1/DTD/svg11.dtd">
<svg version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}" xmlns="http://www.w3.org/2000/svg">
"""

    def comment(self, text: str):
        self.svg += f"<!-- {text.replace('--', '- -')} -->\n"

    def rectangle(self, x: float, y: float, width: float, height: float, fill: str, extra: str = ""):
        self.svg += f'<rect x="{x:.2f}" y="{y:.2f}" width="{width:.2f}" height="{height:.2f}" fill="{fill}" {extra}/>\n'

    def line(self, x1: float, y1: float, x2: float, y2: float, stroke: str, width: float = 1.0, extra: str = ""):
        self.svg += (
            f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" '
            f'stroke="{stroke}" stroke-width="{width:g}" {extra}/>\n'
        )

    def polyline(self, points: Iterable[Tuple[float, float]], stroke: str, width: float = 1.5, label: str = ""):
        coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in points)
        title = f"<title>{escape(label)}</title>" if label else ""
        self.svg += f'<polyline points="{coords}" fill="none" stroke="{stroke}" stroke-width="{width:g}">{title}</polyline>\n'

    def text(self, x: float, y: float, string: str, extra: str = ""):
        self.svg += f'<text x="{x:.2f}" y="{y:.2f}" {extra}>{escape(string)}</text>\n'

    def get_svg(self) -> str:
        return f"{self.svg}</svg>\n"


def nice_ticks(lower: float, upper: float, target: int = 6) -> List[float]:
    """Round tick positions (1, 2 or 5 times a power of ten) covering [lower, upper]."""
    if upper <= lower:
        upper = lower + 1.0
    raw = (upper - lower) / max(target - 1, 1)
    magnitude = 10.0 ** math.floor(math.log10(raw))
    step = next(m * magnitude for m in (1.0, 2.0, 5.0, 10.0) if m * magnitude >= raw)
    first = math.floor(lower / step) * step
    ticks = []
    k = 0
    while True:
        value = first + k * step
        ticks.append(round(value, 12))
        if value >= upper - 1e-12 * step:
            break
        k += 1
    return ticks
