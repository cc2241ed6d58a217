"""Linear map between model displacement and screen pixels.

The model's visible range [-3, 3] maps onto the horizontal pixel range
[1, 1200]; rounding is half away from zero so the midpoint 0 lands on
pixel 601.
"""

from __future__ import annotations

import math


def _round_half_away(v: float) -> int:
    return int(math.floor(v + 0.5)) if v >= 0 else int(math.ceil(v - 0.5))


def model_to_px(x: float, screen_width: int = 1200, visible: float = 3.0) -> int:
    """Model displacement to pixel column; clamped to [1, screen_width]."""
    span = 2.0 * visible
    px = _round_half_away((x + visible) / span * (screen_width - 1) + 1)
    return min(max(px, 1), screen_width)


def px_to_model(px: int, screen_width: int = 1200, visible: float = 3.0) -> float:
    """Pixel column back to model units; exact at the endpoints."""
    if not (1 <= px <= screen_width):
        raise ValueError(f"px {px} outside [1, {screen_width}]")
    span = 2.0 * visible
    return (px - 1) / (screen_width - 1) * span - visible
