"""Synthetic image occlusion: rectangles over the object until a target band.

Levels map to occluded-object-area fractions 1: 20-40%, 2: 40-60%,
3: 60-80% (level 0 is a passthrough). Patches are axis-aligned rectangles
placed randomly over the object's bounding box; a patch is rejected rather
than applied if it would push the covered fraction past the band, so the
achieved fraction always lands inside the band. Fills: constant white,
uniform noise, or a procedural stripe texture.
"""

import numpy as np

LEVEL_BANDS = {1: (0.20, 0.40), 2: (0.40, 0.60), 3: (0.60, 0.80)}
KINDS = ("white", "noise", "texture")


def _fill(shape: tuple[int, int], kind: str, rng: np.random.Generator, channels: int):
    h, w = shape
    if kind == "white":
        patch = np.full((h, w), 255, dtype=np.uint8)
    elif kind == "noise":
        if channels == 3:
            return rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)
        patch = rng.integers(0, 256, size=(h, w), dtype=np.uint8)
    elif kind == "texture":
        theta = rng.uniform(0, np.pi)
        wavelength = rng.uniform(3.0, max(4.0, min(h, w) / 2.0))
        phase = rng.uniform(0, 2 * np.pi)
        ys, xs = np.mgrid[0:h, 0:w]
        wave = np.sin(2 * np.pi * (xs * np.cos(theta) + ys * np.sin(theta)) / wavelength + phase)
        patch = (127.5 + 127.0 * wave).astype(np.uint8)
    else:
        raise ValueError(f"unknown occluder kind {kind!r} (have: {', '.join(KINDS)})")
    if channels == 3:
        patch = np.repeat(patch[:, :, None], 3, axis=2)
    return patch


def occlude_image(
    image: np.ndarray,
    mask: np.ndarray,
    level: int,
    kind: str,
    rng: np.random.Generator,
    max_attempts: int = 400,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Return (occluded image, occluder mask, achieved object fraction).

    The achieved fraction of the object mask covered by occluders is
    guaranteed to lie inside the level's band.
    """
    if level == 0:
        return np.array(image), np.zeros(mask.shape, dtype=bool), 0.0
    if level not in LEVEL_BANDS:
        raise ValueError(f"level must be 0..3, got {level}")
    if not mask.any():
        raise ValueError("cannot occlude an empty object mask")
    lo, hi = LEVEL_BANDS[level]
    out = np.array(image)
    channels = 1 if out.ndim == 2 else out.shape[2]
    covered = np.zeros(mask.shape, dtype=bool)
    object_area = int(mask.sum())
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    y_lo, y_hi = int(rows[0]), int(rows[-1]) + 1
    x_lo, x_hi = int(cols[0]), int(cols[-1]) + 1
    box_h, box_w = y_hi - y_lo, x_hi - x_lo
    fraction = 0.0
    for _ in range(max_attempts):
        if fraction >= lo:
            break
        # patch scale shrinks as the band gets close, to avoid overshooting
        deficit = hi - fraction
        scale = float(np.clip(np.sqrt(deficit), 0.2, 0.8))
        ph = max(1, int(box_h * scale * rng.uniform(0.5, 1.0)))
        pw = max(1, int(box_w * scale * rng.uniform(0.5, 1.0)))
        y0 = int(rng.integers(y_lo, max(y_lo + 1, y_hi - ph + 1)))
        x0 = int(rng.integers(x_lo, max(x_lo + 1, x_hi - pw + 1)))
        y1, x1 = min(y0 + ph, out.shape[0]), min(x0 + pw, out.shape[1])
        candidate = np.array(covered)
        candidate[y0:y1, x0:x1] = True
        new_fraction = float(np.logical_and(candidate, mask).sum()) / object_area
        if new_fraction > hi:
            continue  # too big from here; retry with a fresh draw
        covered = candidate
        fraction = new_fraction
        out[y0:y1, x0:x1] = _fill((y1 - y0, x1 - x0), kind, rng, channels)
    if not lo <= fraction <= hi:
        raise RuntimeError(
            f"could not reach occlusion band [{lo}, {hi}] (got {fraction:.3f}); "
            "object mask may be too fragmented"
        )
    return out, covered, fraction


def condition_tag(level: int, kind: str) -> str:
    return "clean" if level == 0 else f"level{level}-{kind}"
