"""Per-sticker HSV features from cube face images.

The pipeline is: RGB image -> perspective rectification of one face into a
square HSV raster -> 3x3 block split -> per-block histogram features.
Two feature families are provided: the per-channel histogram mode
(``feature_3dhsv``) and an uneven 16-cell HSV histogram (``feature_16dhsv``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_BINS = (36, 32, 32)
DEFAULT_RECTIFY_SIZE = 240
DEFAULT_BLOCK_MARGIN = 0.2

# Channel ranges: hue in degrees [0, 360), saturation and value in [0, 1].
_CHANNEL_RANGES = (360.0, 1.0, 1.0)


class DegenerateQuad(ValueError):
    """Quad corners are collinear or wound inconsistently."""


class InvalidPartition(ValueError):
    """Partition cells overlap, leave gaps, or carry invalid bounds."""


def rgb_raster_to_hsv(raster):
    """Convert an RGB raster to HSV.

    Args:
        raster: (H, W, 3) array of 8-bit RGB values (uint8 or float in
            [0, 255]).

    Returns:
        (H, W, 3) float64 array with hue in degrees [0, 360), saturation
        and value in [0, 1]. Hue is 0 wherever saturation is 0.
    """
    rgb = np.asarray(raster, dtype=np.float64) / 255.0
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]

    mx = np.maximum(np.maximum(r, g), b)
    mn = np.minimum(np.minimum(r, g), b)
    diff = mx - mn

    h = np.zeros_like(mx)
    chromatic = diff > 0
    safe = np.where(chromatic, diff, 1.0)
    mask_r = chromatic & (mx == r)
    mask_g = chromatic & (mx == g) & (mx != r)
    mask_b = chromatic & (mx == b) & (mx != r) & (mx != g)
    h = np.where(mask_r, 60.0 * (((g - b) / safe) % 6.0), h)
    h = np.where(mask_g, 60.0 * ((b - r) / safe + 2.0), h)
    h = np.where(mask_b, 60.0 * ((r - g) / safe + 4.0), h)
    # ((g-b)/diff) % 6 can round to 6.0 when g-b is a tiny negative
    h = np.where(h >= 360.0, h - 360.0, h)

    s = np.where(mx > 0, diff / np.where(mx > 0, mx, 1.0), 0.0)
    return np.stack([h, s, mx], axis=-1)


def rgb_to_hsv(pixel):
    """Convert one 8-bit RGB triple to (h, s, v)."""
    raster = np.asarray(pixel, dtype=np.float64).reshape(1, 1, 3)
    h, s, v = rgb_raster_to_hsv(raster)[0, 0]
    return float(h), float(s), float(v)


def _validate_quad(quad):
    q = np.asarray(quad, dtype=np.float64)
    if q.shape != (4, 2):
        raise DegenerateQuad(f"quad must be 4 (x, y) corners, got shape {q.shape}")
    if not np.all(np.isfinite(q)):
        raise DegenerateQuad("quad corners must be finite")
    # Corners are ordered TL, TR, BR, BL as seen on the face; in image
    # coordinates (y down) that winding makes every corner cross product
    # strictly positive. Zero means collinear corners.
    edges = np.roll(q, -1, axis=0) - q
    nxt = np.roll(edges, -1, axis=0)
    cross = edges[:, 0] * nxt[:, 1] - edges[:, 1] * nxt[:, 0]
    if np.any(cross <= 0):
        raise DegenerateQuad(
            "quad corners must form a strictly convex TL,TR,BR,BL quadrilateral"
        )
    return q


def quad_homography(quad):
    """Homography mapping the unit square (TL=(0,0) .. BL=(0,1)) onto quad."""
    q = _validate_quad(quad)
    src = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    a = np.zeros((8, 8))
    rhs = np.zeros(8)
    for i, ((u, v), (x, y)) in enumerate(zip(src, q)):
        a[2 * i] = [u, v, 1.0, 0.0, 0.0, 0.0, -u * x, -v * x]
        a[2 * i + 1] = [0.0, 0.0, 0.0, u, v, 1.0, -u * y, -v * y]
        rhs[2 * i] = x
        rhs[2 * i + 1] = y
    try:
        coeffs = np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError as exc:
        raise DegenerateQuad("quad does not define a homography") from exc
    return np.append(coeffs, 1.0).reshape(3, 3)


def _bilinear_sample(image, xs, ys):
    """Sample an image at float coordinates, clamping to the nearest edge."""
    img = np.asarray(image, dtype=np.float64)
    height, width = img.shape[:2]
    xs = np.clip(xs, 0.0, width - 1.0)
    ys = np.clip(ys, 0.0, height - 1.0)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, width - 1)
    y1 = np.minimum(y0 + 1, height - 1)
    fx = (xs - x0)[..., None]
    fy = (ys - y0)[..., None]
    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def rectify_face(image, quad, size=DEFAULT_RECTIFY_SIZE):
    """Warp one quadrilateral face region into a square HSV raster.

    The output grid spans the quad corner to corner: output pixel (r, c)
    samples the source at the homography image of
    (c / (size-1), r / (size-1)), with bilinear interpolation and edge
    clamping for samples outside the image.

    Args:
        image: (H, W, 3) RGB raster.
        quad: four (x, y) corners ordered TL, TR, BR, BL.
        size: output side length in pixels.

    Returns:
        (size, size, 3) HSV float64 raster.

    Raises:
        DegenerateQuad: corners collinear or wound inconsistently.
    """
    if size < 1:
        raise ValueError(f"size must be >= 1, got {size}")
    hmat = quad_homography(quad)
    ts = np.linspace(0.0, 1.0, size) if size > 1 else np.array([0.5])
    u, v = np.meshgrid(ts, ts)
    denom = hmat[2, 0] * u + hmat[2, 1] * v + hmat[2, 2]
    xs = (hmat[0, 0] * u + hmat[0, 1] * v + hmat[0, 2]) / denom
    ys = (hmat[1, 0] * u + hmat[1, 1] * v + hmat[1, 2]) / denom
    sampled = _bilinear_sample(image, xs, ys)
    return rgb_raster_to_hsv(sampled)


def split_blocks(face, margin_fraction=DEFAULT_BLOCK_MARGIN):
    """Cut a rectified face into its nine sticker patches.

    The face is divided into a 3x3 grid of equal cells; each patch is the
    centered sub-rectangle of its cell with ``margin_fraction`` of the cell
    side trimmed from every side (to drop sticker borders).

    Returns the nine patches in row-major order.
    """
    face = np.asarray(face)
    side = face.shape[0]
    if face.ndim != 3 or face.shape[1] != side:
        raise ValueError(f"face must be a square raster, got shape {face.shape}")
    if side % 3 != 0:
        raise ValueError(f"face side must be divisible by 3, got {side}")
    if not 0.0 <= margin_fraction < 0.5:
        raise ValueError(f"margin_fraction must be in [0, 0.5), got {margin_fraction}")
    cell = side // 3
    margin = int(margin_fraction * cell)
    patches = []
    for row in range(3):
        for col in range(3):
            y0 = row * cell + margin
            x0 = col * cell + margin
            patches.append(face[y0:y0 + cell - 2 * margin, x0:x0 + cell - 2 * margin].copy())
    return patches


def feature_3dhsv(patch, bins=DEFAULT_BINS):
    """Per-channel histogram modes of a patch.

    For each HSV channel independently, a histogram over the channel's full
    range is built and the center value of the most populated bin is
    returned. Ties go to the lowest bin index.

    Args:
        patch: (..., 3) HSV raster or pixel list.
        bins: bin counts (hue, saturation, value).

    Returns:
        (3,) float64 array (h*, s*, v*).
    """
    pixels = np.asarray(patch, dtype=np.float64).reshape(-1, 3)
    if pixels.shape[0] == 0:
        raise ValueError("patch must contain at least one pixel")
    out = np.empty(3)
    for ch, (count, full) in enumerate(zip(bins, _CHANNEL_RANGES)):
        if count < 1:
            raise ValueError(f"bin counts must be >= 1, got {bins}")
        width = full / count
        idx = np.floor(pixels[:, ch] / width).astype(np.intp)
        np.clip(idx, 0, count - 1, out=idx)
        best = int(np.argmax(np.bincount(idx, minlength=count)))
        out[ch] = (best + 0.5) * width
    return out


@dataclass(frozen=True)
class UnevenPartition:
    """Non-uniform partition of HSV space into histogram cells.

    Cell 0 collects dark pixels (v below ``dark_v_max``), cell 1 the
    remaining achromatic pixels (s below ``achro_s_max``), and the rest are
    half-open hue intervals between consecutive ``hue_edges`` applied to
    chromatic pixels. Evaluated in that priority order, the cells cover HSV
    space exactly once.
    """

    dark_v_max: float = 0.15
    achro_s_max: float = 0.15
    hue_edges: tuple = (0.0, 10.0, 22.0, 35.0, 50.0, 65.0, 90.0, 150.0,
                        190.0, 250.0, 290.0, 320.0, 335.0, 345.0, 360.0)

    def __post_init__(self):
        object.__setattr__(self, "hue_edges", tuple(float(e) for e in self.hue_edges))
        if not 0.0 < self.dark_v_max < 1.0:
            raise InvalidPartition(f"dark_v_max must be in (0, 1), got {self.dark_v_max}")
        if not 0.0 < self.achro_s_max < 1.0:
            raise InvalidPartition(f"achro_s_max must be in (0, 1), got {self.achro_s_max}")
        edges = self.hue_edges
        if len(edges) < 2:
            raise InvalidPartition("need at least one hue interval")
        if edges[0] != 0.0 or edges[-1] != 360.0:
            raise InvalidPartition("hue intervals must start at 0 and end at 360")
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise InvalidPartition("hue edges must be strictly increasing")

    @property
    def n_cells(self):
        return 2 + len(self.hue_edges) - 1

    def assign(self, hsv):
        """Map HSV rows to cell indices.

        Args:
            hsv: (..., 3) array of HSV values.

        Returns:
            integer array of cell indices with the leading shape of hsv.
        """
        arr = np.asarray(hsv, dtype=np.float64)
        flat = arr.reshape(-1, 3)
        h, s, v = flat[:, 0], flat[:, 1], flat[:, 2]
        hue_cell = np.searchsorted(self.hue_edges, h, side="right") - 1
        np.clip(hue_cell, 0, len(self.hue_edges) - 2, out=hue_cell)
        idx = np.where(v < self.dark_v_max, 0,
                       np.where(s < self.achro_s_max, 1, hue_cell + 2))
        return idx.reshape(arr.shape[:-1])

    def to_config(self):
        """Config dict: the cell list, in feature-vector order."""
        cells = [
            {"kind": "value_below", "threshold": self.dark_v_max},
            {"kind": "saturation_below", "threshold": self.achro_s_max},
        ]
        for lo, hi in zip(self.hue_edges, self.hue_edges[1:]):
            cells.append({"kind": "hue_range", "lo": lo, "hi": hi})
        return {"cells": cells}

    @classmethod
    def from_config(cls, config):
        """Build a partition from its config dict, validating coverage."""
        try:
            cells = list(config["cells"])
        except (TypeError, KeyError) as exc:
            raise InvalidPartition("partition config must contain a 'cells' list") from exc
        dark = [c for c in cells if c.get("kind") == "value_below"]
        achro = [c for c in cells if c.get("kind") == "saturation_below"]
        hue = [c for c in cells if c.get("kind") == "hue_range"]
        if len(dark) != 1 or len(achro) != 1:
            raise InvalidPartition(
                "partition needs exactly one value_below and one saturation_below cell"
            )
        if len(dark) + len(achro) + len(hue) != len(cells):
            unknown = [c.get("kind") for c in cells
                       if c.get("kind") not in ("value_below", "saturation_below", "hue_range")]
            raise InvalidPartition(f"unknown cell kinds: {unknown}")
        hue = sorted(hue, key=lambda c: float(c["lo"]))
        for prev, cur in zip(hue, hue[1:]):
            if float(prev["hi"]) > float(cur["lo"]):
                raise InvalidPartition(
                    f"hue cells overlap at {cur['lo']} (previous ends at {prev['hi']})"
                )
            if float(prev["hi"]) < float(cur["lo"]):
                raise InvalidPartition(
                    f"hue cells leave a gap between {prev['hi']} and {cur['lo']}"
                )
        edges = [float(hue[0]["lo"])] + [float(c["hi"]) for c in hue]
        return cls(dark_v_max=float(dark[0]["threshold"]),
                   achro_s_max=float(achro[0]["threshold"]),
                   hue_edges=tuple(edges))


def default_partition():
    """The 16-cell partition: 2 achromatic cells + 14 hue intervals."""
    return UnevenPartition()


def feature_16dhsv(patch, partition=None):
    """Uneven-histogram feature: fraction of patch pixels per partition cell.

    Returns a vector of length ``partition.n_cells`` (16 for the default
    partition) that sums to 1.
    """
    if partition is None:
        partition = default_partition()
    pixels = np.asarray(patch, dtype=np.float64).reshape(-1, 3)
    if pixels.shape[0] == 0:
        raise ValueError("patch must contain at least one pixel")
    cells = partition.assign(pixels)
    counts = np.bincount(cells, minlength=partition.n_cells)
    return counts / pixels.shape[0]
