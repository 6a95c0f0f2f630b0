"""Sub-sampling masks over an m-by-n acquisition grid.

A mask is an index set Omega of grid coordinates (i, j) marking which
samples of the fully determined grid are acquired.  Four generated
families are provided: radial line bundles, uniform random selection,
center-weighted (density-varied) random selection, and regular
down-sampling.  Explicit masks cover deserialization and calibration.

Conventions fixed here and relied on everywhere else:

* the grid center pixel is ``(m // 2, n // 2)``, i.e. where index 0
  lands after an fftshift of an even-length axis;
* the linear index of coordinate (i, j) is ``i + j * m`` (column-major),
  matching the vectorization order used by the sensing assembly;
* all randomness comes from ``numpy.random.Generator(PCG64(seed))``,
  whose streams are stable across platforms and versions;
* a uniform random mask at a fixed seed is the prefix of one fixed
  permutation, so masks with the same seed and growing ratios are
  nested.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import CardinalityError, ParameterError

__all__ = [
    "Mask",
    "MaskKind",
    "generate_mask",
    "explicit_mask",
    "full_mask",
    "mask_ratio",
    "is_separable",
    "mask_to_json",
    "mask_from_json",
    "mask_to_bytes",
    "mask_from_bytes",
    "save_mask",
    "load_mask",
]


class MaskKind(str, Enum):
    RADIAL = "radial"
    UNIFORM_RANDOM = "uniform_random"
    DENSITY_VARIED = "density_varied"
    DOWN_SAMPLE = "down_sample"
    # Explicit index sets: loaded from files or built for calibration.
    EXPLICIT = "explicit"


def _round_half_up(x):
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class Mask:
    """Immutable index set over an m-by-n grid.

    Attributes
    ----------
    rows, cols : int
        Grid dimensions m and n.
    indices : tuple of (int, int)
        Acquired coordinates, unique, in bounds, sorted by the
        column-major linear index i + j*m so that mask order and
        vectorization order agree.
    kind : MaskKind
        Generating family.
    params : dict
        Kind-specific parameters (``lines``, ``ratio``, ``alpha``,
        ``stride``, ``full``).
    seed : int or None
        RNG seed for the random kinds; None for deterministic kinds.
    """

    rows: int
    cols: int
    indices: tuple
    kind: MaskKind
    params: dict = field(default_factory=dict)
    seed: int | None = None

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ParameterError("grid dimensions must be positive")
        idx = tuple(sorted(((int(i), int(j)) for i, j in self.indices),
                           key=lambda t: (t[1], t[0])))
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "kind", MaskKind(self.kind))
        if len(set(idx)) != len(idx):
            raise ParameterError("mask indices must be unique")
        for i, j in idx:
            if not (0 <= i < self.rows and 0 <= j < self.cols):
                raise ParameterError(f"index ({i}, {j}) out of bounds")
        count = len(idx)
        if count == 0:
            raise CardinalityError("mask is empty")
        if count == self.rows * self.cols and not self.params.get("full", False):
            raise CardinalityError(
                "mask covers the full grid; use full_mask() for calibration"
            )

    @property
    def size(self):
        """Number of acquired samples |Omega|."""
        return len(self.indices)

    def linear_indices(self):
        """Column-major linear indices i + j*m, in mask order."""
        m = self.rows
        return np.array([i + j * m for i, j in self.indices], dtype=np.int64)

    def to_grid(self):
        """Boolean m-by-n occupancy grid."""
        grid = np.zeros((self.rows, self.cols), dtype=bool)
        for i, j in self.indices:
            grid[i, j] = True
        return grid


def _radial_indices(m, n, lines):
    """Union of `lines` digital lines through the center pixel.

    Line ell has angle pi * ell / lines.  Each line is rasterized by
    stepping the dominant axis over the whole grid and rounding the
    minor coordinate half-up; points falling outside the grid are
    dropped, which truncates the line at its boundary intersections.
    Angles are reduced as exact rationals of pi first so that nested
    angle sets (lines | lines') rasterize to identical pixels.
    """
    ci, cj = m // 2, n // 2
    points = set()
    for ell in range(lines):
        frac = Fraction(ell, lines)
        theta = math.pi * frac.numerator / frac.denominator
        di, dj = math.sin(theta), math.cos(theta)
        if abs(dj) >= abs(di):
            slope = di / dj
            for j in range(n):
                i = _round_half_up(ci + (j - cj) * slope)
                if 0 <= i < m:
                    points.add((i, j))
        else:
            slope = dj / di
            for i in range(m):
                j = _round_half_up(cj + (i - ci) * slope)
                if 0 <= j < n:
                    points.add((i, j))
    return points


def _target_count(ratio, m, n):
    if not 0.0 < ratio < 1.0:
        raise ParameterError(f"ratio must lie in (0, 1), got {ratio}")
    target = _round_half_up(ratio * m * n)
    if target <= 0 or target >= m * n:
        raise CardinalityError(
            f"ratio {ratio} on a {m}x{n} grid rounds to {target} samples"
        )
    return target


def _uniform_indices(m, n, ratio, rng):
    target = _target_count(ratio, m, n)
    perm = rng.permutation(m * n)
    chosen = perm[:target]
    return {(int(lin % m), int(lin // m)) for lin in chosen}


def _density_varied_indices(m, n, ratio, alpha, rng):
    if alpha < 0:
        raise ParameterError("alpha must be nonnegative")
    target = _target_count(ratio, m, n)
    ci, cj = m // 2, n // 2
    ii, jj = np.meshgrid(np.arange(m), np.arange(n), indexing="ij")
    r = np.hypot(ii - ci, jj - cj)
    w = (1.0 - r / r.max()) ** alpha
    center_lin = ci + cj * m
    w_flat = w.ravel(order="F").copy()
    w_flat[center_lin] = 0.0  # center is forced in, not drawn
    candidates = np.flatnonzero(w_flat > 0.0)
    if target - 1 > candidates.size:
        raise CardinalityError(
            "decay law leaves too few cells with positive weight "
            f"for {target} samples; lower the ratio or alpha"
        )
    probs = w_flat[candidates] / w_flat[candidates].sum()
    drawn = rng.choice(candidates, size=target - 1, replace=False, p=probs)
    chosen = np.concatenate([[center_lin], drawn])
    return {(int(lin % m), int(lin // m)) for lin in chosen}


def _down_sample_indices(m, n, stride):
    if stride < 2:
        raise ParameterError("stride must be at least 2")
    return {(i, j) for i in range(0, m, stride) for j in range(0, n, stride)}


def generate_mask(kind, m, n, params=None, seed=None):
    """Generate a sub-sampling mask.

    Parameters
    ----------
    kind : MaskKind or str
        One of radial, uniform_random, density_varied, down_sample.
    m, n : int
        Grid dimensions, both >= 2.
    params : dict
        Kind parameters: ``lines`` (radial), ``ratio`` (random kinds),
        ``alpha`` (density_varied, default 3.0), ``stride`` (down_sample).
    seed : int, optional
        Required for the random kinds; ignored by deterministic kinds.

    Returns
    -------
    Mask

    Raises
    ------
    ParameterError, CardinalityError
    """
    kind = MaskKind(kind)
    params = dict(params or {})
    if m < 2 or n < 2:
        raise ParameterError("grid must be at least 2x2")

    if kind is MaskKind.RADIAL:
        lines = int(params.get("lines", 0))
        if lines < 1:
            raise ParameterError("radial masks need at least one line")
        idx = _radial_indices(m, n, lines)
        params = {"lines": lines}
        seed = None
    elif kind is MaskKind.DOWN_SAMPLE:
        stride = int(params.get("stride", 0))
        idx = _down_sample_indices(m, n, stride)
        params = {"stride": stride}
        seed = None
    elif kind is MaskKind.UNIFORM_RANDOM:
        if seed is None:
            raise ParameterError("uniform_random masks need a seed")
        ratio = float(params.get("ratio", 0.0))
        rng = np.random.Generator(np.random.PCG64(int(seed)))
        idx = _uniform_indices(m, n, ratio, rng)
        params = {"ratio": ratio}
    elif kind is MaskKind.DENSITY_VARIED:
        if seed is None:
            raise ParameterError("density_varied masks need a seed")
        ratio = float(params.get("ratio", 0.0))
        alpha = float(params.get("alpha", 3.0))
        rng = np.random.Generator(np.random.PCG64(int(seed)))
        idx = _density_varied_indices(m, n, ratio, alpha, rng)
        params = {"ratio": ratio, "alpha": alpha}
    else:
        raise ParameterError(f"cannot generate masks of kind {kind!r}")

    if len(idx) >= m * n:
        raise CardinalityError(
            f"{kind.value} parameters cover the full {m}x{n} grid"
        )
    return Mask(m, n, tuple(idx), kind, params, None if seed is None else int(seed))


def explicit_mask(m, n, indices, params=None):
    """Wrap an explicit coordinate list as a Mask."""
    return Mask(m, n, tuple(indices), MaskKind.EXPLICIT, dict(params or {}))


def full_mask(m, n):
    """Full-grid calibration mask (allowed only through this constructor)."""
    idx = tuple((i, j) for i in range(m) for j in range(n))
    return Mask(m, n, idx, MaskKind.EXPLICIT, {"full": True})


def mask_ratio(mask):
    """Exact sampling ratio |Omega| / (m*n) as a Fraction."""
    return Fraction(mask.size, mask.rows * mask.cols)


def is_separable(mask):
    """Return (row_set, col_set) if Omega is their Cartesian product.

    Returns None when the mask is not a product set.  The witness sets
    are sorted tuples.
    """
    rows = sorted({i for i, _ in mask.indices})
    cols = sorted({j for _, j in mask.indices})
    if len(rows) * len(cols) != mask.size:
        return None
    have = set(mask.indices)
    for i in rows:
        for j in cols:
            if (i, j) not in have:
                return None
    return tuple(rows), tuple(cols)


# ---------------------------------------------------------------------------
# serialization

def mask_to_json(mask):
    """JSON-ready dict: {kind, m, n, params, seed, indices}."""
    return {
        "kind": mask.kind.value,
        "m": mask.rows,
        "n": mask.cols,
        "params": dict(mask.params),
        "seed": mask.seed,
        "indices": [[i, j] for i, j in mask.indices],
    }


def mask_from_json(doc):
    return Mask(
        rows=int(doc["m"]),
        cols=int(doc["n"]),
        indices=tuple((int(i), int(j)) for i, j in doc["indices"]),
        kind=MaskKind(doc["kind"]),
        params=dict(doc.get("params", {})),
        seed=doc.get("seed"),
    )


def mask_to_bytes(mask):
    """Compact binary form: m, n as u32 LE, then |Omega| pairs of u16 LE."""
    if mask.rows >= 1 << 16 or mask.cols >= 1 << 16:
        raise ParameterError("binary mask format caps dimensions at 65535")
    buf = [struct.pack("<II", mask.rows, mask.cols)]
    for i, j in mask.indices:
        buf.append(struct.pack("<HH", i, j))
    return b"".join(buf)


def mask_from_bytes(buf):
    """Parse the binary form; kind information is not stored and comes
    back as EXPLICIT."""
    if len(buf) < 8 or (len(buf) - 8) % 4 != 0:
        raise ParameterError("truncated binary mask")
    m, n = struct.unpack_from("<II", buf, 0)
    pairs = []
    for off in range(8, len(buf), 4):
        pairs.append(struct.unpack_from("<HH", buf, off))
    full = len(pairs) == m * n
    return Mask(m, n, tuple(pairs), MaskKind.EXPLICIT, {"full": full} if full else {})


def save_mask(mask, path):
    """Write a mask to ``path``; `.bin` selects the binary format,
    anything else JSON."""
    path = Path(path)
    if path.suffix == ".bin":
        path.write_bytes(mask_to_bytes(mask))
    else:
        path.write_text(json.dumps(mask_to_json(mask), indent=2, sort_keys=True))


def load_mask(path):
    path = Path(path)
    if path.suffix == ".bin":
        return mask_from_bytes(path.read_bytes())
    return mask_from_json(json.loads(path.read_text()))
