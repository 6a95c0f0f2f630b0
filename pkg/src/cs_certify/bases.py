"""Sampling dictionaries and the orthonormal wavelet sparsifier.

All bases are explicit dense n-by-n matrices.  Column energies are put
on an equal footing so certificates are comparable across kinds:
Fourier, Walsh-Hadamard, wavelet and identity have unit-norm columns by
construction, Bernoulli entries are +-1/sqrt(n), Gaussian entries have
variance 1/n, and the binary circulant kernel is scaled to unit column
norm.

Setting the environment variable ``CS_CERTIFY_CACHE`` to a writable
directory memoizes generated matrices as ``.npy`` files keyed by
(kind, n, seed).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.linalg import circulant, hadamard

from .errors import ParameterError

__all__ = [
    "Basis",
    "BasisKind",
    "MuraGrid",
    "MuraOperator",
    "generate_basis",
    "mura_pattern",
    "mura_operator",
    "wavelet_matrix",
    "DB4_FILTER",
    "basis_to_csv",
    "basis_from_csv",
]


class BasisKind(str, Enum):
    FOURIER = "fourier"
    WALSH_HADAMARD = "walsh_hadamard"
    BERNOULLI = "bernoulli"
    GAUSSIAN = "gaussian"
    MURA_CIRCULANT = "mura_circulant"
    DAUBECHIES_WAVELET = "daubechies_wavelet"
    # Identity sparsifier; needed for prime-sized grids where a dyadic
    # wavelet does not exist.
    IDENTITY = "identity"


@dataclass(frozen=True)
class Basis:
    """Dense n-by-n sampling or sparsifying matrix with metadata."""

    size: int
    kind: BasisKind
    entries: np.ndarray
    field: str  # "real" | "complex"
    orthonormal: bool
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", BasisKind(self.kind))
        e = np.asarray(self.entries)
        if e.shape != (self.size, self.size):
            raise ParameterError("basis entries must be square of the stated size")
        object.__setattr__(self, "entries", e)


def _is_prime(p):
    if p < 2:
        return False
    if p % 2 == 0:
        return p == 2
    f = 3
    while f * f <= p:
        if p % f == 0:
            return False
        f += 2
    return True


def _fourier_matrix(n):
    # Reduce j*k mod n before exponentiating; keeps every entry the
    # correctly rounded value of a first-period angle.
    jk = np.outer(np.arange(n), np.arange(n)) % n
    return np.exp(-2j * np.pi * jk / n) / math.sqrt(n)


# Daubechies-4 lowpass filter (two vanishing moments), unit norm.
_S3 = math.sqrt(3.0)
DB4_FILTER = np.array([1.0 + _S3, 3.0 + _S3, 3.0 - _S3, 1.0 - _S3]) / (
    4.0 * math.sqrt(2.0)
)


def _db4_level(n):
    """One periodized analysis level: n/2 lowpass rows over n/2 highpass."""
    h = DB4_FILTER
    g = np.array([h[3], -h[2], h[1], -h[0]])
    W = np.zeros((n, n))
    for k in range(n // 2):
        for t in range(4):
            col = (2 * k + t) % n
            W[k, col] += h[t]
            W[n // 2 + k, col] += g[t]
    return W


def wavelet_matrix(n, levels=1):
    """Orthonormal periodized Daubechies-4 analysis matrix.

    Rows 0..n/2-1 of a single level are the scaling (lowpass) outputs,
    the remaining rows the detail (highpass) outputs; deeper levels
    re-split the current lowpass block in place.

    Parameters
    ----------
    n : int
        Signal length, even and >= 4, divisible by 2**levels.
    levels : int
        Decomposition depth, default 1.
    """
    if n < 4 or n % 2 != 0:
        raise ParameterError("wavelet size must be even and at least 4")
    if levels < 1:
        raise ParameterError("levels must be at least 1")
    if n % (2**levels) != 0:
        raise ParameterError(f"{n} is not divisible by 2**{levels}")
    W = np.eye(n)
    size = n
    for _ in range(levels):
        step = np.eye(n)
        step[:size, :size] = _db4_level(size)
        W = step @ W
        size //= 2
    return Basis(n, BasisKind.DAUBECHIES_WAVELET, W, "real", True)


def mura_pattern(p):
    """Binary aperture grid from quadratic residues mod a prime p.

    Row 0 is closed; column 0 is open below row 0; an interior cell
    (i, j) is open exactly when the Legendre symbols of i and j agree.
    """
    if not _is_prime(p):
        raise ParameterError(f"side length must be prime, got {p}")
    residues = {(k * k) % p for k in range(1, p)}
    legendre = np.array([1 if i in residues else -1 for i in range(p)])
    cells = np.zeros((p, p), dtype=np.uint8)
    cells[1:, 0] = 1
    for i in range(1, p):
        for j in range(1, p):
            if legendre[i] * legendre[j] == 1:
                cells[i, j] = 1
    return MuraGrid(p, cells)


@dataclass(frozen=True)
class MuraGrid:
    p: int
    cells: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.cells, dtype=np.uint8)
        if c.shape != (self.p, self.p):
            raise ParameterError("grid must be p-by-p")
        if not np.isin(c, (0, 1)).all():
            raise ParameterError("grid cells must be 0 or 1")
        object.__setattr__(self, "cells", c)

    @property
    def open_count(self):
        return int(self.cells.sum())


class MuraOperator:
    """2-D circular convolution with a point-spread function.

    Applies via Fourier-diagonal multiplication; ``matrix()`` returns the
    equivalent dense block-circulant operator acting on column-major
    vectorized images.
    """

    def __init__(self, p, psf=None):
        if psf is None:
            psf = mura_pattern(p).cells
        psf = np.asarray(psf, dtype=float)
        if psf.shape != (p, p):
            raise ParameterError("point-spread function must be p-by-p")
        self.p = p
        self.psf = psf
        self._psf_hat = np.fft.fft2(psf)

    def apply(self, image):
        image = np.asarray(image, dtype=float)
        if image.shape != (self.p, self.p):
            raise ParameterError("image shape must match the operator")
        out = np.fft.ifft2(np.fft.fft2(image) * self._psf_hat)
        return out.real

    def matrix(self):
        """Dense N-by-N operator, N = p*p, column-major index i + j*p."""
        p = self.p
        idx = np.arange(p)
        di = (idx[:, None] - idx[None, :]) % p  # (i_out, i_in)
        dj = (idx[:, None] - idx[None, :]) % p
        # entry[(i_out + j_out*p), (i_in + j_in*p)] = psf[di, dj]
        block = self.psf[di[:, :, None, None], dj[None, None, :, :]]
        # axes: (i_out, i_in, j_out, j_in) -> (j_out, i_out, j_in, i_in)
        return block.transpose(2, 0, 3, 1).reshape(p * p, p * p)


def mura_operator(p, psf=None):
    """Circular-convolution operator with the standard aperture grid as
    point-spread function; pass ``psf`` to override (e.g. a delta for
    calibration)."""
    return MuraOperator(p, psf)


def _mura_row(p):
    """1-D kernel used by the circulant basis: open at 0 and at the
    quadratic residues of p (the open row of the 2-D grid)."""
    residues = {(k * k) % p for k in range(1, p)}
    row = np.zeros(p)
    row[0] = 1.0
    for j in residues:
        row[j] = 1.0
    return row


def _build_entries(kind, n, seed):
    if kind is BasisKind.FOURIER:
        return _fourier_matrix(n), "complex", True
    if kind is BasisKind.WALSH_HADAMARD:
        if n & (n - 1) != 0:
            raise ParameterError(f"Walsh-Hadamard needs a power-of-two size, got {n}")
        return hadamard(n).astype(float) / math.sqrt(n), "real", True
    if kind is BasisKind.BERNOULLI:
        if seed is None:
            raise ParameterError("Bernoulli bases need a seed")
        rng = np.random.Generator(np.random.PCG64(int(seed)))
        signs = rng.integers(0, 2, size=(n, n)) * 2 - 1
        return signs / math.sqrt(n), "real", False
    if kind is BasisKind.GAUSSIAN:
        if seed is None:
            raise ParameterError("Gaussian bases need a seed")
        rng = np.random.Generator(np.random.PCG64(int(seed)))
        return rng.standard_normal((n, n)) / math.sqrt(n), "real", False
    if kind is BasisKind.MURA_CIRCULANT:
        if not _is_prime(n):
            raise ParameterError(f"circulant aperture basis needs a prime size, got {n}")
        row = _mura_row(n)
        return circulant(row) / math.sqrt(row.sum()), "real", False
    if kind is BasisKind.DAUBECHIES_WAVELET:
        return wavelet_matrix(n).entries, "real", True
    if kind is BasisKind.IDENTITY:
        return np.eye(n), "real", True
    raise ParameterError(f"unknown basis kind {kind!r}")


def generate_basis(kind, n, seed=None):
    """Construct an n-by-n basis of the given kind.

    Deterministic kinds ignore ``seed``; Bernoulli and Gaussian require
    it.  Regeneration with identical arguments is bit-identical.
    """
    kind = BasisKind(kind)
    if n < 2:
        raise ParameterError("basis size must be at least 2")
    if kind in (BasisKind.BERNOULLI, BasisKind.GAUSSIAN):
        used_seed = int(seed) if seed is not None else None
    else:
        used_seed = None

    cache_dir = os.environ.get("CS_CERTIFY_CACHE")
    cache_file = None
    if cache_dir:
        tag = f"{kind.value}_{n}_{used_seed}"
        cache_file = Path(cache_dir) / f"{tag}.npy"
        if cache_file.exists():
            entries = np.load(cache_file)
            _, fld, ortho = _probe_kind(kind)
            return Basis(n, kind, entries, fld, ortho, used_seed)

    entries, fld, ortho = _build_entries(kind, n, seed)
    if cache_file is not None:
        cache_file.parent.mkdir(parents=True, exist_ok=True)
        np.save(cache_file, entries)
    return Basis(n, kind, entries, fld, ortho, used_seed)


def _probe_kind(kind):
    fld = "complex" if kind is BasisKind.FOURIER else "real"
    ortho = kind in (
        BasisKind.FOURIER,
        BasisKind.WALSH_HADAMARD,
        BasisKind.DAUBECHIES_WAVELET,
        BasisKind.IDENTITY,
    )
    return kind, fld, ortho


# ---------------------------------------------------------------------------
# CSV fixtures

def basis_to_csv(basis, path):
    """Row-major CSV; complex entries expand to adjacent re, im columns."""
    e = basis.entries
    if np.iscomplexobj(e):
        flat = np.empty((e.shape[0], 2 * e.shape[1]))
        flat[:, 0::2] = e.real
        flat[:, 1::2] = e.imag
    else:
        flat = e
    with open(path, "w") as fh:
        for row in flat:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def basis_from_csv(path, complex_entries=False):
    """Inverse of :func:`basis_to_csv`; returns a plain ndarray."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(v) for v in line.split(",")])
    arr = np.array(rows)
    if complex_entries:
        return arr[:, 0::2] + 1j * arr[:, 1::2]
    return arr
