"""Measurement-model assembly.

Builds the real sensing matrix that maps vectorized sparse coefficients
to acquired samples: per-mode sampling dictionaries are composed with
the sparsifier, the Kronecker rows selected by the mask are formed
directly, and complex measurements are realified by stacking real over
imaginary parts.

Vectorization is column-major throughout: ``vec(M)[i + j*m] = M[i, j]``,
and measurement (i, j) owns row ``i + j*m`` of the full operator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bases import Basis, BasisKind, generate_basis, mura_operator, wavelet_matrix
from .errors import DimensionMismatchError, ParameterError
from .masks import Mask, is_separable, mask_from_json, mask_to_json

__all__ = [
    "SensingSystem",
    "SparseImage",
    "vec",
    "unvec",
    "acquire_full",
    "realify",
    "build_sensing",
    "build_sensing_operator",
    "rebuild_sensing",
    "synthesize_image",
    "analyze_image",
    "random_sparse",
]

_ORTHO_TOL = 1e-10


def vec(M):
    """Column-major stacking of a 2-D array into a vector."""
    return np.asarray(M).ravel(order="F")


def unvec(v, m, n):
    """Inverse of :func:`vec` for an m-by-n target."""
    v = np.asarray(v)
    if v.size != m * n:
        raise DimensionMismatchError(f"cannot reshape {v.size} values to {m}x{n}")
    return v.reshape((m, n), order="F")


def acquire_full(X, phi1, phi2):
    """Fully sampled acquisition: transpose(Phi1) @ X @ Phi2.

    The vectorized result equals the Kronecker operator
    transpose(kron(Phi2, Phi1)) applied to vec(X).
    """
    X = np.asarray(X)
    if X.shape != (phi1.size, phi2.size):
        raise DimensionMismatchError(
            f"image {X.shape} does not match bases ({phi1.size}, {phi2.size})"
        )
    return phi1.entries.T @ X @ phi2.entries


def realify(M, prune=True):
    """Stack Re(M) over Im(M) as a real matrix.

    The real nullspace is preserved: realify(M) @ v = 0 exactly when
    M @ v = 0 for real v.  With ``prune`` (the default) rows that are
    exactly zero, e.g. the imaginary part of a real-valued input, are
    dropped; pruning never changes the nullspace.
    """
    M = np.atleast_2d(np.asarray(M))
    R = np.vstack([M.real.astype(float), M.imag.astype(float)])
    if prune:
        keep = (R != 0.0).any(axis=1)
        R = R[keep]
    return R


@dataclass(frozen=True)
class SparseImage:
    """k-sparse coefficient array with explicit support."""

    coeffs: np.ndarray
    support: tuple
    k: int

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "support", tuple(sorted(self.support)))
        nz = int(np.count_nonzero(c))
        if nz != self.k or len(self.support) != self.k:
            raise ParameterError(
                f"support size {len(self.support)} / nonzeros {nz} disagree with k={self.k}"
            )
        if self.k > c.size:
            raise ParameterError("k exceeds the number of cells")


@dataclass(frozen=True)
class SensingSystem:
    """Real sensing matrix with its construction provenance.

    ``A`` has shape (q, N) with N = m*n; q = |Omega| for real sampling
    bases and 2|Omega| after realification of complex ones.  When the
    mask is a product set, ``mode_factors`` holds the per-mode matrices
    (possibly complex) whose Kronecker rows reproduce ``A``.
    """

    A: np.ndarray
    rows: int
    cols: int
    provenance: dict
    mask: Mask
    mode_factors: tuple | None = None


def _check_sparsifier(psi):
    if psi.field != "real":
        raise ParameterError("sparsifier must be real")
    gram = psi.entries.T @ psi.entries
    if not psi.orthonormal or np.linalg.norm(gram - np.eye(psi.size)) > _ORTHO_TOL:
        raise ParameterError("sparsifier must be orthonormal")


def _selected_kron_rows(M1, M2, mask):
    """Rows of kron(M2, M1) picked by the mask, in mask index order."""
    I = np.array([i for i, _ in mask.indices])
    J = np.array([j for _, j in mask.indices])
    rows = M2[J][:, :, None] * M1[I][:, None, :]
    return rows.reshape(len(mask.indices), -1)


def build_sensing(mask, phi1, phi2, psi):
    """Assemble the sensing matrix for per-mode sampling bases.

    Parameters
    ----------
    mask : Mask
    phi1, phi2 : Basis
        Mode-1 (rows) and mode-2 (columns) sampling dictionaries.
    psi : Basis
        Real orthonormal sparsifier, applied on both modes, which
        restricts this builder to square grids.

    Returns
    -------
    SensingSystem
    """
    m, n = mask.rows, mask.cols
    if phi1.size != m or phi2.size != n:
        raise DimensionMismatchError("sampling bases do not match the mask grid")
    if psi.size != m or psi.size != n:
        raise DimensionMismatchError(
            "a single sparsifier requires a square grid matching its size"
        )
    _check_sparsifier(psi)

    M1 = phi1.entries.T @ psi.entries
    M2 = phi2.entries.T @ psi.entries
    A = _selected_kron_rows(M1, M2, mask)
    realified = bool(np.iscomplexobj(A))
    if realified:
        A = realify(A, prune=False)
    else:
        A = A.astype(float)

    factors = None
    witness = is_separable(mask)
    if witness is not None:
        rset, cset = witness
        factors = (M1[list(rset), :], M2[list(cset), :])

    provenance = {
        "mask": mask_to_json(mask),
        "sampling": [
            {"kind": phi1.kind.value, "seed": phi1.seed},
            {"kind": phi2.kind.value, "seed": phi2.seed},
        ],
        "sparsifier": {"kind": psi.kind.value},
        "realified": realified,
        "row_rank": int(np.linalg.matrix_rank(A)),
    }
    return SensingSystem(A, m, n, provenance, mask, factors)


def build_sensing_operator(mask, operator, psi, label="operator"):
    """Sensing matrix for a full-grid sampling operator.

    ``operator`` is the dense N-by-N map from vec(image) to the
    transferred domain (e.g. a block-circulant convolution); the mask
    selects its rows, and the sparsifier enters through the Kronecker
    synthesis of the coefficients.
    """
    m, n = mask.rows, mask.cols
    N = m * n
    operator = np.asarray(operator)
    if operator.shape != (N, N):
        raise DimensionMismatchError("operator must be N-by-N for N = m*n")
    if psi.size != m or psi.size != n:
        raise DimensionMismatchError(
            "a single sparsifier requires a square grid matching its size"
        )
    _check_sparsifier(psi)

    P = psi.entries
    sel = operator[mask.linear_indices(), :]
    # (psi kron psi) applied on the right, one mode at a time.
    q = sel.shape[0]
    T = sel.reshape(q, n, m)  # column index c + d*m -> (d, c)
    T = np.einsum("qdc,ce->qde", T, P)
    T = np.einsum("qde,df->qfe", T, P)
    A = T.reshape(q, N)
    realified = bool(np.iscomplexobj(A))
    if realified:
        A = realify(A, prune=False)
    else:
        A = A.astype(float)

    provenance = {
        "mask": mask_to_json(mask),
        "sampling_operator": label,
        "sparsifier": {"kind": psi.kind.value},
        "realified": realified,
        "row_rank": int(np.linalg.matrix_rank(A)),
    }
    return SensingSystem(A, m, n, provenance, mask, None)


def rebuild_sensing(provenance):
    """Reconstruct a SensingSystem from its provenance record."""
    mask = mask_from_json(provenance["mask"])
    psi_kind = provenance["sparsifier"]["kind"]
    psi = generate_basis(psi_kind, mask.rows)
    if "sampling_operator" in provenance:
        label = provenance["sampling_operator"]
        if not label.startswith("mura_conv:"):
            raise ParameterError(f"cannot rebuild operator {label!r}")
        p = int(label.split(":", 1)[1])
        op = mura_operator(p).matrix()
        return build_sensing_operator(mask, op, psi, label)
    phis = [
        generate_basis(rec["kind"], size, seed=rec.get("seed"))
        for rec, size in zip(provenance["sampling"], (mask.rows, mask.cols))
    ]
    return build_sensing(mask, phis[0], phis[1], psi)


def synthesize_image(C, psi):
    """Image from coefficients: Psi @ C @ transpose(Psi)."""
    coeffs = C.coeffs if isinstance(C, SparseImage) else np.asarray(C)
    if coeffs.shape != (psi.size, psi.size):
        raise DimensionMismatchError("coefficient array does not match the sparsifier")
    P = psi.entries
    return P @ coeffs @ P.T


def analyze_image(X, psi):
    """Coefficients from an image: transpose(Psi) @ X @ Psi."""
    X = np.asarray(X)
    if X.shape != (psi.size, psi.size):
        raise DimensionMismatchError("image does not match the sparsifier")
    P = psi.entries
    return P.T @ X @ P


def random_sparse(m, n, k, seed, amplitude_law="gaussian"):
    """Draw a k-sparse coefficient image.

    Support is uniform without replacement; amplitudes follow
    ``amplitude_law``: "gaussian" (standard normal, default) or
    "rademacher" (+-1).
    """
    if not 0 <= k <= m * n:
        raise ParameterError(f"k={k} outside [0, {m * n}]")
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    coeffs = np.zeros((m, n))
    linear = rng.choice(m * n, size=k, replace=False) if k else np.array([], dtype=int)
    if amplitude_law == "gaussian":
        amps = rng.standard_normal(k)
        while k and np.any(amps == 0.0):
            redraw = amps == 0.0
            amps[redraw] = rng.standard_normal(int(redraw.sum()))
    elif amplitude_law == "rademacher":
        amps = (rng.integers(0, 2, size=k) * 2 - 1).astype(float)
    else:
        raise ParameterError(f"unknown amplitude law {amplitude_law!r}")
    support = []
    for lin, a in zip(linear, amps):
        i, j = int(lin % m), int(lin // m)
        coeffs[i, j] = a
        support.append((i, j))
    return SparseImage(coeffs, tuple(support), int(k))
