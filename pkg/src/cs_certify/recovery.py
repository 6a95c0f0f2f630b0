"""Basis Pursuit decoding and phase-transition experiments.

The decoder is a two-block operator-splitting iteration for

    minimize ||c||_1  subject to  A c = y

alternating a projection onto the affine solution set (via a
precomputed singular value decomposition, so rank-deficient and
realified systems are handled uniformly) with an elementwise shrinkage
step.  An independent linear-programming reformulation through the
positive/negative split is provided as a cross-checking oracle.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from . import bases, masks, sensing
from .errors import DimensionMismatchError, InfeasibleError, ParameterError

__all__ = [
    "BpOptions",
    "BpResult",
    "bp_solve",
    "bp_solve_report",
    "bp_lp_reference",
    "recovery_success",
    "PhaseTransitionConfig",
    "PhaseTransitionResult",
    "CellStats",
    "phase_transition",
    "build_modality_system",
    "stride_for_ratio",
    "DOWN_SAMPLE_RATIO_CAP",
]

DOWN_SAMPLE_RATIO_CAP = 0.25


@dataclass
class BpOptions:
    """Decoder tolerances.

    ``residual_rtol`` bounds the acceptable equality gap relative to
    ||y||; ``conv_tol`` stops the iteration on primal and dual
    residuals; ``success_tol`` is the relative l2 error under which a
    reconstruction counts as exact.
    """

    residual_rtol: float = 1e-8
    conv_tol: float = 1e-9
    max_iter: int = 20_000
    success_tol: float = 1e-3
    rho: float = 1.0
    adapt_rho: bool = True
    polish: bool = True

    def __post_init__(self):
        for name in ("residual_rtol", "conv_tol", "success_tol", "rho"):
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name} must be positive")


@dataclass
class BpResult:
    x: np.ndarray
    objective: float
    residual: float
    iterations: int
    converged: bool
    primal_residual: float = 0.0
    dual_residual: float = 0.0


def _svd_projector(A):
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > 1e-10 * smax)) if smax > 0 else 0
    return U[:, :rank], s[:rank], Vt[:rank]


def bp_solve_report(A, y, opts=None):
    """Full-diagnostics Basis Pursuit solve; see :func:`bp_solve`."""
    opts = opts or BpOptions()
    A = np.atleast_2d(np.asarray(A, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    q, N = A.shape
    if y.size != q:
        raise DimensionMismatchError(f"{y.size} measurements for {q} rows")

    Ur, sr, Vtr = _svd_projector(A)
    rank = sr.size
    yscale = max(float(np.linalg.norm(y)), 1e-30)

    def pinv_apply(w):
        return Vtr.T @ ((Ur.T @ w) / sr)

    c_least = pinv_apply(y)
    base_resid = float(np.linalg.norm(A @ c_least - y))
    if base_resid > opts.residual_rtol * yscale:
        raise InfeasibleError(
            f"measurements are not in the range of A "
            f"(residual {base_resid:.3e} > {opts.residual_rtol:.1e} * ||y||)"
        )
    if rank == N:
        # determined system: the feasible set is a single point
        return BpResult(c_least, float(np.abs(c_least).sum()), base_resid, 0, True)

    def project(v):
        return v - Vtr.T @ (Vtr @ v) + c_least

    rho = opts.rho
    z = c_least.copy()
    u = np.zeros(N)
    c = c_least
    r_primal = r_dual = np.inf
    it = 0
    for it in range(1, opts.max_iter + 1):
        c = project(z - u)
        z_new = c + u
        z_new = np.sign(z_new) * np.maximum(np.abs(z_new) - 1.0 / rho, 0.0)
        r_primal = float(np.linalg.norm(c - z_new))
        r_dual = float(rho * np.linalg.norm(z_new - z))
        z = z_new
        u += c - z
        scale = max(1.0, float(np.linalg.norm(z)))
        if it % 10 == 0 and max(r_primal, r_dual) <= opts.conv_tol * scale:
            break
        if opts.adapt_rho and it % 25 == 0:
            if r_primal > 10.0 * r_dual:
                rho *= 2.0
                u *= 0.5
            elif r_dual > 10.0 * r_primal:
                rho *= 0.5
                u *= 2.0
    converged = max(r_primal, r_dual) <= opts.conv_tol * max(1.0, float(np.linalg.norm(z)))
    best = project(z) if np.abs(z).sum() < np.abs(c).sum() else c
    if opts.polish:
        polished = _polish(A, y, z, opts, yscale)
        if polished is not None and np.abs(polished).sum() <= np.abs(best).sum() + 1e-12:
            best = polished
    resid = float(np.linalg.norm(A @ best - y))
    return BpResult(best, float(np.abs(best).sum()), resid, it, converged,
                    r_primal, r_dual)


def _polish(A, y, z, opts, yscale):
    """Least-squares refit on the detected support; accepted only if it
    stays feasible and does not increase the l1 objective."""
    zmax = float(np.abs(z).max())
    if zmax == 0.0:
        return None
    support = np.flatnonzero(np.abs(z) > 1e-6 * zmax)
    if support.size == 0 or support.size > A.shape[0]:
        return None
    sol, *_ = np.linalg.lstsq(A[:, support], y, rcond=None)
    candidate = np.zeros(A.shape[1])
    candidate[support] = sol
    if np.linalg.norm(A @ candidate - y) > opts.residual_rtol * yscale:
        return None
    return candidate


def bp_solve(A, y, opts=None):
    """Basis Pursuit: minimum l1-norm solution of A c = y.

    Raises :class:`InfeasibleError` when y is not in the range of A
    within tolerance; warns when the iteration hits ``max_iter``.
    """
    result = bp_solve_report(A, y, opts)
    if not result.converged:
        warnings.warn(
            f"basis pursuit stopped at max_iter with residuals "
            f"({result.primal_residual:.2e}, {result.dual_residual:.2e})",
            RuntimeWarning,
        )
    return result.x


def bp_lp_reference(A, y):
    """Independent Basis Pursuit oracle via the positive/negative split
    linear program, solved with HiGHS."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    q, N = A.shape
    res = linprog(
        c=np.ones(2 * N),
        A_eq=np.hstack([A, -A]),
        b_eq=y,
        bounds=(0, None),
        method="highs",
    )
    if not res.success:
        raise InfeasibleError(f"linear program failed: {res.message}")
    x = res.x[:N] - res.x[N:]
    return BpResult(x, float(np.abs(x).sum()),
                    float(np.linalg.norm(A @ x - y)), int(res.nit), True)


def recovery_success(c_hat, c_true, tol=1e-3):
    """True when the relative l2 error is at most ``tol``."""
    c_hat = np.asarray(c_hat, dtype=float).ravel()
    c_true = np.asarray(c_true, dtype=float).ravel()
    if c_hat.size != c_true.size:
        raise DimensionMismatchError("length mismatch")
    scale = float(np.linalg.norm(c_true))
    if scale == 0.0:
        raise ParameterError("success is undefined for a zero signal")
    return float(np.linalg.norm(c_hat - c_true)) / scale <= tol


# ---------------------------------------------------------------------------
# phase-transition harness

@dataclass
class PhaseTransitionConfig:
    """One (modality, sampling basis, mask family) sweep.

    ``ratios`` drives the random mask kinds; radial masks take
    ``lines`` and down-sampling masks take ``strides`` instead, with
    the achieved (radial) or nominal 1/stride^2 (down-sampling) ratio
    reported on the axis.  Requested down-sampling ratios above
    1/min_stride^2 = 0.25 are rejected.
    """

    modality: str
    basis: str
    mask: str
    image_size: tuple
    sparsities: tuple
    trials: int = 10
    seed: int = 0
    ratios: tuple = ()
    lines: tuple = ()
    strides: tuple = ()
    sparsifier: str = "daubechies_wavelet"
    amplitude_law: str = "gaussian"
    bp: BpOptions = field(default_factory=BpOptions)


@dataclass
class CellStats:
    ratio: float
    k: int
    trials: int
    successes: int

    @property
    def success_rate(self):
        return self.successes / self.trials


@dataclass
class PhaseTransitionResult:
    cells: list
    provenance: dict

    def rate(self, ratio, k):
        for cell in self.cells:
            if cell.k == k and abs(cell.ratio - ratio) < 1e-12:
                return cell.success_rate
        raise KeyError((ratio, k))


def _derive_seed(*parts):
    ss = np.random.SeedSequence(list(parts))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> 1)


def stride_for_ratio(ratio):
    """Stride whose nominal coverage 1/s^2 best matches ``ratio``;
    ratios above the 0.25 cap are rejected."""
    if ratio > DOWN_SAMPLE_RATIO_CAP:
        raise ParameterError(
            f"down-sampling cannot reach ratio {ratio}; the cap is "
            f"{DOWN_SAMPLE_RATIO_CAP} at stride 2"
        )
    s = max(2, round(1.0 / np.sqrt(ratio)))
    while 1.0 / (s * s) > DOWN_SAMPLE_RATIO_CAP + 1e-12:
        s += 1
    return int(s)


def _ratio_units(config):
    """Yield (axis_ratio_or_None, mask_params) per sweep position."""
    kind = masks.MaskKind(config.mask)
    if kind is masks.MaskKind.RADIAL:
        if not config.lines:
            raise ParameterError("radial sweeps need a list of line counts")
        return [(None, {"lines": int(L)}) for L in config.lines]
    if kind is masks.MaskKind.DOWN_SAMPLE:
        if config.strides:
            strides = [int(s) for s in config.strides]
        else:
            strides = [stride_for_ratio(float(r)) for r in config.ratios]
        return [(1.0 / (s * s), {"stride": s}) for s in strides]
    if not config.ratios:
        raise ParameterError("random mask sweeps need a list of ratios")
    return [(float(r), {"ratio": float(r)}) for r in config.ratios]


def build_modality_system(config, mask_params, trial):
    """Mask + basis + sensing assembly for one trial of one sweep
    position; deterministic in (config.seed, mask_params, trial)."""
    m, n = config.image_size
    mask_kind = masks.MaskKind(config.mask)
    basis_kind = bases.BasisKind(config.basis)

    if mask_kind in (masks.MaskKind.RADIAL, masks.MaskKind.DOWN_SAMPLE):
        mask = masks.generate_mask(mask_kind, m, n, mask_params)
    else:
        mask_seed = _derive_seed(config.seed, 101, _params_tag(mask_params), trial)
        mask = masks.generate_mask(mask_kind, m, n, mask_params, seed=mask_seed)

    if basis_kind in (bases.BasisKind.BERNOULLI, bases.BasisKind.GAUSSIAN):
        basis_seed = _derive_seed(config.seed, 7, trial)
    else:
        basis_seed = None

    psi = generate_sparsifier(config.sparsifier, m)

    if basis_kind is bases.BasisKind.MURA_CIRCULANT and m == n:
        op = bases.mura_operator(m).matrix()
        return sensing.build_sensing_operator(mask, op, psi, label=f"mura_conv:{m}")
    phi1 = bases.generate_basis(basis_kind, m, seed=basis_seed)
    phi2 = phi1 if m == n else bases.generate_basis(basis_kind, n, seed=basis_seed)
    return sensing.build_sensing(mask, phi1, phi2, psi)


def generate_sparsifier(kind, size):
    kind = bases.BasisKind(kind)
    if kind is bases.BasisKind.DAUBECHIES_WAVELET:
        return bases.wavelet_matrix(size, levels=1)
    if kind is bases.BasisKind.IDENTITY:
        return bases.generate_basis(kind, size)
    raise ParameterError(f"{kind.value} is not a supported sparsifier")


def _params_tag(params):
    # stable small integer tag for seed derivation
    if "lines" in params:
        return int(params["lines"])
    if "stride" in params:
        return 1_000 + int(params["stride"])
    return int(round(float(params["ratio"]) * 1_000_000))


def phase_transition(config, progress=None):
    """Success-rate grid over (sampling ratio, sparsity).

    For every sweep position and trial a mask is generated (fresh seed
    per trial for the random kinds, reused for deterministic kinds),
    the sensing system is built once, and every configured sparsity is
    decoded from its noiseless measurements.  Identical configurations
    yield identical results.
    """
    m, n = config.image_size
    units = _ratio_units(config)
    counts = {}
    achieved = {}
    mask_seeds = []
    for unit_idx, (axis_ratio, mask_params) in enumerate(units):
        for trial in range(config.trials):
            system = build_modality_system(config, mask_params, trial)
            mask_seeds.append(system.mask.seed)
            ratio = axis_ratio if axis_ratio is not None else float(
                masks.mask_ratio(system.mask)
            )
            achieved[unit_idx] = ratio
            for k_idx, k in enumerate(config.sparsities):
                sig_seed = _derive_seed(config.seed, 211, unit_idx, k_idx, trial)
                image = sensing.random_sparse(m, n, int(k), sig_seed,
                                              config.amplitude_law)
                coeffs = sensing.vec(image.coeffs)
                y = system.A @ coeffs
                c_hat = bp_solve_report(system.A, y, config.bp).x
                ok = recovery_success(c_hat, coeffs, config.bp.success_tol)
                key = (unit_idx, int(k))
                done, wins = counts.get(key, (0, 0))
                counts[key] = (done + 1, wins + bool(ok))
            if progress is not None:
                progress(unit_idx, trial)
    cells = [
        CellStats(achieved[u], k, done, wins)
        for (u, k), (done, wins) in sorted(counts.items())
    ]
    provenance = {
        "modality": config.modality,
        "basis": config.basis,
        "mask": config.mask,
        "image_size": [m, n],
        "seed": config.seed,
        "trials": config.trials,
        "sparsifier": config.sparsifier,
        "mask_seeds": mask_seeds,
        "success_tol": config.bp.success_tol,
    }
    return PhaseTransitionResult(cells, provenance)
