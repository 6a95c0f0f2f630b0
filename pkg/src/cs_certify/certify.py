"""Unique sparse-recovery certificates.

Three routes to a certificate are implemented, ordered by cost:

* ``spark_bruteforce`` enumerates column subsets by increasing size and
  reports the smallest linearly dependent one (exact, exponential).
* ``ssp_exact_small`` computes the exact minimum l1/l2 ratio over the
  nullspace.  The minimizer of that ratio over a d-dimensional
  nullspace always lies in a coordinate slice where at least d-1
  entries vanish, so the search reduces to one- and two-dimensional
  slices enumerated over zero patterns; the two-dimensional case is
  solved exactly at the kink angles where a component changes sign.
* ``ssp_sdp_lower_bound`` solves the convex lift: minimize the
  entrywise l1 norm of a unit-trace positive semidefinite matrix whose
  range lies in the nullspace.  Dropping the rank-one constraint of the
  exact lift only enlarges the feasible set, so the optimal value lower
  bounds the squared l1/l2 ratio.  The solver is a two-block
  operator-splitting iteration alternating an elementwise shrinkage
  step, a nullspace compression, and a spectrahedron projection by
  eigendecomposition.

A certified threshold ``delta_sq`` converts to the largest recoverable
sparsity via ``k < delta_sq / 2`` (strict); the per-mode rule for
Kronecker-factored systems takes the minimum of the squared per-mode
thresholds, keeping the units of the single-matrix rule.
"""

from __future__ import annotations

import itertools
import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ParameterError, SizeCapError

__all__ = [
    "Certificate",
    "SolverReport",
    "SdpOptions",
    "nullspace_basis",
    "spark_bruteforce",
    "ssp_exact_small",
    "ssp_sdp_lower_bound",
    "certificate_exact_small",
    "coherence_spark_bound",
    "certificate_coherence",
    "recovery_kmax",
    "kron_recovery_bound",
]

RANK_RTOL = 1e-10


@dataclass
class SolverReport:
    iterations: int = 0
    primal_residual: float = 0.0
    dual_residual: float = 0.0
    objective: float = 0.0
    runtime_seconds: float = 0.0
    duality_gap: float = 0.0


@dataclass
class Certificate:
    """Certified recovery threshold for one sensing matrix.

    ``delta_sq`` lower-bounds the squared minimum l1/l2 ratio of the
    nullspace (for the coherence method it bounds the smallest
    dependent column count instead; the conversion to ``k_max`` is the
    same).  ``k_max`` is the largest k with k < delta_sq / 2, which is
    -1 when delta_sq is 0.  A trivial nullspace yields an infinite
    threshold and ``k_max`` equal to the full coefficient count.
    """

    delta_sq: float
    k_max: int
    method: str
    status: str = "converged"
    solver_report: SolverReport = field(default_factory=SolverReport)
    provenance: dict = field(default_factory=dict)

    def to_json(self):
        doc = asdict(self)
        if math.isinf(self.delta_sq):
            doc["delta_sq"] = "inf"
        return json.dumps(doc, indent=2, sort_keys=True)


@dataclass
class SdpOptions:
    """Relaxation solver controls.

    The iteration stops when the primal/dual residuals drop below
    ``tol`` or when the certified duality gap drops below ``gap_tol``,
    whichever happens first.
    """

    tol: float = 1e-6
    gap_tol: float = 1e-6
    max_iter: int = 50_000
    rho: float = 1.0
    adapt_rho: bool = True
    n_cap: int = 1100
    check_every: int = 10


def nullspace_basis(A, rtol=RANK_RTOL):
    """Orthonormal nullspace basis (N-by-d) via singular value decomposition.

    Singular values below ``rtol`` times the largest count as zero.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] == 0:
        return np.eye(A.shape[1])
    _, s, Vt = np.linalg.svd(A, full_matrices=True)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > rtol * smax)) if smax > 0 else 0
    return Vt[rank:].T.copy()


# ---------------------------------------------------------------------------
# Spark

def spark_bruteforce(A, n_cap=24, rtol=RANK_RTOL, chunk=20_000):
    """Smallest number of linearly dependent columns.

    Enumerates column subsets in increasing size with batched singular
    value tests.  Returns ``math.inf`` when the columns are in general
    position and the nullspace is trivial.

    Raises
    ------
    SizeCapError
        If the matrix has more than ``n_cap`` columns.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    q, N = A.shape
    if N > n_cap:
        raise SizeCapError(f"spark enumeration capped at {n_cap} columns, got {N}")
    smax = float(np.linalg.norm(A, 2)) if A.size else 0.0
    if smax == 0.0:
        return 1  # every column is zero
    tol = rtol * smax
    if np.linalg.matrix_rank(A, tol=tol) == N:
        return math.inf
    for size in range(1, min(q, N) + 1):
        combos = np.array(list(itertools.combinations(range(N), size)))
        for start in range(0, len(combos), max(1, chunk // max(size, 1))):
            batch_idx = combos[start : start + max(1, chunk // max(size, 1))]
            sub = A[:, batch_idx]  # (q, b, size)
            sub = np.transpose(sub, (1, 0, 2))
            svals = np.linalg.svd(sub, compute_uv=False)
            if np.any(svals[:, -1] < tol):
                return size
    return q + 1


# ---------------------------------------------------------------------------
# exact spherical-section minimum

def _ratio_dim1(B):
    b = B[:, 0]
    return float(np.abs(b).sum() / np.linalg.norm(b))


def _min_ratio_dim2(B, grid_points=61):
    """Exact min of ||B u(theta)||_1 over the unit circle.

    Between sign changes the objective is a single positive cosine arc,
    so the minimum sits at an angle where some component vanishes; a
    coarse grid is added as a numerical safety net.
    """
    a, b = B[:, 0], B[:, 1]
    nz = (a != 0.0) | (b != 0.0)
    kinks = np.mod(np.arctan2(-a[nz], b[nz]), np.pi)
    cand = np.concatenate([kinks, np.linspace(0.0, np.pi, grid_points, endpoint=False)])
    vals = np.abs(np.outer(a, np.cos(cand)) + np.outer(b, np.sin(cand))).sum(axis=0)
    return float(vals.min())


def _small_nullspace(rows):
    """Orthonormal nullspace of a short, fat stack of row vectors."""
    rows = np.atleast_2d(rows)
    _, s, Vt = np.linalg.svd(rows, full_matrices=True)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > RANK_RTOL * smax)) if smax > 0 else 0
    return Vt[rank:].T


def _ssp_over_span(B):
    """Exact min l1/l2 over the span of the orthonormal columns of B."""
    d = B.shape[1]
    if d == 0:
        return math.inf
    if d == 1:
        return _ratio_dim1(B)
    if d == 2:
        return _min_ratio_dim2(B)
    row_norm = np.linalg.norm(B, axis=1)
    effective = np.flatnonzero(row_norm > 1e-12 * row_norm.max())
    best = math.inf
    for zeros in itertools.combinations(effective, d - 2):
        K = _small_nullspace(B[list(zeros), :])
        dim = K.shape[1]
        if dim == 0:
            continue
        sub = B @ K
        if dim == 1:
            val = _ratio_dim1(sub)
        elif dim == 2:
            val = _min_ratio_dim2(sub)
        else:
            # degenerate zero pattern; recurse on the smaller span
            val = _ssp_over_span(sub)
        if val < best:
            best = val
    return best


def ssp_exact_small(A, n_cap=16, rtol=RANK_RTOL):
    """Exact minimum l1/l2 ratio over the nullspace of A.

    Nullity 0 returns ``math.inf``; nullity 1 and 2 are closed form at
    any width; larger nullities enumerate zero patterns and are capped
    at ``n_cap`` columns.

    Raises
    ------
    SizeCapError
        When the nullity exceeds 2 and the width exceeds ``n_cap``;
        use :func:`ssp_sdp_lower_bound` instead.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = nullspace_basis(A, rtol)
    d = B.shape[1]
    if d == 0:
        return math.inf
    if d > 2 and A.shape[1] > n_cap:
        raise SizeCapError(
            f"exact search with nullity {d} is capped at {n_cap} columns; "
            "use ssp_sdp_lower_bound"
        )
    return _ssp_over_span(B)


def certificate_exact_small(A, n_cap=16, provenance=None):
    """Certificate wrapper around :func:`ssp_exact_small`."""
    t0 = time.perf_counter()
    ssp = ssp_exact_small(A, n_cap=n_cap)
    dt = time.perf_counter() - t0
    N = np.atleast_2d(A).shape[1]
    if math.isinf(ssp):
        return Certificate(
            math.inf, N, "exact_small", "trivial_nullspace",
            SolverReport(runtime_seconds=dt), provenance or {},
        )
    delta_sq = ssp * ssp
    return Certificate(
        delta_sq, recovery_kmax(delta_sq), "exact_small", "converged",
        SolverReport(objective=delta_sq, runtime_seconds=dt), provenance or {},
    )


# ---------------------------------------------------------------------------
# convex relaxation

def _project_simplex(w):
    """Euclidean projection onto the probability simplex."""
    u = np.sort(w)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, len(u) + 1)
    cond = u - css / idx > 0
    rho = idx[cond][-1]
    tau = css[rho - 1] / rho
    return np.maximum(w - tau, 0.0)


def _project_spectrahedron(S):
    """Projection onto unit-trace positive semidefinite matrices."""
    w, V = np.linalg.eigh(S)
    lam = _project_simplex(w)
    return (V * lam) @ V.T


def _dual_bound(B, W):
    """Certified lower bound on the relaxation optimum.

    For any symmetric W with entries in [-1, 1], weak duality gives

        min ||B Z B'||_1  >=  lambda_min(B' W B)

    over unit-trace semidefinite Z, because the entrywise l1 norm is
    the support function of the unit sup-norm ball and the spectrahedron
    minimum of a quadratic form is its smallest eigenvalue.
    """
    M = B.T @ W @ B
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])


def ssp_sdp_lower_bound(A, opts=None, provenance=None):
    """Certified lower bound on the squared nullspace l1/l2 minimum.

    Solves

        minimize  sum_ij |Y_ij|
        s.t.      trace(Y) = 1,  A @ Y = 0,  Y >= 0 (semidefinite)

    whose optimum lower-bounds the squared minimum because the exact
    problem additionally forces rank(Y) = 1.  Any feasible Y factors
    through an orthonormal nullspace basis B as Y = B Z B', so the
    semidefinite block shrinks to the nullity and the affine constraint
    disappears; the iteration alternates

    * an elementwise soft-threshold (the l1 proximal step),
    * compression to the nullspace coordinates (the affine projection),
    * an eigendecomposition-based projection onto unit-trace positive
      semidefinite matrices.

    The reported ``delta_sq`` is not the primal objective but the best
    dual bound constructed from the clipped running multiplier (see
    :func:`_dual_bound`), so it lower-bounds the relaxation optimum at
    whatever iterate the solver stops on, and the duality gap in the
    report is an actual optimality certificate.  Non-convergence at
    ``max_iter`` conservatively reports 0 with diagnostics.

    Returns
    -------
    Certificate
    """
    opts = opts or SdpOptions()
    A = np.atleast_2d(np.asarray(A, dtype=float))
    N = A.shape[1]
    if N > opts.n_cap:
        raise SizeCapError(f"relaxation capped at {opts.n_cap} columns, got {N}")
    t0 = time.perf_counter()
    B = nullspace_basis(A)
    d = B.shape[1]
    if d == 0:
        return Certificate(
            math.inf, N, "sdp_relaxation", "trivial_nullspace",
            SolverReport(runtime_seconds=time.perf_counter() - t0),
            provenance or {},
        )

    rho = float(opts.rho)
    Z = np.eye(d) / d
    X = B @ Z @ B.T
    U = np.zeros((N, N))
    r_primal = r_dual = math.inf
    best_dual = -math.inf
    objective = float(np.abs(X).sum())
    gap = math.inf
    it = 0
    for it in range(1, opts.max_iter + 1):
        # soft threshold at 1/rho (l1 proximal step)
        V = X - U
        Y = np.sign(V) * np.maximum(np.abs(V) - 1.0 / rho, 0.0)
        S = B.T @ (Y + U) @ B
        S = 0.5 * (S + S.T)
        Z_new = _project_spectrahedron(S)
        X = B @ Z_new @ B.T
        r_primal = float(np.linalg.norm(Y - X))
        r_dual = float(rho * np.linalg.norm(Z_new - Z))
        Z = Z_new
        U += Y - X
        if it % opts.check_every == 0:
            W = np.clip(-rho * U, -1.0, 1.0)
            best_dual = max(best_dual, _dual_bound(B, W))
            objective = float(np.abs(X).sum())
            gap = objective - best_dual
            if gap <= opts.gap_tol or max(r_primal, r_dual) < opts.tol:
                break
        if opts.adapt_rho and it % 25 == 0:
            if r_primal > 10.0 * r_dual:
                rho *= 2.0
                U *= 0.5
            elif r_dual > 10.0 * r_primal:
                rho *= 0.5
                U *= 2.0
    runtime = time.perf_counter() - t0
    converged = gap <= opts.gap_tol or max(r_primal, r_dual) < opts.tol
    report = SolverReport(it, r_primal, r_dual, objective, runtime, gap)
    if not converged:
        return Certificate(0.0, -1, "sdp_relaxation", "unconverged", report,
                           provenance or {})
    # tiny slack absorbs eigensolver backward error
    delta_sq = max(best_dual - 1e-12 * N, 0.0)
    return Certificate(delta_sq, recovery_kmax(delta_sq), "sdp_relaxation",
                       "converged", report, provenance or {})


# ---------------------------------------------------------------------------
# coherence baseline and sparsity thresholds

def coherence_spark_bound(A):
    """Lower bound 1 + 1/mu on the smallest dependent column count,
    where mu is the largest absolute normalized column correlation.
    Orthogonal columns (mu = 0) yield ``math.inf``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    norms = np.linalg.norm(A, axis=0)
    if np.any(norms == 0.0):
        raise ParameterError("coherence is undefined with a zero column")
    G = (A / norms).T @ (A / norms)
    np.fill_diagonal(G, 0.0)
    mu = float(np.abs(G).max())
    if mu <= 1e-15:
        return math.inf
    return 1.0 + 1.0 / mu


def certificate_coherence(A, provenance=None):
    t0 = time.perf_counter()
    bound = coherence_spark_bound(A)
    dt = time.perf_counter() - t0
    N = np.atleast_2d(A).shape[1]
    if math.isinf(bound):
        return Certificate(math.inf, N, "coherence", "converged",
                           SolverReport(runtime_seconds=dt), provenance or {})
    return Certificate(bound, recovery_kmax(bound), "coherence", "converged",
                       SolverReport(objective=bound, runtime_seconds=dt),
                       provenance or {})


def recovery_kmax(delta_sq):
    """Largest integer k with k < delta_sq / 2 (strict); -1 when the
    set is empty."""
    if not math.isfinite(delta_sq) or delta_sq < 0.0:
        raise ParameterError(f"delta_sq must be finite and nonnegative, got {delta_sq}")
    half = delta_sq / 2.0
    k = math.floor(half)
    if k == half:
        k -= 1
    return int(k)


def kron_recovery_bound(per_mode):
    """Recoverable sparsity for a Kronecker-factored system from
    per-mode squared thresholds: k < min_i delta_sq_i / 2."""
    per_mode = list(per_mode)
    if not per_mode:
        raise ParameterError("need at least one per-mode threshold")
    worst = min(per_mode)
    if math.isinf(worst):
        raise ParameterError(
            "all modes have trivial nullspaces; recovery is unrestricted"
        )
    return recovery_kmax(worst)
