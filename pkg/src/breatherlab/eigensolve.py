"""Symmetric eigensolvers with inertia-certified completeness.

Three routes that are kept deliberately independent of each other:

* ``eigenpairs_below`` returns *all* eigenpairs up to a threshold, via a
  direct dense solve for small operators and shift-invert Lanczos with
  full reorthogonalization above the cutoff;
* ``count_in_interval`` counts eigenvalues in a closed interval exactly,
  from the inertia of symmetric factorizations at nudged shifts
  (Sylvester's law), never from computed eigenvalues;
* ``dense_oracle`` is a brute-force full eigendecomposition (different
  LAPACK driver than the solver's dense path) used for verification.

Every ``eigenpairs_below`` call cross-checks its own output against the
inertia count and fails loudly on any mismatch; a silent partial basis is
never returned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import SparseOperator

DENSE_CUTOFF = 2000
_NUDGE = 1e-12
_MAX_SHIFT_ATTEMPTS = 3
_MAX_ROUNDS = 6
_RESTART_SEED = 0x5EED_BA5E


class SolverError(RuntimeError):
    """Eigensolver failure (non-convergence, incomplete basis, bad input)."""


class FactorizationError(SolverError):
    """Symmetric factorization broke down at every attempted shift."""


@dataclass
class EigenSolution:
    """All eigenpairs with energy <= threshold, sorted ascending.

    vectors columns are orthonormal in the h^d-weighted inner product of the
    grid the operator was assembled on.  residuals[n] is
    ||H psi_n - E_n psi_n|| / (|E_n| if E_n != 0 else 1).
    """

    energies: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    threshold: float

    @property
    def n(self) -> int:
        return self.energies.size

    def __len__(self) -> int:
        return self.energies.size


# ---------------------------------------------------------------------------
# inertia counting


def _negative_count_dense(C: np.ndarray) -> int:
    """Negative eigenvalue count of a symmetric matrix from its LDL^T factors."""
    _, D, _ = scipy.linalg.ldl(C, lower=True)
    n = D.shape[0]
    neg = 0
    i = 0
    while i < n:
        two_by_two = i + 1 < n and (D[i + 1, i] != 0.0 or D[i, i + 1] != 0.0)
        if two_by_two:
            a, c = D[i, i], D[i + 1, i + 1]
            b = D[i + 1, i] if D[i + 1, i] != 0.0 else D[i, i + 1]
            det = a * c - b * b
            if det < 0.0:
                neg += 1
            elif det > 0.0:
                tr = a + c
                if tr < 0.0:
                    neg += 2
                elif tr == 0.0:
                    raise FactorizationError("degenerate 2x2 pivot block")
            else:
                raise FactorizationError("singular 2x2 pivot block")
            i += 2
        else:
            v = D[i, i]
            if v < 0.0:
                neg += 1
            elif v == 0.0:
                raise FactorizationError("zero pivot in LDL^T")
            i += 1
    return neg


def _negative_count_sparse(C: sp.spmatrix) -> int:
    """Negative count via SuperLU in symmetric mode (diagonal pivoting only).

    With row pivoting disabled the factorization is a congruence
    P C P^T = L D L^T with D = diag(U), so the signs of diag(U) carry the
    inertia.  Any sign that the symmetric permutation was abandoned is
    treated as a breakdown.
    """
    try:
        lu = spla.splu(
            C.tocsc(),
            diag_pivot_thresh=0.0,
            permc_spec="MMD_AT_PLUS_A",
            options=dict(SymmetricMode=True),
        )
    except RuntimeError as exc:  # exactly singular
        raise FactorizationError(f"sparse factorization failed: {exc}") from exc
    if not np.array_equal(lu.perm_r, lu.perm_c):
        raise FactorizationError("row pivoting destroyed the symmetric permutation")
    u = lu.U.diagonal()
    if np.any(u == 0.0) or not np.all(np.isfinite(u)):
        raise FactorizationError("zero or non-finite pivot in sparse factorization")
    return int(np.sum(u < 0.0))


def _count_strictly_below(A: sp.spmatrix, shift: float, retry_step: float) -> int:
    """#{eigenvalues < shift}; on breakdown retries with the shift moved
    outward by multiples of retry_step, three attempts total."""
    n = A.shape[0]
    eye = sp.identity(n, format="csr")
    last_error = None
    for attempt in range(_MAX_SHIFT_ATTEMPTS):
        s = shift + attempt * retry_step
        C = (A - s * eye).tocsr()
        try:
            if n <= DENSE_CUTOFF:
                return _negative_count_dense(C.toarray())
            return _negative_count_sparse(C)
        except FactorizationError as exc:
            last_error = exc
    raise FactorizationError(
        f"inertia count failed at shift {shift} after {_MAX_SHIFT_ATTEMPTS} attempts: {last_error}"
    )


def eigenvalue_count_below(op: SparseOperator, energy: float) -> int:
    """#{n : E_n <= energy}, inclusive via an outward nudge at the endpoint."""
    eta = _NUDGE * (1.0 + abs(energy))
    return _count_strictly_below(op.matrix, energy + eta, retry_step=10.0 * eta)


def count_in_interval(op: SparseOperator, a: float, b: float) -> int:
    """#{n : a <= E_n <= b}, exact, from factorization inertia at
    outward-nudged shifts (never from computed eigenvalues)."""
    if not a < b:
        raise SolverError(f"need a < b, got [{a}, {b}]")
    eta = _NUDGE * (1.0 + abs(a) + abs(b))
    hi = _count_strictly_below(op.matrix, b + eta, retry_step=10.0 * eta)
    lo = _count_strictly_below(op.matrix, a - eta, retry_step=-10.0 * eta)
    return hi - lo


# ---------------------------------------------------------------------------
# dense oracle


def dense_oracle(op: SparseOperator, vectors: bool = False):
    """Full ascending spectrum by a direct dense method (LAPACK QR driver).

    Verification-only path, refuses operators above the dense cutoff.
    Returned vectors (optional) are h^d-weighted orthonormal.
    """
    if op.n > DENSE_CUTOFF:
        raise SolverError(f"dense oracle limited to N <= {DENSE_CUTOFF}, got {op.n}")
    arr = op.matrix.toarray()
    if not vectors:
        return scipy.linalg.eigvalsh(arr, driver="ev")
    w, U = scipy.linalg.eigh(arr, driver="ev")
    return w, U / np.sqrt(op.grid.weight)


# ---------------------------------------------------------------------------
# complete eigenpairs below a threshold


def _gershgorin_lower_bound(A: sp.spmatrix) -> float:
    diag = A.diagonal()
    abs_rows = np.abs(A).sum(axis=1).A1 if hasattr(np.abs(A).sum(axis=1), "A1") else \
        np.asarray(np.abs(A).sum(axis=1)).ravel()
    return float(np.min(diag - (abs_rows - np.abs(diag))))


def _relative_residuals(A: sp.spmatrix, U: np.ndarray, lams: np.ndarray) -> np.ndarray:
    if lams.size == 0:
        return np.zeros(0)
    R = A @ U - U * lams[None, :]
    num = np.linalg.norm(R, axis=0)
    den = np.where(lams != 0.0, np.abs(lams), 1.0)
    return num / den


def _factorized_solve(A: sp.spmatrix, sigma: float):
    """LU solve handle for (A - sigma I); nudges sigma off exact eigenvalues."""
    n = A.shape[0]
    eye = sp.identity(n, format="csc")
    for attempt in range(_MAX_SHIFT_ATTEMPTS):
        s = sigma + attempt * 1e-10 * (1.0 + abs(sigma))
        try:
            lu = spla.splu((A - s * eye).tocsc())
            return lu.solve, s
        except RuntimeError:
            continue
    raise FactorizationError(f"could not factorize A - sigma*I near sigma={sigma}")


def _lanczos_round(solve, n: int, start: np.ndarray, deflate: np.ndarray,
                   max_steps: int):
    """Full-reorthogonalization Lanczos on the solve operator, restricted to
    the orthogonal complement of the deflate block.

    Returns (basis, ritz_values, ritz_coeffs, last_beta).
    """
    V = np.zeros((n, max_steps))
    alphas: list[float] = []
    betas: list[float] = []
    v = start.astype(float).copy()
    for _ in range(2):
        if deflate.shape[1]:
            v -= deflate @ (deflate.T @ v)
    nv = np.linalg.norm(v)
    if nv < 1e-13:
        return V[:, :0], np.zeros(0), np.zeros((0, 0)), 0.0
    v /= nv
    v_prev = None
    beta_prev = 0.0
    k = 0
    while k < max_steps:
        V[:, k] = v
        w = solve(v)
        if v_prev is not None:
            w = w - beta_prev * v_prev
        a = float(v @ w)
        w = w - a * v
        for _ in range(2):  # full reorthogonalization, run twice
            if deflate.shape[1]:
                w -= deflate @ (deflate.T @ w)
            w -= V[:, : k + 1] @ (V[:, : k + 1].T @ w)
        alphas.append(a)
        b = float(np.linalg.norm(w))
        k += 1
        if b < 1e-13 * max(1.0, abs(a)):
            beta_prev = 0.0
            break
        if k < max_steps:
            betas.append(b)
        v_prev = v
        v = w / b
        beta_prev = b
    alphas_arr = np.array(alphas)
    betas_arr = np.array(betas[: k - 1])
    if k == 1:
        theta = alphas_arr.copy()
        S = np.ones((1, 1))
    else:
        theta, S = scipy.linalg.eigh_tridiagonal(alphas_arr, betas_arr)
    return V[:, :k], theta, S, beta_prev


def _iterative_pairs(op: SparseOperator, threshold: float, tol: float):
    """Shift-invert Lanczos path: all eigenpairs <= threshold, certified."""
    A = op.matrix
    n = op.n
    lam_lb = _gershgorin_lower_bound(A)

    # pass 1: locate the bottom of the spectrum from a definite shift
    solve0, _ = _factorized_solve(A, lam_lb - 1.0)
    ones = np.ones(n)
    V, theta, S, _ = _lanczos_round(solve0, n, ones, np.zeros((n, 0)),
                                    max_steps=min(n, 80))
    if theta.size == 0:
        raise SolverError("Lanczos breakdown while locating the spectral bottom")
    i_top = int(np.argmax(theta))
    y = V @ S[:, i_top]
    lam_min = (lam_lb - 1.0) + 1.0 / theta[i_top]
    r = _relative_residuals(A, y[:, None], np.array([lam_min]))[0]
    if r > max(tol, 1e-8):
        raise SolverError(f"failed to locate the smallest eigenvalue (residual {r:.2e})")

    k_target = count_in_interval(op, lam_min - 1.0, threshold)
    if k_target == 0:
        return np.zeros(0), np.zeros((n, 0)), lam_min

    sigma = 0.5 * (lam_min + threshold)
    solve, _ = _factorized_solve(A, sigma)
    eta = _NUDGE * (1.0 + abs(threshold))

    found_lams: list[float] = []
    found_vecs: list[np.ndarray] = []
    for round_idx in range(_MAX_ROUNDS):
        remaining = k_target - len(found_lams)
        deflate = (np.stack(found_vecs, axis=1) if found_vecs else np.zeros((n, 0)))
        budget = min(n - deflate.shape[1], max(3 * remaining + 60, 120) * (1 + round_idx))
        if budget <= 0:
            break
        if round_idx == 0:
            start = ones.copy()
        else:
            rng = np.random.default_rng(np.random.SeedSequence([_RESTART_SEED, round_idx]))
            start = ones + rng.standard_normal(n)
        V, theta, S, beta_last = _lanczos_round(solve, n, start, deflate, budget)
        if theta.size == 0:
            continue
        # converged Ritz pairs of the inverted operator, checked against A
        order = np.argsort(-np.abs(theta))
        for i in order:
            if theta[i] == 0.0:
                continue
            bound = abs(beta_last * S[-1, i])
            if bound > 1e-4 * abs(theta[i]):
                continue
            lam = sigma + 1.0 / theta[i]
            if lam > threshold + eta:
                continue
            y = V @ S[:, i]
            ny = np.linalg.norm(y)
            if ny < 0.5:  # mostly deflated away; not a new direction
                continue
            y = y / ny
            r = _relative_residuals(A, y[:, None], np.array([lam]))[0]
            if r <= tol:
                found_lams.append(lam)
                found_vecs.append(y)
                if len(found_lams) == k_target:
                    break
        if len(found_lams) == k_target:
            break
    if len(found_lams) != k_target:
        raise SolverError(
            f"iterative solver found {len(found_lams)} of {k_target} eigenpairs "
            f"below {threshold}; refusing to return a partial basis"
        )
    lams = np.array(found_lams)
    U = np.stack(found_vecs, axis=1)
    order = np.argsort(lams, kind="stable")
    return lams[order], U[:, order], lam_min


def _orthonormalize_ascending(U: np.ndarray) -> np.ndarray:
    """Modified Gram-Schmidt on a nearly orthonormal block, in column order."""
    Q = U.copy()
    for j in range(Q.shape[1]):
        for _ in range(2):
            if j:
                Q[:, j] -= Q[:, :j] @ (Q[:, :j].T @ Q[:, j])
        nj = np.linalg.norm(Q[:, j])
        if nj < 1e-8:
            raise SolverError("eigenvector block lost rank during orthonormalization")
        Q[:, j] /= nj
    return Q


def eigenpairs_below(op: SparseOperator, threshold: float, tol: float = 1e-8,
                     dense_cutoff: int = DENSE_CUTOFF) -> EigenSolution:
    """All eigenpairs with E_n <= threshold (inclusive), completeness certified.

    Dense direct solve for N <= dense_cutoff, otherwise shift-invert Lanczos
    with full reorthogonalization around the midpoint of [lambda_min,
    threshold].  An interval-count mismatch or non-convergence raises; the
    returned basis is always complete.
    """
    if not 0.0 < tol <= 1e-6:
        raise SolverError(f"tol must be in (0, 1e-6], got {tol}")
    A = op.matrix
    if op.n <= dense_cutoff:
        w, full_U = scipy.linalg.eigh(A.toarray())
        lam_min = float(w[0])
        eta = _NUDGE * (1.0 + abs(threshold))
        sel = w <= threshold + eta
        lams = w[sel]
        U = full_U[:, sel]
    else:
        lams, U = _iterative_pairs(op, threshold, tol)
        lam_min = float(lams[0]) if lams.size else None

    if lams.size:
        U = _orthonormalize_ascending(U)
        residuals = _relative_residuals(A, U, lams)
        if np.any(residuals > tol):
            raise SolverError(
                f"residuals up to {residuals.max():.3e} exceed tol={tol}"
            )
        certified = count_in_interval(op, lam_min - 1.0, threshold)
        if certified != lams.size:
            raise SolverError(
                f"completeness certificate failed: solver returned {lams.size} "
                f"eigenvalues but inertia counts {certified}"
            )
    else:
        residuals = np.zeros(0)
        if lam_min is not None:
            certified = count_in_interval(op, lam_min - 1.0, threshold)
            if certified != 0:
                raise SolverError(
                    f"threshold below smallest eigenvalue but inertia counts {certified}"
                )

    scale = 1.0 / np.sqrt(op.grid.weight)
    return EigenSolution(
        energies=np.asarray(lams, dtype=float),
        vectors=U * scale,
        residuals=residuals,
        threshold=float(threshold),
    )
