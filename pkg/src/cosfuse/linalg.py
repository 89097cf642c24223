"""Minimal dense linear algebra for the solvers.

Matrices and vectors are plain numpy float64 arrays (row-major). The few
routines here are exactly what the coding and row-update stages need:
soft thresholding, Gram products, a cyclic Jacobi eigensolver for small
symmetric matrices, and a power-iteration estimate of the squared spectral
norm used for gradient step sizes.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "soft_threshold",
    "gram",
    "sym_eig",
    "sym_eig_smallest",
    "spectral_norm_sq",
    "save_matrix_text",
    "load_matrix_text",
    "MatrixFormatError",
]

# Jacobi convergence: off-diagonal Frobenius norm relative to the input norm.
_JACOBI_TOL = 1e-12
_JACOBI_MAX_SWEEPS = 100


class MatrixFormatError(ValueError):
    """Raised when a matrix text file cannot be parsed."""


def _as_matrix(M, name="matrix"):
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.size == 0:
        raise ValueError(f"{name} must be a nonempty 2-d array, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains non-finite entries")
    return M


def _as_vector(v, name="vector"):
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"{name} must be 1-d, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    return v


def soft_threshold(v, tau):
    """Componentwise shrinkage: sign(v) * max(|v| - tau, 0).

    Accepts arrays of any shape; ``tau`` must be a nonnegative scalar.
    """
    if tau < 0:
        raise ValueError(f"threshold must be nonnegative, got {tau}")
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def gram(M):
    """Return M @ M.T, symmetrized exactly.

    The averaging with the transpose removes any rounding asymmetry from the
    underlying matrix product, so ``gram(M) == gram(M).T`` holds bitwise.
    """
    M = _as_matrix(M)
    G = M @ M.T
    return (G + G.T) / 2.0


def _check_symmetric(S):
    S = _as_matrix(S, "symmetric matrix")
    if S.shape[0] != S.shape[1]:
        raise ValueError(f"matrix must be square, got shape {S.shape}")
    scale = np.abs(S).max()
    if scale > 0 and np.abs(S - S.T).max() > 1e-10 * scale:
        raise ValueError("matrix is not symmetric within 1e-10 relative tolerance")
    return S


def _round_robin_pairs(n):
    """Cyclic ordering of all index pairs as n-1 rounds of disjoint pairs."""
    players = list(range(n)) + ([-1] if n % 2 else [])
    m = len(players)
    rounds = []
    for _ in range(m - 1):
        ps, qs = [], []
        for i in range(m // 2):
            a, b = players[i], players[m - 1 - i]
            if a < 0 or b < 0:
                continue
            ps.append(min(a, b))
            qs.append(max(a, b))
        rounds.append((np.array(ps), np.array(qs)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def sym_eig(S):
    """Full eigendecomposition of a symmetric matrix by cyclic Jacobi sweeps.

    Each sweep visits every off-diagonal pair exactly once in a round-robin
    ordering, so the disjoint rotations of one round are applied vectorized.
    Convergence: off-diagonal Frobenius norm <= 1e-12 * ||S||_F, at most 100
    sweeps. Returns (eigenvalues ascending, eigenvectors as matching
    columns). Intended for the small (tens of rows) matrices used here.
    """
    S = _check_symmetric(S)
    n = S.shape[0]
    V = np.eye(n)
    if n == 1:
        return np.array([S[0, 0]]), V
    A = S.copy()
    fro = np.linalg.norm(S)
    if fro == 0.0:
        return np.zeros(n), V
    thresh = _JACOBI_TOL * fro
    # Rotations below this size are skipped within a sweep; the sweep-level
    # check still guarantees the global threshold is met before returning.
    skip = thresh / n
    rounds = _round_robin_pairs(n)
    for _ in range(_JACOBI_MAX_SWEEPS):
        off = np.sqrt(max(np.sum(A * A) - np.sum(np.diag(A) ** 2), 0.0))
        if off <= thresh:
            break
        for ps, qs in rounds:
            apq = A[ps, qs]
            live = np.abs(apq) > skip
            if not live.any():
                continue
            safe = np.where(live, apq, 1.0)
            theta = (A[qs, qs] - A[ps, ps]) / (2.0 * safe)
            t = np.where(theta >= 0.0, 1.0, -1.0) / (
                np.abs(theta) + np.sqrt(theta * theta + 1.0)
            )
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            c = np.where(live, c, 1.0)
            s = np.where(live, s, 0.0)
            col_p = A[:, ps].copy()
            col_q = A[:, qs].copy()
            A[:, ps] = c * col_p - s * col_q
            A[:, qs] = s * col_p + c * col_q
            row_p = A[ps, :].copy()
            row_q = A[qs, :].copy()
            A[ps, :] = c[:, None] * row_p - s[:, None] * row_q
            A[qs, :] = s[:, None] * row_p + c[:, None] * row_q
            A[ps, qs] = 0.0
            A[qs, ps] = 0.0
            vec_p = V[:, ps].copy()
            vec_q = V[:, qs].copy()
            V[:, ps] = c * vec_p - s * vec_q
            V[:, qs] = s * vec_p + c * vec_q
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def sym_eig_smallest(S):
    """Smallest eigenpair of a symmetric matrix.

    Returns (eigenvalue, unit eigenvector). For degenerate spectra any
    minimizing eigenvector may be returned.
    """
    w, V = sym_eig(S)
    vec = V[:, 0]
    nrm = np.linalg.norm(vec)
    return float(w[0]), vec / nrm


def spectral_norm_sq(M):
    """Largest eigenvalue of M.T @ M (the squared spectral norm of M).

    Power iteration on the smaller Gram matrix with a residual-based stop;
    the Bauer-Fike bound for symmetric matrices makes the residual a direct
    error bound on the returned eigenvalue (well inside 1e-6 relative).
    """
    M = _as_matrix(M)
    S = gram(M) if M.shape[0] <= M.shape[1] else gram(M.T)
    n = S.shape[0]
    scale = np.abs(S).max()
    if scale == 0.0:
        return 0.0
    v = np.full(n, 1.0 / np.sqrt(n))
    rng = np.random.default_rng(0)
    for restart in range(4):
        w = S @ v
        lam = 0.0
        for _ in range(20_000):
            nw = np.linalg.norm(w)
            if nw == 0.0:
                break
            v = w / nw
            w = S @ v
            lam = float(v @ w)
            if np.linalg.norm(w - lam * v) <= 1e-8 * max(lam, 1e-300 * scale):
                return lam
        v = rng.standard_normal(n)
        v /= np.linalg.norm(v)
    # Pathological spectra only; fall back to the dense eigensolver.
    w_all, _ = sym_eig(S)
    return float(w_all[-1])


def save_matrix_text(path, M, comments=()):
    """Write a matrix in the text format: optional '#' comment lines, then a
    "rows cols" line, then one line of 17-significant-digit reals per row."""
    M = _as_matrix(M)
    lines = [f"# {c}" for c in comments]
    lines.append(f"{M.shape[0]} {M.shape[1]}")
    for row in M:
        lines.append(" ".join(f"{x:.17g}" for x in row))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_matrix_text(path):
    """Read a matrix written by :func:`save_matrix_text`.

    Returns (matrix, comment lines without the leading '#')."""
    with open(path, "r", encoding="ascii") as fh:
        raw = fh.read().splitlines()
    comments = []
    body = []
    for line in raw:
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            if not body:
                comments.append(stripped[1:].strip())
            continue
        body.append(stripped)
    if not body:
        raise MatrixFormatError(f"{path}: no dimension line found")
    dims = body[0].split()
    if len(dims) != 2:
        raise MatrixFormatError(f"{path}: dimension line must be 'rows cols'")
    try:
        rows, cols = int(dims[0]), int(dims[1])
    except ValueError as exc:
        raise MatrixFormatError(f"{path}: bad dimension line {body[0]!r}") from exc
    if rows <= 0 or cols <= 0:
        raise MatrixFormatError(f"{path}: dimensions must be positive")
    values = []
    for line in body[1:]:
        values.extend(line.split())
    if len(values) != rows * cols:
        raise MatrixFormatError(
            f"{path}: expected {rows * cols} values, found {len(values)}"
        )
    try:
        M = np.array([float(x) for x in values], dtype=np.float64).reshape(rows, cols)
    except ValueError as exc:
        raise MatrixFormatError(f"{path}: non-numeric matrix entry") from exc
    if not np.all(np.isfinite(M)):
        raise MatrixFormatError(f"{path}: non-finite matrix entry")
    return M, comments
