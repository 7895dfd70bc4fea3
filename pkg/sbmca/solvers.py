"""Sparse approximation kernels: soft-thresholding, column-wise LASSO and one-step OMP.

The LASSO objective for a column x and code a is

    ||x - D a||_2^2 + lam * ||a||_1

with no 1/2 on the quadratic, summed over columns.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from . import config
from .blocking import BlockMatrix
from .dictionaries import Dictionary
from .errors import InvalidArgumentError

logger = logging.getLogger(__name__)

SOLVERS = ("coordinate-descent",)
KKT_TOL = 1e-5

MatrixLike = Union[np.ndarray, BlockMatrix]


@dataclass
class LassoOptions:
    """Controls for the LASSO solver. The penalty weight is passed at the call site."""

    max_iters: int = 500
    tol: float = 1e-7
    solver: str = "coordinate-descent"
    kkt_tol: float = KKT_TOL
    workers: Optional[int] = None

    def __post_init__(self):
        if self.max_iters < 1:
            raise InvalidArgumentError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.tol > 0:
            raise InvalidArgumentError(f"tol must be > 0, got {self.tol}")
        if not self.kkt_tol > 0:
            raise InvalidArgumentError(f"kkt_tol must be > 0, got {self.kkt_tol}")
        if self.solver not in SOLVERS:
            raise InvalidArgumentError(f"Invalid solver: {self.solver}. Use one of {SOLVERS}")
        if self.workers is not None and self.workers < 1:
            raise InvalidArgumentError(f"workers must be >= 1, got {self.workers}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "LassoOptions":
        return cls(**data)


@dataclass
class LassoDiagnostics:
    sweeps: int
    converged: bool
    objective_trace: List[float] = field(default_factory=list)
    kkt_violation: float = 0.0


@dataclass(eq=False)
class SparseCode:
    """A coefficient matrix (atoms x columns) tied to the dictionary it indexes."""

    coeffs: np.ndarray
    dict_id: str
    diagnostics: Optional[LassoDiagnostics] = None

    @property
    def converged(self) -> bool:
        return self.diagnostics is None or self.diagnostics.converged


def soft_threshold(v, tau: float):
    """Proximal map of tau*|.|: sign(v) * max(|v| - tau, 0), elementwise."""
    if tau < 0:
        raise InvalidArgumentError(f"threshold must be >= 0, got {tau}")
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def _as_matrix(X: MatrixLike) -> np.ndarray:
    if isinstance(X, BlockMatrix):
        return X.data
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return X


def lasso_objective(D: Dictionary, X: MatrixLike, A: np.ndarray, lam: float) -> float:
    """Frobenius residual plus entrywise l1 penalty."""
    X = _as_matrix(X)
    R = X - D.atoms @ A
    return float(np.sum(R * R) + lam * np.sum(np.abs(A)))


def kkt_violation(D: Dictionary, X: MatrixLike, A: np.ndarray, lam: float) -> float:
    """
    Largest violation of the LASSO optimality conditions over all entries.

    With g = 2 D^T (D A - X): on the support g_k must equal -lam*sign(a_k);
    off the support |g_k| must not exceed lam.
    """
    X = _as_matrix(X)
    return _kkt_from_gradient(2.0 * D.atoms.T @ (D.atoms @ A - X), A, lam)


def _kkt_from_gradient(grad: np.ndarray, A: np.ndarray, lam: float) -> float:
    viol = np.where(A != 0, np.abs(grad + lam * np.sign(A)), np.maximum(np.abs(grad) - lam, 0.0))
    return float(viol.max()) if viol.size else 0.0


def _coordinate_descent(
    G: np.ndarray,
    C: np.ndarray,
    x_energy: float,
    A: np.ndarray,
    lam: float,
    opts: LassoOptions,
) -> Tuple[np.ndarray, LassoDiagnostics]:
    """
    Cyclic coordinate descent on rows of A; every column is updated at once.

    H = G A is kept current with rank-one corrections restricted to the
    columns whose coefficient moved. Full sweeps over all atoms alternate
    with cheaper sweeps over the atoms that are nonzero somewhere; only a
    full sweep can declare convergence, and it must also pass the KKT check.
    """
    d = G.shape[0]
    gdiag = np.diag(G)
    half_lam = lam / 2.0
    H = G @ A
    every_row = np.arange(d)

    def objective() -> float:
        return float(x_energy - 2.0 * np.sum(A * C) + np.sum(A * H) + lam * np.sum(np.abs(A)))

    def sweep(rows: np.ndarray) -> None:
        for k in rows:
            rho = C[k] - H[k] + gdiag[k] * A[k]
            new = soft_threshold(rho, half_lam) / gdiag[k]
            delta = new - A[k]
            cols = np.flatnonzero(delta)
            if cols.size:
                A[k, cols] = new[cols]
                H[:, cols] += np.outer(G[:, k], delta[cols])

    prev = objective()
    trace = [prev]
    converged = False
    sweeps = 0
    kkt = np.inf
    full = True

    for sweeps in range(1, opts.max_iters + 1):
        if full:
            sweep(every_row)
            # drop accumulated rounding in the incremental products
            H[:] = G @ A
        else:
            sweep(np.flatnonzero(np.any(A != 0, axis=1)))

        cur = objective()
        trace.append(cur)
        settled = abs(prev - cur) <= opts.tol * max(abs(prev), np.finfo(float).tiny)
        prev = cur

        if full:
            if settled:
                kkt = _kkt_from_gradient(2.0 * (H - C), A, lam)
                if kkt <= opts.kkt_tol:
                    converged = True
                    break
            full = False
        elif settled:
            full = True

    if not converged:
        logger.info("lasso stopped after %d sweeps without converging", sweeps)
    return A, LassoDiagnostics(sweeps=sweeps, converged=converged, objective_trace=trace, kkt_violation=kkt)


def lasso(
    D: Dictionary,
    X: MatrixLike,
    lam: float,
    opts: Optional[LassoOptions] = None,
    init: Optional[np.ndarray] = None,
) -> SparseCode:
    """
    Solve min_A ||X - D A||_F^2 + lam ||A||_1 column by column.

    Args:
        D: Dictionary with unit-norm atoms (m x d)
        X: Data matrix (m x q) or BlockMatrix
        lam: Penalty weight, > 0
        opts: Solver controls
        init: Optional warm start (d x q)

    Returns:
        SparseCode with coefficients (d x q) and solver diagnostics. A run
        that exhausts max_iters returns its last iterate with converged=False.
    """
    opts = opts or LassoOptions()
    X = _as_matrix(X)
    if X.shape[0] != D.m:
        raise InvalidArgumentError(f"data has {X.shape[0]} rows, dictionary has {D.m}")
    if not lam > 0:
        raise InvalidArgumentError(f"lambda must be > 0, got {lam}")
    if not np.all(np.isfinite(X)):
        raise InvalidArgumentError("data contains non-finite entries")

    q = X.shape[1]
    if init is None:
        A = np.zeros((D.d, q))
    else:
        A = np.array(init, dtype=float)
        if A.shape != (D.d, q):
            raise InvalidArgumentError(f"warm start has shape {A.shape}, expected {(D.d, q)}")

    G = D.atoms.T @ D.atoms
    C = D.atoms.T @ X
    workers = min(opts.workers or config.get_workers(), max(q, 1))

    if workers <= 1 or q < 2:
        A, diag = _coordinate_descent(G, C, float(np.sum(X * X)), A, lam, opts)
        return SparseCode(coeffs=A, dict_id=D.id, diagnostics=diag)

    chunks = np.array_split(np.arange(q), workers)

    def solve(cols):
        return _coordinate_descent(
            G, C[:, cols], float(np.sum(X[:, cols] ** 2)), A[:, cols].copy(), lam, opts
        )

    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(solve, chunks))

    for cols, (part, _) in zip(chunks, parts):
        A[:, cols] = part
    diag = LassoDiagnostics(
        sweeps=max(p[1].sweeps for p in parts),
        converged=all(p[1].converged for p in parts),
        objective_trace=[sum(vals) for vals in _zip_traces([p[1].objective_trace for p in parts])],
        kkt_violation=max(p[1].kkt_violation for p in parts),
    )
    return SparseCode(coeffs=A, dict_id=D.id, diagnostics=diag)


def _zip_traces(traces: List[List[float]]) -> List[List[float]]:
    """Align per-chunk traces, holding each chunk at its final value once it stops."""
    length = max(len(t) for t in traces)
    return [[t[min(i, len(t) - 1)] for t in traces] for i in range(length)]


def omp_one_step(D: Dictionary, x: np.ndarray) -> np.ndarray:
    """
    One step of orthogonal matching pursuit.

    Picks the atom with the largest |d_k^T x| (lowest index on ties) and
    returns a code with that single coefficient, d_k^T x. A 2-D input is
    processed column by column and returns a (d x q) matrix.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[0] != D.m:
        raise InvalidArgumentError(f"input has {x.shape[0]} rows, dictionary has {D.m}")
    if not np.all(np.isfinite(x)):
        raise InvalidArgumentError("input contains non-finite entries")

    squeeze = x.ndim == 1
    X = x[:, None] if squeeze else x
    corr = D.atoms.T @ X
    best = np.argmax(np.abs(corr), axis=0)
    cols = np.arange(X.shape[1])
    A = np.zeros_like(corr)
    A[best, cols] = corr[best, cols]
    return A[:, 0] if squeeze else A
