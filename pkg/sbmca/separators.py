"""Separation drivers: semi-blind MCA, fixed-dictionary MCA and truncated SVD."""

import logging
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .blocking import BlockMatrix, blockify, deblockify
from .dictionaries import Dictionary, dct_dictionary, identity_dictionary, load_dictionary, save_dictionary
from .dictlearn import DictLearnOptions, DictLearnResult, TraceEntry, learn_dictionary
from .errors import InvalidArgumentError, NumericFailureError, StorageError
from .solvers import LassoOptions, SparseCode, lasso, omp_one_step
from .storage import (
    PathLike,
    ensure_dir,
    load_json,
    load_matrix_csv,
    load_signal_csv,
    save_json,
    save_matrix_csv,
    save_signal_csv,
    timestamp,
    write_rows_csv,
    write_wav,
)

logger = logging.getLogger(__name__)

INIT_LASSO = "lasso-d1"
INIT_MCA_DCT_OMP = "mca-dct-omp"
INIT_METHODS = (INIT_LASSO, INIT_MCA_DCT_OMP)

METHODS = ("sbmca", "mca-dct", "mca-identity", "tsvd")


@dataclass
class SbmcaParams:
    """
    Parameters of the semi-blind separation.

    lambda1 is used only by the initialization, lambda2 only by dictionary
    learning (it overrides ``dict_opts.lambda2``) and lambda3 only by the
    joint coefficient update.
    """

    lambda1: float
    lambda2: float
    lambda3: float
    dict_opts: DictLearnOptions = field(default_factory=DictLearnOptions)
    max_outer_iters: int = 10
    outer_tol: float = 1e-4
    init: str = INIT_MCA_DCT_OMP
    lasso: LassoOptions = field(default_factory=LassoOptions)

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "lambda3"):
            value = getattr(self, name)
            if not value > 0:
                raise InvalidArgumentError(f"{name} must be > 0, got {value}")
        if self.max_outer_iters < 1:
            raise InvalidArgumentError(f"max_outer_iters must be >= 1, got {self.max_outer_iters}")
        if not self.outer_tol > 0:
            raise InvalidArgumentError(f"outer_tol must be > 0, got {self.outer_tol}")
        if self.init not in INIT_METHODS:
            raise InvalidArgumentError(f"Invalid init: {self.init}. Use one of {INIT_METHODS}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SbmcaParams":
        data = dict(data)
        if isinstance(data.get("dict_opts"), dict):
            data["dict_opts"] = DictLearnOptions.from_dict(data["dict_opts"])
        if isinstance(data.get("lasso"), dict):
            data["lasso"] = LassoOptions.from_dict(data["lasso"])
        return cls(**data)


@dataclass(eq=False)
class SeparationResult:
    """
    Estimated components with the codes and dictionaries that produced them.

    ``Xp_hat = D1 @ A1_hat`` and ``Xu_hat = D2 @ A2_hat``, where D2 is the
    learned dictionary (``D2_hat``) or the fixed baseline dictionary. The
    truncated-SVD baseline has no codes.
    """

    method: str
    Xp_hat: BlockMatrix
    Xu_hat: BlockMatrix
    A1_hat: Optional[SparseCode] = None
    A2_hat: Optional[SparseCode] = None
    D2_hat: Optional[Dictionary] = None
    objective_trace: List[Tuple[str, float]] = field(default_factory=list)
    outer_iters: int = 0
    converged: bool = True
    wall_time: float = 0.0
    dictlearn_trace: List[TraceEntry] = field(default_factory=list)
    params: Dict[str, Any] = field(default_factory=dict)


def _check_finite(stage: str, *arrays: np.ndarray) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NumericFailureError(stage)


def _check_rows(X: BlockMatrix, *dicts: Dictionary) -> None:
    for D in dicts:
        if D.m != X.data.shape[0]:
            raise InvalidArgumentError(f"data has {X.data.shape[0]} rows, dictionary has {D.m}")


def _split(A: np.ndarray, D1: Dictionary, D2: Dictionary) -> Tuple[SparseCode, SparseCode]:
    return (
        SparseCode(coeffs=A[: D1.d].copy(), dict_id=D1.id),
        SparseCode(coeffs=A[D1.d :].copy(), dict_id=D2.id),
    )


def _full_objective(X: np.ndarray, D1: Dictionary, A1: np.ndarray, D2: Dictionary, A2: np.ndarray, lam: float) -> float:
    R = X - D1.atoms @ A1 - D2.atoms @ A2
    return float(np.sum(R * R) + lam * (np.sum(np.abs(A1)) + np.sum(np.abs(A2))))


def mca_separate(
    X: BlockMatrix,
    D1: Dictionary,
    D2: Dictionary,
    lam: float,
    opts: Optional[LassoOptions] = None,
    method: str = "mca",
) -> SeparationResult:
    """
    Morphological component analysis with two fixed dictionaries.

    Solves min ||X - D1 A1 - D2 A2||_F^2 + lam (||A1||_1 + ||A2||_1) as one
    LASSO over [D1 D2].
    """
    start = time.perf_counter()
    _check_rows(X, D1, D2)
    if not lam > 0:
        raise InvalidArgumentError(f"lambda must be > 0, got {lam}")

    joint = D1.concat(D2)
    code = lasso(joint, X, lam, opts)
    _check_finite("mca", code.coeffs)
    A1, A2 = _split(code.coeffs, D1, D2)

    Xp = D1.atoms @ A1.coeffs
    Xu = D2.atoms @ A2.coeffs
    f = _full_objective(X.data, D1, A1.coeffs, D2, A2.coeffs, lam)
    return SeparationResult(
        method=method,
        Xp_hat=X.with_data(Xp),
        Xu_hat=X.with_data(Xu),
        A1_hat=A1,
        A2_hat=A2,
        objective_trace=[("coefficients", f)],
        outer_iters=1,
        converged=code.converged,
        wall_time=time.perf_counter() - start,
        params={"lambda": lam},
    )


def mca_dct_separate(X: BlockMatrix, D1: Dictionary, lam: float, opts: Optional[LassoOptions] = None) -> SeparationResult:
    return mca_separate(X, D1, dct_dictionary(X.block_len), lam, opts, method="mca-dct")


def mca_identity_separate(X: BlockMatrix, D1: Dictionary, lam: float, opts: Optional[LassoOptions] = None) -> SeparationResult:
    return mca_separate(X, D1, identity_dictionary(X.block_len), lam, opts, method="mca-identity")


def initial_codes(X: BlockMatrix, D1: Dictionary, params: SbmcaParams) -> np.ndarray:
    """Starting A1 for SBMCA; depends only on X, D1, lambda1, init and the lasso options."""
    if params.init == INIT_LASSO:
        return lasso(D1, X, params.lambda1, params.lasso).coeffs
    # MCA with the DCT basis, then keep one pulse atom per column of its x_p estimate
    mca = mca_dct_separate(X, D1, params.lambda1, params.lasso)
    return omp_one_step(D1, mca.Xp_hat.data)


def sbmca_separate(
    X: BlockMatrix,
    D1: Dictionary,
    params: SbmcaParams,
    init_codes: Optional[np.ndarray] = None,
) -> SeparationResult:
    """
    Semi-blind MCA: learn D2 for the unknown component while coding against D1.

    After initializing A1, each outer iteration learns (D2, A2) on the
    residual X - D1 A1 with lambda2, then re-solves the joint LASSO over
    [D1 D2] with lambda3. Iteration stops after ``max_outer_iters`` or when
    the relative change of

        f = ||X - D1 A1 - D2 A2||_F^2 + lambda3 (||A1||_1 + ||A2||_1)

    falls below ``outer_tol``.

    D2 is learned with D1 as its coherence reference. ``init_codes`` replaces
    the initialization stage with a precomputed A1 (see ``initial_codes``),
    which lets a parameter sweep share it across lambda2 and lambda3.
    """
    start = time.perf_counter()
    _check_rows(X, D1)
    data = X.data
    if not np.all(np.isfinite(data)):
        raise InvalidArgumentError("data contains non-finite entries")

    dict_opts = replace(params.dict_opts, lambda2=params.lambda2)

    if init_codes is None:
        A1 = initial_codes(X, D1, params)
    else:
        A1 = np.array(init_codes, dtype=float)
        if A1.shape != (D1.d, data.shape[1]):
            raise InvalidArgumentError(f"initial codes have shape {A1.shape}, expected {(D1.d, data.shape[1])}")
    _check_finite("init", A1)
    R0 = data - D1.atoms @ A1
    f_prev = float(np.sum(R0 * R0) + params.lambda3 * np.sum(np.abs(A1)))
    trace: List[Tuple[str, float]] = [("init", f_prev)]
    logger.debug("init objective %.6g", f_prev)

    learned: Optional[DictLearnResult] = None
    A2 = None
    dl_trace: List[TraceEntry] = []
    converged = False
    outer = 0

    for outer in range(1, params.max_outer_iters + 1):
        residual = data - D1.atoms @ A1
        learned = learn_dictionary(
            residual,
            dict_opts,
            init_dictionary=learned.dictionary if learned is not None else None,
            init_codes=A2,
            reference=D1,
        )
        _check_finite("dictionary", learned.dictionary.atoms, learned.code.coeffs)
        dl_trace.extend(learned.trace)
        if learned.trace:
            trace.append(("dictionary", learned.trace[-1].objective))

        D2 = learned.dictionary
        joint = D1.concat(D2)
        warm = np.vstack([A1, learned.code.coeffs])
        code = lasso(joint, X, params.lambda3, params.lasso, init=warm)
        _check_finite("coefficients", code.coeffs)
        A1 = code.coeffs[: D1.d]
        A2 = code.coeffs[D1.d :]

        f = _full_objective(data, D1, A1, D2, A2, params.lambda3)
        trace.append(("coefficients", f))
        logger.debug("outer %d objective %.6g", outer, f)

        if abs(f_prev - f) <= params.outer_tol * max(abs(f_prev), np.finfo(float).tiny):
            converged = True
            break
        f_prev = f

    assert learned is not None
    D2 = learned.dictionary
    A1_code = SparseCode(coeffs=A1.copy(), dict_id=D1.id)
    A2_code = SparseCode(coeffs=A2.copy(), dict_id=D2.id)
    if not converged:
        logger.info("SBMCA stopped after %d outer iterations without converging", outer)

    return SeparationResult(
        method="sbmca",
        Xp_hat=X.with_data(D1.atoms @ A1_code.coeffs),
        Xu_hat=X.with_data(D2.atoms @ A2_code.coeffs),
        A1_hat=A1_code,
        A2_hat=A2_code,
        D2_hat=D2,
        objective_trace=trace,
        outer_iters=outer,
        converged=converged,
        wall_time=time.perf_counter() - start,
        dictlearn_trace=dl_trace,
        params=params.to_dict(),
    )


def truncated_svd_denoise(X: BlockMatrix, r: int) -> BlockMatrix:
    """Best rank-r approximation of X in Frobenius norm."""
    m, q = X.data.shape
    if not 1 <= r <= min(m, q):
        raise InvalidArgumentError(f"rank must lie in [1, {min(m, q)}], got {r}")
    U, s, Vt = np.linalg.svd(X.data, full_matrices=False)
    low = (U[:, :r] * s[:r]) @ Vt[:r]
    _check_finite("tsvd", low)
    return X.with_data(low)


def tsvd_separate(X: BlockMatrix, r: int) -> SeparationResult:
    """Truncated-SVD baseline: the rank-r part is x_p, the remainder x_u."""
    start = time.perf_counter()
    low = truncated_svd_denoise(X, r)
    return SeparationResult(
        method="tsvd",
        Xp_hat=low,
        Xu_hat=X.with_data(X.data - low.data),
        objective_trace=[("tsvd", float(np.sum((X.data - low.data) ** 2)))],
        outer_iters=1,
        wall_time=time.perf_counter() - start,
        params={"rank": r},
    )


def _trace_rows(trace: List[Tuple[str, float]]) -> List[Tuple[str, int, float]]:
    rows = []
    completed = 0
    for stage, value in trace:
        rows.append((stage, 0 if stage == "init" else completed + 1, value))
        if stage not in ("init", "dictionary"):
            completed += 1
    return rows


def save_result(
    directory: PathLike,
    result: SeparationResult,
    fs: int,
    dataset: Optional[Dict[str, Any]] = None,
    wav_format: str = "float32",
) -> Path:
    """
    Persist a separation as a directory of CSV/WAV signals, codes, the learned
    dictionary, traces, a manifest and a separate ``timings.json``.

    Everything except ``timings.json`` is identical across repeated runs with
    the same inputs.
    """
    directory = ensure_dir(directory)
    xp, xu = deblockify(result.Xp_hat), deblockify(result.Xu_hat)
    save_signal_csv(directory / "xp_hat.csv", xp)
    save_signal_csv(directory / "xu_hat.csv", xu)
    write_wav(directory / "xp_hat.wav", xp, fs, wav_format)
    write_wav(directory / "xu_hat.wav", xu, fs, wav_format)
    if result.A1_hat is not None:
        save_matrix_csv(directory / "A1.csv", result.A1_hat.coeffs)
    if result.A2_hat is not None:
        save_matrix_csv(directory / "A2.csv", result.A2_hat.coeffs)
    if result.D2_hat is not None:
        save_dictionary(directory / "D2.sbd", result.D2_hat)
    write_rows_csv(directory / "trace.csv", ["stage", "outer_iter", "value"], _trace_rows(result.objective_trace))
    if result.dictlearn_trace:
        write_rows_csv(
            directory / "dictlearn_trace.csv",
            ["round", "objective", "dead_atom_count"],
            [(t.round, t.objective, t.dead_atoms) for t in result.dictlearn_trace],
        )
    save_json(
        directory / "manifest.json",
        {
            "kind": "result",
            "method": result.method,
            "params": result.params,
            "dataset": dataset or {},
            "fs": fs,
            "block_len": result.Xp_hat.block_len,
            "orig_len": result.Xp_hat.orig_len,
            "pad": result.Xp_hat.pad,
            "outer_iters": result.outer_iters,
            "converged": result.converged,
            "objective_trace": [[stage, value] for stage, value in result.objective_trace],
            "A1_dict_id": result.A1_hat.dict_id if result.A1_hat is not None else None,
            "A2_dict_id": result.A2_hat.dict_id if result.A2_hat is not None else None,
        },
    )
    save_json(directory / "timings.json", {"wall_time": result.wall_time, "timestamp": timestamp()})
    return directory


def load_result(directory: PathLike) -> SeparationResult:
    """Reload the estimates, codes and learned dictionary saved by ``save_result``."""
    directory = Path(directory)
    manifest = load_json(directory / "manifest.json")
    if manifest.get("kind") != "result":
        raise StorageError(directory / "manifest.json", "not a result manifest")
    m = int(manifest["block_len"])
    xp = blockify(load_signal_csv(directory / "xp_hat.csv"), m)
    xu = blockify(load_signal_csv(directory / "xu_hat.csv"), m)
    if xp.orig_len != manifest["orig_len"] or xu.orig_len != manifest["orig_len"]:
        raise StorageError(directory, "signal length disagrees with manifest")

    def code(name: str, key: str) -> Optional[SparseCode]:
        path = directory / name
        return SparseCode(coeffs=load_matrix_csv(path), dict_id=manifest[key]) if path.exists() else None

    d2_path = directory / "D2.sbd"
    timings = directory / "timings.json"
    return SeparationResult(
        method=manifest["method"],
        Xp_hat=xp,
        Xu_hat=xu,
        A1_hat=code("A1.csv", "A1_dict_id"),
        A2_hat=code("A2.csv", "A2_dict_id"),
        D2_hat=load_dictionary(d2_path) if d2_path.exists() else None,
        objective_trace=[(stage, float(value)) for stage, value in manifest.get("objective_trace", [])],
        outer_iters=int(manifest.get("outer_iters", 0)),
        converged=bool(manifest.get("converged", True)),
        wall_time=float(load_json(timings).get("wall_time", 0.0)) if timings.exists() else 0.0,
        params=manifest.get("params", {}),
    )
