"""Evaluation: reconstruction SNR, per-block errors, histograms and clairvoyant grid search."""

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from . import config
from .blocking import BlockMatrix, blockify, deblockify
from .dictionaries import Dictionary
from .dictlearn import DictLearnOptions
from .errors import InvalidArgumentError
from .separators import (
    METHODS,
    SbmcaParams,
    SeparationResult,
    initial_codes,
    mca_dct_separate,
    mca_identity_separate,
    sbmca_separate,
    tsvd_separate,
)
from .solvers import LassoOptions
from .storage import PathLike, write_rows_csv
from .synth import MixtureDataset

logger = logging.getLogger(__name__)

TARGETS = ("x_p", "x_u")
GOOD_BLOCK_THRESHOLD = 0.2
HIST_BINS = 30
HIST_RANGE = (0.0, 1.5)
TSVD_RANKS = (1, 2, 4, 8)
GRID_INNER_ITERS = 5
GRID_OUTER_ITERS = 5

ArrayOrBlocks = Union[np.ndarray, BlockMatrix]


class HistogramBin(NamedTuple):
    bin_lo: float
    bin_hi: float
    count: int


@dataclass(eq=False)
class EvalReport:
    """
    Scores of one separation against noise-free ground truth.

    An SNR of ``inf`` marks an exact reconstruction (``exact_xp`` /
    ``exact_xu``). A target whose reference is silent has no defined SNR; it
    is NaN and flagged by ``undefined_xp`` / ``undefined_xu``. Block errors
    use NaN for blocks whose reference is zero; those blocks are counted in
    ``zero_blocks_*`` and left out of histograms.
    """

    method: str
    snr_xp_db: float
    snr_xu_db: float
    block_errors_xp: np.ndarray
    block_errors_xu: np.ndarray
    params: Dict[str, Any] = field(default_factory=dict)

    @property
    def exact_xp(self) -> bool:
        return math.isinf(self.snr_xp_db)

    @property
    def exact_xu(self) -> bool:
        return math.isinf(self.snr_xu_db)

    @property
    def undefined_xp(self) -> bool:
        return math.isnan(self.snr_xp_db)

    @property
    def undefined_xu(self) -> bool:
        return math.isnan(self.snr_xu_db)

    @property
    def zero_blocks_xp(self) -> int:
        return int(np.isnan(self.block_errors_xp).sum())

    @property
    def zero_blocks_xu(self) -> int:
        return int(np.isnan(self.block_errors_xu).sum())

    def snr(self, target: str) -> float:
        if target not in TARGETS:
            raise InvalidArgumentError(f"Invalid target: {target}. Use one of {TARGETS}")
        return self.snr_xp_db if target == "x_p" else self.snr_xu_db

    def fraction_below(self, threshold: float = GOOD_BLOCK_THRESHOLD, target: str = "x_p") -> float:
        errors = self.block_errors_xp if target == "x_p" else self.block_errors_xu
        valid = errors[~np.isnan(errors)]
        return float(np.mean(valid < threshold)) if valid.size else 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "method": self.method,
            "params": self.params,
            "snr_xp_db": None if self.undefined_xp else self.snr_xp_db,
            "snr_xu_db": None if self.undefined_xu else self.snr_xu_db,
            "exact_xp": self.exact_xp,
            "exact_xu": self.exact_xu,
            "undefined_xp": self.undefined_xp,
            "undefined_xu": self.undefined_xu,
            "zero_blocks_xp": self.zero_blocks_xp,
            "zero_blocks_xu": self.zero_blocks_xu,
            "fraction_xp_below_0.2": self.fraction_below(),
            "block_errors_xp": [None if np.isnan(e) else float(e) for e in self.block_errors_xp],
            "block_errors_xu": [None if np.isnan(e) else float(e) for e in self.block_errors_xu],
        }


def reconstruction_snr(ref: np.ndarray, est: np.ndarray) -> float:
    """10 log10(||ref||^2 / ||ref - est||^2) in dB; ``inf`` when est == ref."""
    ref = np.asarray(ref, dtype=float).ravel()
    est = np.asarray(est, dtype=float).ravel()
    if ref.size != est.size:
        raise InvalidArgumentError(f"length mismatch: {ref.size} vs {est.size}")
    signal = float(ref @ ref)
    if signal == 0:
        raise InvalidArgumentError("reference signal has zero norm")
    diff = ref - est
    error = float(diff @ diff)
    if error == 0:
        return math.inf
    return 10.0 * math.log10(signal / error)


def _blocks(X: ArrayOrBlocks) -> np.ndarray:
    return X.data if isinstance(X, BlockMatrix) else np.asarray(X, dtype=float)


def per_block_errors(Ref: ArrayOrBlocks, Est: ArrayOrBlocks) -> np.ndarray:
    """||ref_j - est_j|| / ||ref_j|| per column; NaN where ref_j is zero."""
    ref, est = _blocks(Ref), _blocks(Est)
    if ref.shape != est.shape:
        raise InvalidArgumentError(f"shape mismatch: {ref.shape} vs {est.shape}")
    ref_norm = np.linalg.norm(ref, axis=0)
    err_norm = np.linalg.norm(ref - est, axis=0)
    out = np.full(ref.shape[1], np.nan)
    nonzero = ref_norm > 0
    out[nonzero] = err_norm[nonzero] / ref_norm[nonzero]
    return out


def histogram(
    values: Sequence[float],
    bins: int = HIST_BINS,
    value_range: Tuple[float, float] = HIST_RANGE,
) -> List[HistogramBin]:
    """
    Equal-width histogram with left-closed bins and a closed last bin.

    Values outside the range are counted in the end bins. NaN entries are
    dropped.
    """
    lo, hi = value_range
    if bins < 1:
        raise InvalidArgumentError(f"bins must be >= 1, got {bins}")
    if not lo < hi:
        raise InvalidArgumentError(f"empty range [{lo}, {hi}]")
    values = np.asarray(values, dtype=float).ravel()
    missing = int(np.isnan(values).sum())
    if missing:
        logger.info("Histogram ignores %d NaN value(s)", missing)
        values = values[~np.isnan(values)]
    counts, edges = np.histogram(np.clip(values, lo, hi), bins=bins, range=(lo, hi))
    return [HistogramBin(float(edges[i]), float(edges[i + 1]), int(counts[i])) for i in range(bins)]


def write_histogram_csv(path: PathLike, rows: Sequence[HistogramBin]) -> None:
    write_rows_csv(path, HistogramBin._fields, rows)


def _target_snr(target: str, ref: np.ndarray, est: np.ndarray) -> float:
    if np.any(ref):
        return reconstruction_snr(ref, est)
    logger.info("Reference %s is silent; its SNR is undefined", target)
    return math.nan


def evaluate(result: SeparationResult, dataset: MixtureDataset) -> EvalReport:
    """
    Score a separation against the dataset's noise-free x_p and x_u.

    A silent target (e.g. a dataset mixed with rms_ratio 0) gets a NaN SNR
    instead of an error; the other target is still scored.
    """
    m = result.Xp_hat.block_len
    if result.Xp_hat.orig_len != dataset.n:
        raise InvalidArgumentError(
            f"result covers {result.Xp_hat.orig_len} samples, dataset has {dataset.n}"
        )
    xp_hat, xu_hat = deblockify(result.Xp_hat), deblockify(result.Xu_hat)
    return EvalReport(
        method=result.method,
        snr_xp_db=_target_snr("x_p", dataset.x_p, xp_hat),
        snr_xu_db=_target_snr("x_u", dataset.x_u, xu_hat),
        block_errors_xp=per_block_errors(blockify(dataset.x_p, m), result.Xp_hat),
        block_errors_xu=per_block_errors(blockify(dataset.x_u, m), result.Xu_hat),
        params=dict(result.params),
    )


def lambda_scale(D: Dictionary, X: ArrayOrBlocks) -> float:
    """max |D^T X|, the smallest lambda/2 that zeroes every code."""
    return float(np.max(np.abs(D.atoms.T @ _blocks(X))))


def default_lambda_grid(scale: float, lo: float = 1e-3, hi: float = 1e1, per_decade: int = 7) -> List[float]:
    """Log-spaced values over [lo, hi] * scale with ``per_decade`` points per decade."""
    if not scale > 0 or not 0 < lo < hi or per_decade < 1:
        raise InvalidArgumentError("grid needs scale > 0, 0 < lo < hi and per_decade >= 1")
    num = int(round(math.log10(hi / lo) * per_decade)) + 1
    return [float(v) for v in np.logspace(math.log10(lo), math.log10(hi), num) * scale]


@dataclass(eq=False)
class GridResult:
    method: str
    reports: List[EvalReport]
    best: Dict[str, EvalReport]

    def write_csv(self, path: PathLike) -> None:
        keys = sorted({k for r in self.reports for k in r.params if not isinstance(r.params[k], dict)})
        rows = [
            [self.method, *[r.params.get(k) for k in keys], r.snr_xp_db, r.snr_xu_db, r.fraction_below()]
            for r in self.reports
        ]
        write_rows_csv(path, ["method", *keys, "snr_xp_db", "snr_xu_db", "fraction_xp_below_0.2"], rows)


def default_grid(method: str, D1: Dictionary, X: ArrayOrBlocks, per_decade: int = 7) -> Dict[str, List[float]]:
    """
    The sweep used when none is given.

    MCA baselines get the full log grid. SBMCA crosses lambda1 with lambda2
    (lambda3 tied to lambda2) over [1e-2, 1] * scale at two points per decade,
    which keeps the full three-method sweep on the default dataset within a
    quarter hour on four threads.
    """
    if method == "tsvd":
        return {"rank": list(TSVD_RANKS)}
    scale = lambda_scale(D1, X)
    if method == "sbmca":
        values = default_lambda_grid(scale, lo=1e-2, hi=1.0, per_decade=2)
        return {"lambda1": values, "lambda2": list(values)}
    if method in METHODS:
        return {"lambda": default_lambda_grid(scale, per_decade=per_decade)}
    raise InvalidArgumentError(f"Invalid method: {method}. Use one of {METHODS}")


def grid_sbmca_params(
    lasso_opts: Optional[LassoOptions] = None,
    num_atoms: int = DictLearnOptions.num_atoms,
    inner_iters: int = GRID_INNER_ITERS,
    max_outer_iters: int = GRID_OUTER_ITERS,
) -> SbmcaParams:
    """Base SBMCA parameters for sweeps; the grid point supplies the lambdas."""
    lasso_opts = lasso_opts or LassoOptions()
    return SbmcaParams(
        lambda1=1.0,
        lambda2=1.0,
        lambda3=1.0,
        dict_opts=DictLearnOptions(num_atoms=num_atoms, inner_iters=inner_iters, lasso=lasso_opts),
        max_outer_iters=max_outer_iters,
        lasso=lasso_opts,
    )


def _grid_points(method: str, grid: Dict[str, Sequence[float]], tie_lambda23: bool) -> List[Dict[str, float]]:
    if method == "sbmca":
        keys = ["lambda1", "lambda2"] + ([] if tie_lambda23 else ["lambda3"])
    elif method == "tsvd":
        keys = ["rank"]
    else:
        keys = ["lambda"]
    missing = [k for k in keys if k not in grid]
    if missing:
        raise InvalidArgumentError(f"grid for {method} is missing {missing}")
    points = [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]
    if not points:
        raise InvalidArgumentError("empty grid")
    if method == "sbmca" and tie_lambda23:
        for p in points:
            p["lambda3"] = p["lambda2"]
    return points


def run_method(
    method: str,
    X: BlockMatrix,
    D1: Dictionary,
    point: Dict[str, float],
    base_params: Optional[SbmcaParams] = None,
    lasso_opts: Optional[LassoOptions] = None,
    init_codes: Optional[np.ndarray] = None,
) -> SeparationResult:
    """Run one separator at one parameter point."""
    if method == "sbmca":
        if base_params is None:
            params = SbmcaParams(**point, lasso=lasso_opts or LassoOptions())
        else:
            params = replace(base_params, **point)
        return sbmca_separate(X, D1, params, init_codes=init_codes)
    if method == "mca-dct":
        return mca_dct_separate(X, D1, point["lambda"], lasso_opts)
    if method == "mca-identity":
        return mca_identity_separate(X, D1, point["lambda"], lasso_opts)
    if method == "tsvd":
        return tsvd_separate(X, int(point["rank"]))
    raise InvalidArgumentError(f"Invalid method: {method}. Use one of {METHODS}")


def _ranked(value: float) -> float:
    return -math.inf if math.isnan(value) else value


def grid_search(
    X: BlockMatrix,
    D1: Dictionary,
    dataset: MixtureDataset,
    method: str,
    grid: Dict[str, Sequence[float]],
    base_params: Optional[SbmcaParams] = None,
    lasso_opts: Optional[LassoOptions] = None,
    tie_lambda23: bool = True,
    workers: Optional[int] = None,
) -> GridResult:
    """
    Clairvoyant parameter sweep: run every grid point and keep, for each of
    x_p and x_u independently, the report with the highest SNR.

    Grid keys are ``lambda1``/``lambda2``/``lambda3`` for sbmca (lambda3 follows
    lambda2 when ``tie_lambda23``), ``lambda`` for the MCA baselines and
    ``rank`` for tsvd. SBMCA initializations are computed once per lambda1
    and shared. Reports keep grid order regardless of ``workers``; undefined
    SNRs never win.
    """
    if method not in METHODS:
        raise InvalidArgumentError(f"Invalid method: {method}. Use one of {METHODS}")
    points = _grid_points(method, grid, tie_lambda23)
    workers = workers or config.get_workers()

    def pmap(fn, items):
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                return list(pool.map(fn, items))
        return [fn(item) for item in items]

    inits: Dict[float, np.ndarray] = {}
    if method == "sbmca":
        if base_params is None:
            base_params = SbmcaParams(lambda1=1.0, lambda2=1.0, lambda3=1.0, lasso=lasso_opts or LassoOptions())
        lambda1s = list(dict.fromkeys(p["lambda1"] for p in points))
        codes = pmap(lambda l1: initial_codes(X, D1, replace(base_params, lambda1=l1)), lambda1s)
        inits = dict(zip(lambda1s, codes))
        logger.info("Shared %d SBMCA initialization(s) across %d points", len(inits), len(points))

    def run(point):
        result = run_method(method, X, D1, point, base_params, lasso_opts, init_codes=inits.get(point.get("lambda1")))
        report = evaluate(result, dataset)
        report.params = {**point, **{k: v for k, v in report.params.items() if k not in point}}
        logger.info("%s %s: x_p %.2f dB, x_u %.2f dB", method, point, report.snr_xp_db, report.snr_xu_db)
        return report

    reports = pmap(run, points)

    best = {}
    for target in TARGETS:
        best[target] = max(reports, key=lambda r: _ranked(r.snr(target)))
    return GridResult(method=method, reports=reports, best=best)
