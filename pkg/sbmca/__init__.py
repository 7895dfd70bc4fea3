"""sbmca - Semi-blind separation of a known pulse train from an unknown background."""

from .blocking import BlockMatrix, blockify, deblockify
from .config import configure, results_path
from .dictionaries import (
    Dictionary,
    build_pulse_dictionary,
    dct_dictionary,
    identity_dictionary,
    load_dictionary,
    save_dictionary,
)
from .dictlearn import DictLearnOptions, DictLearnResult, dct_atoms, learn_dictionary
from .errors import InvalidArgumentError, InvalidStateError, NumericFailureError, SbmcaError, StorageError
from .metrics import (
    EvalReport,
    default_grid,
    evaluate,
    grid_sbmca_params,
    grid_search,
    histogram,
    per_block_errors,
    reconstruction_snr,
)
from .separators import (
    SbmcaParams,
    SeparationResult,
    initial_codes,
    load_result,
    mca_dct_separate,
    mca_identity_separate,
    sbmca_separate,
    save_result,
    truncated_svd_denoise,
    tsvd_separate,
)
from .solvers import LassoOptions, SparseCode, lasso, omp_one_step, soft_threshold
from .synth import MixtureDataset, SynthConfig, make_dataset, make_pulse_train, mix

__version__ = "0.1.0"
__all__ = [
    "BlockMatrix",
    "blockify",
    "deblockify",
    "configure",
    "results_path",
    "Dictionary",
    "build_pulse_dictionary",
    "dct_dictionary",
    "identity_dictionary",
    "load_dictionary",
    "save_dictionary",
    "DictLearnOptions",
    "DictLearnResult",
    "dct_atoms",
    "learn_dictionary",
    "SbmcaError",
    "InvalidArgumentError",
    "InvalidStateError",
    "NumericFailureError",
    "StorageError",
    "EvalReport",
    "default_grid",
    "evaluate",
    "grid_sbmca_params",
    "grid_search",
    "histogram",
    "per_block_errors",
    "reconstruction_snr",
    "SbmcaParams",
    "SeparationResult",
    "initial_codes",
    "load_result",
    "save_result",
    "mca_dct_separate",
    "mca_identity_separate",
    "sbmca_separate",
    "truncated_svd_denoise",
    "tsvd_separate",
    "LassoOptions",
    "SparseCode",
    "lasso",
    "omp_one_step",
    "soft_threshold",
    "MixtureDataset",
    "SynthConfig",
    "make_dataset",
    "make_pulse_train",
    "mix",
]
