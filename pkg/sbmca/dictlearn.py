"""Dictionary learning for the unknown component.

Alternates LASSO sparse coding with sequential rank-one atom updates on the
residual, replacing atoms whose code rows die out. When a reference (known)
dictionary is given, atoms are kept from drifting into its span.
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Iterator, List, Optional

import numpy as np

from .dictionaries import Dictionary, dct_dictionary
from .errors import InvalidArgumentError
from .solvers import LassoOptions, SparseCode, lasso

logger = logging.getLogger(__name__)

REL_TOL = 1e-6

INIT_DCT = "dct"
INIT_RESIDUAL = "residual"
ATOM_INITS = (INIT_DCT, INIT_RESIDUAL)


@dataclass
class DictLearnOptions:
    """
    Controls for learning the unknown dictionary.

    ``init`` seeds the atoms from the DCT-II atoms that carry the most weight
    in the residual ("dct") or from random residual columns ("residual").
    ``max_coherence`` bounds |<reference atom, learned atom>| when a
    reference dictionary is passed to ``learn_dictionary``; None disables it.
    """

    num_atoms: int = 64
    lambda2: float = 0.1
    inner_iters: int = 20
    dead_atom_threshold: float = 1e-8
    seed: int = 0
    init: str = INIT_DCT
    max_coherence: Optional[float] = 0.5
    lasso: LassoOptions = field(default_factory=LassoOptions)

    def __post_init__(self):
        if self.num_atoms < 1:
            raise InvalidArgumentError(f"num_atoms must be >= 1, got {self.num_atoms}")
        if self.inner_iters < 1:
            raise InvalidArgumentError(f"inner_iters must be >= 1, got {self.inner_iters}")
        if not self.lambda2 > 0:
            raise InvalidArgumentError(f"lambda2 must be > 0, got {self.lambda2}")
        if self.dead_atom_threshold < 0:
            raise InvalidArgumentError("dead_atom_threshold must be >= 0")
        if self.init not in ATOM_INITS:
            raise InvalidArgumentError(f"Invalid atom init: {self.init}. Use one of {ATOM_INITS}")
        if self.max_coherence is not None and not 0 < self.max_coherence <= 1:
            raise InvalidArgumentError(f"max_coherence must lie in (0, 1], got {self.max_coherence}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DictLearnOptions":
        data = dict(data)
        if "lasso" in data and isinstance(data["lasso"], dict):
            data["lasso"] = LassoOptions.from_dict(data["lasso"])
        return cls(**data)


@dataclass
class TraceEntry:
    round: int
    objective: float
    dead_atoms: int


@dataclass(eq=False)
class DictLearnResult:
    dictionary: Dictionary
    code: SparseCode
    trace: List[TraceEntry]
    degenerate: bool = False

    @property
    def replacement_rounds(self) -> List[int]:
        return [t.round for t in self.trace if t.dead_atoms > 0]


def _learned_labels(n: int):
    return tuple(f"learned-{k}" for k in range(n))


def _random_unit(rng: np.random.Generator, m: int) -> np.ndarray:
    v = rng.standard_normal(m)
    return v / np.linalg.norm(v)


def init_atoms(R: np.ndarray, num_atoms: int, seed: int) -> Dictionary:
    """
    Seed the dictionary with distinct, randomly chosen, normalized columns of R.

    Zero columns, and any atoms beyond the number of columns, are replaced by
    random Gaussian unit vectors.
    """
    R = np.asarray(R, dtype=float)
    m, q = R.shape
    if q < 1:
        raise InvalidArgumentError("cannot initialize atoms from a matrix with no columns")
    rng = np.random.default_rng(seed)

    picks = rng.choice(q, size=min(num_atoms, q), replace=False)
    atoms = np.empty((m, num_atoms))
    for k in range(num_atoms):
        col = R[:, picks[k]] if k < picks.size else np.zeros(m)
        norm = np.linalg.norm(col)
        atoms[:, k] = col / norm if norm > 0 else _random_unit(rng, m)
    return Dictionary(atoms=atoms, labels=_learned_labels(num_atoms))


def dct_atoms(R: np.ndarray, num_atoms: int, seed: int) -> Dictionary:
    """
    Seed the dictionary with the DCT-II atoms of largest total |analysis
    coefficient| over the columns of R, kept in frequency order.

    Ties go to the lower frequency. Atoms beyond the block length come from
    ``init_atoms``.
    """
    R = np.asarray(R, dtype=float)
    m = R.shape[0]
    basis = dct_dictionary(m).atoms
    weight = np.sum(np.abs(basis.T @ R), axis=1)
    keep = np.sort(np.argsort(-weight, kind="stable")[:num_atoms])
    atoms = basis[:, keep]
    if num_atoms > m:
        atoms = np.hstack([atoms, init_atoms(R, num_atoms - m, seed).atoms])
    return Dictionary(atoms=atoms, labels=_learned_labels(num_atoms))


def _coherence(reference: np.ndarray, atom: np.ndarray) -> float:
    return float(np.max(np.abs(reference.T @ atom)))


def _update_atoms(
    D: np.ndarray,
    A: np.ndarray,
    E: np.ndarray,
    lam: float,
    threshold: float,
    reference: Optional[np.ndarray] = None,
    max_coherence: Optional[float] = None,
) -> List[int]:
    """
    Sequential rank-one atom updates, in place. E holds R - D A on entry and exit.

    Each atom takes the normalized least-squares direction for its fixed code
    row, computed on the columns that use it. The row absorbs the
    normalization factor, leaving the atom's contribution to D A unchanged,
    only when that does not raise ||E||^2 + lam ||A||_1; otherwise the row is
    kept and D A moves. Rescaling unconditionally can raise the l1 term, so
    the rule trades exact product invariance for a non-increasing objective.

    With a reference dictionary, a new atom whose coherence with it exceeds
    both ``max_coherence`` and the old atom's coherence is rejected and the
    atom and row stay as they were. Returns the indices of dead atoms.
    """
    guarded = reference is not None and max_coherence is not None
    dead = []
    for k in range(D.shape[1]):
        row = A[k]
        if np.max(np.abs(row)) < threshold:
            dead.append(k)
            continue
        cols = np.flatnonzero(row)
        used = row[cols]
        E_k = E[:, cols] + np.outer(D[:, k], used)
        sq = float(used @ used)
        direction = E_k @ used / sq
        scale = float(np.linalg.norm(direction))
        if scale == 0.0:
            dead.append(k)
            continue
        atom = direction / scale
        if guarded and _coherence(reference, atom) > max(max_coherence, _coherence(reference, D[:, k])):
            continue
        D[:, k] = atom
        # objective change of absorbing the scale versus keeping the row
        delta = -sq * (scale - 1.0) ** 2 + lam * (scale - 1.0) * float(np.sum(np.abs(used)))
        if delta <= 0:
            A[k, cols] = used * scale
        E[:, cols] = E_k - np.outer(atom, A[k, cols])
    return dead


def _replace_dead(
    D: np.ndarray,
    A: np.ndarray,
    E: np.ndarray,
    dead: List[int],
    reference: Optional[np.ndarray] = None,
    max_coherence: Optional[float] = None,
) -> None:
    """
    Reseed dead atoms with the worst-fit residual columns and zero their codes.

    With a reference dictionary, columns too coherent with it are skipped; an
    atom with no admissible column left keeps its old direction.
    """
    for k in dead:
        E += np.outer(D[:, k], A[k])
        A[k] = 0.0
    err = np.sum(E * E, axis=0)
    order = np.argsort(-err, kind="stable")

    def candidates() -> Iterator[np.ndarray]:
        for j in order:
            if err[j] == 0:
                return
            atom = E[:, j] / np.sqrt(err[j])
            if reference is None or max_coherence is None or _coherence(reference, atom) <= max_coherence:
                yield atom

    for k, atom in zip(dead, candidates()):
        D[:, k] = atom


def learn_dictionary(
    R: np.ndarray,
    opts: DictLearnOptions,
    init_dictionary: Optional[Dictionary] = None,
    init_codes: Optional[np.ndarray] = None,
    reference: Optional[Dictionary] = None,
) -> DictLearnResult:
    """
    Fit D2 (num_atoms unit-norm atoms) and sparse codes A2 to the residual R.

    Minimizes ||R - D2 A2||_F^2 + lambda2 ||A2||_1 by alternating LASSO coding
    and atom updates for at most ``inner_iters`` rounds, stopping early when
    the relative objective change drops below 1e-6. The trace records the
    objective after each round; it only rises in rounds that reseeded atoms.

    ``reference`` is the known dictionary the learned atoms should stay
    distinct from (see ``DictLearnOptions.max_coherence``).
    """
    R = np.asarray(R, dtype=float)
    m, q = R.shape
    lam = opts.lambda2
    if not np.all(np.isfinite(R)):
        raise InvalidArgumentError("residual contains non-finite entries")
    if opts.num_atoms > q:
        logger.warning("Learning %d atoms from only %d columns", opts.num_atoms, q)
    if reference is not None and reference.m != m:
        raise InvalidArgumentError(f"reference dictionary has {reference.m} rows, residual has {m}")
    ref = reference.atoms if reference is not None else None

    if init_dictionary is not None:
        if init_dictionary.m != m or init_dictionary.d != opts.num_atoms:
            raise InvalidArgumentError(
                f"warm-start dictionary is {init_dictionary.m}x{init_dictionary.d}, "
                f"expected {m}x{opts.num_atoms}"
            )
        D = np.array(init_dictionary.atoms)
    elif opts.init == INIT_DCT:
        D = np.array(dct_atoms(R, opts.num_atoms, opts.seed).atoms)
    else:
        D = np.array(init_atoms(R, opts.num_atoms, opts.seed).atoms)
    A = np.zeros((opts.num_atoms, q)) if init_codes is None else np.array(init_codes, dtype=float)

    if not np.any(R):
        logger.info("Residual is all zero; returning zero codes")
        dictionary = Dictionary(atoms=D, labels=_learned_labels(opts.num_atoms))
        code = SparseCode(coeffs=np.zeros((opts.num_atoms, q)), dict_id=dictionary.id)
        return DictLearnResult(dictionary=dictionary, code=code, trace=[], degenerate=True)

    trace: List[TraceEntry] = []
    prev = None
    for rnd in range(1, opts.inner_iters + 1):
        current = Dictionary(atoms=D, labels=_learned_labels(opts.num_atoms))
        A = lasso(current, R, lam, opts.lasso, init=A).coeffs

        E = R - D @ A
        dead = _update_atoms(D, A, E, lam, opts.dead_atom_threshold, ref, opts.max_coherence)
        if dead:
            logger.info("Round %d: reseeding %d dead atom(s)", rnd, len(dead))
            _replace_dead(D, A, E, dead, ref, opts.max_coherence)
        # guard the unit-norm invariant against accumulated rounding
        D /= np.linalg.norm(D, axis=0)

        obj = float(np.sum(E * E) + lam * np.sum(np.abs(A)))
        trace.append(TraceEntry(round=rnd, objective=obj, dead_atoms=len(dead)))
        logger.debug("Round %d: objective %.6g", rnd, obj)

        if not dead and prev is not None and abs(prev - obj) <= REL_TOL * max(abs(prev), np.finfo(float).tiny):
            break
        prev = obj

    dictionary = Dictionary(atoms=D, labels=_learned_labels(opts.num_atoms))
    return DictLearnResult(
        dictionary=dictionary,
        code=SparseCode(coeffs=A, dict_id=dictionary.id),
        trace=trace,
    )
