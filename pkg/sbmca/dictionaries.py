"""Dictionaries with unit-norm atoms: pulse-shift, DCT-II and identity."""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Sequence, Tuple

import numpy as np
from scipy.fft import dct

from .errors import InvalidArgumentError, StorageError
from .storage import PathLike, hash_arrays

logger = logging.getLogger(__name__)

UNIT_NORM_TOL = 1e-10
DEFAULT_SHIFT_RANGE = 8

_MAGIC = "SBMCA-DICT 1"


@dataclass(frozen=True, eq=False)
class Dictionary:
    """
    An m x d matrix of unit-norm atoms with one provenance label per atom.

    Labels are ``pulse-<p>:<shift>``, ``dct-<k>``, ``identity-<k>`` or
    ``learned-<k>``.
    """

    atoms: np.ndarray
    labels: Tuple[str, ...]
    id: str = field(default="", compare=False)

    def __post_init__(self):
        atoms = np.array(self.atoms, dtype=float)
        if atoms.ndim != 2 or atoms.shape[1] < 1:
            raise InvalidArgumentError(f"dictionary must be a non-empty 2-D matrix, got shape {atoms.shape}")
        if len(self.labels) != atoms.shape[1]:
            raise InvalidArgumentError(
                f"{len(self.labels)} labels for {atoms.shape[1]} atoms"
            )
        if not np.all(np.isfinite(atoms)):
            raise InvalidArgumentError("dictionary contains non-finite entries")
        norms = np.linalg.norm(atoms, axis=0)
        if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOL):
            worst = int(np.argmax(np.abs(norms - 1.0)))
            raise InvalidArgumentError(f"atom {worst} has norm {norms[worst]!r}, expected 1")
        atoms.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "labels", tuple(self.labels))
        if not self.id:
            object.__setattr__(self, "id", hash_arrays(atoms, extra=list(self.labels)))

    @classmethod
    def from_atoms(cls, atoms: np.ndarray, labels: Sequence[str]) -> "Dictionary":
        """Normalize the columns of ``atoms`` and wrap them; zero columns are rejected."""
        atoms = np.array(atoms, dtype=float)
        norms = np.linalg.norm(atoms, axis=0)
        if np.any(norms == 0):
            raise InvalidArgumentError(f"zero-norm atom at index {int(np.argmin(norms))}")
        return cls(atoms=atoms / norms, labels=tuple(labels))

    @property
    def m(self) -> int:
        return self.atoms.shape[0]

    @property
    def d(self) -> int:
        return self.atoms.shape[1]

    def concat(self, other: "Dictionary") -> "Dictionary":
        """Return [self other]."""
        if other.m != self.m:
            raise InvalidArgumentError(f"row counts differ: {self.m} vs {other.m}")
        return Dictionary(
            atoms=np.hstack([self.atoms, other.atoms]),
            labels=self.labels + other.labels,
        )


def default_shifts(max_shift: int = DEFAULT_SHIFT_RANGE) -> List[int]:
    return list(range(-max_shift, max_shift + 1))


def build_pulse_dictionary(prototypes: Sequence[np.ndarray], shifts: Iterable[int]) -> Dictionary:
    """
    Build the known dictionary from circular shifts of prototype pulses.

    Column (p, s) is prototype p rolled by s samples and normalized. Columns
    are ordered prototype-major.
    """
    shifts = [int(s) for s in shifts]
    if not prototypes:
        raise InvalidArgumentError("at least one prototype is required")
    if not shifts:
        raise InvalidArgumentError("at least one shift is required")

    protos = [np.asarray(p, dtype=float).ravel() for p in prototypes]
    m = protos[0].size
    if m < 1 or any(p.size != m for p in protos):
        raise InvalidArgumentError("prototypes must be non-empty and share one length")

    seen = set()
    for s in shifts:
        if s % m in seen:
            raise InvalidArgumentError(f"duplicate shift {s} (mod {m})")
        seen.add(s % m)

    columns = []
    labels = []
    for p, proto in enumerate(protos):
        norm = np.linalg.norm(proto)
        if norm == 0 or not np.isfinite(norm):
            raise InvalidArgumentError(f"prototype {p} has zero or non-finite norm")
        unit = proto / norm
        for s in shifts:
            columns.append(np.roll(unit, s))
            labels.append(f"pulse-{p}:{s:+d}")

    return Dictionary(atoms=np.column_stack(columns), labels=tuple(labels))


def dct_dictionary(m: int) -> Dictionary:
    """Orthonormal DCT-II basis: atom k, entry t = c_k cos(pi (t + 0.5) k / m)."""
    if m < 1:
        raise InvalidArgumentError(f"m must be >= 1, got {m}")
    # rows of the orthonormal DCT-II matrix are the basis vectors
    atoms = dct(np.eye(m), type=2, norm="ortho", axis=0).T
    return Dictionary(atoms=atoms, labels=tuple(f"dct-{k}" for k in range(m)))


def identity_dictionary(m: int) -> Dictionary:
    if m < 1:
        raise InvalidArgumentError(f"m must be >= 1, got {m}")
    return Dictionary(atoms=np.eye(m), labels=tuple(f"identity-{k}" for k in range(m)))


def save_dictionary(path: PathLike, D: Dictionary) -> None:
    """
    Write a dictionary as a magic line, a JSON header line and raw float64 data.

    The data block holds m*d little-endian doubles in column-major order.
    """
    header = json.dumps({"m": D.m, "d": D.d, "labels": list(D.labels)})
    payload = np.asfortranarray(D.atoms).astype("<f8").tobytes(order="F")
    try:
        with open(path, "wb") as f:
            f.write(f"{_MAGIC}\n{header}\n".encode())
            f.write(payload)
    except OSError as e:
        raise StorageError(path, f"could not write dictionary ({e})") from e


def load_dictionary(path: PathLike) -> Dictionary:
    try:
        raw = Path(path).read_bytes()
    except FileNotFoundError as e:
        raise StorageError(path, "file not found") from e
    except OSError as e:
        raise StorageError(path, f"could not read dictionary ({e})") from e

    try:
        magic_end = raw.index(b"\n")
        header_end = raw.index(b"\n", magic_end + 1)
        if raw[:magic_end].decode() != _MAGIC:
            raise ValueError("bad magic line")
        header = json.loads(raw[magic_end + 1 : header_end].decode())
        m, d, labels = int(header["m"]), int(header["d"]), header["labels"]
        data = np.frombuffer(raw[header_end + 1 :], dtype="<f8")
        if data.size != m * d:
            raise ValueError(f"expected {m * d} values, found {data.size}")
    except (ValueError, KeyError, UnicodeDecodeError) as e:
        raise StorageError(path, f"malformed dictionary file ({e})") from e

    atoms = data.reshape((m, d), order="F").astype(float)
    return Dictionary(atoms=atoms, labels=tuple(labels))

