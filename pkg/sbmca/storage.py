"""On-disk formats: hashing, JSON manifests, CSV signals and WAV audio."""

import csv
import hashlib
import json
import logging
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np
from scipy.io import wavfile

from .errors import InvalidArgumentError, StorageError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

WAV_FORMATS = ("float32", "pcm16")


def hash_inputs(data: Any) -> str:
    """Create a SHA256 hash of a JSON-renderable structure (first 16 hex chars)."""
    input_str = json.dumps(data, sort_keys=True, default=str)
    return hashlib.sha256(input_str.encode()).hexdigest()[:16]


def hash_arrays(*arrays: np.ndarray, extra: Any = None) -> str:
    """Hash array contents (dtype, shape and bytes) plus optional JSON metadata."""
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(a)
        h.update(str(a.dtype).encode())
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    if extra is not None:
        h.update(json.dumps(extra, sort_keys=True, default=str).encode())
    return h.hexdigest()[:16]


def ensure_dir(path: PathLike) -> Path:
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise StorageError(path, f"could not create directory ({e})") from e
    return path


def timestamp() -> str:
    return datetime.now().isoformat()


def save_json(path: PathLike, data: Dict[str, Any]) -> None:
    try:
        with open(path, "w") as f:
            json.dump(data, f, indent=2, sort_keys=True, default=str)
            f.write("\n")
    except (OSError, TypeError, ValueError) as e:
        raise StorageError(path, f"could not write JSON ({e})") from e


def load_json(path: PathLike) -> Dict[str, Any]:
    try:
        with open(path, "r") as f:
            return json.load(f)
    except FileNotFoundError as e:
        raise StorageError(path, "file not found") from e
    except (OSError, json.JSONDecodeError) as e:
        raise StorageError(path, f"could not read JSON ({e})") from e


def save_signal_csv(path: PathLike, x: np.ndarray) -> None:
    """Write one sample per line with round-trip precision."""
    try:
        np.savetxt(path, np.asarray(x, dtype=float).ravel(), fmt="%.17g")
    except OSError as e:
        raise StorageError(path, f"could not write CSV ({e})") from e


def load_signal_csv(path: PathLike) -> np.ndarray:
    try:
        x = np.loadtxt(path, dtype=float, delimiter=",", ndmin=1)
    except FileNotFoundError as e:
        raise StorageError(path, "file not found") from e
    except (OSError, ValueError) as e:
        raise StorageError(path, f"could not parse CSV signal ({e})") from e
    if x.ndim != 1:
        if x.shape[1] != 1:
            raise StorageError(path, "CSV signal must have one sample per line")
        x = x[:, 0]
    return x


def save_matrix_csv(path: PathLike, A: np.ndarray) -> None:
    try:
        np.savetxt(path, np.atleast_2d(A), fmt="%.17g", delimiter=",")
    except OSError as e:
        raise StorageError(path, f"could not write CSV ({e})") from e


def load_matrix_csv(path: PathLike) -> np.ndarray:
    try:
        return np.loadtxt(path, dtype=float, delimiter=",", ndmin=2)
    except FileNotFoundError as e:
        raise StorageError(path, "file not found") from e
    except (OSError, ValueError) as e:
        raise StorageError(path, f"could not parse CSV matrix ({e})") from e


def write_rows_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    try:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(header)
            for row in rows:
                writer.writerow([_csv_cell(v) for v in row])
    except OSError as e:
        raise StorageError(path, f"could not write CSV ({e})") from e


def read_rows_csv(path: PathLike) -> Tuple[List[str], List[List[str]]]:
    try:
        with open(path, "r", newline="") as f:
            rows = list(csv.reader(f))
    except FileNotFoundError as e:
        raise StorageError(path, "file not found") from e
    except OSError as e:
        raise StorageError(path, f"could not read CSV ({e})") from e
    if not rows:
        raise StorageError(path, "empty CSV file")
    return rows[0], rows[1:]


def _csv_cell(v: Any) -> Any:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_wav(path: PathLike, x: np.ndarray, fs: int, fmt: str = "float32") -> None:
    """Write a mono WAV file as 32-bit float or 16-bit PCM."""
    x = np.asarray(x, dtype=float).ravel()
    if fmt == "float32":
        data = x.astype(np.float32)
    elif fmt == "pcm16":
        peak = float(np.max(np.abs(x))) if x.size else 0.0
        if peak > 1.0:
            logger.warning("Clipping %s: peak %.3f exceeds full scale", path, peak)
        data = np.round(np.clip(x, -1.0, 1.0) * 32767).astype(np.int16)
    else:
        raise InvalidArgumentError(f"Invalid WAV format: {fmt}. Use one of {WAV_FORMATS}")
    try:
        wavfile.write(str(path), int(fs), data)
    except OSError as e:
        raise StorageError(path, f"could not write WAV ({e})") from e


def read_wav(path: PathLike) -> Tuple[int, np.ndarray]:
    """Read a WAV file as floats in [-1, 1], downmixing multichannel audio."""
    try:
        fs, data = wavfile.read(str(path))
    except FileNotFoundError as e:
        raise StorageError(path, "file not found") from e
    except (OSError, ValueError) as e:
        raise StorageError(path, f"unreadable WAV file ({e})") from e

    if np.issubdtype(data.dtype, np.integer):
        info = np.iinfo(data.dtype)
        if info.min == 0:
            # unsigned 8-bit PCM is offset binary
            x = (data.astype(float) - (info.max + 1) / 2) / ((info.max + 1) / 2)
        else:
            x = data.astype(float) / float(info.max + 1)
    else:
        x = data.astype(float)

    if x.ndim > 1:
        logger.warning("Downmixing %d-channel file %s to mono", x.shape[1], path)
        x = x.mean(axis=1)
    return int(fs), x
