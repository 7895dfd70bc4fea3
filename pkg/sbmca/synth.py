"""Synthetic mixtures: damped-sinusoid discharge trains over a structured background.

Every default below (sample rate, pulse parameters, jitter, mixing gain) is a
choice of this package; none is a measured device value.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.signal import resample_poly

from .dictionaries import Dictionary, build_pulse_dictionary, default_shifts
from .errors import InvalidArgumentError, StorageError
from .storage import (
    PathLike,
    ensure_dir,
    hash_inputs,
    load_json,
    load_signal_csv,
    read_wav,
    save_json,
    save_signal_csv,
    write_wav,
)

logger = logging.getLogger(__name__)

LABELS = ("low", "high")

DEFAULT_FS = 14400
DEFAULT_RATE = 36.0
DEFAULT_BLOCK_LEN = 400
DEFAULT_JITTER = 5


@dataclass
class PulseSpec:
    """p(t) = amplitude * exp(-decay_rate t) * sin(2 pi carrier_freq t + phase) on [0, duration)."""

    carrier_freq: float
    decay_rate: float
    duration: float
    amplitude: float = 1.0
    phase: float = 0.0

    def validate(self, fs: float) -> None:
        if not 0 < self.carrier_freq < fs / 2:
            raise InvalidArgumentError(
                f"carrier {self.carrier_freq} Hz must lie in (0, {fs / 2}) Hz at fs={fs}"
            )
        if not self.decay_rate > 0:
            raise InvalidArgumentError(f"decay_rate must be > 0, got {self.decay_rate}")
        if not self.duration > 0:
            raise InvalidArgumentError(f"duration must be > 0, got {self.duration}")


def default_prototype_specs() -> Tuple[PulseSpec, PulseSpec]:
    """Low-load and high-load pulse parameters used when none are given."""
    return (
        PulseSpec(carrier_freq=1200.0, decay_rate=60.0, duration=0.025),
        PulseSpec(carrier_freq=2200.0, decay_rate=140.0, duration=0.012),
    )


@dataclass
class SynthConfig:
    fs: int = DEFAULT_FS
    duration: float = 10.0
    rate: float = DEFAULT_RATE
    block_len: int = DEFAULT_BLOCK_LEN
    jitter_max: int = DEFAULT_JITTER
    low: PulseSpec = field(default_factory=lambda: default_prototype_specs()[0])
    high: PulseSpec = field(default_factory=lambda: default_prototype_specs()[1])
    rms_ratio: float = 1.0
    sigma: float = 0.0
    seed: int = 0
    background: Optional[str] = None
    max_shift: int = 8

    @property
    def n(self) -> int:
        return int(round(self.fs * self.duration))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SynthConfig":
        data = dict(data)
        for key in ("low", "high"):
            if isinstance(data.get(key), dict):
                data[key] = PulseSpec(**data[key])
        return cls(**data)


class PulseTrain(NamedTuple):
    x_p: np.ndarray
    labels: List[str]
    onsets: np.ndarray


@dataclass(eq=False)
class MixtureDataset:
    """Ground truth and mixture; ``x == (x_p + x_u) + noise`` holds exactly."""

    x_p: np.ndarray
    x_u: np.ndarray
    x: np.ndarray
    noise: np.ndarray
    labels: List[str]
    onsets: np.ndarray
    sigma: float
    seed: int
    fs: int
    config: Dict[str, Any] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.x.size

    @property
    def id(self) -> str:
        return hash_inputs({"config": self.config, "sigma": self.sigma, "seed": self.seed, "n": self.n})


def make_prototypes(spec_low: PulseSpec, spec_high: PulseSpec, fs: float, m: int) -> Tuple[np.ndarray, np.ndarray]:
    """Sample both damped sinusoids and zero-pad (or truncate) them to m samples."""
    if m < 1:
        raise InvalidArgumentError(f"m must be >= 1, got {m}")
    out = []
    for spec in (spec_low, spec_high):
        spec.validate(fs)
        length = int(round(spec.duration * fs))
        if length > m:
            logger.info("Pulse of %d samples truncated to %d", length, m)
            length = m
        t = np.arange(length) / fs
        pulse = np.zeros(m)
        pulse[:length] = spec.amplitude * np.exp(-spec.decay_rate * t) * np.sin(
            2 * np.pi * spec.carrier_freq * t + spec.phase
        )
        out.append(pulse)
    return out[0], out[1]


def _support(p: np.ndarray) -> int:
    nz = np.flatnonzero(p)
    return int(nz[-1]) + 1 if nz.size else 0


def make_pulse_train(
    n: int,
    fs: float,
    prototypes: Sequence[np.ndarray],
    seed: int,
    rate: float = DEFAULT_RATE,
    jitter_max: int = DEFAULT_JITTER,
    labels: Optional[Sequence[str]] = None,
) -> PulseTrain:
    """
    Build a nominally periodic discharge train.

    Discharge k starts at round(k fs / rate) plus a uniform integer jitter in
    [-jitter_max, jitter_max] and uses the low or high prototype, chosen
    uniformly at random unless ``labels`` fixes the sequence. Samples falling
    outside [0, n) are dropped.
    """
    if not rate > 0 or not fs > 0:
        raise InvalidArgumentError("fs and rate must be > 0")
    if len(prototypes) != len(LABELS):
        raise InvalidArgumentError(f"expected {len(LABELS)} prototypes (low, high)")
    period = fs / rate
    if n < period:
        raise InvalidArgumentError(f"n={n} is shorter than one discharge period ({period:.1f} samples)")
    if jitter_max < 0 or jitter_max >= period / 2:
        raise InvalidArgumentError(f"jitter_max={jitter_max} must lie in [0, {period / 2:.1f})")
    protos = [np.asarray(p, dtype=float).ravel() for p in prototypes]
    for p in protos:
        if p.size > period:
            raise InvalidArgumentError(
                f"prototype length {p.size} exceeds the nominal period of {period:.1f} samples"
            )

    count = int(math.ceil(n / period)) + 1
    nominal = np.round(np.arange(count) * period).astype(int)
    nominal = nominal[nominal < n]
    count = nominal.size

    rng = np.random.default_rng(seed)
    jitter = rng.integers(-jitter_max, jitter_max + 1, size=count)
    if labels is None:
        choice = rng.integers(0, len(LABELS), size=count)
        labels_out = [LABELS[c] for c in choice]
    else:
        if len(labels) < count:
            raise InvalidArgumentError(f"{len(labels)} labels given for {count} discharges")
        labels_out = [str(label) for label in labels[:count]]
        if any(label not in LABELS for label in labels_out):
            raise InvalidArgumentError(f"labels must be one of {LABELS}")

    onsets = nominal + jitter
    x_p = np.zeros(n)
    overlaps = 0
    for k, (onset, label) in enumerate(zip(onsets, labels_out)):
        proto = protos[LABELS.index(label)]
        lo, hi = max(onset, 0), min(onset + proto.size, n)
        if hi > lo:
            x_p[lo:hi] += proto[lo - onset : hi - onset]
        if k + 1 < count and onsets[k + 1] < onset + _support(proto):
            overlaps += 1
    if overlaps:
        logger.info("%d discharge(s) overlap their successor", overlaps)
    return PulseTrain(x_p=x_p, labels=labels_out, onsets=onsets)


def _rms(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.square(x)))) if x.size else 0.0


def scale_background(x_u: np.ndarray, reference: Optional[np.ndarray] = None, rms_ratio: float = 1.0) -> np.ndarray:
    """
    Scale the background so that RMS(x_u) = rms_ratio * RMS(reference).

    Without a reference the background is peak-normalized to 1. Silent input
    stays silent.
    """
    if rms_ratio < 0:
        raise InvalidArgumentError(f"rms_ratio must be >= 0, got {rms_ratio}")
    x_u = np.asarray(x_u, dtype=float)
    if reference is None:
        peak = float(np.max(np.abs(x_u))) if x_u.size else 0.0
        return x_u / peak if peak > 0 else np.zeros_like(x_u)
    current = _rms(x_u)
    if current == 0 or rms_ratio == 0:
        return np.zeros_like(x_u)
    return x_u * (rms_ratio * _rms(np.asarray(reference, dtype=float)) / current)


def load_background(
    path: PathLike,
    n: int,
    fs: int,
    reference: Optional[np.ndarray] = None,
    rms_ratio: float = 1.0,
) -> np.ndarray:
    """
    Read a mono background recording (WAV, or CSV at ``fs``), resample to fs
    and truncate to n samples.
    """
    path = Path(path)
    if path.suffix.lower() == ".csv":
        file_fs, x = fs, load_signal_csv(path)
    else:
        file_fs, x = read_wav(path)
    if file_fs != fs:
        g = math.gcd(int(fs), int(file_fs))
        x = resample_poly(x, int(fs) // g, int(file_fs) // g)
    if x.size < n:
        raise StorageError(path, f"background has {x.size} samples at {fs} Hz, need {n}")
    return scale_background(x[:n], reference, rms_ratio)


def synth_background(
    n: int,
    fs: int,
    seed: int,
    reference: Optional[np.ndarray] = None,
    rms_ratio: float = 1.0,
    num_chirps: int = 3,
    harmonics: int = 5,
) -> np.ndarray:
    """
    Speech-like stand-in: harmonic chirps under slowly varying envelopes.

    Each chirp sweeps its fundamental linearly between two draws in
    [100, 250] Hz; partial h has amplitude 1/h and partials at or above
    Nyquist are skipped.
    """
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    t = np.arange(n) / fs
    span = max(t[-1], 1.0 / fs)
    x = np.zeros(n)
    for _ in range(num_chirps):
        f0, f1 = rng.uniform(100.0, 250.0, size=2)
        phase0 = rng.uniform(0.0, 2 * np.pi)
        env_rate = rng.uniform(0.5, 3.0)
        env_phase = rng.uniform(0.0, 2 * np.pi)
        envelope = 0.5 * (1.0 + np.sin(2 * np.pi * env_rate * t + env_phase))
        phase = 2 * np.pi * (f0 * t + (f1 - f0) * t * t / (2 * span)) + phase0
        for h in range(1, harmonics + 1):
            if h * max(f0, f1) >= fs / 2:
                break
            x += envelope * np.sin(h * phase) / h
    return scale_background(x, reference, rms_ratio)


def mix(
    x_p: np.ndarray,
    x_u: np.ndarray,
    sigma: float,
    seed: int,
    labels: Sequence[str] = (),
    onsets: Optional[np.ndarray] = None,
    fs: int = DEFAULT_FS,
    config: Optional[Dict[str, Any]] = None,
) -> MixtureDataset:
    """x = (x_p + x_u) + sigma * g with g iid standard normal drawn from ``seed``."""
    x_p = np.asarray(x_p, dtype=float).ravel()
    x_u = np.asarray(x_u, dtype=float).ravel()
    if x_p.size != x_u.size:
        raise InvalidArgumentError(f"length mismatch: x_p has {x_p.size} samples, x_u has {x_u.size}")
    if sigma < 0:
        raise InvalidArgumentError(f"sigma must be >= 0, got {sigma}")

    noise = sigma * np.random.default_rng(seed).standard_normal(x_p.size)
    x = (x_p + x_u) + noise
    return MixtureDataset(
        x_p=x_p,
        x_u=x_u,
        x=x,
        noise=noise,
        labels=list(labels),
        onsets=np.asarray(onsets if onsets is not None else [], dtype=int),
        sigma=float(sigma),
        seed=int(seed),
        fs=int(fs),
        config=dict(config or {}),
    )


def _stage_seeds(seed: int) -> Tuple[int, int, int]:
    """Independent seeds for the pulse train, background and noise."""
    children = np.random.SeedSequence(seed).spawn(3)
    return tuple(int(c.generate_state(1)[0]) for c in children)  # type: ignore[return-value]


def make_dataset(config: SynthConfig) -> MixtureDataset:
    """Run the full synthesis pipeline for a configuration."""
    pulse_seed, background_seed, noise_seed = _stage_seeds(config.seed)
    low, high = make_prototypes(config.low, config.high, config.fs, config.block_len)
    train = make_pulse_train(
        config.n, config.fs, [low, high], pulse_seed, rate=config.rate, jitter_max=config.jitter_max
    )
    if config.background:
        x_u = load_background(config.background, config.n, config.fs, train.x_p, config.rms_ratio)
    else:
        x_u = synth_background(config.n, config.fs, background_seed, train.x_p, config.rms_ratio)
    return mix(
        train.x_p,
        x_u,
        config.sigma,
        noise_seed,
        labels=train.labels,
        onsets=train.onsets,
        fs=config.fs,
        config=config.to_dict(),
    )


def pulse_dictionary_for(config: SynthConfig) -> Dictionary:
    """Known dictionary: circular shifts of both prototypes within +/- max_shift."""
    low, high = make_prototypes(config.low, config.high, config.fs, config.block_len)
    return build_pulse_dictionary([low, high], default_shifts(config.max_shift))


def save_dataset(directory: PathLike, dataset: MixtureDataset, wav_format: str = "float32") -> Path:
    """Write signals as CSV (exact) and WAV, plus a manifest for regeneration."""
    directory = ensure_dir(directory)
    save_signal_csv(directory / "x.csv", dataset.x)
    save_signal_csv(directory / "x_p.csv", dataset.x_p)
    save_signal_csv(directory / "x_u.csv", dataset.x_u)
    save_signal_csv(directory / "noise.csv", dataset.noise)
    write_wav(directory / "mixture.wav", dataset.x, dataset.fs, wav_format)
    save_json(
        directory / "manifest.json",
        {
            "kind": "dataset",
            "id": dataset.id,
            "n": dataset.n,
            "fs": dataset.fs,
            "sigma": dataset.sigma,
            "seed": dataset.seed,
            "config": dataset.config,
            "labels": dataset.labels,
            "onsets": [int(o) for o in dataset.onsets],
        },
    )
    return directory


def load_dataset(directory: PathLike) -> MixtureDataset:
    directory = Path(directory)
    manifest = load_json(directory / "manifest.json")
    if manifest.get("kind") != "dataset":
        raise StorageError(directory / "manifest.json", "not a dataset manifest")
    return MixtureDataset(
        x_p=load_signal_csv(directory / "x_p.csv"),
        x_u=load_signal_csv(directory / "x_u.csv"),
        x=load_signal_csv(directory / "x.csv"),
        noise=load_signal_csv(directory / "noise.csv"),
        labels=list(manifest.get("labels", [])),
        onsets=np.asarray(manifest.get("onsets", []), dtype=int),
        sigma=float(manifest["sigma"]),
        seed=int(manifest["seed"]),
        fs=int(manifest["fs"]),
        config=manifest.get("config", {}),
    )
