"""Tests for synthetic pulse trains, backgrounds and mixtures."""

import numpy as np
import pytest

from sbmca.blocking import blockify
from sbmca.errors import InvalidArgumentError, StorageError
from sbmca.storage import save_signal_csv, write_wav
from sbmca.synth import (
    LABELS,
    PulseSpec,
    SynthConfig,
    default_prototype_specs,
    load_background,
    load_dataset,
    make_dataset,
    make_prototypes,
    make_pulse_train,
    mix,
    pulse_dictionary_for,
    save_dataset,
    scale_background,
    synth_background,
)

FS = 14400


def _small_config(**kwargs):
    base = dict(duration=0.25, seed=3)
    base.update(kwargs)
    return SynthConfig(**base)


def test_prototypes_follow_damped_sinusoid():
    low, high = make_prototypes(*default_prototype_specs(), FS, 400)
    assert low.shape == high.shape == (400,)

    t = np.arange(10) / FS
    np.testing.assert_allclose(low[:10], np.exp(-60.0 * t) * np.sin(2 * np.pi * 1200.0 * t))
    assert not np.any(low[360:])
    assert not np.any(high[173:])


def test_prototype_validation():
    with pytest.raises(InvalidArgumentError):
        make_prototypes(PulseSpec(8000.0, 60.0, 0.01), PulseSpec(1000.0, 60.0, 0.01), FS, 400)
    with pytest.raises(InvalidArgumentError):
        make_prototypes(PulseSpec(1000.0, 0.0, 0.01), PulseSpec(1000.0, 60.0, 0.01), FS, 400)


def test_pulse_train_places_prototypes():
    """Without jitter and with fixed labels the train is a sum of placed pulses."""
    protos = [np.array([1.0, 2.0, 0.0]), np.array([-1.0, 0.0, 0.0])]
    train = make_pulse_train(20, 10.0, protos, seed=0, rate=2.0, jitter_max=0, labels=["low", "high", "low", "high"])

    np.testing.assert_array_equal(train.onsets, [0, 5, 10, 15])
    expected = np.zeros(20)
    expected[[0, 1, 10, 11]] = [1.0, 2.0, 1.0, 2.0]
    expected[[5, 15]] = -1.0
    np.testing.assert_array_equal(train.x_p, expected)
    assert train.labels == ["low", "high", "low", "high"]


def test_pulse_train_jitter_and_labels():
    """Onsets stay within jitter of the nominal grid; labels come from both classes."""
    low, high = make_prototypes(*default_prototype_specs(), FS, 400)
    n = FS * 2
    train = make_pulse_train(n, FS, [low, high], seed=11)

    nominal = np.round(np.arange(train.onsets.size) * 400.0)
    assert np.all(np.abs(train.onsets - nominal) <= 5)
    assert set(train.labels) == set(LABELS)
    assert train.x_p.shape == (n,)


def test_pulse_train_is_seeded():
    low, high = make_prototypes(*default_prototype_specs(), FS, 400)
    a = make_pulse_train(FS, FS, [low, high], seed=4)
    b = make_pulse_train(FS, FS, [low, high], seed=4)
    np.testing.assert_array_equal(a.x_p, b.x_p)
    assert a.labels == b.labels
    np.testing.assert_array_equal(a.onsets, b.onsets)


def test_pulse_train_rejects_bad_geometry():
    """Too short a signal, excessive jitter and over-long prototypes."""
    protos = [np.ones(3), np.ones(3)]
    with pytest.raises(InvalidArgumentError):
        make_pulse_train(4, 10.0, protos, seed=0, rate=2.0)
    with pytest.raises(InvalidArgumentError):
        make_pulse_train(20, 10.0, protos, seed=0, rate=2.0, jitter_max=3)
    with pytest.raises(InvalidArgumentError):
        make_pulse_train(20, 10.0, [np.ones(6), np.ones(3)], seed=0, rate=2.0, jitter_max=0)


def test_mix_identity_holds_exactly():
    """x == (x_p + x_u) + noise bit for bit."""
    rng = np.random.default_rng(0)
    x_p, x_u = rng.standard_normal(100), rng.standard_normal(100)
    data = mix(x_p, x_u, sigma=0.1, seed=5)

    np.testing.assert_array_equal(data.x, (data.x_p + data.x_u) + data.noise)
    assert data.noise.std() == pytest.approx(0.1, rel=0.3)
    np.testing.assert_array_equal(mix(x_p, x_u, 0.1, seed=5).noise, data.noise)


def test_mix_zero_sigma_and_errors():
    data = mix(np.ones(5), np.zeros(5), sigma=0.0, seed=0)
    assert not np.any(data.noise)
    with pytest.raises(InvalidArgumentError):
        mix(np.ones(5), np.ones(4), sigma=0.0, seed=0)
    with pytest.raises(InvalidArgumentError):
        mix(np.ones(5), np.ones(5), sigma=-1.0, seed=0)


def test_scale_background_matches_rms_ratio():
    rng = np.random.default_rng(1)
    ref = rng.standard_normal(500)
    x_u = scale_background(3.0 * rng.standard_normal(500), ref, rms_ratio=0.5)
    assert np.sqrt(np.mean(x_u**2)) == pytest.approx(0.5 * np.sqrt(np.mean(ref**2)))


def test_synth_background_is_seeded_and_normalized():
    a = synth_background(4000, FS, seed=2)
    b = synth_background(4000, FS, seed=2)
    np.testing.assert_array_equal(a, b)
    assert np.max(np.abs(a)) == pytest.approx(1.0)
    assert not np.array_equal(a, synth_background(4000, FS, seed=3))


def test_load_background_resamples_wav(tmp_path):
    """A 7200 Hz recording is resampled to the target rate and truncated."""
    t = np.arange(7200) / 7200
    path = tmp_path / "speech.wav"
    write_wav(path, 0.5 * np.sin(2 * np.pi * 200 * t), 7200)

    x_u = load_background(path, n=10000, fs=FS)
    assert x_u.shape == (10000,)
    assert np.max(np.abs(x_u)) == pytest.approx(1.0)

    with pytest.raises(StorageError):
        load_background(path, n=FS * 2, fs=FS)


def test_load_background_from_csv(tmp_path):
    path = tmp_path / "bg.csv"
    save_signal_csv(path, np.linspace(-2.0, 1.0, 50))
    x_u = load_background(path, n=40, fs=FS, reference=np.ones(40), rms_ratio=2.0)
    assert np.sqrt(np.mean(x_u**2)) == pytest.approx(2.0)


def test_make_dataset_is_reproducible():
    cfg = _small_config()
    a, b = make_dataset(cfg), make_dataset(cfg)
    np.testing.assert_array_equal(a.x, b.x)
    assert a.id == b.id
    assert a.n == 3600
    assert not np.array_equal(a.x, make_dataset(_small_config(seed=4)).x)


def test_dataset_rms_ratio():
    data = make_dataset(_small_config(rms_ratio=0.5))
    ratio = np.sqrt(np.mean(data.x_u**2)) / np.sqrt(np.mean(data.x_p**2))
    assert ratio == pytest.approx(0.5)


def test_dataset_save_load(tmp_path):
    """Signals reload bit-exactly and the manifest restores the configuration."""
    data = make_dataset(_small_config(sigma=0.05))
    save_dataset(tmp_path / "ds", data, wav_format="pcm16")
    assert (tmp_path / "ds" / "mixture.wav").exists()

    loaded = load_dataset(tmp_path / "ds")
    np.testing.assert_array_equal(loaded.x, data.x)
    np.testing.assert_array_equal(loaded.x, (loaded.x_p + loaded.x_u) + loaded.noise)
    assert loaded.labels == data.labels
    assert loaded.id == data.id
    assert SynthConfig.from_dict(loaded.config) == _small_config(sigma=0.05)


def test_pulse_dictionary_for_default_config():
    D = pulse_dictionary_for(SynthConfig())
    assert (D.m, D.d) == (400, 34)
    assert D.labels[0] == "pulse-0:-8"


def test_fast_decay_prototype_dies_out():
    """decay 5000 at fs 8000: sample 40 is below 1e-10 of the amplitude."""
    spec = PulseSpec(carrier_freq=1000.0, decay_rate=5000.0, duration=0.01, amplitude=2.0)
    low, _ = make_prototypes(spec, spec, 8000, 80)
    assert abs(low[40]) < 1e-10 * spec.amplitude
    assert np.max(np.abs(low[:5])) > 0.1


def test_unjittered_single_prototype_train_is_rank_one():
    low, high = make_prototypes(*default_prototype_specs(), FS, 400)
    n = 400 * 12
    train = make_pulse_train(n, FS, [low, high], seed=0, rate=36.0, jitter_max=0, labels=["low"] * 12)
    X = blockify(train.x_p, 400).data
    singular = np.linalg.svd(X, compute_uv=False)
    assert singular[1] <= 1e-10 * singular[0]


@pytest.mark.parametrize("n", [4000, 14400, 50001])
def test_label_count_matches_rate(n):
    low, high = make_prototypes(*default_prototype_specs(), FS, 400)
    train = make_pulse_train(n, FS, [low, high], seed=1, rate=36.0)
    expected = n * 36.0 // FS
    assert abs(len(train.labels) - expected) <= 1


def test_mix_noise_has_requested_std():
    n = 200_000
    data = mix(np.zeros(n), np.zeros(n), 0.1, seed=5)
    assert np.std(data.noise) == pytest.approx(0.1, rel=0.03)
