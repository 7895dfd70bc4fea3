"""Tests for hashing, JSON, CSV and WAV helpers."""

import importlib
import logging
import os

import numpy as np
import pytest
from scipy.io import wavfile

from sbmca import config
from sbmca.errors import InvalidArgumentError, StorageError
from sbmca.storage import (
    hash_arrays,
    hash_inputs,
    load_json,
    load_signal_csv,
    read_wav,
    save_json,
    save_signal_csv,
    write_wav,
)


def test_hash_inputs_is_order_independent():
    """Key order does not change the hash."""
    assert hash_inputs({"a": 1, "b": [1, 2]}) == hash_inputs({"b": [1, 2], "a": 1})
    assert len(hash_inputs({"a": 1})) == 16


def test_hash_arrays_sees_shape_and_values():
    x = np.arange(6.0)
    assert hash_arrays(x) == hash_arrays(x.copy())
    assert hash_arrays(x) != hash_arrays(x.reshape(2, 3))
    assert hash_arrays(x, extra=["a"]) != hash_arrays(x, extra=["b"])


def test_json_helpers(tmp_path):
    path = tmp_path / "m.json"
    save_json(path, {"b": 1, "a": [1.5, None]})
    assert load_json(path) == {"a": [1.5, None], "b": 1}
    with pytest.raises(StorageError):
        load_json(tmp_path / "missing.json")
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(StorageError):
        load_json(tmp_path / "bad.json")


def test_signal_csv_is_bit_exact(tmp_path):
    """%.17g text reproduces every double."""
    x = np.random.default_rng(0).standard_normal(257) * 1e-3
    path = tmp_path / "x.csv"
    save_signal_csv(path, x)
    np.testing.assert_array_equal(load_signal_csv(path), x)


def test_load_signal_csv_rejects_matrix(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("1,2\n3,4\n")
    with pytest.raises(StorageError):
        load_signal_csv(path)


def test_wav_float32(tmp_path):
    x = np.array([0.0, 0.25, -0.5, 1.25])
    write_wav(tmp_path / "a.wav", x, 8000)
    fs, y = read_wav(tmp_path / "a.wav")
    assert fs == 8000
    np.testing.assert_allclose(y, x, atol=1e-7)


def test_wav_pcm16_clips_with_warning(tmp_path, caplog):
    with caplog.at_level(logging.WARNING, logger="sbmca"):
        write_wav(tmp_path / "b.wav", np.array([0.5, 2.0]), 8000, fmt="pcm16")
    assert any("Clipping" in r.message for r in caplog.records)

    _, y = read_wav(tmp_path / "b.wav")
    np.testing.assert_allclose(y, [0.5, 32767 / 32768], atol=1e-4)


def test_read_wav_downmixes_stereo(tmp_path, caplog):
    path = tmp_path / "stereo.wav"
    wavfile.write(str(path), 8000, np.array([[0.5, -0.5], [1.0, 0.0]], dtype=np.float32))
    with caplog.at_level(logging.WARNING, logger="sbmca"):
        _, y = read_wav(path)
    np.testing.assert_allclose(y, [0.0, 0.5])
    assert any("Downmixing" in r.message for r in caplog.records)


def test_wav_errors(tmp_path):
    with pytest.raises(InvalidArgumentError):
        write_wav(tmp_path / "c.wav", np.zeros(3), 8000, fmt="mp3")
    with pytest.raises(StorageError):
        read_wav(tmp_path / "missing.wav")


def test_configure_overrides_environment():
    """configure() updates the module settings and the environment."""
    saved = config.current_config()
    saved_env = {k: os.environ.get(k) for k in ("SBMCA_LOG_LEVEL", "SBMCA_WORKERS", "SBMCA_RESULTS_DIR")}
    try:
        config.configure(log_level="info", workers=3, results_dir="/tmp/sbmca-results")
        assert config.current_config() == {"log_level": "INFO", "workers": 3, "results_dir": "/tmp/sbmca-results"}
        assert os.environ["SBMCA_WORKERS"] == "3"
        assert config.get_workers() == 3
        with pytest.raises(InvalidArgumentError):
            config.configure(workers=0)
    finally:
        config.configure(
            log_level=saved["log_level"], workers=saved["workers"], results_dir=saved["results_dir"]
        )
        for key, value in saved_env.items():
            if value is None:
                os.environ.pop(key, None)
            else:
                os.environ[key] = value


def test_malformed_worker_environment_is_invalid_argument(monkeypatch):
    """A non-integer SBMCA_WORKERS fails import with the package's own error."""
    with pytest.raises(InvalidArgumentError, match="SBMCA_WORKERS"):
        config._parse_workers("four")
    assert config._parse_workers("3") == 3

    monkeypatch.setenv("SBMCA_WORKERS", "2.5")
    try:
        with pytest.raises(InvalidArgumentError):
            importlib.reload(config)
    finally:
        monkeypatch.undo()
        importlib.reload(config)


def test_results_path_follows_configuration(tmp_path):
    saved = config.current_config()["results_dir"]
    saved_env = os.environ.get("SBMCA_RESULTS_DIR")
    try:
        config.configure(results_dir=str(tmp_path))
        assert config.results_path("grid") == tmp_path / "grid"
    finally:
        config.configure(results_dir=saved)
        if saved_env is None:
            os.environ.pop("SBMCA_RESULTS_DIR", None)
        else:
            os.environ["SBMCA_RESULTS_DIR"] = saved_env
