"""Tests for blocking and deblocking of signals."""

import numpy as np
import pytest

from sbmca.blocking import BlockMatrix, blockify, deblockify
from sbmca.errors import InvalidArgumentError, InvalidStateError


def test_blockify_pads_last_block():
    """A length that is not a multiple of m gets trailing zeros."""
    x = np.arange(1.0, 11.0)
    B = blockify(x, 4)

    assert B.shape == (4, 3)
    assert B.pad == 2
    assert B.orig_len == 10
    np.testing.assert_array_equal(B.data[:, 0], [1, 2, 3, 4])
    np.testing.assert_array_equal(B.data[:, 2], [9, 10, 0, 0])


def test_blockify_exact_multiple_has_no_pad():
    """No padding when m divides the signal length."""
    B = blockify(np.ones(12), 4)
    assert B.pad == 0
    assert B.q == 3


def test_deblockify_restores_signal():
    """deblockify(blockify(x, m)) == x exactly for awkward lengths."""
    rng = np.random.default_rng(0)
    for n, m in [(1, 1), (7, 3), (400 * 3 + 17, 400)]:
        x = rng.standard_normal(n)
        np.testing.assert_array_equal(deblockify(blockify(x, m)), x)


def test_blockify_copies_input():
    """Editing the block matrix leaves the source signal alone."""
    x = np.zeros(8)
    B = blockify(x, 4)
    B.data[0, 0] = 5.0
    assert x[0] == 0.0


def test_blockify_rejects_bad_arguments():
    """Zero block length and empty signals are invalid."""
    with pytest.raises(InvalidArgumentError):
        blockify(np.ones(4), 0)
    with pytest.raises(InvalidArgumentError):
        blockify(np.array([]), 4)


def test_deblockify_detects_inconsistent_metadata():
    """m*q must equal orig_len + pad."""
    bad = BlockMatrix(data=np.zeros((4, 2)), block_len=4, orig_len=10, pad=2)
    with pytest.raises(InvalidStateError):
        deblockify(bad)


def test_with_data_keeps_metadata():
    """with_data swaps contents but keeps the blocking layout."""
    B = blockify(np.arange(6.0), 4)
    C = B.with_data(np.ones(B.shape))
    assert (C.block_len, C.orig_len, C.pad) == (4, 6, 2)
    with pytest.raises(InvalidArgumentError):
        B.with_data(np.ones((3, 2)))


def test_blockify_is_linear():
    """blockify(a x + b y) = a blockify(x) + b blockify(y), padding included."""
    rng = np.random.default_rng(0)
    x, y = rng.standard_normal(37), rng.standard_normal(37)
    combined = blockify(2.5 * x - 0.75 * y, 8)
    np.testing.assert_allclose(combined.data, 2.5 * blockify(x, 8).data - 0.75 * blockify(y, 8).data, atol=1e-14)
