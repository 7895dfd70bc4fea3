"""Conversion between 1-D signals and matrices of non-overlapping blocks."""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, InvalidStateError


@dataclass(frozen=True, eq=False)
class BlockMatrix:
    """
    An m x q matrix whose column j holds samples [j*m, (j+1)*m) of a signal.

    Attributes:
        data: Block matrix, shape (block_len, q)
        block_len: Block length m in samples
        orig_len: Length n of the signal before padding
        pad: Number of trailing zero samples appended to reach a multiple of m
    """

    data: np.ndarray
    block_len: int
    orig_len: int
    pad: int

    @property
    def q(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self):
        return self.data.shape

    def with_data(self, data: np.ndarray) -> "BlockMatrix":
        """Return a BlockMatrix with the same blocking metadata and new contents."""
        data = np.asarray(data, dtype=float)
        if data.shape != self.data.shape:
            raise InvalidArgumentError(
                f"shape {data.shape} does not match block matrix shape {self.data.shape}"
            )
        return BlockMatrix(data=data, block_len=self.block_len, orig_len=self.orig_len, pad=self.pad)

    def validate(self) -> None:
        """Raise InvalidStateError if the blocking metadata is inconsistent."""
        if self.data.ndim != 2 or self.data.shape[0] != self.block_len:
            raise InvalidStateError(
                f"data shape {self.data.shape} inconsistent with block_len={self.block_len}"
            )
        if not 0 <= self.pad < self.block_len:
            raise InvalidStateError(f"pad={self.pad} outside [0, {self.block_len})")
        if self.block_len * self.q != self.orig_len + self.pad:
            raise InvalidStateError(
                f"m*q = {self.block_len * self.q} != orig_len + pad = {self.orig_len + self.pad}"
            )


def blockify(x, m: int) -> BlockMatrix:
    """
    Split a signal into non-overlapping length-m blocks, one per column.

    The final block is zero-padded when m does not divide len(x).
    """
    x = np.asarray(x, dtype=float).ravel()
    n = x.size
    if m < 1:
        raise InvalidArgumentError(f"block length must be >= 1, got {m}")
    if n < 1:
        raise InvalidArgumentError("cannot blockify an empty signal")

    pad = (m - n % m) % m
    padded = np.concatenate([x, np.zeros(pad)]) if pad else x.copy()
    data = padded.reshape(-1, m).T.copy()
    return BlockMatrix(data=data, block_len=m, orig_len=n, pad=pad)


def deblockify(B: BlockMatrix) -> np.ndarray:
    """Concatenate the columns of B and drop the trailing padding."""
    B.validate()
    return B.data.T.reshape(-1)[: B.orig_len].copy()
