"""Reproducible uniform-number sources.

Every Monte Carlo sample owns a fixed-width slice of a counter-based
stream, addressed by ``(seed, sample index)``. Any partition of the
population into blocks therefore reads exactly the same numbers, which is
what makes parallel runs bit-identical to serial ones.
"""
from __future__ import annotations

import secrets
from pathlib import Path

import numpy as np

from .errors import InvalidInputError

_WORD = 2.0**-64


def fresh_seed() -> int:
    """Draw a seed from OS entropy; callers echo it for replay."""
    return secrets.randbits(63)


def derive_seed(seed: int, *path: int) -> int:
    """Independent child seed for ``seed`` along an integer path."""
    ss = np.random.SeedSequence([int(seed), *map(int, path)])
    return int(ss.generate_state(2, np.uint64).view(np.uint64)[0] >> np.uint64(1))


class PhiloxSource:
    """Counter-based uniform stream keyed by ``seed``."""

    def __init__(self, seed: int):
        if seed < 0:
            raise InvalidInputError(f"seed must be non-negative, got {seed}")
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.Philox(key=self.seed))

    def random(self, size=None):
        """Sequential draws, for one-off use outside a study."""
        return self._gen.random(size)

    def block(self, start: int, count: int, stride: int) -> np.ndarray:
        """Uniforms for samples ``start .. start+count-1``, shape ``(count, stride)``.

        ``stride`` must be a multiple of 4 (one Philox counter step yields four words).
        """
        if stride % 4:
            raise InvalidInputError("stride must be a multiple of 4")
        bg = np.random.Philox(key=self.seed)
        bg.advance(start * stride // 4)
        return np.random.Generator(bg).random(count * stride).reshape(count, stride)


class RandomBitsFile:
    """Uniforms read from an external file of raw random bytes.

    The file is consumed as little-endian 64-bit words, each mapped to
    ``word / 2**64`` in [0, 1). Running out of words is an error.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        try:
            raw = self.path.read_bytes()
        except OSError as exc:
            raise InvalidInputError(f"cannot read randomness file {path}: {exc}") from None
        n_words = len(raw) // 8
        self.words = np.frombuffer(raw[: n_words * 8], dtype="<u8")
        self._pos = 0

    def __len__(self):
        return len(self.words)

    def _take(self, lo: int, hi: int) -> np.ndarray:
        if hi > len(self.words):
            raise InvalidInputError(
                f"randomness file {self.path} exhausted: need {hi} words, have {len(self.words)}"
            )
        return self.words[lo:hi].astype(np.float64) * _WORD

    def random(self, size=None):
        n = 1 if size is None else int(np.prod(size))
        out = self._take(self._pos, self._pos + n)
        self._pos += n
        return float(out[0]) if size is None else out.reshape(size)

    def block(self, start: int, count: int, stride: int) -> np.ndarray:
        return self._take(start * stride, (start + count) * stride).reshape(count, stride)
