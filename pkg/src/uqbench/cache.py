"""Content-addressed store of solver outputs, keyed by (omega, config).

A cache hit returns the stored vector bit-for-bit; on disk each run is one
small ``.npy`` file named by its key.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np


class RunCache:
    """Maps key strings to saturation vectors, in memory or on disk."""

    def __init__(self, root=None):
        self.root = None if root is None else Path(root)
        if self.root is not None:
            self.root.mkdir(parents=True, exist_ok=True)
        self._mem: dict[str, np.ndarray] = {}
        self.hits = 0
        self.misses = 0

    @staticmethod
    def key_for(omega, signature: str) -> str:
        om = [float(x) for x in omega]
        text = f"{om[0]!r},{om[1]!r},{om[2]!r}|{signature}"
        return hashlib.sha256(text.encode()).hexdigest()

    def _path(self, key: str) -> Path:
        return self.root / f"{key}.npy"

    def get(self, key: str):
        if key in self._mem:
            self.hits += 1
            return self._mem[key]
        if self.root is not None:
            path = self._path(key)
            if path.exists():
                values = np.load(path)
                self._mem[key] = values
                self.hits += 1
                return values
        self.misses += 1
        return None

    def put(self, key: str, values: np.ndarray):
        values = np.asarray(values)
        self._mem[key] = values
        if self.root is not None:
            tmp = self._path(key).with_suffix(".tmp")
            with open(tmp, "wb") as fh:
                np.save(fh, values)
            tmp.replace(self._path(key))

    def __len__(self) -> int:
        if self.root is not None:
            return len(list(self.root.glob("*.npy")))
        return len(self._mem)
