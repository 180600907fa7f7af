"""Deterministic, order-independent random streams.

Every random draw in the harness comes from a counter-based generator keyed
by semantic identifiers (seed, subject, segment, frame, ...) rather than from
a shared sequential stream.  Two consequences:

* regenerating any single artifact reproduces it exactly, regardless of what
  else was generated or in which order;
* generation can be parallelized across segments without changing output.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["keyed_rng", "keyed_uniform_int"]


def _digest(parts: tuple) -> bytes:
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, bytes):
            raw = part
        elif isinstance(part, bool):
            raw = b"b1" if part else b"b0"
        elif isinstance(part, int):
            raw = b"i" + str(part).encode("ascii")
        elif isinstance(part, float):
            raw = b"f" + repr(part).encode("ascii")
        elif isinstance(part, str):
            raw = b"s" + part.encode("utf-8")
        else:
            raise TypeError(f"unhashable stream key part: {part!r}")
        h.update(len(raw).to_bytes(4, "little"))
        h.update(raw)
    return h.digest()


def keyed_rng(*parts: int | float | str | bytes) -> np.random.Generator:
    """Return a Generator whose output depends only on the key parts."""
    digest = _digest(parts)
    key = np.frombuffer(digest[:16], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def keyed_uniform_int(bound: int, *parts) -> int:
    """Deterministic integer in [0, bound) keyed by the parts."""
    if bound <= 0:
        raise ValueError("bound must be positive")
    digest = _digest(parts)
    return int.from_bytes(digest[16:24], "little") % bound
