"""Named sub-seed derivation.

All randomness in a run flows from one master seed; distinct concerns
(parameter init, data split, per-epoch shuffles) get independent streams by
hashing the master seed together with a label. SHA-256 keeps the derivation
stable across platforms and Python versions, unlike the builtin ``hash``.
"""

import hashlib


def subseed(seed, *labels):
    """Deterministic 64-bit sub-seed for (seed, labels)."""
    material = repr((int(seed),) + tuple(labels)).encode()
    return int.from_bytes(hashlib.sha256(material).digest()[:8], "little")
