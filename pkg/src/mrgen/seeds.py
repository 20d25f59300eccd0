"""Deterministic seed derivation.

Every random stream in a pipeline run is keyed by the master seed plus a path
of labels, e.g. ``derive_seed(1, "corpus", "filter")``. Distinct label paths
give independent streams, and rerunning a single stage reproduces exactly
the stream it had inside a full run.
"""
from __future__ import annotations

import hashlib


def derive_seed(master: int, *labels) -> int:
    text = "/".join([str(int(master))] + [str(label) for label in labels])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1
