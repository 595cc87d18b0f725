"""Size caps shared by the enumeration and kernel code."""

from __future__ import annotations

import os

LATTICE_CAP = 10**7
DEFAULT_KERNEL_CAP = 5000
BRUTE_FORCE_CAP = 10**7

# Proposition-level constant used only when reporting bound/measured ratios.
C4_PRIME = 8.0

ENV_KERNEL_CAP = "PERMCH_KERNEL_CAP"


class CapExceededError(ValueError):
    """Raised when a lattice, kernel or enumeration would exceed its size cap."""


def kernel_cap() -> int:
    raw = os.environ.get(ENV_KERNEL_CAP)
    if raw is None or raw == "":
        return DEFAULT_KERNEL_CAP
    return int(raw)
