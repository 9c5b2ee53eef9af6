"""Process-wide limits."""

import os

DEFAULT_DENSE_LIMIT = 12
DENSE_LIMIT_ENV = "TELEPORTAL_DENSE_LIMIT"

# |entry| below this counts as zero when recognising Pauli/Clifford matrices.
ZERO_TOL = 1e-10
# Phases within this distance of {1, i, -1, -i} snap to it.
PHASE_SNAP_TOL = 1e-8


def dense_limit() -> int:
    """Largest qubit count allowed for dense 2^n x 2^n operator work."""
    raw = os.environ.get(DENSE_LIMIT_ENV)
    if raw is None or raw.strip() == "":
        return DEFAULT_DENSE_LIMIT
    value = int(raw)
    if value < 1:
        raise ValueError(f"{DENSE_LIMIT_ENV} must be positive, got {value}")
    return value


def check_dense(n: int, what: str = "dense operator") -> None:
    limit = dense_limit()
    if n > limit:
        raise ValueError(f"{what} on {n} qubits exceeds the dense limit of {limit}")
