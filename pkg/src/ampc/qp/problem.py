from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import InvalidProblemError


class QpStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    MAX_ITER = "MaxIter"
    INFEASIBLE = "Infeasible"


@dataclass
class QpProblem:
    """``min 1/2 z'Hz + g'z + constant  s.t.  A_ineq z <= b_ineq,  lb <= z <= ub``.

    Missing inequality blocks are empty; missing bounds are infinite.
    """
    H: np.ndarray
    g: np.ndarray
    A_ineq: np.ndarray | None = None
    b_ineq: np.ndarray | None = None
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None
    constant: float = 0.0

    def __post_init__(self):
        self.H = np.atleast_2d(np.asarray(self.H, dtype=float))
        self.g = np.asarray(self.g, dtype=float).reshape(-1)
        n = self.g.size
        if self.A_ineq is None:
            self.A_ineq = np.zeros((0, n))
            self.b_ineq = np.zeros(0)
        else:
            self.A_ineq = np.asarray(self.A_ineq, dtype=float).reshape(-1, n) if n else np.zeros((0, 0))
            self.b_ineq = np.asarray(self.b_ineq, dtype=float).reshape(-1)
        self.lb = np.full(n, -np.inf) if self.lb is None else np.asarray(self.lb, dtype=float).reshape(-1)
        self.ub = np.full(n, np.inf) if self.ub is None else np.asarray(self.ub, dtype=float).reshape(-1)

    @property
    def n(self) -> int:
        return self.g.size

    @property
    def m(self) -> int:
        return self.A_ineq.shape[0]

    def validate(self):
        n = self.n
        if self.H.shape != (n, n):
            raise InvalidProblemError(f"H has shape {self.H.shape}, expected {(n, n)}")
        if self.A_ineq.shape[1] != n or self.A_ineq.shape[0] != self.b_ineq.size:
            raise InvalidProblemError(f"A_ineq {self.A_ineq.shape} / b_ineq {self.b_ineq.shape} mismatch n={n}")
        if self.lb.size != n or self.ub.size != n:
            raise InvalidProblemError("bound vectors must have length n")
        for name in ("H", "g", "A_ineq", "b_ineq"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise InvalidProblemError(f"{name} contains non-finite entries")
        if np.any(np.isnan(self.lb)) or np.any(np.isnan(self.ub)):
            raise InvalidProblemError("bounds contain NaN")
        if not np.allclose(self.H, self.H.T, rtol=1e-9, atol=1e-9 * max(1.0, np.abs(self.H).max(initial=0))):
            raise InvalidProblemError("H is not symmetric")

    def objective(self, z) -> float:
        z = np.asarray(z, dtype=float)
        return float(0.5 * z @ self.H @ z + self.g @ z + self.constant)

    def max_violation(self, z) -> float:
        z = np.asarray(z, dtype=float)
        v = [0.0]
        if self.m:
            v.append(float(np.max(self.A_ineq @ z - self.b_ineq)))
        v.append(float(np.max(self.lb - z, initial=-np.inf)))
        v.append(float(np.max(z - self.ub, initial=-np.inf)))
        return max(v)


@dataclass
class QpSolution:
    z: np.ndarray
    objective: float
    status: QpStatus
    kkt_residual: float
    iterations: int = 0
    multipliers: np.ndarray = field(default=None, repr=False)
    max_violation: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status is QpStatus.OPTIMAL


# --- plain-text dump ---------------------------------------------------------

_BLOCKS = ("H", "g", "A_ineq", "b_ineq", "lb", "ub")


def dump_qp(p: QpProblem, path) -> None:
    """Write ``p`` as dense row-major text blocks, each headed by its dimensions."""
    lines = [f"qp n={p.n} m={p.m} constant={p.constant!r}"]
    for name in _BLOCKS:
        arr = np.atleast_2d(getattr(p, name))
        if getattr(p, name).ndim == 1:
            arr = arr.reshape(1, -1)
        rows, cols = arr.shape
        lines.append(f"{name} {rows} {cols}")
        for row in arr:
            lines.append(" ".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_qp(path) -> QpProblem:
    lines = Path(path).read_text().splitlines()
    head = dict(tok.split("=") for tok in lines[0].split()[1:])
    data, i = {}, 1
    while i < len(lines):
        name, rows, cols = lines[i].split()
        rows, cols = int(rows), int(cols)
        vals = [list(map(float, lines[i + 1 + r].split())) for r in range(rows)]
        arr = np.array(vals, dtype=float).reshape(rows, cols)
        data[name] = arr if name in ("H", "A_ineq") else arr.reshape(-1)
        i += 1 + rows
    return QpProblem(constant=float(head["constant"]), **data)
