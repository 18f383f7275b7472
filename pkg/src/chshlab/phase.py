"""Exponential phase operator on number states, and its doubled-space repair.

On a single ladder |0>, |1>, ..., the phase exponential is the one-sided
lowering shift E = sum_n |n><n+1|.  It annihilates nothing but the top of
a truncated ladder, yet E^dag E misses the vacuum: (E^dag E)|0> = 0.

The repair joins two ladders of opposite angular momentum, |n,+> and
|n,->, into one chain

    ... |2,->, |1,->, |0,->, |0,+>, |1,+>, |2,+> ...

and shifts along it, so the vacuum |0,+> is mapped onto |0,->.  On a finite
truncation only the two chain endpoints carry a defect.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .operators import ComplexOperator

DEFECT_TOL = 1e-10


@dataclass(frozen=True)
class TruncatedLadderSpace:
    n_max: int

    def __post_init__(self):
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")

    @property
    def dim(self) -> int:
        return self.n_max + 1


@dataclass(frozen=True)
class DoubledSpace:
    """Two ladders laid out as one chain; matrix index = chain position.

    Position ``n_max - n`` holds |n,-> and position ``n_max + 1 + n`` holds
    |n,+>, so both vacua sit in the middle of the chain.
    """

    n_max: int

    def __post_init__(self):
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")

    @property
    def dim(self) -> int:
        return 2 * (self.n_max + 1)

    def index(self, n: int, sector: str) -> int:
        if not 0 <= n <= self.n_max:
            raise ValueError(f"level {n} outside 0..{self.n_max}")
        if sector == "+":
            return self.n_max + 1 + n
        if sector == "-":
            return self.n_max - n
        raise ValueError("sector must be '+' or '-'")

    def sector_indices(self, sector: str) -> list[int]:
        return [self.index(n, sector) for n in range(self.n_max + 1)]

    def labels(self) -> list[str]:
        out = [""] * self.dim
        for sector in "+-":
            for n in range(self.n_max + 1):
                out[self.index(n, sector)] = f"{n},{sector}"
        return out

    @property
    def endpoints(self) -> tuple[int, int]:
        return 0, self.dim - 1


def _lowering_shift(dim: int) -> np.ndarray:
    return np.eye(dim, k=1)


def sg_operator(space: TruncatedLadderSpace) -> ComplexOperator:
    return ComplexOperator(_lowering_shift(space.dim))


class DefectReport(NamedTuple):
    left_defect: float
    right_defect: float
    defect_support: tuple[int, ...]


def unitarity_defect(op: ComplexOperator) -> DefectReport:
    """Deviation of op^dag op and op op^dag from the identity.

    ``defect_support`` lists the basis indices where the diagonal of
    op^dag op differs from 1 by more than ``DEFECT_TOL``.
    """
    m = op.matrix
    eye = np.eye(op.dim)
    left = m.conj().T @ m
    right = m @ m.conj().T
    support = np.nonzero(np.abs(left.diagonal() - 1.0) > DEFECT_TOL)[0]
    return DefectReport(
        float(np.max(np.abs(left - eye))),
        float(np.max(np.abs(right - eye))),
        tuple(int(i) for i in support),
    )


def doubled_phase_operator(space: DoubledSpace) -> ComplexOperator:
    """Lowering shift along the doubled chain.

    It lowers |n+1,+> to |n,+>, sends the vacuum |0,+> to |0,->, and raises
    |n,-> to |n+1,->.  Only the last |n_max,-> has no image (truncation).
    """
    return ComplexOperator(_lowering_shift(space.dim))


def sector_block(op: ComplexOperator, space: DoubledSpace, sector: str = "+") -> ComplexOperator:
    idx = space.sector_indices(sector)
    return ComplexOperator(op.matrix[np.ix_(idx, idx)])


def interior_defect(op: ComplexOperator, space: DoubledSpace) -> float:
    """max |op^dag op - I| over columns that are not chain endpoints."""
    m = op.matrix
    left = m.conj().T @ m - np.eye(space.dim)
    interior = [i for i in range(space.dim) if i not in space.endpoints]
    return float(np.max(np.abs(left[:, interior])))


def phase_report(n_max: int) -> dict:
    """Summary of the single-ladder defect and the doubled construction."""
    ladder = TruncatedLadderSpace(n_max)
    e = sg_operator(ladder)
    d = unitarity_defect(e)
    doubled = DoubledSpace(n_max)
    ext = doubled_phase_operator(doubled)
    dd = unitarity_defect(ext)
    vacuum_plus = doubled.index(0, "+")
    vacuum_minus = doubled.index(0, "-")
    return {
        "n_max": n_max,
        "left_defect": d.left_defect,
        "right_defect": d.right_defect,
        "defect_support": list(d.defect_support),
        "doubled": {
            "dim": doubled.dim,
            "left_defect": dd.left_defect,
            "right_defect": dd.right_defect,
            "defect_support": list(dd.defect_support),
            "defect_support_labels": [doubled.labels()[i] for i in dd.defect_support],
            "endpoints": list(doubled.endpoints),
            "interior_defect": interior_defect(ext, doubled),
            "vacuum_link": float(abs(ext.matrix[vacuum_minus, vacuum_plus])),
            "plus_sector_matches_ladder": bool(sector_block(ext, doubled, "+").allclose(e, atol=0.0)),
        },
    }
