"""Ordering of the 26 collective fluctuation variables (0-based)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LABELS = (
    "a+", "a-", "b+", "b-",
    "a+^", "a-^", "b+^", "b-^",
    "P+", "P-", "Q+", "Q-", "Xi+", "Xi-",
    "P+^", "P-^", "Q+^", "Q-^", "Xi+^", "Xi-^",
    "M+", "M-", "N+", "N-", "L+", "L-",
)
DIM = len(LABELS)

A = slice(0, 2)
B = slice(2, 4)
AC = slice(4, 6)
BC = slice(6, 8)
P = slice(8, 10)
Q = slice(10, 12)
XI = slice(12, 14)
PC = slice(14, 16)
QC = slice(16, 18)
XIC = slice(18, 20)
M = slice(20, 22)
N = slice(22, 24)
L = slice(24, 26)

FIELDS = range(0, 8)
POLARIZATIONS = range(8, 20)
POPULATIONS = range(20, 26)

# independent complex entries and the real population entries
COMPLEX_INDEPENDENT = (0, 1, 2, 3, 8, 9, 10, 11, 12, 13)
REAL_INDEPENDENT = POPULATIONS


def _conjugate_map() -> np.ndarray:
    c = np.arange(DIM)
    for i in range(4):
        c[i], c[i + 4] = i + 4, i
    for i in range(8, 14):
        c[i], c[i + 6] = i + 6, i
    return c


CONJ = _conjugate_map()


@dataclass(frozen=True)
class FluctuationBasis:
    labels: tuple = LABELS
    conj: tuple = tuple(int(i) for i in CONJ)

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def partner(self, i: int) -> int:
        return self.conj[i]

    def __len__(self) -> int:
        return len(self.labels)


def quadrature_vectors() -> tuple[np.ndarray, np.ndarray]:
    """Fixed projection vectors for the x-polarized a and y-polarized b outputs."""
    va = np.zeros(DIM)
    va[[0, 1, 4, 5]] = 0.5
    vb = np.zeros(DIM)
    vb[[3, 7]] = 0.5
    vb[[2, 6]] = -0.5
    return va, vb


def is_conjugate_consistent(x: np.ndarray, tol: float = 0.0) -> bool:
    x = np.asarray(x)
    scale = max(1.0, float(np.max(np.abs(x))))
    if np.max(np.abs(x[CONJ] - np.conj(x))) > tol * scale:
        return False
    return True
