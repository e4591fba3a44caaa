"""Exceptional-point Hamiltonian family and its truncated band projector.

The Bloch Hamiltonian is ``H(k) = [[0, a0 + h(k)], [h(k), 0]]`` with
``h(k) = (2 (1 - cos k))**B / 2``, defective at ``k = 0`` where it reduces to
a 2x2 Jordan block. Occupying the negative-energy band gives the symbol

    P(k) = 1/2 [[1, -U(k)], [-D(k), 1]],   U = sqrt((a0 + h) / h) = 1 / D.

Momenta live on the half-integer grid ``k_m = (2m + 1) pi / L`` which never
hits the exceptional point. Real-space matrices use the index
``2 (x - 1) + s`` for cell ``x`` and sublattice ``s`` (0 = up, 1 = down),
i.e. 0-based ``2 * cell + s``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AmbiguousBandError, DefectivePointError
from .linalg import eigendecompose

IMAG_DUST = 1e-10


def eval_h(k, B: int):
    """Dispersion ``h(k) = (2 (1 - cos k))**B / 2`` (scalar or array)."""
    return 0.5 * (2.0 * (1.0 - np.cos(k))) ** B


def momentum_grid(L: int) -> np.ndarray:
    """Half-integer grid ``(2m + 1) pi / L``, ``m = 0 .. L-1``."""
    if int(L) != L or L < 2:
        raise ValueError(f"L must be an integer >= 2, got {L}")
    L = int(L)
    return (2 * np.arange(L) + 1) * np.pi / L


@dataclass(frozen=True)
class LatticeModel:
    """Parameters ``(a0, B, L)`` of the two-band exceptional-point model."""

    a0: float = 1.0
    B: int = 3
    L: int = 50
    grid: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (np.isfinite(self.a0) and self.a0 > 0):
            raise ValueError(f"a0 must be positive, got {self.a0}")
        if int(self.B) != self.B or self.B < 1:
            raise ValueError(f"B must be a positive integer, got {self.B}")
        grid = momentum_grid(self.L)
        object.__setattr__(self, "B", int(self.B))
        object.__setattr__(self, "L", int(self.L))
        grid.setflags(write=False)
        object.__setattr__(self, "grid", grid)

    def hamiltonian(self, k: float) -> np.ndarray:
        h = eval_h(k, self.B)
        return np.array([[0.0, self.a0 + h], [h, 0.0]])

    def up_symbol(self, k=None) -> np.ndarray:
        """``U(k) = sqrt((a0 + h) / h)`` on ``k`` (default: the grid)."""
        h = eval_h(self.grid if k is None else np.asarray(k, dtype=float), self.B)
        if np.any(h <= 0):
            raise DefectivePointError("U(k) diverges where h(k) = 0 (exceptional point)")
        return np.sqrt((self.a0 + h) / h)


def projector_symbol(k: float, model: LatticeModel) -> np.ndarray:
    """Closed-form occupied-band projector ``P(k)`` (2x2, real)."""
    h = eval_h(k, model.B)
    if h <= 0:
        raise DefectivePointError(f"H(k) is a Jordan block at k={k}; the projector is undefined")
    U = np.sqrt((model.a0 + h) / h)
    return 0.5 * np.array([[1.0, -U], [-1.0 / U, 1.0]])


def projector_symbol_numeric(k: float, model: LatticeModel, tol: float = 1e-8) -> np.ndarray:
    """``|r><l|`` of the negative-energy band of ``H(k)`` from a biorthogonal eigensolve."""
    if eval_h(k, model.B) <= 0:
        raise DefectivePointError(f"H(k) is defective at k={k}")
    eig = eigendecompose(model.hamiltonian(k), tol=tol)
    re = eig.eigenvalues.real
    if np.any(np.abs(re) < tol):
        raise AmbiguousBandError(f"band energy {eig.eigenvalues[np.argmin(np.abs(re))]} lies within {tol} of zero")
    occupied = re < 0
    if occupied.sum() != 1:
        raise AmbiguousBandError(f"expected one occupied band, found {occupied.sum()}")
    return eig.projector(occupied)


def _real(values: np.ndarray, scale: float, what: str) -> np.ndarray:
    """Drop the imaginary part after checking it is rounding dust relative to ``scale``."""
    bad = np.max(np.abs(values.imag), initial=0.0)
    if bad >= IMAG_DUST * max(1.0, scale):
        raise ArithmeticError(f"{what} has imaginary part {bad:.2e}; expected a real Fourier sum")
    return values.real.copy()


def fourier_coefficients(model: LatticeModel, offsets) -> tuple[np.ndarray, np.ndarray]:
    """Real-space ``U_x`` and ``D_x`` at integer ``offsets``.

    ``U_x = (1/L) sum_k exp(i k x) U(k)``, likewise ``D_x``. The grid is
    symmetric under ``k -> 2 pi - k`` so both are real; the imaginary dust is
    checked against ``1e-10`` times the mean ``|U(k)|`` (or 1) and dropped.
    """
    x = np.asarray(offsets, dtype=float)
    U = model.up_symbol()
    phases = np.exp(1j * np.multiply.outer(x, model.grid))
    Ux = np.sum(phases * U, axis=-1) / model.L
    Dx = np.sum(phases / U, axis=-1) / model.L
    return _real(Ux, float(np.mean(U)), "U_x"), _real(Dx, 1.0, "D_x")


@dataclass(frozen=True)
class TwoPointTable:
    """``U_x`` and ``D_x`` for ``x = 0 .. L-1``.

    On the half-integer grid ``U_{L-x} = -U_x`` (and likewise ``D``).
    """

    U: np.ndarray
    D: np.ndarray

    @property
    def x(self) -> np.ndarray:
        return np.arange(len(self.U))


def two_point_functions(model: LatticeModel) -> TwoPointTable:
    U, D = fourier_coefficients(model, np.arange(model.L))
    return TwoPointTable(U, D)


@dataclass(frozen=True)
class TruncatedProjector:
    """Projector restricted to cells ``1 .. x_cut`` (matrix is ``2 x_cut`` square)."""

    matrix: np.ndarray
    x_cut: int
    model: LatticeModel

    @property
    def up_block(self) -> np.ndarray:
        """``U_{x'-x}`` on the window (up-row, down-column block times -2)."""
        return -2.0 * self.matrix[0::2, 1::2]

    @property
    def down_block(self) -> np.ndarray:
        """``D_{x'-x}`` on the window."""
        return -2.0 * self.matrix[1::2, 0::2]


def toeplitz_blocks(model: LatticeModel, x_cut: int) -> tuple[np.ndarray, np.ndarray]:
    """Window matrices ``U_{x'-x}`` and ``D_{x'-x}`` for cells ``1 .. x_cut``."""
    offsets = np.arange(-(x_cut - 1), x_cut)
    Ux, Dx = fourier_coefficients(model, offsets)
    cells = np.arange(x_cut)
    diff = cells[:, None] - cells[None, :] + (x_cut - 1)
    return Ux[diff], Dx[diff]


def build_truncated_projector(model: LatticeModel, x_cut: int) -> TruncatedProjector:
    """Real-space ``P`` restricted to the window ``[1, x_cut]``.

    Block ``(x', x)`` is ``(1/L) sum_k exp(i k (x' - x)) P(k)``. The symbol's
    diagonal is the constant 1/2, whose transform over the grid is exactly
    ``delta_{x'x} / 2`` for ``|x' - x| < L``, so the same-sublattice entries are
    written exactly.
    """
    if int(x_cut) != x_cut or not 1 <= x_cut <= model.L:
        raise ValueError(f"x_cut must be an integer in [1, {model.L}], got {x_cut}")
    x_cut = int(x_cut)
    Ub, Db = toeplitz_blocks(model, x_cut)
    n = 2 * x_cut
    P = np.zeros((n, n))
    P[0::2, 0::2] = 0.5 * np.eye(x_cut)
    P[1::2, 1::2] = 0.5 * np.eye(x_cut)
    P[0::2, 1::2] = -0.5 * Ub
    P[1::2, 0::2] = -0.5 * Db
    P.setflags(write=False)
    return TruncatedProjector(P, x_cut, model)
