"""Exceptional bound (EB) eigenvalues of truncated projectors.

Classification of occupation eigenvalues, spectral flow over the cut
position, the non-projector measure ``Lambda = 4 (P^2 - P)``, closed-form
``lambda_EB`` estimates, power-law fits and the free-fermion entropy.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import EBStatesError
from .linalg import eigenvalues
from .model import (LatticeModel, TruncatedProjector, build_truncated_projector, fourier_coefficients,
                    toeplitz_blocks, two_point_functions)

DEFAULT_THRESHOLD = 0.1


def distance_to_unit_segment(values) -> np.ndarray:
    """Euclidean distance of complex ``values`` from the real segment ``[0, 1]``."""
    z = np.asarray(values, dtype=complex)
    nearest = np.clip(z.real, 0.0, 1.0)
    return np.abs(z - nearest)


@dataclass(frozen=True)
class EBClassification:
    eb_values: np.ndarray
    normal_values: np.ndarray
    threshold: float
    is_eb: np.ndarray
    """Mask aligned with the classified spectrum."""


def classify(spectrum, threshold: float = DEFAULT_THRESHOLD) -> EBClassification:
    """Split ``spectrum`` into values farther than ``threshold`` from ``[0, 1]`` and the rest."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    z = np.asarray(spectrum, dtype=complex).ravel()
    mask = distance_to_unit_segment(z) > threshold
    return EBClassification(z[mask], z[~mask], threshold, mask)


@dataclass(frozen=True)
class FlowRow:
    x_cut: int
    eigenvalues: np.ndarray
    is_eb: np.ndarray
    error: str | None = None

    @property
    def eb_values(self) -> np.ndarray:
        return self.eigenvalues[self.is_eb]


@dataclass(frozen=True)
class FlowTable:
    model: LatticeModel
    rows: tuple[FlowRow, ...]
    threshold: float

    def row(self, x_cut: int) -> FlowRow:
        for r in self.rows:
            if r.x_cut == x_cut:
                return r
        raise KeyError(x_cut)

    @property
    def failed(self) -> list[int]:
        return [r.x_cut for r in self.rows if r.error is not None]


def _sorted(values: np.ndarray) -> np.ndarray:
    return values[np.lexsort((values.imag, values.real))]


def eb_values(model: LatticeModel, x_cut: int, threshold: float = DEFAULT_THRESHOLD) -> np.ndarray:
    """Sorted EB eigenvalues of the projector truncated at ``x_cut``."""
    P = build_truncated_projector(model, x_cut)
    return _sorted(classify(eigenvalues(P.matrix), threshold).eb_values)


def spectral_flow(model: LatticeModel, x_range=None, threshold: float = DEFAULT_THRESHOLD,
                  workers: int = 1) -> FlowTable:
    """Occupation spectrum for every ``x_cut`` in ``x_range`` (default ``1 .. L``).

    A failing row is recorded with its error message and empty spectrum; the
    sweep continues.
    """
    if x_range is None:
        x_cuts = list(range(1, model.L + 1))
    else:
        lo, hi = x_range
        if not 1 <= lo <= hi <= model.L:
            raise ValueError(f"x_range {x_range} must lie within [1, {model.L}]")
        x_cuts = list(range(lo, hi + 1))

    def one(x_cut: int) -> FlowRow:
        try:
            w = _sorted(eigenvalues(build_truncated_projector(model, x_cut).matrix))
        except (EBStatesError, ArithmeticError, np.linalg.LinAlgError) as exc:
            empty = np.zeros(0, dtype=complex)
            return FlowRow(x_cut, empty, np.zeros(0, dtype=bool), f"{type(exc).__name__}: {exc}")
        return FlowRow(x_cut, w, classify(w, threshold).is_eb)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = tuple(pool.map(one, x_cuts))
    else:
        rows = tuple(map(one, x_cuts))
    return FlowTable(model, rows, threshold)


def track_branches(flow: FlowTable) -> list[list[tuple[int, complex]]]:
    """Chain EB eigenvalues of consecutive rows into branches by nearest-neighbour matching.

    Used for drawing; classification alone decides what is EB.
    """
    branches: list[list[tuple[int, complex]]] = []
    prev = np.zeros(0, dtype=complex)
    prev_ids: list[int] = []
    for row in flow.rows:
        cur = row.eb_values
        ids: list[int | None] = [None] * len(cur)
        if len(prev) and len(cur):
            rows, cols = linear_sum_assignment(np.abs(prev[:, None] - cur[None, :]))
            for a, b in zip(rows, cols):
                ids[b] = prev_ids[a]
        for b, value in enumerate(cur):
            if ids[b] is None:
                branches.append([])
                ids[b] = len(branches) - 1
            branches[ids[b]].append((row.x_cut, complex(value)))
        prev, prev_ids = cur, ids
    return branches


@dataclass(frozen=True)
class LambdaOperator:
    matrix: np.ndarray
    """``4 (P^2 - P)`` in the original interleaved basis."""
    up_block: np.ndarray
    """Up-sublattice block, equal to ``U D - 1`` on the window."""
    down_block: np.ndarray
    off_block_norm: float
    """Frobenius norm of the up/down mixing blocks after sorting by sublattice."""


def lambda_operator(P: TruncatedProjector) -> LambdaOperator:
    M = np.asarray(P.matrix)
    lam = 4.0 * (M @ M - M)
    order = np.r_[0:M.shape[0]:2, 1:M.shape[0]:2]
    s = lam[np.ix_(order, order)]
    n = P.x_cut
    off = float(np.sqrt(np.linalg.norm(s[:n, n:]) ** 2 + np.linalg.norm(s[n:, :n]) ** 2))
    return LambdaOperator(lam, s[:n, :n], s[n:, n:], off)


def estimate_lambda_eb(model: LatticeModel, x_cut: int, mode: str = "full") -> float:
    """Closed-form estimate of the leading ``lambda_EB = 4 p (p - 1)``.

    ``full``: two-step power ratio started on the first cell of the window,

        sum_{x,x',x''} D_{-x} U_{x-x'} D_{x'-x''} U_{x''} / sum_x D_{-x} U_x  -  1,

    all sums over window offsets ``0 .. x_cut-1``. This is the leading
    eigenvalue of ``D U`` on the window with the identity removed.

    ``linear``: ``U_0 D_0 x_cut``, the constant-summand approximation (B >= 2).
    """
    if not 1 <= x_cut <= model.L:
        raise ValueError(f"x_cut must lie in [1, {model.L}]")
    if mode == "linear":
        if model.B < 2:
            raise ValueError("the linear estimate assumes B >= 2")
        U0, D0 = fourier_coefficients(model, [0])
        return float(U0[0] * D0[0] * x_cut)
    if mode != "full":
        raise ValueError(f"unknown mode {mode!r}")
    Ub, Db = toeplitz_blocks(model, x_cut)
    first = Db[0] @ Ub  # row 0 of D U
    den = first[0]
    if den == 0:
        raise ZeroDivisionError("denominator sum_x D_{-x} U_x vanishes on this window")
    num = first @ (Db @ Ub[:, 0])
    return float(num / den - 1.0)


def p_from_lambda(lam: float) -> tuple[float, float]:
    """EB pair ``(1 +- sqrt(1 + lambda)) / 2``."""
    r = np.sqrt(1.0 + lam + 0j)
    p = 0.5 * (1 + r), 0.5 * (1 - r)
    return tuple(complex(v).real if abs(complex(v).imag) < 1e-15 else complex(v) for v in p)


@dataclass(frozen=True)
class ScalingFit:
    exponent: float
    prefactor: float
    r_squared: float
    samples: tuple[tuple[float, float], ...]

    def predict(self, L) -> np.ndarray:
        return 0.5 + self.prefactor * np.asarray(L, dtype=float) ** self.exponent


def fit_scaling(samples) -> ScalingFit:
    """Least-squares fit of ``log(p - 1/2) = exponent log L + log prefactor``.

    Fitting ``p - 1/2`` rather than ``p`` makes ``(1 + sqrt(1 + lambda)) / 2``
    an exact power of ``lambda``.
    """
    samples = tuple((float(L), float(np.real(p))) for L, p in samples)
    if len(samples) < 3:
        raise ValueError("need at least 3 samples")
    L = np.array([s[0] for s in samples])
    p = np.array([s[1] for s in samples])
    if np.any(L <= 0) or np.any(p <= 1):
        raise ValueError("sizes must be positive and p_EB values must exceed 1")
    X, Y = np.log(L), np.log(p - 0.5)
    slope, intercept = np.polyfit(X, Y, 1)
    resid = Y - (slope * X + intercept)
    ss_tot = np.sum((Y - Y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 1.0
    return ScalingFit(float(slope), float(np.exp(intercept)), float(min(max(r2, 0.0), 1.0)), samples)


@dataclass(frozen=True)
class AsymptoticFit:
    form: str
    coefficients: np.ndarray
    r_squared: float
    x: np.ndarray
    values: np.ndarray


ASYMPTOTIC_FORMS = ("log", "affine", "inverse")


def _basis(form: str, x: np.ndarray, L: int) -> np.ndarray:
    if form == "log":
        return np.column_stack([np.log(L / (np.pi * x)), np.ones_like(x)])
    if form == "affine":
        return np.column_stack([np.full_like(x, L / np.pi), -np.pi * x])
    if form == "inverse":
        return np.column_stack([L / x, -x])
    raise ValueError(f"form must be one of {ASYMPTOTIC_FORMS}, got {form!r}")


def fit_two_point_asymptotics(model: LatticeModel, x_range=None, form: str | None = None) -> AsymptoticFit:
    """Least-squares fit of ``U_x`` to its large-``L`` form.

    ``log`` (default for B = 1): ``c1 log(L / (pi x)) + c0``.
    ``affine`` (default for B = 2): ``c1 L / pi - c2 pi x``.
    ``inverse``: ``c1 L / x - c2 x``.
    ``x_range`` defaults to ``[2, L / 8]``.
    """
    if form is None:
        if model.B > 2:
            raise ValueError("no fitted form for B > 2; use divergence_ratio")
        form = "log" if model.B == 1 else "affine"
    lo, hi = (2, max(3, model.L // 8)) if x_range is None else x_range
    if not 1 <= lo < hi < model.L:
        raise ValueError(f"x_range ({lo}, {hi}) must satisfy 1 <= lo < hi < L")
    x = np.arange(lo, hi + 1, dtype=float)
    y = two_point_functions(model).U[lo:hi + 1]
    A = _basis(form, x, model.L)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum((y - A @ coef) ** 2) / ss_tot if ss_tot > 0 else 1.0
    return AsymptoticFit(form, coef, float(r2), x, y)


def divergence_ratio(a0: float, B: int, L: int) -> float:
    """``U_0(2L) / U_0(L)``; tends to ``2**(B - 1)`` for B >= 2."""
    U_big, _ = fourier_coefficients(LatticeModel(a0, B, 2 * L), [0])
    U_small, _ = fourier_coefficients(LatticeModel(a0, B, L), [0])
    return float(U_big[0] / U_small[0])


def leading_eb_value(model: LatticeModel, x_cut: int) -> float:
    """Largest real part in the spectrum, i.e. the leading ``p_EB > 1``."""
    w = eigenvalues(build_truncated_projector(model, x_cut).matrix)
    return float(np.max(w.real))


def _xlogx(z: np.ndarray) -> np.ndarray:
    out = np.zeros_like(z)
    nz = z != 0
    out[nz] = z[nz] * np.log(z[nz])
    return out


def entanglement_entropy(spectrum) -> tuple[float, float]:
    """``S = -sum [p ln p + (1-p) ln(1-p)]`` on the principal branch.

    Returns ``(Re S, |Im S|)``. Values outside ``[0, 1]`` make the logarithm
    complex; the imaginary remnant is reported rather than dropped.
    ``0 ln 0`` is taken as 0.
    """
    p = np.asarray(spectrum, dtype=complex).ravel()
    S = -np.sum(_xlogx(p) + _xlogx(1.0 - p))
    return float(S.real), float(abs(S.imag))
