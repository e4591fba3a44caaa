"""Seeded random hopping disorder on truncated projectors.

Each off-diagonal entry is multiplied by ``1 + r_R + i r_I`` with ``r``
uniform on ``[-delta, delta]``. Instance ``k`` draws from its own stream
keyed by ``(base_seed, k)`` so any instance can be regenerated alone and
instances may run in any order.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .analysis import DEFAULT_THRESHOLD, classify
from .errors import EBStatesError
from .linalg import eigenvalues
from .model import LatticeModel, TruncatedProjector, build_truncated_projector

MODES = ("real", "imaginary", "complex")


@dataclass(frozen=True)
class DisorderConfig:
    delta: float
    mode: str = "complex"
    instances: int = 50
    base_seed: int = 0
    perturb_diagonal: bool = False

    def __post_init__(self):
        if not 0 <= self.delta <= 1:
            raise ValueError(f"delta must lie in [0, 1], got {self.delta}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.instances < 1:
            raise ValueError("instances must be >= 1")


def instance_rng(base_seed: int, instance_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(base_seed), int(instance_index)]))


def perturb(P: TruncatedProjector | np.ndarray, cfg: DisorderConfig, instance_index: int) -> np.ndarray:
    """Disordered copy of ``P``.

    Both the real and imaginary factors are always drawn, real first and in
    row-major entry order, so a ``complex`` instance shares its real part
    with the ``real`` instance of the same seed and index.
    """
    M = np.asarray(P.matrix if isinstance(P, TruncatedProjector) else P)
    rng = instance_rng(cfg.base_seed, instance_index)
    r_re = rng.uniform(-cfg.delta, cfg.delta, M.shape)
    r_im = rng.uniform(-cfg.delta, cfg.delta, M.shape)
    factor = np.ones(M.shape, dtype=complex)
    if cfg.mode in ("real", "complex"):
        factor += r_re
    if cfg.mode in ("imaginary", "complex"):
        factor += 1j * r_im
    if not cfg.perturb_diagonal:
        np.fill_diagonal(factor, 1.0)
    out = M * factor
    if cfg.mode == "real" and not np.iscomplexobj(M):
        out = out.real
    return out


@dataclass(frozen=True)
class EnsembleResult:
    config: DisorderConfig
    reference: np.ndarray
    """Spectrum of the clean matrix."""
    eb_reference: np.ndarray
    """Clean EB eigenvalues, the centres the disordered EB values are tracked from."""
    spectra: tuple[np.ndarray, ...]
    is_eb: tuple[np.ndarray, ...]
    instance_ids: tuple[int, ...]
    failures: tuple[tuple[int, str], ...]
    eb_cluster_centroids: tuple[complex, ...]
    eb_fractional_spread: float
    """Largest RMS distance of an EB cloud from its centroid, relative to the clean value."""
    eb_cluster_radii: tuple[float, ...]
    min_cluster_gap: float
    """Smallest distance between any EB and any non-EB eigenvalue over the ensemble."""
    cloud_radii: tuple[float, float]
    """Largest distance of a non-EB eigenvalue from 0 and from 1 (nearest-centre assignment)."""

    @property
    def clouds_merged(self) -> bool:
        """The 0 and 1 clouds touch once their radii add up to the unit separation."""
        return self.cloud_radii[0] + self.cloud_radii[1] >= 1.0

    @property
    def eb_resolved(self) -> bool:
        radius = max(self.eb_cluster_radii, default=0.0)
        return self.min_cluster_gap > radius


def _track_eb(spectrum: np.ndarray, eb_reference: np.ndarray) -> np.ndarray:
    """Index into ``spectrum`` of the eigenvalue matched to each reference EB value."""
    if not len(eb_reference):
        return np.zeros(0, dtype=int)
    rows, cols = linear_sum_assignment(np.abs(eb_reference[:, None] - spectrum[None, :]))
    return cols[np.argsort(rows)]


def run_ensemble(model: LatticeModel, x_cut: int, cfg: DisorderConfig,
                 threshold: float = DEFAULT_THRESHOLD, workers: int = 1) -> EnsembleResult:
    """Spectra of ``cfg.instances`` disordered copies of the truncated projector.

    EB eigenvalues are found in the clean spectrum by :func:`classify`; in
    each disordered spectrum the eigenvalues assigned to them by minimum-cost
    matching are the EB ones. Threshold classification is not reused there
    because strongly disordered non-EB clouds leave ``[0, 1]`` too.
    """
    P = build_truncated_projector(model, x_cut)
    reference = eigenvalues(P.matrix)
    eb_ref = classify(reference, threshold).eb_values
    eb_ref = eb_ref[np.lexsort((eb_ref.imag, eb_ref.real))]

    def one(k):
        try:
            return k, eigenvalues(perturb(P, cfg, k)), None
        except (EBStatesError, np.linalg.LinAlgError) as exc:
            return k, None, f"{type(exc).__name__}: {exc}"

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, range(cfg.instances)))
    else:
        results = [one(k) for k in range(cfg.instances)]

    spectra, masks, tracked, ids, failures = [], [], [], [], []
    for k, w, err in results:
        if err is not None:
            failures.append((k, err))
            continue
        cols = _track_eb(w, eb_ref)
        mask = np.zeros(len(w), dtype=bool)
        mask[cols] = True
        spectra.append(w)
        masks.append(mask)
        tracked.append(w[cols])
        ids.append(k)

    m = len(eb_ref)
    centroids, radii, spreads = [], [], []
    if spectra and m:
        per_ref = np.array(tracked)
        for j in range(m):
            cloud = per_ref[:, j]
            c = cloud.mean()
            rms = float(np.sqrt(np.mean(np.abs(cloud - c) ** 2)))
            centroids.append(complex(c))
            radii.append(float(np.max(np.abs(cloud - c))))
            spreads.append(rms / abs(eb_ref[j]))
    gap = np.inf
    r0 = r1 = 0.0
    for w, mask in zip(spectra, masks):
        eb, rest = w[mask], w[~mask]
        if len(eb) and len(rest):
            gap = min(gap, float(np.min(np.abs(eb[:, None] - rest[None, :]))))
        if len(rest):
            near0 = np.abs(rest) <= np.abs(rest - 1)
            r0 = max(r0, float(np.max(np.abs(rest[near0]), initial=0.0)))
            r1 = max(r1, float(np.max(np.abs(rest[~near0] - 1), initial=0.0)))
    return EnsembleResult(
        config=cfg,
        reference=reference,
        eb_reference=eb_ref,
        spectra=tuple(spectra),
        is_eb=tuple(masks),
        instance_ids=tuple(ids),
        failures=tuple(failures),
        eb_cluster_centroids=tuple(centroids),
        eb_fractional_spread=float(max(spreads, default=0.0)),
        eb_cluster_radii=tuple(radii),
        min_cluster_gap=float(gap),
        cloud_radii=(r0, r1),
    )

