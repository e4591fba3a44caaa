"""LC + INIC circuit whose Laplacian zero modes are eigenvectors of a truncated projector.

Node ``2 c + s + 1`` (1-based, as on the board) is cell ``c`` sublattice
``s`` with ``s = 0`` up and ``s = 1`` down. Within a cell the up and down
nodes share a capacitor ``C1`` and an INIC ``C3``; neighbouring cells are
cross-linked up-to-down by a capacitor ``C2`` and an INIC ``C4``. Every node
is grounded through an inductor (with optional series resistance), the
common capacitor ``C5`` and a trim capacitor chosen so that

    J(omega) = Y_L(omega) I + i omega (C_sum I + C0 P')

holds exactly, with ``C_sum = C1 + 2 C2 + C3 + 2 C4``. A kernel vector of
``J`` is then an eigenvector of ``P'`` with eigenvalue
``1 / (omega^2 L C0) - C_sum / C0``.

Capacitances are given in nF and the inductance in uH; block builders take
SI values.
"""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import NearResonanceWarning, ResonanceError, SingularMatrixError
from .linalg import eigendecompose, solve_linear

NF = 1e-9
UH = 1e-6

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]])
I_SIGMA_Y = np.array([[0.0, 1.0], [-1.0, 0.0]])


@dataclass(frozen=True)
class CircuitSpec:
    C0: float = 1.0
    C1: float = 4.55
    C2: float = 2.87
    C3: float = 4.3
    C4: float = 3.04
    C5: float = 0.50
    inductance: float = 10.0
    """Grounded inductance in uH."""
    esr: float = 0.0
    """Series resistance of each grounded inductor in ohm."""
    cells: int = 3

    def __post_init__(self):
        if not self.C0 > 0:
            raise ValueError("C0 must be positive")
        for name in ("C1", "C2", "C3", "C4", "C5"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be a nonnegative capacitance, got {value}")
        if not self.inductance > 0:
            raise ValueError("inductance must be positive")
        if not self.esr >= 0:
            raise ValueError("esr must be nonnegative")
        if self.cells < 1:
            raise ValueError("cells must be >= 1")

    @property
    def node_count(self) -> int:
        return 2 * self.cells

    @property
    def c_sum(self) -> float:
        """``C1 + 2 C2 + C3 + 2 C4`` in nF."""
        return self.C1 + 2 * self.C2 + self.C3 + 2 * self.C4


@dataclass(frozen=True)
class Element:
    kind: str
    """``"C"`` for a capacitor, ``"INIC"`` for a current-inverting converter."""
    a: int
    b: int
    """0-based terminals. For an INIC ``a`` sees ``-C`` and ``b`` sees ``+C``."""
    capacitance: float
    """nF."""
    label: str


def capacitor_block(C: float, omega: float) -> np.ndarray:
    """Two-terminal admittance of a capacitor (C in farad)."""
    return 1j * omega * C * np.array([[1.0, -1.0], [-1.0, 1.0]])


def inic_block(C: float, omega: float) -> np.ndarray:
    """Current-voltage block of an INIC with equal feedback impedances (C in farad).

    ``I1 = I2 = i omega C (V2 - V1)``: a negative capacitor seen from
    terminal 1, a positive one from terminal 2, and no current conservation.
    """
    if not (C > 0 and omega > 0):
        raise ValueError("C and omega must be positive")
    return 1j * omega * C * np.array([[-1.0, 1.0], [-1.0, 1.0]])


def netlist(spec: CircuitSpec) -> list[Element]:
    """Inter-node couplings (grounded parts are handled separately)."""
    up = lambda c: 2 * c
    dn = lambda c: 2 * c + 1
    elements = []
    for c in range(spec.cells):
        elements.append(Element("C", up(c), dn(c), spec.C1, f"C1[{c + 1}]"))
        elements.append(Element("INIC", dn(c), up(c), spec.C3, f"C3[{c + 1}]"))
    for c in range(spec.cells - 1):
        for u, d in ((up(c), dn(c + 1)), (up(c + 1), dn(c))):
            elements.append(Element("C", u, d, spec.C2, f"C2[{u + 1},{d + 1}]"))
            elements.append(Element("INIC", d, u, spec.C4, f"C4[{u + 1},{d + 1}]"))
    return elements


def _stamp(Y: np.ndarray, a: int, b: int, block: np.ndarray) -> None:
    idx = np.array([a, b])
    Y[np.ix_(idx, idx)] += block


def coupling_matrix(spec: CircuitSpec) -> np.ndarray:
    """Capacitance pattern of the inter-node couplings in nF (``J_c / (i omega)``)."""
    n = spec.node_count
    Jc = np.zeros((n, n))
    for el in netlist(spec):
        if el.capacitance == 0:
            continue
        if el.kind == "C":
            block = np.array([[1.0, -1.0], [-1.0, 1.0]])
        else:
            block = np.array([[-1.0, 1.0], [-1.0, 1.0]])
        _stamp(Jc, el.a, el.b, el.capacitance * block)
    return Jc


def ground_capacitance(spec: CircuitSpec) -> np.ndarray:
    """Per-node trim capacitance to ground in nF (excluding ``C5``).

    Chosen so every diagonal of ``C5 + trim + J_c`` equals ``C5 + C_sum``.
    A coupling diagonal never exceeds ``C_sum``, so the trim is nonnegative.
    """
    return np.clip(spec.c_sum - np.diag(coupling_matrix(spec)), 0.0, None)


def inductor_admittance(spec: CircuitSpec, omega: float) -> complex:
    return 1.0 / (1j * omega * spec.inductance * UH + spec.esr)


def build_laplacian(spec: CircuitSpec, omega: float) -> np.ndarray:
    """Node admittance matrix ``J(omega)`` with ``I = J V``."""
    if not omega > 0:
        raise ValueError("omega must be positive")
    n = spec.node_count
    J = np.zeros((n, n), dtype=complex)
    for el in netlist(spec):
        if el.capacitance == 0:
            continue
        make = capacitor_block if el.kind == "C" else inic_block
        _stamp(J, el.a, el.b, make(el.capacitance * NF, omega))
    grounded = inductor_admittance(spec, omega) + 1j * omega * (spec.C5 + ground_capacitance(spec)) * NF
    J[np.diag_indices(n)] += grounded
    return J


def effective_projector(spec: CircuitSpec) -> np.ndarray:
    """``P'`` assembled from ``C13 = C5 - C1 sx - i sy C3`` and ``C24 = -C2 sx - i sy C4``."""
    C13 = spec.C5 * np.eye(2) - spec.C1 * SIGMA_X - spec.C3 * I_SIGMA_Y
    C24 = -spec.C2 * SIGMA_X - spec.C4 * I_SIGMA_Y
    n = spec.node_count
    P = np.zeros((n, n))
    for c in range(spec.cells):
        P[2 * c:2 * c + 2, 2 * c:2 * c + 2] = C13
        if c + 1 < spec.cells:
            P[2 * c:2 * c + 2, 2 * c + 2:2 * c + 4] = C24
            P[2 * c + 2:2 * c + 4, 2 * c:2 * c + 2] = C24
    return P / spec.C0


def freq_of_eigenvalue(spec: CircuitSpec, p: float) -> float:
    """Frequency in Hz at which ``P'`` eigenvalue ``p`` becomes a zero mode of ``J``."""
    radicand = p + spec.c_sum / spec.C0
    if not radicand > 0:
        raise ValueError(f"p={p} maps to no real frequency (p + C_sum/C0 = {radicand})")
    return 1.0 / (2 * np.pi * np.sqrt(spec.inductance * UH * spec.C0 * NF * radicand))


def eigenvalue_of_freq(spec: CircuitSpec, f_hz):
    """Inverse of :func:`freq_of_eigenvalue`; strictly decreasing in frequency."""
    omega = 2 * np.pi * np.asarray(f_hz, dtype=float)
    return 1.0 / (omega**2 * spec.inductance * UH * spec.C0 * NF) - spec.c_sum / spec.C0


def resonances(spec: CircuitSpec) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues of ``P'`` (descending real part) and their frequencies in Hz."""
    p = np.linalg.eigvals(effective_projector(spec))
    p = np.sort(p.real)[::-1] if np.all(np.abs(p.imag) < 1e-12) else p[np.argsort(-p.real)]
    f = np.array([freq_of_eigenvalue(spec, float(np.real(v))) for v in p])
    return p, f


def drive_response(spec: CircuitSpec, omega: float, drive_node: int = 2, amplitude: float = 1.0,
                   reg: float = 0.0) -> np.ndarray:
    """Node voltages for an ideal AC current source of ``amplitude`` into ``drive_node`` (1-based)."""
    n = spec.node_count
    if not 1 <= drive_node <= n:
        raise ValueError(f"drive_node must be in [1, {n}]")
    current = np.zeros(n, dtype=complex)
    current[drive_node - 1] = amplitude
    return solve_linear(build_laplacian(spec, omega), current, reg=reg)


def impedance(spec: CircuitSpec, omega: float, i: int, j: int | None = None, method: str = "direct",
              tol: float = 1e-10) -> complex:
    """Two-point impedance between nodes ``i`` and ``j`` (1-based; ``j=None`` is ground).

    ``eigen`` sums ``(l(i) - l(j))^* (r(i) - r(j)) / j_mu`` over biorthonormal
    eigenpairs of ``J``; ``direct`` uses ``G = J^-1``.
    """
    n = spec.node_count
    if not 1 <= i <= n or (j is not None and not 1 <= j <= n):
        raise ValueError(f"nodes must be in [1, {n}]")
    if j == i:
        raise ValueError("i and j must differ")
    e = np.zeros(n)
    e[i - 1] = 1.0
    if j is not None:
        e[j - 1] = -1.0
    J = build_laplacian(spec, omega)
    if method == "eigen":
        eig = eigendecompose(J)
        jmu = eig.eigenvalues
        if np.min(np.abs(jmu)) <= tol * np.max(np.abs(jmu)):
            k = int(np.argmin(np.abs(jmu)))
            raise ResonanceError(f"Laplacian eigenvalue {jmu[k]:.3e} vanishes at omega={omega:.6e}; impedance diverges")
        return complex(np.sum((e @ eig.right) * (eig.left.conj().T @ e) / jmu))
    if method != "direct":
        raise ValueError(f"unknown method {method!r}")
    try:
        G = solve_linear(J, np.eye(n))
    except SingularMatrixError as exc:
        raise ResonanceError(f"Laplacian is singular at omega={omega:.6e}: {exc}") from exc
    return complex(e @ G @ e)


def normalized_profile(v) -> np.ndarray:
    """``|v|`` scaled so its largest entry is 1."""
    a = np.abs(np.asarray(v))
    return a / a.max()


def eigenvector_profile(spec: CircuitSpec, p: float) -> np.ndarray:
    """Normalized amplitude profile of the ``P'`` eigenvector whose eigenvalue is nearest ``p``."""
    w, V = np.linalg.eig(effective_projector(spec))
    return normalized_profile(V[:, np.argmin(np.abs(w - p))])


def resonance_profile(spec: CircuitSpec, p: float, drive_node: int = 2, reg: float = 0.0) -> np.ndarray:
    """Normalized ``|V|`` driven at the frequency mapped from ``p``."""
    omega = 2 * np.pi * freq_of_eigenvalue(spec, p)
    return normalized_profile(drive_response(spec, omega, drive_node, reg=reg))


@dataclass(frozen=True)
class Peak:
    frequency_hz: float
    p_mapped: float
    height: float


@dataclass(frozen=True)
class SweepResult:
    frequencies: np.ndarray
    voltages: np.ndarray
    """``(points, nodes)`` complex node voltages."""
    impedance_2g: np.ndarray
    """Drive-node-to-ground impedance ``V_drive / I``."""
    peaks: tuple[Peak, ...]
    drive_node: int

    @property
    def response(self) -> np.ndarray:
        """``sum_i |V_i|``, the quantity peaks are detected on."""
        return np.abs(self.voltages).sum(axis=1)


def find_peaks(signal: np.ndarray, factor: float = 3.0) -> np.ndarray:
    """Indices of strict local maxima exceeding ``factor`` times the median."""
    s = np.asarray(signal)
    inner = (s[1:-1] > s[:-2]) & (s[1:-1] > s[2:]) & (s[1:-1] > factor * np.median(s))
    return np.nonzero(inner)[0] + 1


def sweep(spec: CircuitSpec, f_min: float, f_max: float, points: int = 2000, drive_node: int = 2,
          peak_factor: float = 3.0, reg: float = 0.0, workers: int = 1) -> SweepResult:
    """Driven response on a linear frequency grid with resonance peak detection."""
    if not 0 < f_min < f_max:
        raise ValueError("need 0 < f_min < f_max")
    if points < 3:
        raise ValueError("need at least 3 points")
    freqs = np.linspace(f_min, f_max, points)

    def one(f):
        return drive_response(spec, 2 * np.pi * f, drive_node, 1.0, reg)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            V = np.array(list(pool.map(one, freqs)))
    else:
        V = np.array([one(f) for f in freqs])
    total = np.abs(V).sum(axis=1)
    idx = find_peaks(total, peak_factor)
    peaks = tuple(Peak(float(freqs[k]), float(eigenvalue_of_freq(spec, freqs[k])), float(total[k])) for k in idx)
    return SweepResult(freqs, V, V[:, drive_node - 1].copy(), peaks, drive_node)


@dataclass(frozen=True)
class Reconstruction:
    projector: np.ndarray
    """Recovered ``P'`` (complex; imaginary parts measure the error)."""
    laplacian: np.ndarray
    green: np.ndarray
    """Measured ``J^-1``, column ``i`` from injection at node ``i + 1``."""
    condition: float
    near_resonance: bool


def measure_green(spec: CircuitSpec, omega: float, noise_fraction: float = 0.0, seed: int = 0) -> np.ndarray:
    """Columns of ``J^-1`` from unit injections, with multiplicative uniform noise."""
    n = spec.node_count
    cols = [drive_response(spec, omega, node) for node in range(1, n + 1)]
    G = np.array(cols).T
    if noise_fraction:
        rng = np.random.default_rng(seed)
        G = G * (1.0 + rng.uniform(-noise_fraction, noise_fraction, G.shape))
    return G


def reconstruct_laplacian(spec: CircuitSpec, omega: float, noise_fraction: float = 0.0, seed: int = 0,
                          cond_limit: float = 1e3) -> Reconstruction:
    """Recover ``J`` and ``P'`` from simulated node-injection measurements.

    Emits :class:`NearResonanceWarning` when ``cond(J)`` exceeds ``cond_limit``:
    measurement noise is then amplified by roughly that factor.
    """
    if noise_fraction < 0:
        raise ValueError("noise_fraction must be nonnegative")
    J = build_laplacian(spec, omega)
    cond = float(np.linalg.cond(J))
    near = cond > cond_limit
    if near:
        warnings.warn(f"cond(J)={cond:.3g} at {omega / (2 * np.pi):.6g} Hz is close to a resonance; "
                      "reconstruction amplifies noise", NearResonanceWarning, stacklevel=2)
    G = measure_green(spec, omega, noise_fraction, seed)
    J_rec = solve_linear(G, np.eye(spec.node_count))
    n = spec.node_count
    P = ((J_rec - inductor_admittance(spec, omega) * np.eye(n)) / (1j * omega * NF) - spec.c_sum * np.eye(n)) / spec.C0
    return Reconstruction(P, J_rec, G, cond, near)
