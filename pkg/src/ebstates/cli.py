"""Command-line front end: ``ebstates <subcommand> [--config FILE] [--key value ...]``.

Every config key is also a flag (underscores become dashes). Values are
resolved as built-in defaults < config file < flags; the base seed falls
back to ``$EBSTATES_SEED`` when neither file nor flag sets it. Each run
writes a CSV table and a JSON summary into ``--out`` and, with ``--plot``,
an SVG figure.

Exit status: 0 on success, 2 for an invalid configuration (the message
names the key), 1 for a numerical failure (the library message verbatim).
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .analysis import (classify, divergence_ratio, fit_scaling, fit_two_point_asymptotics, leading_eb_value,
                       spectral_flow)
from .circuit import CircuitSpec, effective_projector, reconstruct_laplacian, resonances, sweep
from .disorder import MODES, DisorderConfig, run_ensemble
from .errors import EBStatesError
from .model import LatticeModel, two_point_functions

COMMANDS = ("flow", "disorder", "twopoint", "scaling", "circuit-sweep", "circuit-reconstruct")
SEED_ENV = "EBSTATES_SEED"


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"invalid value for '{key}': {message}")
        self.key = key


@dataclass
class RunConfig:
    command: str = "flow"
    out: str = "."
    plot: bool = False
    workers: int = 1
    # model
    a0: float = 1.0
    B: int = 3
    L: int = 50
    x_cut: int = 0
    """0 selects the default cut of each command (``L - 1`` for disorder, ``L / 2`` for scaling)."""
    x_min: int = 1
    x_max: int = 0
    """0 means ``L``."""
    threshold: float = 0.1
    sizes: str = "32,64,128"
    # disorder
    delta: float = 0.05
    mode: str = "complex"
    instances: int = 50
    seed: int = 0
    perturb_diagonal: bool = False
    # circuit
    C0: float = 1.0
    C1: float = 4.55
    C2: float = 2.87
    C3: float = 4.3
    C4: float = 3.04
    C5: float = 0.50
    inductance: float = 10.0
    esr: float = 0.0
    fmin: float = 310e3
    fmax: float = 400e3
    points: int = 2000
    drive: int = 2
    peak_factor: float = 3.0
    frequency: float = 320e3
    noise: float = 0.0

    def validate(self) -> "RunConfig":
        checks = [
            ("command", self.command in COMMANDS, f"must be one of {COMMANDS}"),
            ("workers", self.workers >= 1, "must be >= 1"),
            ("a0", np.isfinite(self.a0) and self.a0 > 0, "must be positive"),
            ("B", self.B >= 1, "must be a positive integer"),
            ("L", self.L >= 2, "must be an integer >= 2"),
            ("x_cut", 0 <= self.x_cut <= self.L, f"must lie in [1, L={self.L}] (0 for the default)"),
            ("x_min", 1 <= self.x_min <= self.L, f"must lie in [1, L={self.L}]"),
            ("x_max", 0 <= self.x_max <= self.L and (self.x_max == 0 or self.x_max >= self.x_min),
             f"must lie in [x_min, L={self.L}] (0 for L)"),
            ("threshold", self.threshold > 0, "must be positive"),
            ("delta", 0 <= self.delta <= 1, "must lie in [0, 1]"),
            ("mode", self.mode in MODES, f"must be one of {MODES}"),
            ("instances", self.instances >= 1, "must be >= 1"),
            ("C0", self.C0 > 0, "must be positive"),
            ("inductance", self.inductance > 0, "must be positive"),
            ("esr", self.esr >= 0, "must be nonnegative"),
            ("fmin", self.fmin > 0, "must be positive"),
            ("fmax", self.fmax > self.fmin, "must exceed fmin"),
            ("points", self.points >= 3, "must be >= 3"),
            ("drive", 1 <= self.drive <= 6, "must be a node in [1, 6]"),
            ("peak_factor", self.peak_factor > 0, "must be positive"),
            ("frequency", self.frequency > 0, "must be positive"),
            ("noise", 0 <= self.noise < 1, "must lie in [0, 1)"),
        ]
        checks += [(c, getattr(self, c) >= 0, "must be nonnegative") for c in ("C1", "C2", "C3", "C4", "C5")]
        for key, ok, message in checks:
            if not ok:
                raise ConfigError(key, f"{getattr(self, key)!r} {message}")
        try:
            sizes = self.size_list
        except ValueError:
            raise ConfigError("sizes", f"{self.sizes!r} is not a comma-separated list of integers") from None
        if len(sizes) < 3 or min(sizes) < 4:
            raise ConfigError("sizes", f"{self.sizes!r} needs at least 3 sizes, each >= 4")
        return self

    @property
    def size_list(self) -> list[int]:
        return [int(v) for v in self.sizes.split(",") if v.strip()]

    def model(self) -> LatticeModel:
        return LatticeModel(self.a0, self.B, self.L)

    def circuit(self) -> CircuitSpec:
        return CircuitSpec(self.C0, self.C1, self.C2, self.C3, self.C4, self.C5, self.inductance, self.esr)

    def dumps(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            lines.append(f"{f.name} = {repr(value) if isinstance(value, float) else value}")
        return "\n".join(lines) + "\n"


FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _convert(key: str, text: str):
    kind = FIELD_TYPES[key]
    text = text.strip()
    try:
        if kind == "bool":
            low = text.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(text)
            return low in ("true", "1", "yes")
        if kind == "int":
            value = float(text)
            if value != int(value):
                raise ValueError(text)
            return int(value)
        if kind == "float":
            return float(text)
    except ValueError:
        raise ConfigError(key, f"{text!r} is not a valid {kind}") from None
    return text


def parse_config_text(text: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(line, f"line {lineno} is not of the form key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in FIELD_TYPES:
            raise ConfigError(key, f"unknown key on line {lineno}")
        values[key] = _convert(key, value)
    return values


def load_config(path) -> RunConfig:
    return RunConfig(**parse_config_text(Path(path).read_text(encoding="utf-8"))).validate()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ebstates", description="Exceptional bound states of truncated projectors "
                                     "and their LC+INIC circuit realization")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key = value file; flags override it")
        p.add_argument("--dump-config", metavar="PATH", help="write the resolved config and exit")
        for f in fields(RunConfig):
            if f.name == "command":
                continue
            flag = "--" + f.name.replace("_", "-")
            if f.type == "bool":
                p.add_argument(flag, dest=f.name, action=argparse.BooleanOptionalAction, default=argparse.SUPPRESS)
            else:
                p.add_argument(flag, dest=f.name, type=str, default=argparse.SUPPRESS)
    return parser


def resolve_config(argv) -> tuple[RunConfig, str | None]:
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    config_path = args.pop("config", None)
    dump = args.pop("dump_config", None)
    values = parse_config_text(Path(config_path).read_text(encoding="utf-8")) if config_path else {}
    if "seed" not in values and "seed" not in args and os.environ.get(SEED_ENV):
        values["seed"] = _convert("seed", os.environ[SEED_ENV])
    for key, value in args.items():
        values[key] = value if isinstance(value, bool) else _convert(key, value)
    values["command"] = command
    return RunConfig(**values).validate(), dump


def export_csv(header, rows, path) -> Path:
    """Write ``rows`` under ``header`` with 17 significant digits for floats."""
    path = Path(path)

    def cell(v):
        if isinstance(v, (bool, np.bool_)):
            return int(v)
        if isinstance(v, (float, np.floating)):
            return format(float(v), ".17g")
        return v

    try:
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([cell(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def _write_json(data, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _cpx(z) -> list[float]:
    return [float(np.real(z)), float(np.imag(z))]


def _figure():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    matplotlib.rcParams["svg.hashsalt"] = "ebstates"
    return plt, plt.subplots(figsize=(6, 4))


def _save_svg(plt, fig, path) -> Path:
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return Path(path)


def run_flow(cfg: RunConfig, out: Path) -> list[Path]:
    model = cfg.model()
    table = spectral_flow(model, (cfg.x_min, cfg.x_max or cfg.L), cfg.threshold, cfg.workers)
    rows = [(r.x_cut, w.real, w.imag, bool(e)) for r in table.rows for w, e in zip(r.eigenvalues, r.is_eb)]
    files = [export_csv(("x_cut", "re_p", "im_p", "is_eb"), rows, out / "flow.csv")]
    summary = {
        "model": {"a0": model.a0, "B": model.B, "L": model.L},
        "threshold": cfg.threshold,
        "eb_values": {str(r.x_cut): [_cpx(v) for v in r.eb_values] for r in table.rows},
        "failed": table.failed,
    }
    files.append(_write_json(summary, out / "flow.json"))
    if cfg.plot:
        plt, (fig, ax) = _figure()
        x = np.array([r[0] for r in rows])
        p = np.array([r[1] for r in rows])
        eb = np.array([r[3] for r in rows], dtype=bool)
        ax.scatter(x[~eb], p[~eb], s=4, c="0.6", label="non-EB")
        ax.scatter(x[eb], p[eb], s=6, c="C3", label="EB")
        ax.set_xlabel("cut position x_cut (cells)")
        ax.set_ylabel("occupation eigenvalue Re p")
        ax.legend()
        files.append(_save_svg(plt, fig, out / "flow.svg"))
    return files


def run_disorder(cfg: RunConfig, out: Path) -> list[Path]:
    model = cfg.model()
    x_cut = cfg.x_cut or cfg.L - 1
    dcfg = DisorderConfig(cfg.delta, cfg.mode, cfg.instances, cfg.seed, cfg.perturb_diagonal)
    res = run_ensemble(model, x_cut, dcfg, cfg.threshold, cfg.workers)
    rows = [(k, w.real, w.imag, bool(e)) for k, spec, mask in zip(res.instance_ids, res.spectra, res.is_eb)
            for w, e in zip(spec, mask)]
    files = [export_csv(("instance", "re_p", "im_p", "is_eb"), rows, out / "ensemble.csv")]
    summary = {
        "model": {"a0": model.a0, "B": model.B, "L": model.L, "x_cut": x_cut},
        "disorder": dataclasses.asdict(dcfg),
        "eb_reference": [_cpx(v) for v in res.eb_reference],
        "eb_cluster_centroids": [_cpx(v) for v in res.eb_cluster_centroids],
        "eb_fractional_spread": res.eb_fractional_spread,
        "min_cluster_gap": res.min_cluster_gap,
        "cloud_radii": list(res.cloud_radii),
        "clouds_merged": res.clouds_merged,
        "eb_resolved": res.eb_resolved,
        "failures": [list(f) for f in res.failures],
    }
    files.append(_write_json(summary, out / "disorder.json"))
    if cfg.plot:
        plt, (fig, ax) = _figure()
        re = np.array([r[1] for r in rows])
        im = np.array([r[2] for r in rows])
        eb = np.array([r[3] for r in rows], dtype=bool)
        ax.scatter(re[~eb], im[~eb], s=3, c="0.5", label="non-EB")
        ax.scatter(re[eb], im[eb], s=3, c="C3", label="EB")
        ax.set_xlabel("Re p")
        ax.set_ylabel("Im p")
        ax.legend()
        files.append(_save_svg(plt, fig, out / "disorder.svg"))
    return files


def run_twopoint(cfg: RunConfig, out: Path) -> list[Path]:
    model = cfg.model()
    table = two_point_functions(model)
    files = [export_csv(("x", "U_x", "D_x"), zip(table.x, table.U, table.D), out / "twopoint.csv")]
    summary = {"model": {"a0": model.a0, "B": model.B, "L": model.L}, "U_0": float(table.U[0])}
    if model.B <= 2 and model.L >= 32:
        fit = fit_two_point_asymptotics(model)
        summary["fit"] = {"form": fit.form, "coefficients": fit.coefficients.tolist(), "r_squared": fit.r_squared}
    if model.B >= 2:
        summary["divergence_ratio"] = divergence_ratio(model.a0, model.B, model.L)
        summary["divergence_ratio_expected"] = 2.0 ** (model.B - 1)
    files.append(_write_json(summary, out / "twopoint.json"))
    if cfg.plot:
        plt, (fig, ax) = _figure()
        ax.plot(table.x, table.U, label="U_x")
        ax.plot(table.x, table.D, label="D_x")
        ax.set_xlabel("separation x (cells)")
        ax.set_ylabel("two-point function")
        ax.legend()
        files.append(_save_svg(plt, fig, out / "twopoint.svg"))
    return files


def run_scaling(cfg: RunConfig, out: Path) -> list[Path]:
    samples = []
    for L in cfg.size_list:
        model = LatticeModel(cfg.a0, cfg.B, L)
        x_cut = min(cfg.x_cut, L) if cfg.x_cut else L // 2
        samples.append((L, leading_eb_value(model, x_cut)))
    files = [export_csv(("L", "p_eb"), samples, out / "scaling.csv")]
    fit = fit_scaling(samples)
    summary = {"B": cfg.B, "a0": cfg.a0, "exponent": fit.exponent, "expected_exponent": (cfg.B - 1) / 2,
               "prefactor": fit.prefactor, "r_squared": fit.r_squared}
    files.append(_write_json(summary, out / "scaling.json"))
    if cfg.plot:
        plt, (fig, ax) = _figure()
        L = np.array([s[0] for s in samples], dtype=float)
        ax.loglog(L, [s[1] - 0.5 for s in samples], "o", label="exact")
        ax.loglog(L, fit.predict(L) - 0.5, "-", label=f"fit, exponent {fit.exponent:.3f}")
        ax.set_xlabel("system size L (cells)")
        ax.set_ylabel("p_EB - 1/2")
        ax.legend()
        files.append(_save_svg(plt, fig, out / "scaling.svg"))
    return files


def run_circuit_sweep(cfg: RunConfig, out: Path) -> list[Path]:
    spec = cfg.circuit()
    res = sweep(spec, cfg.fmin, cfg.fmax, cfg.points, cfg.drive, cfg.peak_factor, workers=cfg.workers)
    rows = [(f, *np.abs(v), z.real, z.imag) for f, v, z in zip(res.frequencies, res.voltages, res.impedance_2g)]
    header = ("f_hz", *(f"v{i + 1}_abs" for i in range(spec.node_count)), "z_re", "z_im")
    files = [export_csv(header, rows, out / "sweep.csv")]
    p, f = resonances(spec)
    summary = {
        "peaks": [{"frequency_hz": q.frequency_hz, "p_mapped": q.p_mapped, "height": q.height} for q in res.peaks],
        "design_eigenvalues": [float(np.real(v)) for v in p],
        "design_frequencies_hz": f.tolist(),
        "esr": spec.esr,
        "drive_node": cfg.drive,
    }
    files.append(_write_json(summary, out / "peaks.json"))
    if cfg.plot:
        plt, (fig, ax) = _figure()
        ax.semilogy(res.frequencies / 1e3, res.response, label="sum |V_i|")
        for fv in f:
            ax.axvline(fv / 1e3, color="0.7", lw=0.8)
        ax.set_xlabel("frequency (kHz)")
        ax.set_ylabel("summed node voltage (V)")
        ax.legend()
        files.append(_save_svg(plt, fig, out / "sweep.svg"))
    return files


def run_circuit_reconstruct(cfg: RunConfig, out: Path) -> list[Path]:
    spec = cfg.circuit()
    omega = 2 * np.pi * cfg.frequency
    rec = reconstruct_laplacian(spec, omega, cfg.noise, cfg.seed)
    truth = effective_projector(spec)
    n = spec.node_count
    rows = [(i + 1, j + 1, truth[i, j], rec.projector[i, j].real, rec.projector[i, j].imag)
            for i in range(n) for j in range(n)]
    files = [export_csv(("row", "col", "true_p", "rec_re", "rec_im"), rows, out / "reconstruct.csv")]
    err = np.abs(rec.projector - truth)
    summary = {"frequency_hz": cfg.frequency, "noise": cfg.noise, "seed": cfg.seed,
               "max_abs_error": float(err.max()), "max_error_fraction": float(err.max() / np.abs(truth).max()),
               "condition": rec.condition, "near_resonance": rec.near_resonance}
    files.append(_write_json(summary, out / "reconstruct.json"))
    if cfg.plot:
        plt, (fig, ax) = _figure()
        ax.plot(truth.ravel(), rec.projector.real.ravel(), "o")
        lim = np.abs(truth).max() * 1.1
        ax.plot([-lim, lim], [-lim, lim], "k-", lw=0.8)
        ax.set_xlabel("design entry of P'")
        ax.set_ylabel("reconstructed entry (real part)")
        files.append(_save_svg(plt, fig, out / "reconstruct.svg"))
    return files


RUNNERS = {
    "flow": run_flow,
    "disorder": run_disorder,
    "twopoint": run_twopoint,
    "scaling": run_scaling,
    "circuit-sweep": run_circuit_sweep,
    "circuit-reconstruct": run_circuit_reconstruct,
}


def run(cfg: RunConfig) -> list[Path]:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return RUNNERS[cfg.command](cfg, out)


def main(argv=None) -> int:
    try:
        cfg, dump = resolve_config(argv)
    except ConfigError as exc:
        print(f"ebstates: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"ebstates: error: {exc}", file=sys.stderr)
        return 2
    if dump:
        Path(dump).write_text(cfg.dumps(), encoding="utf-8")
        return 0
    try:
        files = run(cfg)
    except (EBStatesError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"ebstates: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"ebstates: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"ebstates: error: {exc}", file=sys.stderr)
        return 1
    for path in files:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
