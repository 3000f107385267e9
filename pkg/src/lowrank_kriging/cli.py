"""
Command-line harness: ``eigen-decay``, ``table2``, ``verify`` and ``voronoi``.

Configuration is a flat ``key = value`` file (``#`` starts a comment);
``kernel`` may be repeated. Any key can be overridden with ``--set key=value``.

Exit codes: 0 success, 1 verification failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import spectral
from .design import Box, grid_design, random_design, voronoi_summary
from .kernels import K1, K2, K3, K4, KernelSpec, c_delta
from .kriging import optimal_tau_threshold, perturbation_mse, pseudo_insample_mse
from .optimality import write_report_csv
from .spectral import MemoryBudgetError, assemble_covariance, condition_number, dense_eigenvalues

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    kernels: list = field(default_factory=lambda: [K1, K2, K3, K4])
    design: str = "grid"
    grid_m: int = 70
    design_n: int = 100
    design_seed: int = 0
    domain: Box = field(default_factory=lambda: Box.unit(2))
    k_list: list = field(default_factory=lambda: [100])
    tau_list: list = field(default_factory=lambda: [0.001, 0.01, 0.1, 1.0])
    quadrature_m: int = 4900
    seed: int = 0
    output_dir: Path = Path(".")
    max_matrix_bytes: int = spectral.DEFAULT_MAX_MATRIX_BYTES
    raster_resolution: int | None = None
    c_delta_resolution: int = 21
    golden: dict = field(default_factory=dict)

    def make_design(self):
        if self.design == "grid":
            return grid_design(self.grid_m, self.domain)
        return random_design(self.design_n, self.domain, self.design_seed)


def _floats(text):
    return [float(v) for v in text.replace(" ", "").split(",") if v]


def _ints(text):
    return [int(v) for v in text.replace(" ", "").split(",") if v]


def _domain(text):
    vals = _floats(text)
    if len(vals) < 2 or len(vals) % 2:
        raise ValueError("domain needs lo1,hi1[,lo2,hi2,...]")
    return Box(tuple(vals[0::2]), tuple(vals[1::2]))


_SCALARS = {
    "design": str,
    "grid_m": int,
    "design_n": int,
    "design_seed": int,
    "quadrature_m": int,
    "seed": int,
    "output_dir": Path,
    "max_matrix_bytes": int,
    "raster_resolution": int,
    "c_delta_resolution": int,
    "k_list": _ints,
    "tau_list": _floats,
    "domain": _domain,
}


def parse_pairs(pairs, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Apply ``(key, value)`` pairs to a config; repeated ``kernel`` keys accumulate."""
    cfg = replace(base) if base is not None else ExperimentConfig()
    cfg.golden = dict(cfg.golden)
    kernels = []
    for key, value in pairs:
        key = key.strip().lower()
        value = value.strip()
        try:
            if key == "kernel":
                kernels.append(KernelSpec.from_text(value))
            elif key.startswith("golden."):
                from .verification import GOLDEN

                name = key[len("golden."):]
                if name not in GOLDEN:
                    raise ValueError(f"unknown golden value {name!r}")
                _, tol, kind = GOLDEN[name]
                cfg.golden[name] = (float(value), tol, kind)
            elif key in _SCALARS:
                setattr(cfg, key, _SCALARS[key](value))
            else:
                raise ValueError(f"unknown key {key!r}")
        except (ValueError, TypeError) as err:
            raise ConfigError(f"{key}: {err}") from err
    if kernels:
        cfg.kernels = kernels
    if cfg.design not in ("grid", "random"):
        raise ConfigError(f"design must be 'grid' or 'random', got {cfg.design!r}")
    if cfg.grid_m < 1 or cfg.design_n < 1:
        raise ConfigError("grid_m and design_n must be positive")
    if cfg.domain.dim > 3:
        raise ConfigError("the command line supports dimensions 1 to 3")
    if any(k < 0 for k in cfg.k_list) or not cfg.k_list:
        raise ConfigError("k_list needs non-negative integers")
    if any(t <= 0 for t in cfg.tau_list) or not cfg.tau_list:
        raise ConfigError("tau_list needs positive values")
    return cfg


def read_config(path) -> list:
    pairs = []
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        pairs.append((key, value))
    return pairs


def _row(values):
    return [repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in values]


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(_row(r))


def _kernel_eigenvalues(cfg, spec, design):
    spectral.check_budget(design.n, design.n, cfg.max_matrix_bytes)
    return dense_eigenvalues(assemble_covariance(spec, design, cfg.max_matrix_bytes))


def cmd_eigen_decay(cfg: ExperimentConfig) -> int:
    design = cfg.make_design()
    used = set()
    for spec in cfg.kernels:
        name = spec.slug
        while name in used:
            name += "_"
        used.add(name)
        lam = _kernel_eigenvalues(cfg, spec, design)
        spectral.write_spectrum_csv(lam, cfg.output_dir / f"spectrum_{name}.csv")
    return EXIT_OK


def cmd_table2(cfg: ExperimentConfig) -> int:
    design = cfg.make_design()
    spec = cfg.kernels[0]
    k = cfg.k_list[0]
    if k >= design.n:
        raise ConfigError(f"k = {k} must be smaller than n = {design.n}")
    lam = _kernel_eigenvalues(cfg, spec, design)
    rows = []
    for tau in cfg.tau_list:
        cond = condition_number(lam, tau)
        rows.append((tau, cond.paper_convention, cond.strict, perturbation_mse(lam, k, tau)))
    _write_csv(cfg.output_dir / "table2.csv", ["tau", "cond_paper", "cond_strict", "mse_spectral"], rows)
    _write_csv(cfg.output_dir / "table2_pseudo.csv",
               ["k", "pseudo_tail", "lambda_k_plus_1", "tau_threshold"],
               [(k, pseudo_insample_mse(lam, k), float(lam[k]), optimal_tau_threshold(lam, k))])
    return EXIT_OK


def cmd_voronoi(cfg: ExperimentConfig) -> int:
    design = cfg.make_design()
    summary = voronoi_summary(design, cfg.raster_resolution)
    spec = cfg.kernels[0]
    cd = c_delta(spec, design.domain, min(summary.delta_max, design.domain.diameter),
                 cfg.c_delta_resolution)
    _write_csv(cfg.output_dir / "voronoi_cells.csv", ["i", "area", "diameter"],
               [(i, float(a), float(d)) for i, (a, d) in enumerate(zip(summary.areas, summary.diameters))])
    _write_csv(cfg.output_dir / "voronoi_summary.csv", ["delta_max", "mesh_ratio", "c_delta_max"],
               [(summary.delta_max, summary.mesh_ratio, cd)])
    return EXIT_OK


def cmd_verify(cfg: ExperimentConfig, only=None) -> int:
    from .verification import run_checks

    rows = run_checks(only=only, golden=cfg.golden, seed=cfg.seed)
    write_report_csv(rows, cfg.output_dir / "verify_report.csv")
    failed = [r for r in rows if not r.passed]
    for r in rows:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.check} {r.instance} k={r.k} lhs={r.lhs:.6g} rhs={r.rhs:.6g}")
    print(f"{len(rows) - len(failed)}/{len(rows)} checks passed")
    return EXIT_FAIL if failed else EXIT_OK


COMMANDS = {
    "eigen-decay": cmd_eigen_decay,
    "table2": cmd_table2,
    "verify": cmd_verify,
    "voronoi": cmd_voronoi,
}

# command-specific defaults applied before the config file
_DEFAULTS = {
    "table2": [("kernel", K3.to_text())],
    "voronoi": [("kernel", K3.to_text())],
}


def build_parser():
    parser = argparse.ArgumentParser(prog="lowrank-kriging", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="flat key = value config file")
        p.add_argument("--output", type=Path, help="output directory (default: current)")
        p.add_argument("--seed", type=int)
        p.add_argument("--max-matrix-bytes", type=int)
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key; may be repeated")
        if name == "verify":
            p.add_argument("--only", help="comma-separated check names")
    return parser


def load_config(args) -> ExperimentConfig:
    pairs = list(_DEFAULTS.get(args.command, []))
    user_pairs = read_config(args.config) if args.config else []
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        user_pairs.append((key, value))
    if any(k.strip().lower() == "kernel" for k, _ in user_pairs):
        pairs = [p for p in pairs if p[0] != "kernel"]
    cfg = parse_pairs(pairs + user_pairs)
    if args.output is not None:
        cfg.output_dir = args.output
    if args.seed is not None:
        cfg.seed = args.seed
    if args.max_matrix_bytes is not None:
        if args.max_matrix_bytes <= 0:
            raise ConfigError("--max-matrix-bytes must be positive")
        cfg.max_matrix_bytes = args.max_matrix_bytes
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args)
        cfg.output_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "verify":
            only = [c.strip() for c in args.only.split(",")] if args.only else None
            return cmd_verify(cfg, only)
        return COMMANDS[args.command](cfg)
    except (ConfigError, MemoryBudgetError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as err:
        # invalid parameters detected by the numerical modules
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
