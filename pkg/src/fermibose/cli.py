"""Experiment runner: sweeps, audits and bounds as reproducible tables.

Each experiment reads one YAML config (flags override file values),
writes a CSV table with floats at 12 significant digits, a JSON manifest
with the resolved config, library versions and timings, and a
failures.json listing every violated invariant.  Identical configs
produce byte-identical CSV files; the manifest carries the wall-clock
numbers and is the only output allowed to differ between reruns.

Sweep rows are independent jobs.  With --threads > 1 they are evaluated
in a process pool and written back in row order, so the thread count
never changes the output bytes.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy
import yaml

from . import __version__, boson, bridge, fock, lattice
from .lattice import TWO_PI, GasConfig

FLOAT_FMT = "%.12g"

EXPERIMENTS = (
    "magic",
    "crescent-audit",
    "bounds",
    "exact",
    "isometry",
    "intertwine",
    "h2-audit",
    "trial",
    "scaling",
)


_NEEDS_POTENTIAL = frozenset(
    {"bounds", "exact", "h2-audit", "trial", "scaling"}
)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    d: int = 2
    alpha: float = -1.0
    radii: tuple = ()  # fermi_radius_sq sweep values
    particles: tuple = ()  # alternative to radii, magic counts only
    potential: str | None = None  # path; None means v = 0
    window_radius_sq: int = 1
    window_degree: int = 2
    max_radius_sq: int = 25  # magic table extent
    kmax_sq: int = 16  # crescent audit shift extent
    cutoff_radius_sq: int | None = None  # exact-diagonalization pool
    momentum: tuple | None = None  # exact-diagonalization sector
    cutoff_momentum: float | None = None  # h2 audit scale K
    n_states: int = 20  # h2 audit rows per radius
    exact_dim_limit: int = 4000
    dense_limit: int = 2000
    solver_tol: float = 1e-9
    pivot_tol: float = 1e-10
    seed: int = 0
    threads: int = 1
    out: str = "runs"

    def resolved_radii(self):
        if self.radii and self.particles:
            raise ConfigError("give either radii or particles, not both")
        if self.particles:
            radii = []
            for n in self.particles:
                try:
                    radii.append(
                        GasConfig.from_particle_count(
                            self.d, n, self.alpha
                        ).fermi_radius_sq
                    )
                except ValueError as exc:
                    raise ConfigError(str(exc)) from None
            return tuple(radii)
        if self.radii:
            bad = [
                r
                for r in self.radii
                if not lattice.is_occupied_radius(self.d, r) or r < 1
            ]
            if bad:
                raise ConfigError(
                    f"radii {bad} are not occupied squared radii in d={self.d}"
                )
            return tuple(self.radii)
        # first few closed shells as a usable default sweep
        out, r = [], 1
        while len(out) < 4:
            if lattice.is_occupied_radius(self.d, r):
                out.append(r)
            r += 1
        return tuple(out)

    def gas(self, radius_sq: int) -> GasConfig:
        return GasConfig(d=self.d, fermi_radius_sq=radius_sq, alpha=self.alpha)

    def window(self) -> boson.TruncationWindow:
        return boson.TruncationWindow.from_radius(
            self.d, self.window_radius_sq, self.window_degree
        )

    def warnings(self):
        out = []
        edge = 1.0 - 2.0 / self.d
        if self.alpha >= edge:
            out.append(
                f"alpha={self.alpha} is outside the strong-coupling regime "
                f"(expected alpha < 1 - 2/d = {edge})"
            )
        if self.potential is None and self.experiment in _NEEDS_POTENTIAL:
            out.append("no potential configured; running with v = 0")
        return out


_CONFIG_KEYS = {f.name for f in ExperimentConfig.__dataclass_fields__.values()}


def load_config(experiment: str, path: str | None, overrides: dict) -> ExperimentConfig:
    data = {}
    if path is not None:
        with open(path) as fh:
            loaded = yaml.safe_load(fh) or {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"config {path} is not a key-value document")
        data.update(loaded)
    data.update({k: v for k, v in overrides.items() if v is not None})
    data["experiment"] = experiment
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    data = {k: v for k, v in data.items() if v is not None}
    for key in ("radii", "particles"):
        if key in data:
            data[key] = tuple(int(x) for x in data[key])
    if "momentum" in data:
        data["momentum"] = tuple(int(x) for x in data["momentum"])
    cfg = ExperimentConfig(**data)
    if cfg.experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {cfg.experiment!r}")
    if cfg.d < 2:
        raise ConfigError("d must be at least 2")
    if cfg.threads < 1:
        raise ConfigError("threads must be >= 1")
    if cfg.momentum is not None and len(cfg.momentum) != cfg.d:
        raise ConfigError(
            f"momentum {cfg.momentum} does not have {cfg.d} components"
        )
    return cfg


def validate_potential(path: str, d: int | None = None) -> fock.Potential:
    """Load a potential file, raising a PotentialError that lists every
    violated mode."""
    return fock.load_potential(path, d)


def _potential(cfg: ExperimentConfig) -> fock.Potential:
    if cfg.potential is None:
        return fock.Potential(cfg.d, {})
    return validate_potential(cfg.potential, cfg.d)


# ---------------------------------------------------------------- formatting


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return FLOAT_FMT % value
    return str(value)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(x) for x in row])


def _k_columns(d, prefix="k"):
    return [f"{prefix}_{i + 1}" for i in range(d)]


# -------------------------------------------------------------- row workers
#
# Top-level functions taking one plain dict so a process pool can pickle
# them.  Each returns (rows, failures, seconds).


def _job_potential(job) -> fock.Potential:
    return fock.Potential(job["d"], dict(job["pot"]))


def _job_gas(job) -> GasConfig:
    return GasConfig(d=job["d"], fermi_radius_sq=job["r"], alpha=job["alpha"])


def _job_window(job) -> boson.TruncationWindow:
    return boson.TruncationWindow.from_radius(
        job["d"], job["window_radius_sq"], job["window_degree"]
    )


def _gas_prefix(config: GasConfig):
    return [
        config.fermi_radius_sq,
        config.fermi_momentum,
        lattice.particle_count(config),
    ]


def _bounds_row(job):
    t0 = time.perf_counter()
    config = _job_gas(job)
    lower, upper = fock.trivial_bounds(config, _job_potential(job))
    row = _gas_prefix(config) + [lower, upper, upper - lower]
    return [row], [], time.perf_counter() - t0


def _exact_row(job):
    t0 = time.perf_counter()
    config = _job_gas(job)
    cutoff = job["cutoff"] if job["cutoff"] is not None else job["r"] + 3
    momentum = job["momentum"] or (0,) * job["d"]
    prefix = _gas_prefix(config) + [cutoff] + list(momentum)
    try:
        res = fock.ground_state(
            config,
            _job_potential(job),
            cutoff_radius_sq=cutoff,
            momentum=momentum,
            tol=job["solver_tol"],
            dense_limit=job["dense_limit"],
            basis_limit=job["exact_dim_limit"],
        )
    except ValueError as exc:
        row = prefix + [None, None, None, None, f"skipped: {exc}"]
        return [row], [], time.perf_counter() - t0
    row = prefix + [res.dimension, res.method, res.energy, res.residual, "ok"]
    return [row], [], time.perf_counter() - t0


def _isometry_row(job):
    t0 = time.perf_counter()
    config = _job_gas(job)
    window = _job_window(job)
    report = bridge.isometry_audit(window, config)
    min_crescent = min(
        lattice.crescent(k, config).size for k in window.modes
    )
    row = _gas_prefix(config) + [
        boson.window_dim(window),
        min_crescent,
        report.max_abs_eps,
        report.operator_norm_bound,
        bridge.isometry_shape_constant(report, config),
    ]
    for deg in range(window.max_degree + 1):
        row.append(report.max_abs_by_degree.get(deg, 0.0))
    return [row], [], time.perf_counter() - t0


def _intertwine_row(job):
    t0 = time.perf_counter()
    config = _job_gas(job)
    window = _job_window(job)
    report = bridge.intertwine_residual(window, config)
    by_degree = {}
    for mono, val in report.per_monomial.items():
        deg = len(mono)
        by_degree[deg] = max(by_degree.get(deg, 0.0), val)
    row = _gas_prefix(config) + [report.annihilator_max, report.creator_max]
    for deg in range(window.max_degree + 1):
        row.append(by_degree.get(deg, 0.0))
    return [row], [], time.perf_counter() - t0


def _h2_row(job):
    t0 = time.perf_counter()
    config = _job_gas(job)
    window = _job_window(job)
    pot = _job_potential(job)
    kf = config.fermi_momentum
    cutoff = job["cutoff_momentum"]
    if cutoff is None:
        cutoff = TWO_PI * math.sqrt(job["window_radius_sq"])
    failures = []
    prefix = _gas_prefix(config) + [job["state"], cutoff]
    try:
        rng = np.random.default_rng((job["seed"], job["r"], job["state"]))
        f = boson.random_boson_vector(window, rng, n_terms=4)
        psi = bridge.phi_map(f, config)
        audit = bridge.h2_expectation_audit(psi, window, config, pot, cutoff)
    except ValueError as exc:
        row = prefix + [None, None, None, f"skipped: {exc}"]
        return [row], [], time.perf_counter() - t0
    row = prefix + [
        audit.value,
        audit.bound,
        audit.bound - audit.value,
        "ok" if audit.passed else "violated",
    ]
    if not audit.passed:
        failures.append(
            {
                "invariant": "h2.expectation_bound",
                "row": {"fermi_radius_sq": job["r"], "state": job["state"]},
                "detail": f"value {audit.value} exceeds bound {audit.bound}",
            }
        )
    return [row], failures, time.perf_counter() - t0


def _trial_row(job):
    t0 = time.perf_counter()
    config = _job_gas(job)
    window = _job_window(job)
    pot = _job_potential(job)
    lower, upper = fock.trivial_bounds(config, pot)
    weights = boson.hb_weights(config, pot)
    res = boson.hb_min_truncated(weights, window)
    report = bridge.trial_energy(res.argmin, config, pot)
    row = _gas_prefix(config) + [
        lower,
        upper,
        lower + res.value,
        report.raw,
        report.bosonic_prediction,
        report.discrepancy,
        report.identity_gap,
    ]
    return [row], [], time.perf_counter() - t0


def _scaling_row(job):
    t0 = time.perf_counter()
    config = _job_gas(job)
    window = _job_window(job)
    pot = _job_potential(job)
    n = lattice.particle_count(config)
    lower, upper = fock.trivial_bounds(config, pot)
    sub = bridge.subspace_upper_bound(
        window, config, pot, pivot_tol=job["pivot_tol"]
    )
    exact = None
    cutoff = job["cutoff"] if job["cutoff"] is not None else job["r"] + 3
    try:
        exact = fock.ground_state(
            config,
            pot,
            cutoff_radius_sq=cutoff,
            tol=job["solver_tol"],
            dense_limit=job["dense_limit"],
            basis_limit=job["exact_dim_limit"],
        ).energy
    except ValueError:
        pass  # sector too large for the configured limit; leave blank
    power = 1.0 - job["alpha"] - 1.0 / job["d"]
    scale = float(n) ** power
    row = _gas_prefix(config) + [
        lower,
        upper,
        sub.value,
        exact,
        (upper - lower) / scale,
        (sub.value - lower) / scale,
    ]
    return [row], [], time.perf_counter() - t0


_ROW_WORKERS = {
    "bounds": _bounds_row,
    "exact": _exact_row,
    "isometry": _isometry_row,
    "intertwine": _intertwine_row,
    "h2-audit": _h2_row,
    "trial": _trial_row,
    "scaling": _scaling_row,
}


def _run_job(payload):
    experiment, job = payload
    return _ROW_WORKERS[experiment](job)


# ------------------------------------------------------------- experiments


def _degree_columns(cfg, prefix):
    return [f"{prefix}_deg_{j}" for j in range(cfg.window_degree + 1)]


def _header(cfg: ExperimentConfig):
    gas = ["fermi_radius_sq", "k_f", "n_particles"]
    if cfg.experiment == "bounds":
        return gas + ["e_n0", "upper_filled", "gap"]
    if cfg.experiment == "exact":
        return (
            gas
            + ["cutoff_radius_sq"]
            + _k_columns(cfg.d, "momentum")
            + ["dimension", "method", "energy", "residual", "status"]
        )
    if cfg.experiment == "isometry":
        return gas + [
            "window_dim",
            "min_crescent",
            "max_abs_eps",
            "operator_norm_bound",
            "shape_constant",
        ] + _degree_columns(cfg, "eps")
    if cfg.experiment == "intertwine":
        return gas + ["annihilator_max", "creator_max"] + _degree_columns(
            cfg, "res"
        )
    if cfg.experiment == "h2-audit":
        return gas + [
            "state",
            "cutoff_momentum",
            "value",
            "bound",
            "margin",
            "status",
        ]
    if cfg.experiment == "trial":
        return gas + [
            "e_n0",
            "upper_filled",
            "upper_bosonic_min",
            "trial_energy",
            "bosonic_prediction",
            "discrepancy",
            "identity_gap",
        ]
    if cfg.experiment == "scaling":
        return gas + [
            "e_n0",
            "upper_filled",
            "upper_subspace",
            "exact_energy",
            "ratio_filled",
            "ratio_subspace",
        ]
    raise ConfigError(f"no sweep header for {cfg.experiment}")


def _jobs(cfg: ExperimentConfig, pot: fock.Potential):
    base = {
        "d": cfg.d,
        "alpha": cfg.alpha,
        "pot": tuple(sorted(pot.vhat.items())),
        "window_radius_sq": cfg.window_radius_sq,
        "window_degree": cfg.window_degree,
        "cutoff": cfg.cutoff_radius_sq,
        "momentum": cfg.momentum,
        "cutoff_momentum": cfg.cutoff_momentum,
        "solver_tol": cfg.solver_tol,
        "dense_limit": cfg.dense_limit,
        "exact_dim_limit": cfg.exact_dim_limit,
        "pivot_tol": cfg.pivot_tol,
        "seed": cfg.seed,
    }
    jobs = []
    for r in cfg.resolved_radii():
        if cfg.experiment == "h2-audit":
            for state in range(cfg.n_states):
                jobs.append((cfg.experiment, {**base, "r": r, "state": state}))
        else:
            jobs.append((cfg.experiment, {**base, "r": r}))
    return jobs


def _run_magic(cfg: ExperimentConfig):
    rows = []
    for r in range(cfg.max_radius_sq + 1):
        if r > 0 and not lattice.is_occupied_radius(cfg.d, r):
            continue
        config = GasConfig(d=cfg.d, fermi_radius_sq=r, alpha=cfg.alpha)
        rows.append(
            [r, config.fermi_momentum, lattice.particle_count(config)]
        )
    return ["radius_sq", "k_f", "n_particles"], rows, []


def _run_crescent_audit(cfg: ExperimentConfig):
    radii = cfg.resolved_radii()
    audit = lattice.audit_crescent_bounds(cfg.d, radii, cfg.kmax_sq)
    rows = [
        [r, n] + list(k) + [size, ratio]
        for r, n, k, size, ratio in audit.rows
    ]
    header = (
        ["fermi_radius_sq", "n_particles"]
        + _k_columns(cfg.d)
        + ["crescent_size", "ratio"]
    )
    failures = [
        {
            "invariant": "crescent.geometry",
            "row": {"fermi_radius_sq": r, "k": list(k)},
            "detail": reason,
        }
        for r, k, reason in audit.failures
    ]
    extras = {
        "ratio_low": audit.ratio_low,
        "ratio_high": audit.ratio_high,
        "low_witness": audit.low_witness,
        "high_witness": audit.high_witness,
    }
    return header, rows, failures, extras


def run(cfg: ExperimentConfig) -> int:
    """Execute one experiment; returns the process exit code."""
    t_start = time.perf_counter()
    os.makedirs(cfg.out, exist_ok=True)
    warnings = cfg.warnings()
    failures = []
    manifest_extras = {}
    row_seconds = []

    if cfg.experiment == "magic":
        header, rows, failures = _run_magic(cfg)
    elif cfg.experiment == "crescent-audit":
        header, rows, failures, manifest_extras = _run_crescent_audit(cfg)
    else:
        try:
            pot = _potential(cfg)
        except fock.PotentialError as exc:
            _write_failures(
                cfg,
                [
                    {
                        "invariant": "potential.format",
                        "row": {"where": str(where)},
                        "detail": reason,
                    }
                    for where, reason in exc.violations
                ],
            )
            print(str(exc), file=sys.stderr)
            return 1
        header = _header(cfg)
        jobs = _jobs(cfg, pot)
        rows = []
        if cfg.threads > 1:
            with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
                results = list(pool.map(_run_job, jobs))
        else:
            results = [_run_job(j) for j in jobs]
        for job_rows, job_failures, seconds in results:
            rows.extend(job_rows)
            failures.extend(job_failures)
            row_seconds.append(round(seconds, 6))

    csv_name = f"{cfg.experiment}.csv"
    write_csv(os.path.join(cfg.out, csv_name), header, rows)
    _write_failures(cfg, failures)

    manifest = {
        "experiment": cfg.experiment,
        "config": asdict(cfg),
        "versions": {
            "fermibose": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "outputs": {"csv": csv_name, "failures": "failures.json"},
        "rows": len(rows),
        "failures": len(failures),
        "warnings": warnings,
        "timings": {
            "total_seconds": round(time.perf_counter() - t_start, 6),
            "row_seconds": row_seconds,
        },
    }
    manifest.update(manifest_extras)
    with open(os.path.join(cfg.out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, default=_json_default)
        fh.write("\n")

    for line in warnings:
        print(f"warning: {line}", file=sys.stderr)
    if failures:
        print(
            f"{len(failures)} invariant failure(s); see failures.json",
            file=sys.stderr,
        )
        return 1
    return 0


def _json_default(obj):
    if isinstance(obj, (np.integer, np.floating)):
        return float(obj)
    return list(obj)


def _write_failures(cfg: ExperimentConfig, failures):
    path = os.path.join(cfg.out, "failures.json")
    with open(path, "w") as fh:
        json.dump(failures, fh, indent=2)
        fh.write("\n")


# --------------------------------------------------------------------- main


def _int_list(text):
    return tuple(int(x) for x in text.split(",") if x.strip())


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fermibose",
        description="Sweeps, audits and variational bounds for the "
        "interacting Fermi gas on the momentum lattice.",
    )
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", help="YAML config file")
    parser.add_argument("--out", help="output directory (default runs/)")
    parser.add_argument("--threads", type=int, help="worker processes")
    parser.add_argument(
        "--seed", type=int, help="seed for sampled audit states"
    )
    parser.add_argument("--d", type=int, help="lattice dimension")
    parser.add_argument("--alpha", type=float, help="coupling exponent")
    parser.add_argument(
        "--radii", type=_int_list, help="comma-separated fermi_radius_sq sweep"
    )
    parser.add_argument(
        "--particles", type=_int_list, help="comma-separated magic N sweep"
    )
    parser.add_argument("--potential", help="potential file path")
    parser.add_argument("--window-radius-sq", type=int, dest="window_radius_sq")
    parser.add_argument("--window-degree", type=int, dest="window_degree")
    parser.add_argument("--max-radius-sq", type=int, dest="max_radius_sq")
    parser.add_argument("--kmax-sq", type=int, dest="kmax_sq")
    parser.add_argument(
        "--cutoff-radius-sq", type=int, dest="cutoff_radius_sq"
    )
    parser.add_argument(
        "--momentum", type=_int_list, help="total momentum sector"
    )
    parser.add_argument(
        "--cutoff-momentum", type=float, dest="cutoff_momentum"
    )
    parser.add_argument("--n-states", type=int, dest="n_states")
    parser.add_argument("--exact-dim-limit", type=int, dest="exact_dim_limit")
    parser.add_argument("--dense-limit", type=int, dest="dense_limit")
    parser.add_argument("--solver-tol", type=float, dest="solver_tol")
    parser.add_argument("--pivot-tol", type=float, dest="pivot_tol")
    return parser


def main(argv=None) -> int:
    args = vars(build_parser().parse_args(argv))
    experiment = args.pop("experiment")
    config_path = args.pop("config")
    try:
        cfg = load_config(experiment, config_path, args)
        return run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
