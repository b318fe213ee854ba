"""
Command-line front end.

Parses JSON scenario configs (schema-validated, unknown keys rejected),
runs the requested pipeline, and writes CSV/JSON artifacts whose data
payloads are deterministic for a fixed config and seed. Every output file
embeds '#'-prefixed metadata lines with the tool version and a hash of
the canonicalized config.

Exit codes: 0 success, 2 config error, 3 instability, 4 numerical
failure, 5 oracle-comparison failure.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import importlib.resources
import json
import logging
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__, chain as chain_mod, metrics, oracle as oracle_mod, spectra
from .model import (
    CouplingParams,
    InstabilityError,
    ModeParams,
    SystemModel,
    Topology,
    build_drift_matrix,
    require_stable,
)
from .numerics import NonConvergenceError, SingularMatrixError
from .oracle import IntegrationQualityError, OracleComparisonError, OracleConfig
from .spectra import UndefinedAsymmetryError

log = logging.getLogger("sasc")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INSTABILITY = 3
EXIT_NUMERICAL = 4
EXIT_ORACLE = 5

_DEFAULT_HIGH_FREQUENCY = 2.0 * np.pi * 10e9
_DEFAULT_LOW_FREQUENCY = 2.0 * np.pi * 10e6


class ConfigError(Exception):
    """Invalid configuration content or structure."""


def _load_schema() -> dict:
    with importlib.resources.files("sasc.configs").joinpath("schema.json").open() as fh:
        return json.load(fh)


def load_config(path: str, overrides: list[str] | None = None) -> dict:
    """Load, override (--set dotted.path=value), and schema-validate a config."""
    try:
        with open(path, encoding="utf-8") as fh:
            config = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, raw = item.partition("=")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = config
        parts = key.split(".")
        for part in parts[:-1]:
            if isinstance(node, list):
                part = int(part)
                node = node[part]
            else:
                node = node.setdefault(part, {})
        leaf = parts[-1]
        if isinstance(node, list):
            node[int(leaf)] = value
        else:
            node[leaf] = value
    validate_config(config)
    return config


def validate_config(config: dict) -> None:
    schema = _load_schema()
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(config), key=lambda e: e.json_path)
    if errors:
        first = errors[0]
        raise ConfigError(f"config invalid at {first.json_path}: {first.message}")


def canonical_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def build_system(block: dict) -> SystemModel:
    """SystemModel from the config 'system' block (ω_b units)."""
    topology = Topology(block["topology"])
    modes = []
    for i, entry in enumerate(block["modes"]):
        high = i % 2 == 0
        default_freq = _DEFAULT_HIGH_FREQUENCY if high else _DEFAULT_LOW_FREQUENCY
        modes.append(
            ModeParams(
                label=entry["label"],
                absolute_frequency=entry.get("absolute_frequency", default_freq),
                kappa=entry["kappa"],
                detuning=entry.get("detuning", 0.0 if high else 1.0),
            )
        )
    couplings = [
        CouplingParams(magnitude=c["magnitude"], phase=c.get("phase", 0.0))
        for c in block["couplings"]
    ]
    try:
        return SystemModel(
            topology=topology,
            modes=tuple(modes),
            couplings=tuple(couplings),
            temperature=block.get("temperature", 0.0),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _metadata(config: dict, extra: dict | None = None) -> dict:
    meta = {
        "tool": f"sasc {__version__}",
        "config_hash": canonical_hash(config),
        "system": json.dumps(config.get("system", {}), sort_keys=True),
    }
    if config.get("seed") is not None:
        meta["seed"] = config["seed"]
    meta.update(extra or {})
    return meta


def _write_csv(path: Path, metadata: dict, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for key, value in metadata.items():
            fh.write(f"# {key}: {value}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    log.info("wrote %s", path)


def _write_json(path: Path, metadata: dict, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"metadata": metadata, **payload}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    log.info("wrote %s", path)


def _grid(config: dict, default=(-3.0, 3.0, 1201)) -> np.ndarray:
    block = config.get("grid", {})
    lo = block.get("min", default[0])
    hi = block.get("max", default[1])
    points = block.get("points", default[2])
    if hi <= lo or points < 2:
        raise ConfigError("grid requires max > min and points >= 2")
    return np.linspace(lo, hi, points)


def _basename(config: dict, fallback: str) -> str:
    return config.get("output", {}).get("basename", fallback)


def run_spectrum(config: dict, outdir: Path, fmt: str) -> None:
    model = build_system(config["system"])
    require_stable(build_drift_matrix(model))
    omegas = _grid(config)
    task = config.get("task", {})
    psi = task.get("psi", 0.0)
    header: list[str] = ["omega"]
    rows = []
    if model.topology is Topology.DU:
        header += ["T_a", "T_b", "T_a_plus", "T_a_minus", "T_b_plus", "T_b_minus", "R_ab"]
        for w in omegas:
            tr = spectra.transfer_matrix(model, w, psi=psi, check=False)
            t = spectra.transmission_du(tr)
            rows.append([
                w, t.t_a, t.t_b, t.b_to_a_plus, t.b_to_a_minus,
                t.a_to_b_plus, t.a_to_b_minus,
                spectra.asymmetry(t.b_to_a_plus, t.a_to_b_minus),
            ])
    else:
        header += [
            "T_m_plus", "T_m_minus", "T_to_b_plus", "T_to_b_minus",
            "T_b_plus", "T_b_minus", "T_to_c_plus", "T_to_c_minus", "R_mb", "R_bc",
        ]
        for w in omegas:
            tr = spectra.transfer_matrix(model, w, psi=psi, check=False)
            t = spectra.transmission_three(tr)
            r_mb, r_bc = spectra.asymmetries_three(tr)
            rows.append([
                w, t.b_to_m_plus, t.b_to_m_minus, t.m_to_b_plus, t.m_to_b_minus,
                t.c_to_b_plus, t.c_to_b_minus, t.b_to_c_plus, t.b_to_c_minus,
                r_mb, r_bc,
            ])
    port = task.get("include_output_port")
    if port is not None:
        table = spectra.output_spectrum(model, omegas, port)
        name = next(iter(table.columns))
        header.append(name)
        col = table.columns[name]
        for row, value in zip(rows, col):
            row.append(value)
    meta = _metadata(config)
    base = _basename(config, "spectrum")
    if fmt == "csv":
        _write_csv(outdir / f"{base}.csv", meta, header, rows)
    else:
        payload = {name: [row[i] for row in rows] for i, name in enumerate(header)}
        _write_json(outdir / f"{base}.json", meta, {"data": payload})


def run_asymmetry(config: dict, outdir: Path, fmt: str) -> None:
    model = build_system(config["system"])
    require_stable(build_drift_matrix(model))
    task = config.get("task", {})
    omega = task.get("omega", spectra.resonance_probe_frequency())
    grid_block = config.get("grid", {})
    thetas = np.linspace(
        grid_block.get("min", 0.0),
        grid_block.get("max", 2.0 * np.pi),
        grid_block.get("points", 721),
    )
    coupling_index = task.get("coupling_index", 0)
    rows = []
    if model.topology is Topology.DU:
        header = ["theta", "R_ab"]
        for theta in thetas:
            probe = metrics._replace_phase(model, coupling_index, theta)
            tr = spectra.transfer_matrix(probe, omega, check=False)
            rows.append([theta, spectra.asymmetry_du(tr)])
    else:
        header = ["theta", "R_mb", "R_bc"]
        for theta in thetas:
            probe = metrics._replace_phase(model, coupling_index, theta)
            tr = spectra.transfer_matrix(probe, omega, check=False)
            r_mb, r_bc = spectra.asymmetries_three(tr)
            rows.append([theta, r_mb, r_bc])
    meta = _metadata(config, {"omega": omega})
    base = _basename(config, "asymmetry")
    if fmt == "csv":
        _write_csv(outdir / f"{base}.csv", meta, header, rows)
    else:
        payload = {name: [row[i] for row in rows] for i, name in enumerate(header)}
        _write_json(outdir / f"{base}.json", meta, {"data": payload})


def run_snr(config: dict, outdir: Path, fmt: str) -> None:
    model = build_system(config["system"])
    task = config.get("task", {})
    omegas = _grid(config)
    signal_port = task.get("signal_port", 0)
    readout_port = task.get("readout_port")
    psi = task.get("psi", 0.0)
    amp = spectra.amplification_spectrum(model, omegas, signal_port, readout_port, psi)
    snr = spectra.snr_spectrum(model, omegas, signal_port, readout_port, psi)
    meta = _metadata(config)
    base = _basename(config, "snr")
    rows = list(zip(omegas, amp.columns["S_AP"], snr.columns["S_SNR"]))
    if fmt == "csv":
        _write_csv(outdir / f"{base}.csv", meta, ["omega", "S_AP", "S_SNR"], rows)
    else:
        _write_json(outdir / f"{base}.json", meta, {
            "data": {
                "omega": list(map(float, omegas)),
                "S_AP": amp.columns["S_AP"].tolist(),
                "S_SNR": snr.columns["S_SNR"].tolist(),
            }
        })


def _comparison_config(config: dict) -> metrics.ComparisonConfig:
    task = config.get("task", {})
    if "ics" not in task:
        raise ConfigError("fmap task requires an 'ics' baseline system block")
    cs_model = build_system(config["system"])
    ics_model = build_system(task["ics"])
    omega_range = tuple(task.get("omega_range", (-3.0, 3.0)))
    return metrics.ComparisonConfig(
        cs_model=cs_model,
        ics_model=ics_model,
        omega_range=omega_range,
        signal_port=task.get("signal_port", 0),
        readout_port=task.get("readout_port"),
        psi=task.get("psi", 0.0),
    )


def run_fmap(config: dict, outdir: Path, fmt: str) -> None:
    task = config.get("task", {})
    cfg = _comparison_config(config)
    lo = task.get("delta_min", -2.0)
    hi = task.get("delta_max", 2.0)
    points = task.get("delta_points", 41)
    deltas = np.linspace(lo, hi, points)
    result = metrics.f_map(cfg, deltas, deltas)
    # Unstable cells carry f = 0; lg f is undefined there and written as null/nan.
    with np.errstate(divide="ignore"):
        lg = np.where(result.values > 0.0, np.log10(np.maximum(result.values, 1e-300)), np.nan)
    meta = _metadata(config, result.metadata)
    base = _basename(config, "fmap")
    if fmt == "csv":
        with open(outdir / f"{base}.csv", "w", newline="", encoding="utf-8") as fh:
            for key, value in meta.items():
                fh.write(f"# {key}: {value}\n")
            fh.write("delta_c,delta_m,lg_f\n")
            for i, dm in enumerate(result.delta_m):
                for j, dc in enumerate(result.delta_c):
                    fh.write(f"{float(dc)!r},{float(dm)!r},{float(lg[i, j])!r}\n")
        log.info("wrote %s", outdir / f"{base}.csv")
    else:
        payload = {
            "delta_c": result.delta_c.tolist(),
            "delta_m": result.delta_m.tolist(),
            "lg_f": [[v if np.isfinite(v) else None for v in row] for row in lg],
            "f": result.values.tolist(),
        }
        _write_json(outdir / f"{base}.json", meta, {"data": payload})


def run_chain(config: dict, outdir: Path, fmt: str) -> None:
    task = config.get("task", {})
    block = task.get("chain")
    if block is None:
        raise ConfigError("chain task requires a 'chain' block")
    coupling = CouplingParams(
        magnitude=block["coupling"]["magnitude"],
        phase=block["coupling"].get("phase", 0.0),
    )
    specs = [
        chain_mod.ChainSpec(
            n_modes=n,
            coupling=coupling,
            detuning=block["detuning"],
            detuning_alt=block["detuning_alt"],
            kappa_high=block["kappa_high"],
            kappa_low=block["kappa_low"],
            temperature=config["system"].get("temperature", 0.0) if "system" in config else 0.0,
        )
        for n in block["n_values"]
    ]
    omega = block.get("omega", 0.3)
    report = chain_mod.scaling_fit(specs, omega)
    meta = _metadata(config, {"omega": omega})
    base = _basename(config, "chain")
    if fmt == "csv":
        rows = list(zip(report.n_values, report.gains))
        _write_csv(outdir / f"{base}.csv", meta, ["n_modes", "gain"], rows)
        _write_json(outdir / f"{base}_fit.json", meta, {"fit": report.to_json_dict()})
    else:
        _write_json(outdir / f"{base}.json", meta, {"fit": report.to_json_dict()})


def run_oracle(config: dict, outdir: Path, fmt: str) -> None:
    model = build_system(config["system"])
    task = config.get("task", {})
    block = task.get("oracle", {})
    seed = config.get("seed")
    if seed is None:
        raise ConfigError("oracle task requires a top-level seed")
    cfg = OracleConfig(
        model=model,
        dt=block.get("dt", 0.002),
        n_steps=block.get("n_steps", 131072),
        ensemble=block.get("ensemble", 64),
        seed=seed,
        port=block.get("port", 0),
        segment_length=block.get("segment_length", 4096),
        overlap=block.get("overlap", 0.5),
        burn_in=block.get("burn_in"),
    )
    run = oracle_mod.simulate(cfg)
    predicted = spectra.output_spectrum(model, run.omega, cfg.port)
    report = oracle_mod.compare(run, predicted)
    meta = _metadata(config, {"n_segments": run.n_segments})
    base = _basename(config, "oracle")
    _write_json(outdir / f"{base}.json", meta, {
        "fraction_within": report.fraction_within,
        "n_bins": report.n_bins,
        "max_abs_z": report.max_abs_z,
    })
    threshold = block.get("min_fraction", 0.99)
    if report.fraction_within < threshold:
        raise OracleComparisonError(
            f"only {report.fraction_within:.4f} of bins within 3 standard errors"
            f" (needs {threshold})"
        )


def run_optimize(config: dict, outdir: Path, fmt: str) -> None:
    model = build_system(config["system"])
    task = config.get("task", {})
    which = task.get("which", "mb")
    target = task.get("target", -1.0)
    omega = task.get("omega", spectra.resonance_probe_frequency())
    result = metrics.find_phase_for_target_R(model, target, which, omega)
    meta = _metadata(config, {"omega": omega})
    base = _basename(config, "optimize")
    _write_json(outdir / f"{base}.json", meta, {
        "which": which,
        "target": result.target,
        "theta": result.theta,
        "achieved": result.achieved,
        "residual": result.residual,
        "hit_extreme": result.hit_extreme,
    })


_TASK_RUNNERS = {
    "spectrum": run_spectrum,
    "asymmetry": run_asymmetry,
    "snr": run_snr,
    "fmap": run_fmap,
    "chain": run_chain,
    "oracle": run_oracle,
    "optimize": run_optimize,
}


def _load_figure_asset(name: str) -> dict:
    with importlib.resources.files("sasc.configs").joinpath(f"{name}.json").open() as fh:
        return json.load(fh)


def _gnuplot_stub(path: Path, csv_names: list[str]) -> None:
    lines = ["set datafile separator ','", "set key outside"]
    for name in csv_names:
        lines.append(f"# plot '{name}' using 1:2 with lines")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def run_figures(which: str, outdir: Path, fmt: str) -> None:
    asset = _load_figure_asset(which)
    outdir.mkdir(parents=True, exist_ok=True)
    written: list[str] = []
    if which == "fig2":
        base_system = asset["system"]
        for panel, kappa_a in zip(("a", "b", "c"), asset["kappa_a_values"]):
            config = {"system": copy.deepcopy(base_system)}
            config["system"]["modes"][0]["kappa"] = kappa_a
            config["grid"] = asset["grid"]
            config["task"] = {"kind": "spectrum"}
            config["output"] = {"basename": f"fig2_{panel}"}
            validate_config(config)
            run_spectrum(config, outdir, fmt)
            written.append(f"fig2_{panel}.csv")
        config = {"system": copy.deepcopy(base_system)}
        config["system"]["modes"][0]["kappa"] = asset["phase_panel"]["kappa_a"]
        config["task"] = {"kind": "asymmetry", "omega": asset["phase_panel"]["omega"]}
        config["grid"] = {"min": 0.0, "max": 2.0 * np.pi, "points": 721}
        config["output"] = {"basename": "fig2_d"}
        validate_config(config)
        run_asymmetry(config, outdir, fmt)
        written.append("fig2_d.csv")
    elif which == "fig3":
        model = build_system(asset["system"])
        require_stable(build_drift_matrix(model))
        thetas = np.linspace(0.0, 2.0 * np.pi, asset.get("theta_points", 49))
        for tag, omega in (("low", 0.0), ("resonance", spectra.resonance_probe_frequency())):
            rows = []
            for tm in thetas:
                for tc in thetas:
                    probe = metrics._replace_phase(
                        metrics._replace_phase(model, 0, tm), 1, tc
                    )
                    tr = spectra.transfer_matrix(probe, omega, check=False)
                    r_mb, r_bc = spectra.asymmetries_three(tr)
                    rows.append([tm, tc, r_mb, r_bc])
            meta = _metadata(asset, {"omega": omega})
            name = f"fig3_{tag}.csv"
            _write_csv(outdir / name, meta, ["theta_m", "theta_c", "R_mb", "R_bc"], rows)
            written.append(name)
    elif which == "fig4":
        config = {
            "system": asset["system"],
            "task": asset["fmap_task"],
            "output": {"basename": "fig4_map"},
        }
        validate_config(config)
        run_fmap(config, outdir, fmt)
        written.append("fig4_map.csv")
        for tag, system in (("cs", asset["system"]), ("ics", asset["fmap_task"]["ics"])):
            config = {
                "system": system,
                "task": {"kind": "snr"},
                "grid": asset["snr_grid"],
                "output": {"basename": f"fig4_snr_{tag}"},
            }
            validate_config(config)
            run_snr(config, outdir, fmt)
            written.append(f"fig4_snr_{tag}.csv")
    else:
        raise ConfigError(f"unknown figure {which!r}")
    _gnuplot_stub(outdir / f"{which}.gp", written)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sasc",
        description="Frequency-domain simulator for dispersively coupled mode chains",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _TASK_RUNNERS:
        p = sub.add_parser(name, help=f"run the {name} pipeline")
        p.add_argument("--config", required=True, help="JSON scenario config")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="dotted-path config override")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--threads", type=int, default=1,
                       help="reserved; evaluation is deterministic either way")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
    p = sub.add_parser("figures", help="regenerate built-in figure data")
    p.add_argument("which", choices=("fig2", "fig3", "fig4"))
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    return parser


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("SASC_LOG", "INFO").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        if args.command == "figures":
            run_figures(args.which, outdir, args.format)
        else:
            config = load_config(args.config, args.set)
            if getattr(args, "seed", None) is not None:
                config["seed"] = args.seed
            task_kind = config.get("task", {}).get("kind", args.command)
            if task_kind != args.command:
                raise ConfigError(
                    f"config task kind {task_kind!r} does not match subcommand {args.command!r}"
                )
            _TASK_RUNNERS[args.command](config, outdir, args.format)
        return EXIT_OK
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except InstabilityError as exc:
        log.error("instability: %s", exc)
        return EXIT_INSTABILITY
    except (SingularMatrixError, NonConvergenceError, IntegrationQualityError,
            UndefinedAsymmetryError, FloatingPointError, ValueError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    except OracleComparisonError as exc:
        log.error("oracle comparison failed: %s", exc)
        return EXIT_ORACLE


if __name__ == "__main__":
    sys.exit(main())
