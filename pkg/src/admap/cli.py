"""Batch front-end: config parsing, subcommands, artifact and manifest I/O.

Configuration is a plain key-value text file with dotted section keys::

    # landscape
    landscape.family = sk
    landscape.n = 16
    landscape.seed = 7
    ad.alpha = 1.35

Values parse as JSON when possible (numbers, lists, booleans), otherwise
as bare strings.  ``--set key=value`` overrides single entries, and a
manifest written by a previous run can be replayed by passing it as the
config.  Exit codes: 0 success, 1 configuration error, 2 runtime error.
All diagnostics go to stderr; nothing is written on configuration errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .ad import ADParams, ad_interpolate, phase_sweep
from .adelm import AdelmConfig, adelm_run
from .barriers import ADBarrierSpec, BarrierMatrix, barrier_matrix
from .dg import build_dg, render_dg
from .errors import ConfigError, LandscapeError, RejectedInput
from .gwl import GwlConfig, gwl_run
from .landscapes import (DiscretizedModel, DoubleWell1D, GaussianMixture,
                         QuadraticBowl, couplings_csv, ising_model, pixel_palette,
                         sk_model)
from .minimize import local_minimize
from .networks import compose, load_network, load_relu_network
from .oracle import oracle_report

SUBCOMMANDS = ("map", "gwl-map", "sweep", "barriers", "interpolate", "dg", "oracle")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{message}\n{self.format_usage()}")


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_config_text(text: str) -> dict:
    config: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value, got {raw!r}")
        key, value = line.split("=", 1)
        _assign(config, key.strip(), _parse_value(value.strip()))
    return config


def _assign(config: dict, dotted: str, value) -> None:
    parts = dotted.split(".")
    node = config
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"config key {dotted!r} clashes with a scalar entry")
    node[parts[-1]] = value


def load_config(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {path} does not exist")
    text = p.read_text()
    if p.suffix == ".json":
        data = json.loads(text)
        if "config" in data:  # manifest replay
            return data["config"]
        return data
    return parse_config_text(text)


def _section(config: dict, name: str) -> dict:
    value = config.get(name, {})
    if not isinstance(value, dict):
        raise ConfigError(f"config section {name!r} must hold key = value entries")
    return dict(value)


# ---------------------------------------------------------------------------
# Model construction
# ---------------------------------------------------------------------------


def build_model(spec: dict):
    spec = dict(spec)
    family = spec.pop("family", None)
    discretize = spec.pop("discretize", None)
    if family is None:
        raise ConfigError("landscape.family is required")
    try:
        if family == "sk":
            model = sk_model(int(spec.pop("n")), int(spec.pop("seed")),
                             float(spec.pop("temperature", 1.0)))
        elif family == "ising":
            model = ising_model(int(spec.pop("width")), int(spec.pop("height")),
                                float(spec.pop("temperature", 1.0)),
                                float(spec.pop("field", 0.0)))
        elif family == "double-well":
            if "noise_seed" in spec:
                model = DoubleWell1D.seeded(int(spec.pop("noise_seed")),
                                            a=float(spec.pop("a", 2.0)),
                                            quartic_scale=float(spec.pop("quartic_scale", 8.0)),
                                            tilt=float(spec.pop("tilt", 0.0)))
            else:
                model = DoubleWell1D(a=float(spec.pop("a", 2.0)),
                                     quartic_scale=float(spec.pop("quartic_scale", 8.0)),
                                     tilt=float(spec.pop("tilt", 0.0)),
                                     noise_amp=float(spec.pop("noise_amp", 0.0)),
                                     noise_freq=float(spec.pop("noise_freq", 0.0)),
                                     noise_phase=float(spec.pop("noise_phase", 0.0)))
        elif family == "gaussian-mixture":
            model = GaussianMixture(spec.pop("means"), spec.pop("covs", None),
                                    spec.pop("weights", None))
        elif family == "quadratic-bowl":
            model = QuadraticBowl(int(spec.pop("dim", 1)), spec.pop("center", None),
                                  float(spec.pop("sigma2", 1.0)))
        elif family == "relu-file":
            model = load_relu_network(_existing(spec.pop("descriptor")))
        elif family == "composed-files":
            gen = load_network(_existing(spec.pop("generator")))
            desc = load_relu_network(_existing(spec.pop("descriptor")))
            model = compose(gen, desc)
        else:
            raise ConfigError(f"unknown landscape family {family!r}")
    except KeyError as exc:
        raise ConfigError(f"landscape family {family!r} is missing key {exc}") from exc
    if spec:
        raise ConfigError(f"unknown landscape keys: {sorted(spec)}")
    if discretize:
        opts = discretize if isinstance(discretize, dict) else {}
        palette = pixel_palette(int(opts.get("levels", 8)), int(opts.get("lo", 0)),
                                int(opts.get("hi", 255)))
        model = DiscretizedModel(model, palette)
    return model


def _existing(path) -> str:
    if not Path(path).exists():
        raise ConfigError(f"referenced file {path} does not exist")
    return str(path)


def build_ad_params(section: dict) -> ADParams:
    try:
        return ADParams(
            temperature=float(section.get("temperature", 1.0)),
            alpha=float(section.get("alpha", 1.0)),
            delta=float(section.get("delta", 0.0)),
            improvement_limit=int(section.get("improvement_limit", 50)),
            max_iters=(int(section["max_iters"]) if "max_iters" in section else None),
            kernel=section.get("kernel", "gibbs"),
            step_size=float(section.get("step_size", 0.01)),
        )
    except (RejectedInput, ValueError) as exc:
        raise ConfigError(f"bad ad section: {exc}") from exc


def _resolve_state(model, section: dict, key: str):
    """A state given inline, optionally descended, or mirrored from another."""
    value = section.get(key)
    if value == "mirror":
        other = _resolve_state(model, section, "start")
        return -other
    if value is None:
        raise ConfigError(f"missing state {key!r} in config")
    state = np.asarray(value)
    if model.kind == "discrete":
        state = state.astype(model.palette.dtype)
    else:
        state = state.astype(float)
    if section.get(f"{key}_descend", False):
        state = local_minimize(model, state)
    return state


# ---------------------------------------------------------------------------
# Subcommand implementations (config validated first, artifacts second)
# ---------------------------------------------------------------------------


def _effective(config, seed, workers, out):
    eff = json.loads(json.dumps(config, sort_keys=True))
    eff["seed"] = seed
    eff["workers"] = workers
    eff["out"] = str(out)
    return eff


def _write(out: Path, name: str, text: str, artifacts: dict) -> None:
    path = out / name
    path.write_text(text)
    digest = hashlib.sha256(text.encode()).hexdigest()
    artifacts[name] = {"sha256": digest, "bytes": len(text.encode())}


def _finish(out: Path, command: str, effective: dict, artifacts: dict,
            started: float) -> None:
    manifest = {
        "command": command,
        "config": effective,
        "artifacts": artifacts,
        "versions": {"admap": __version__, "numpy": np.__version__,
                     "python": sys.version.split()[0]},
        "wall_time_s": round(time.monotonic() - started, 3),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2))


def _cmd_map(model, config, seed, workers, out, started, effective):
    ad = build_ad_params(_section(config, "ad"))
    sec = _section(config, "adelm")
    box = None
    if "box_lo" in sec or "box_hi" in sec:
        box = (float(sec.get("box_lo", -1.0)), float(sec.get("box_hi", 1.0)))
    cfg = AdelmConfig(
        params=ad,
        burn_in=int(sec.get("burn_in", 0)),
        testing=int(sec.get("testing", 100)),
        proposal=sec.get("proposal", "uniform-random"),
        proposal_box=box,
        gwl_stride=int(sec.get("gwl_stride", 10)),
        consolidation_trials=int(sec.get("consolidation_trials", 3)),
        basin_ceiling=(int(sec["basin_ceiling"]) if "basin_ceiling" in sec else None),
        seed=seed,
        workers=workers,
    )
    gwl_chain = None
    if cfg.proposal == "gwl-chain":
        gsec = _section(config, "gwl")
        try:
            gwl_cfg = GwlConfig(e_lo=float(gsec["e_lo"]), e_hi=float(gsec["e_hi"]),
                                n_bins=int(gsec.get("n_bins", 50)),
                                gamma=float(gsec.get("gamma", 1.0)))
        except KeyError as exc:
            raise ConfigError(f"gwl-chain proposals need a gwl section with {exc}") from exc
        from .gwl import GwlChain
        gwl_chain = GwlChain(model, gwl_cfg, seed=seed)
    catalog = adelm_run(model, cfg, gwl_chain=gwl_chain)
    artifacts = {}
    _write(out, "catalog.jsonl", catalog.to_jsonl(), artifacts)
    _write(out, "summary.json", json.dumps(catalog.summary(), sort_keys=True, indent=2),
           artifacts)
    if hasattr(model, "couplings"):
        _write(out, "couplings.csv", couplings_csv(model), artifacts)
    _finish(out, "map", effective, artifacts, started)
    return 0


def _cmd_gwl_map(model, config, seed, workers, out, started, effective):
    sec = _section(config, "gwl")
    try:
        cfg = GwlConfig(
            e_lo=float(sec["e_lo"]), e_hi=float(sec["e_hi"]),
            n_bins=int(sec.get("n_bins", 50)),
            gamma=float(sec.get("gamma", 1.0)),
            iterations=int(sec.get("iterations", 100_000)),
            flatness_stride=int(sec.get("flatness_stride", 10_000)),
        )
    except KeyError as exc:
        raise ConfigError(f"gwl section is missing {exc}") from exc
    result = gwl_run(model, cfg, seed=seed)
    artifacts = {}
    _write(out, "gwl_minima.csv", result.minima_csv(), artifacts)
    transitions = "".join(
        json.dumps({"a": a.tolist(), "b": b.tolist()}) + "\n"
        for a, b in result.transitions
    )
    _write(out, "gwl_transitions.jsonl", transitions, artifacts)
    summary = {
        "steps": result.steps,
        "n_minima": len(result.minima),
        "n_minima_in_spectrum": len(result.minima_sorted(within_spectrum=True)),
        "n_transition_pairs": len(result.transitions),
        "flatness": result.flatness,
    }
    _write(out, "gwl_summary.json", json.dumps(summary, sort_keys=True, indent=2),
           artifacts)
    _finish(out, "gwl-map", effective, artifacts, started)
    return 0


def _cmd_sweep(model, config, seed, workers, out, started, effective):
    ad = build_ad_params(_section(config, "ad"))
    sec = _section(config, "sweep")
    start = _resolve_state(model, sec, "start")
    target = _resolve_state(model, sec, "target")
    t_grid = [float(t) for t in sec.get("t_grid", [ad.temperature])]
    diagram = phase_sweep(
        model, start, target, t_grid,
        alpha_init=float(sec.get("alpha_init", max(ad.alpha, 1e-6) * 4)),
        params=ad,
        decrement=float(sec.get("decrement", 0.03)),
        trials=int(sec.get("trials", 20)),
        seed=seed,
    )
    artifacts = {}
    _write(out, "phase_diagram.csv", diagram.to_csv(), artifacts)
    _finish(out, "sweep", effective, artifacts, started)
    return 0


def _cmd_interpolate(model, config, seed, workers, out, started, effective):
    ad = build_ad_params(_section(config, "ad"))
    sec = _section(config, "interpolate")
    start = _resolve_state(model, sec, "start")
    target = _resolve_state(model, sec, "target")
    result = ad_interpolate(model, start, target, ad,
                            retries=int(sec.get("retries", 20)), seed=seed)
    artifacts = {}
    if result.success:
        _write(out, "path.jsonl", result.path_jsonl(), artifacts)
    summary = {
        "success": result.success,
        "iterations": result.iterations,
        "best_distance": result.best_distance,
        "barrier": result.barrier,
    }
    _write(out, "interpolate_summary.json",
           json.dumps(summary, sort_keys=True, indent=2), artifacts)
    _finish(out, "interpolate", effective, artifacts, started)
    return 0


def _load_representatives(model, config):
    sec = _section(config, "barriers")
    if "catalog" in sec:
        data = json.loads(Path(_existing(sec["catalog"])).read_text())
        basins = data["basins"]
        reps, counts = [], []
        for label in sorted(basins, key=int):
            reps.append(np.asarray(basins[label]["state"]))
            counts.append(basins[label]["count"])
        return reps, counts, sec
    if "representatives" in sec:
        return [np.asarray(r) for r in sec["representatives"]], None, sec
    raise ConfigError("barriers needs either 'catalog' or 'representatives'")


def _cmd_barriers(model, config, seed, workers, out, started, effective):
    reps, _, sec = _load_representatives(model, config)
    if model.kind == "discrete":
        reps = [r.astype(model.palette.dtype) for r in reps]
    methods = sec.get("methods", ["greedy-discrete"] if model.kind == "discrete"
                      else ["linear1d"])
    ad_spec = None
    if "ad" in methods:
        ad = build_ad_params(_section(config, "ad"))
        ad_spec = ADBarrierSpec(
            params=ad,
            retries=int(sec.get("ad_retries", 20)),
            sweep_alpha_init=(float(sec["ad_sweep_alpha_init"])
                              if "ad_sweep_alpha_init" in sec else None),
        )
    matrix = barrier_matrix(model, reps, methods, ad=ad_spec, seed=seed,
                            workers=workers)
    artifacts = {}
    _write(out, "barrier_matrix.csv", matrix.to_csv(), artifacts)
    _finish(out, "barriers", effective, artifacts, started)
    return 0


def _matrix_from_csv(path: str) -> BarrierMatrix:
    rows = Path(path).read_text().strip().splitlines()
    if not rows or rows[0] != "i,j,barrier,method":
        raise ConfigError(f"{path} is not a barrier matrix CSV")
    entries = []
    size = 0
    for line in rows[1:]:
        i, j, barrier, method = line.split(",")
        entries.append((int(i), int(j), float(barrier), method))
        size = max(size, int(i) + 1, int(j) + 1)
    values = np.full((size, size), np.nan)
    methods = [[None] * size for _ in range(size)]
    np.fill_diagonal(values, 0.0)
    for i, j, barrier, method in entries:
        values[i, j] = values[j, i] = barrier
        methods[i][j] = methods[j][i] = method
    return BarrierMatrix([None] * size, values, methods)


def _cmd_dg(model, config, seed, workers, out, started, effective):
    sec = _section(config, "dg")
    if "matrix" not in sec:
        raise ConfigError("dg needs dg.matrix (a barrier matrix CSV)")
    matrix = _matrix_from_csv(_existing(sec["matrix"]))
    counts = None
    if "catalog" in sec:
        data = json.loads(Path(_existing(sec["catalog"])).read_text())
        basins = data["basins"]
        labels = sorted(basins, key=int)
        counts = [basins[label]["count"] for label in labels]
        for k, label in enumerate(labels):
            matrix.values[k, k] = basins[label]["energy"]
    tree = build_dg(matrix, counts=counts)
    dot, svg = render_dg(tree)
    artifacts = {}
    _write(out, "dg.dot", dot, artifacts)
    _write(out, "dg.svg", svg, artifacts)
    _write(out, "dg.json", tree.to_json() + "\n", artifacts)
    _finish(out, "dg", effective, artifacts, started)
    return 0


def _cmd_oracle(model, config, seed, workers, out, started, effective):
    report = oracle_report(model)
    artifacts = {}
    _write(out, "oracle_minima.csv", report.minima_csv(), artifacts)
    _write(out, "oracle_barriers.csv", report.barriers_csv(), artifacts)
    _finish(out, "oracle", effective, artifacts, started)
    return 0


_COMMANDS = {
    "map": _cmd_map,
    "gwl-map": _cmd_gwl_map,
    "sweep": _cmd_sweep,
    "barriers": _cmd_barriers,
    "interpolate": _cmd_interpolate,
    "dg": _cmd_dg,
    "oracle": _cmd_oracle,
}


def build_parser() -> _Parser:
    parser = _Parser(prog="admap", description=__doc__)
    parser.add_argument("command", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="run configuration file")
    parser.add_argument("--seed", type=int, default=None, help="master seed override")
    parser.add_argument("--workers", type=int, default=None, help="worker pool size")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config entry (repeatable)")
    return parser


def run(argv) -> int:
    started = time.monotonic()
    try:
        args = build_parser().parse_args(argv)
        config = load_config(args.config)
        for override in args.set:
            if "=" not in override:
                raise ConfigError(f"--set needs KEY=VALUE, got {override!r}")
            key, value = override.split("=", 1)
            _assign(config, key.strip(), _parse_value(value.strip()))
        seed = args.seed if args.seed is not None else int(config.get("seed", 0))
        workers = args.workers if args.workers is not None else int(config.get("workers", 1))
        out_name = args.out if args.out is not None else config.get("out", "admap-out")
        # the dg subcommand works straight off a matrix CSV, no landscape needed
        model = build_model(_section(config, "landscape")) if args.command != "dg" else None
        command = _COMMANDS[args.command]
        effective = _effective(config, seed, workers, out_name)
    except ConfigError as exc:
        print(f"admap: configuration error: {exc}", file=sys.stderr)
        return 1
    except (json.JSONDecodeError, OSError) as exc:
        print(f"admap: configuration error: {exc}", file=sys.stderr)
        return 1
    try:
        out = Path(out_name)
        out.mkdir(parents=True, exist_ok=True)
        return command(model, config, seed, workers, out, started, effective)
    except ConfigError as exc:
        print(f"admap: configuration error: {exc}", file=sys.stderr)
        return 1
    except LandscapeError as exc:
        print(f"admap: runtime error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # surfaced with a stable exit code for scripting
        print(f"admap: runtime error: {exc!r}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))
