"""Command-line front end: ``qcollusion <command> [options]``.

Settings resolve in three layers: built-in defaults, then a flat
``key=value`` file given with ``--config``, then command-line flags. Every
command writes its outputs and a ``manifest.json`` into ``--out``; the
manifest holds the resolved settings and the SHA-256 of every output, and
``qcollusion --from-manifest PATH`` reruns it and checks the digests.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import shutil
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .clustering import basin_csv, run_pipeline
from .equilibrium import equilibria, equilibria_json, frequency_csv, perturb_and_count, synthesize_payoffs
from .game import REGIONS
from .ode import integrate
from .simulator import (
    PROFILES,
    ModelParams,
    SimConfig,
    TauTable,
    make_grid,
    read_terminal_csv,
    run,
    run_stream,
    sample_initial_q,
    sweep,
    transition_stats,
)
from . import svg

SEED_ENV = "QCOLLUSION_SEED"
MANIFEST = "manifest.json"

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_MISMATCH = 0, 1, 2, 3

log = logging.getLogger("qcollusion")


class ConfigError(ValueError):
    pass


# -- settings ------------------------------------------------------------


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _path(text: str) -> str:
    return str(Path(text).expanduser().resolve())


@dataclass(frozen=True)
class Setting:
    name: str
    parse: Callable[[str], Any]
    default: Any
    help: str

    @property
    def flag(self) -> str:
        return "--" + self.name.replace("_", "-")


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        seed = int(raw)
    except ValueError:
        raise ConfigError(f"{SEED_ENV}={raw!r} is not an integer") from None
    if seed < 0:
        raise ConfigError(f"{SEED_ENV} must be non-negative")
    return seed


def _model_settings() -> list[Setting]:
    return [
        Setting("gamma", float, 0.95, "discount factor"),
        Setting("alpha", float, 0.1, "learning rate"),
    ]


def _seed_setting() -> Setting:
    return Setting("seed", int, None, f"master seed (default: ${SEED_ENV} or 0)")


SETTINGS: dict[str, list[Setting]] = {
    "simulate": [
        Setting("g", float, 1.7, "cooperation gain"),
        Setting("eps_a", float, 0.1, "exploration rate of A"),
        Setting("eps_b", float, 0.1, "exploration rate of B"),
        *_model_settings(),
        Setting("T", int, 20_000, "discrete steps"),
        _seed_setting(),
        Setting("init", _floats, None, "initial Q_A^C,Q_A^D,Q_B^C,Q_B^D (default: random draw from the seed)"),
        Setting("ode", _bool, False, "integrate the continuous-time flow instead of sampling"),
        Setting("t_end", float, 1e5, "ODE horizon in step units"),
        Setting("step", float, None, "ODE step (default: 0.1/alpha)"),
    ],
    "sweep": [
        Setting("profile", str, "desk", f"grid and run-length preset: {', '.join(PROFILES)}"),
        Setting("g_values", _floats, None, "comma list of g (default: from the profile)"),
        Setting("eps_values", _floats, None, "comma list of exploration rates (default: from the profile)"),
        Setting("symmetric", _bool, False, "only sweep eps_a == eps_b"),
        Setting("T", int, None, "steps per run (default: from the profile)"),
        Setting("W", int, None, "measurement window (default: from the profile)"),
        Setting("k", int, None, "runs per triplet (default: from the profile)"),
        *_model_settings(),
        _seed_setting(),
        Setting("jobs", int, 1, "worker processes; 0 uses every core (output does not depend on it)"),
    ],
    "detect": [
        Setting("tau", _path, None, "occupancy CSV from sweep"),
        Setting("terminal", _path, None, "terminal-state CSV from sweep"),
        *_model_settings(),
        Setting("restarts", int, 10, "K-means restarts"),
        _seed_setting(),
    ],
    "transitions": [
        Setting("g", float, 1.7, "cooperation gain"),
        Setting("eps_a", float, 0.1, "exploration rate of A"),
        Setting("eps_b", float, 0.1, "exploration rate of B"),
        *_model_settings(),
        Setting("T", int, 20_000, "steps per run"),
        Setting("W", int, 1_000, "measurement window"),
        Setting("k", int, 20, "runs"),
        _seed_setting(),
    ],
    "equilibria": [
        Setting("tau", _path, None, "occupancy CSV from a full (non-symmetric) sweep"),
        Setting("replicas", int, 100, "perturbed copies of the table"),
        Setting("eta", float, 0.005, "occupancy moved per perturbed row"),
        _seed_setting(),
    ],
    "plot": [
        Setting("input", _path, None, "CSV to plot"),
        Setting("kind", str, "heatmap", "heatmap or curve"),
        Setting("x", str, "eps_a", "column on the horizontal axis"),
        Setting("y", str, "eps_b", "heatmap: vertical-axis column; curve: plotted column"),
        Setting("value", str, "tau_cc", "heatmap cell value column"),
        Setting("group", str, None, "curve: one series per value of this column"),
        Setting("where", str, None, "row filter, e.g. 'g=1.7,eps_b=0.2'"),
        Setting("title", str, "", "figure title"),
        Setting("name", str, "plot.svg", "output file name"),
    ],
}

REQUIRED = {"detect": ("tau", "terminal"), "equilibria": ("tau",), "plot": ("input",)}


def read_config_file(path: str | Path) -> dict[str, str]:
    """Parse a flat ``key=value`` file; ``#`` starts a comment, dashes in keys equal underscores."""
    out: dict[str, str] = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def resolve(command: str, file_values: dict[str, str], flag_values: dict[str, Any]) -> dict[str, Any]:
    specs = {s.name: s for s in SETTINGS[command]}
    unknown = sorted((set(file_values) | set(flag_values)) - set(specs))
    if unknown:
        raise ConfigError(f"unknown setting(s) for {command}: {', '.join(unknown)}")
    cfg = {name: s.default for name, s in specs.items()}
    for key, raw in file_values.items():
        try:
            cfg[key] = specs[key].parse(raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from None
    for key, value in flag_values.items():
        if value is not None:
            cfg[key] = value
    if "seed" in cfg and cfg["seed"] is None:
        cfg["seed"] = _default_seed()
    missing = [k for k in REQUIRED.get(command, ()) if cfg.get(k) is None]
    if missing:
        raise ConfigError(f"{command} needs {', '.join('--' + m.replace('_', '-') for m in missing)}")
    return cfg


# -- output handling -----------------------------------------------------


class Outputs:
    """Collects output files and moves them into place only once all exist."""

    def __init__(self) -> None:
        self.files: dict[str, bytes] = {}

    def add(self, name: str, content: str | bytes) -> None:
        if name in self.files or name == MANIFEST:
            raise ValueError(f"duplicate output name {name}")
        self.files[name] = content.encode() if isinstance(content, str) else content

    def digests(self) -> dict[str, str]:
        return {n: hashlib.sha256(b).hexdigest() for n, b in sorted(self.files.items())}

    def commit(self, out_dir: Path, manifest: dict) -> None:
        out_dir.mkdir(parents=True, exist_ok=True)
        staging = Path(tempfile.mkdtemp(prefix=".qcollusion-", dir=out_dir))
        placed: list[Path] = []
        try:
            for name, data in self.files.items():
                (staging / name).write_bytes(data)
            (staging / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
            for name in [*self.files, MANIFEST]:
                target = out_dir / name
                os.replace(staging / name, target)
                placed.append(target)
        except BaseException:
            for p in placed:
                p.unlink(missing_ok=True)
            raise
        finally:
            shutil.rmtree(staging, ignore_errors=True)


# -- commands ------------------------------------------------------------


def _params(cfg: dict) -> ModelParams:
    return ModelParams(g=cfg["g"], gamma=cfg["gamma"], alpha=cfg["alpha"], eps_a=cfg["eps_a"], eps_b=cfg["eps_b"])


def _region_names(q: np.ndarray) -> list[str]:
    # ties prefer D, as in the simulator
    code = 2 * (q[:, 0] <= q[:, 1]) + (q[:, 2] <= q[:, 3])
    names = [r.name for r in REGIONS]
    return [names[c] for c in code]


def cmd_simulate(cfg: dict, out: Outputs) -> None:
    params = _params(cfg)
    if cfg["init"] is not None:
        if len(cfg["init"]) != 4:
            raise ConfigError("init needs exactly 4 values")
        init = np.array(cfg["init"], dtype=float)
    else:
        init = sample_initial_q(params, run_stream(cfg["seed"], params, 0))
    if cfg["ode"]:
        traj = integrate(init, params, t_end=cfg["t_end"], step=cfg["step"])
        out.add("trajectory.csv", traj.to_csv())
        log.info("ode stopped: %s at t=%g", traj.reason, traj.t[-1])
        return
    if cfg["T"] < 1:
        raise ConfigError("T must be positive")
    sim = SimConfig(T=cfg["T"], W=min(1000, cfg["T"]), k=1, seed=cfg["seed"], trace="full")
    rec = run(params, init, sim, run_stream(cfg["seed"], params, 0))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "qac", "qad", "qbc", "qbd", "region"])
    for t, (q, name) in enumerate(zip(rec.trace, _region_names(rec.trace)), 1):
        w.writerow([t, *(repr(float(v)) for v in q), name])
    out.add("trajectory.csv", buf.getvalue())


def cmd_sweep(cfg: dict, out: Outputs) -> None:
    if cfg["profile"] not in PROFILES:
        raise ConfigError(f"unknown profile {cfg['profile']!r}; choose from {', '.join(PROFILES)}")
    prof = PROFILES[cfg["profile"]]
    gs = cfg["g_values"] or prof.g_values()
    eps = cfg["eps_values"] or prof.eps_values()
    sim = SimConfig(T=cfg["T"] or prof.T, W=cfg["W"] or prof.W, k=cfg["k"] or prof.k, seed=cfg["seed"])
    grid = make_grid(gs, eps, symmetric=cfg["symmetric"])
    log.info("sweeping %d triplets with %d runs each", len(grid), sim.k)
    table = sweep(grid, sim, gamma=cfg["gamma"], alpha=cfg["alpha"], jobs=cfg["jobs"] or None)
    out.add("tau.csv", table.to_csv())
    out.add("terminal.csv", table.terminal_csv())


def cmd_detect(cfg: dict, out: Outputs) -> None:
    table = TauTable.read_csv(cfg["tau"])
    terminal = read_terminal_csv(cfg["terminal"])
    triplets, tau_cc, qs = [], [], []
    for row in table:
        if row.key not in terminal:
            raise ConfigError(f"no terminal states for triplet {row.key}")
        triplets.append((row.g, row.eps_a, row.eps_b))
        tau_cc.append(row.tau[0])
        qs.append(terminal[row.key])
    est = run_pipeline(triplets, tau_cc, qs, gamma=cfg["gamma"], alpha=cfg["alpha"],
                       restarts=cfg["restarts"], seed=cfg["seed"])
    out.add("basin.csv", basin_csv(est))


def cmd_transitions(cfg: dict, out: Outputs) -> None:
    sim = SimConfig(T=cfg["T"], W=cfg["W"], k=cfg["k"], seed=cfg["seed"])
    tm = transition_stats(_params(cfg), sim)
    out.add("transitions.json", json.dumps(tm.to_dict(), indent=2, sort_keys=True) + "\n")


def cmd_equilibria(cfg: dict, out: Outputs) -> None:
    table = TauTable.read_csv(cfg["tau"])
    gs = table.g_values()
    axis = np.array(table.eps_values())
    sets = [equilibria(synthesize_payoffs(table, g, axis)) for g in gs]
    rows = perturb_and_count(table, cfg["replicas"], cfg["eta"], cfg["seed"])
    out.add("equilibria.json", equilibria_json(sets))
    out.add("frequency.csv", frequency_csv(rows))
    freq = np.array([r.freq for r in rows]).reshape(len(gs), len(axis) - 1).T
    out.add("frequency.svg", svg.heatmap(freq, list(axis[:-1]), gs, title="symmetric equilibrium frequency",
                                         x_label="exploration bin start", y_label="g", vmin=0.0, vmax=1.0))


def _parse_where(text: str | None) -> list[tuple[str, float]]:
    if not text:
        return []
    out = []
    for part in text.split(","):
        if "=" not in part:
            raise ConfigError(f"filter term {part!r} is not column=value")
        col, val = (s.strip() for s in part.split("=", 1))
        try:
            out.append((col, float(val)))
        except ValueError:
            raise ConfigError(f"filter value {val!r} is not a number") from None
    return out


def load_columns(path: str, where: list[tuple[str, float]]) -> dict[str, np.ndarray]:
    """Numeric columns of a CSV after filtering; non-numeric columns are dropped."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
        fields = reader.fieldnames or []
    for col, _ in where:
        if col not in fields:
            raise ConfigError(f"filter column {col!r} not in {fields}")
    keep = [r for r in rows if all(abs(float(r[c]) - v) <= 1e-9 for c, v in where)]
    cols: dict[str, np.ndarray] = {}
    for f in fields:
        try:
            cols[f] = np.array([float(r[f]) for r in keep])
        except ValueError:
            continue
    return cols


def _column(cols: dict[str, np.ndarray], name: str) -> np.ndarray:
    if name not in cols:
        raise ConfigError(f"column {name!r} missing or not numeric; have {sorted(cols)}")
    return cols[name]


def cmd_plot(cfg: dict, out: Outputs) -> None:
    cols = load_columns(cfg["input"], _parse_where(cfg["where"]))
    xs = _column(cols, cfg["x"])
    if len(xs) == 0:
        raise ConfigError("no rows left after filtering")
    if cfg["kind"] == "heatmap":
        ys, vs = _column(cols, cfg["y"]), _column(cols, cfg["value"])
        xu, yu = np.unique(xs), np.unique(ys)
        grid = np.full((len(xu), len(yu)), np.nan)
        for x, y, v in zip(xs, ys, vs):
            i, j = np.searchsorted(xu, x), np.searchsorted(yu, y)
            if not np.isnan(grid[i, j]):
                raise ConfigError(f"several rows at ({x}, {y}); narrow them with --where")
            grid[i, j] = v
        body = svg.heatmap(grid, list(xu), list(yu), title=cfg["title"], x_label=cfg["x"], y_label=cfg["y"])
    elif cfg["kind"] == "curve":
        ys = _column(cols, cfg["y"])
        if cfg["group"] is None:
            order = np.argsort(xs, kind="stable")
            series = [(cfg["y"], xs[order], ys[order])]
        else:
            gv = _column(cols, cfg["group"])
            series = []
            for val in np.unique(gv):
                m = gv == val
                order = np.argsort(xs[m], kind="stable")
                series.append((f"{cfg['group']}={val:.4g}", xs[m][order], ys[m][order]))
        body = svg.curve(series, title=cfg["title"], x_label=cfg["x"], y_label=cfg["y"])
    else:
        raise ConfigError(f"kind must be heatmap or curve, got {cfg['kind']!r}")
    if "/" in cfg["name"] or not cfg["name"]:
        raise ConfigError("name must be a plain file name")
    out.add(cfg["name"], body)


COMMANDS: dict[str, Callable[[dict, Outputs], None]] = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "detect": cmd_detect,
    "transitions": cmd_transitions,
    "equilibria": cmd_equilibria,
    "plot": cmd_plot,
}

SUMMARIES = {
    "simulate": "one trajectory, discrete or continuous-time",
    "sweep": "occupancy fractions over a parameter grid",
    "detect": "coupling detection and basin shares from a sweep",
    "transitions": "region-to-region transition frequencies",
    "equilibria": "Nash and Pareto profiles plus perturbation frequencies",
    "plot": "SVG heatmap or curve from any CSV output",
}


# -- entry point ---------------------------------------------------------


def execute(command: str, cfg: dict, out_dir: Path) -> dict:
    """Run ``command`` with resolved settings; returns the manifest written to ``out_dir``."""
    out = Outputs()
    COMMANDS[command](cfg, out)
    manifest = {
        "command": command,
        "config": cfg,
        "seed": cfg.get("seed"),
        "version": __version__,
        "outputs": out.digests(),
    }
    out.commit(out_dir, manifest)
    return manifest


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qcollusion",
        description="Simulate and analyse two exploring Q-learners in a repeated prisoner's dilemma.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--from-manifest", metavar="PATH", help="rerun a manifest and compare output digests")
    parser.add_argument("--out", default=None, help="output directory (default: current directory)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    for name, specs in SETTINGS.items():
        p = sub.add_parser(name, help=SUMMARIES[name], description=SUMMARIES[name])
        p.add_argument("--config", metavar="FILE", help="key=value settings file; flags override it")
        p.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
        p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
        for s in specs:
            # settings without a fixed default describe their fallback in the help text
            text = s.help if s.default is None else f"{s.help} [default: {s.default!r}]"
            if s.name in REQUIRED.get(name, ()):
                text += " (required, here or in --config)"
            kw: dict[str, Any] = {"dest": s.name, "default": None, "help": text}
            if s.parse is _bool:
                kw["action"] = argparse.BooleanOptionalAction
            else:
                kw["type"] = s.parse
            p.add_argument(s.flag, **kw)
    return parser


def _replay(path: str, out_dir: Path | None) -> int:
    manifest = json.loads(Path(path).read_text())
    command = manifest.get("command")
    if command not in COMMANDS:
        raise ConfigError(f"manifest names unknown command {command!r}")
    cfg = resolve(command, {}, manifest["config"])
    target = out_dir or Path(path).resolve().parent
    fresh = execute(command, cfg, target)
    bad = sorted(n for n in set(fresh["outputs"]) | set(manifest["outputs"])
                 if fresh["outputs"].get(n) != manifest["outputs"].get(n))
    for n in bad:
        print(f"digest mismatch: {n}", file=sys.stderr)
    return EXIT_MISMATCH if bad else EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    out_dir = Path(args.out) if args.out else None
    try:
        if args.from_manifest:
            if args.command:
                parser.error("--from-manifest replaces the command")
            return _replay(args.from_manifest, out_dir)
        if not args.command:
            parser.print_help()
            return EXIT_CONFIG
        file_values = read_config_file(args.config) if args.config else {}
        flags = {s.name: getattr(args, s.name) for s in SETTINGS[args.command]}
        cfg = resolve(args.command, file_values, flags)
        execute(args.command, cfg, out_dir or Path.cwd())
    except (ValueError, KeyError, OSError) as exc:
        print(f"qcollusion: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - report and exit nonzero
        print(f"qcollusion: failed: {exc}", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
