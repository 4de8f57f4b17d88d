"""Config files, output formats and the ``run`` / ``analyze`` / ``sweep`` commands."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import math
import os
import platform
import re
import shutil
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from invnet.net_analysis import (
    DEFAULT_TAIL_FRACTION,
    BipartiteGraph,
    consecutive_distances,
    network_metrics,
    powerlaw_tail_slope,
)
from invnet.sim_runner import SimConfig, Snapshot, StepEvent, iter_run

log = logging.getLogger("invnet")

ALIASES = {
    "N": "num_investors",
    "J": "num_initiators",
    "t": "num_steps",
    "steps": "num_steps",
    "I_thr": "threshold",
    "q": "invest_proportion",
    "x0": "initial_budget",
    "a": "income",
    "gamma": "memory",
    "beta": "greediness",
    "seed": "rng_seed",
}
INT_FIELDS = {"num_investors", "num_initiators", "num_steps", "rng_seed", "snapshot_every"}
STR_FIELDS = {"return_distribution", "idle_investment"}

EVENT_COLUMNS = ["step", "initiator", "contacted", "accepted", "total_committed", "status", "return_value"]
BUDGET_COLUMNS = ["agent_id", "role", "budget", "reputation"]
METRIC_COLUMNS = ["step", "V", "k_max", "avg_degree", "l", "C_bipartite", "C_projected", "l_rand", "C_rand"]
TAILFIT_COLUMNS = ["step", "slope", "intercept", "tail_fraction", "points_used", "r_squared", "l1_to_previous"]
SWEEP_AXES = {"q": "invest_proportion", "J": "num_initiators", "N": "num_investors", "seed": "rng_seed"}


class ConfigError(ValueError):
    pass


def fmt(value) -> str:
    """Nine significant digits; absent values are empty fields."""
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return ""
    return format(value, ".9g")


# -- config ------------------------------------------------------------------


def _parse_scalar(key: str, raw: str, lineno: int):
    if key in STR_FIELDS:
        return raw
    try:
        if key in INT_FIELDS:
            try:
                return int(raw)
            except ValueError:
                as_float = float(raw)
                if not as_float.is_integer():
                    raise
                return int(as_float)
        return float(raw)
    except ValueError:
        raise ConfigError(f"line {lineno}: {key}: cannot parse {raw!r} as a number") from None


def parse_key_values(text: str, source: str = "<config>") -> dict[str, tuple[str, int]]:
    """``key = value`` lines with ``#`` comments -> {key: (raw value, line number)}."""
    out: dict[str, tuple[str, int]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{source}: line {lineno}: expected 'key = value', got {line.strip()!r}")
        key, _, value = body.partition("=")
        key, value = key.strip(), value.strip()
        if not key or not value:
            raise ConfigError(f"{source}: line {lineno}: expected 'key = value', got {line.strip()!r}")
        if key in out:
            raise ConfigError(f"{source}: line {lineno}: duplicate key {key!r}")
        out[key] = (value, lineno)
    return out


def config_from_entries(entries: dict[str, tuple[str, int]], source: str = "<config>") -> SimConfig:
    values: dict[str, object] = {}
    lines: dict[str, int] = {}
    names = set(SimConfig.field_names())
    for key, (raw, lineno) in entries.items():
        name = ALIASES.get(key, key)
        if name not in names:
            raise ConfigError(f"{source}: line {lineno}: unknown key {key!r}")
        if name in values:
            raise ConfigError(f"{source}: line {lineno}: {key!r} repeats {name!r}")
        values[name] = _parse_scalar(name, raw, lineno)
        lines[name] = lineno
    try:
        return SimConfig(**values)
    except ValueError as exc:
        # find the offending key so the message can point at its line
        for name, value in values.items():
            try:
                SimConfig(**{name: value})
            except ValueError as single:
                raise ConfigError(f"{source}: line {lines[name]}: {name}: {single}") from None
        raise ConfigError(f"{source}: {exc}") from None


def parse_config(path) -> SimConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return config_from_entries(parse_key_values(text, str(path)), str(path))


def format_config(config: SimConfig) -> str:
    lines = []
    for name, value in dataclasses.asdict(config).items():
        lines.append(f"{name} = {value!r}" if isinstance(value, float) else f"{name} = {value}")
    return "\n".join(lines) + "\n"


# -- snapshot files ----------------------------------------------------------


def budgets_filename(step: int) -> str:
    return f"budgets_{step}.csv"


def edges_filename(step: int) -> str:
    return f"edges_{step}.txt"


def write_budgets(path: Path, snap: Snapshot) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BUDGET_COLUMNS)
        for k, (x, rep) in enumerate(zip(snap.investor_budgets, snap.investor_reputation)):
            w.writerow([k, "investor", fmt(x), fmt(rep)])
        for j, (x, rep) in enumerate(zip(snap.initiator_budgets, snap.initiator_reputation)):
            w.writerow([j, "initiator", fmt(x), fmt(rep)])


def write_edges(path: Path, snap: Snapshot) -> None:
    n_inv = snap.investor_budgets.size
    n_ini = snap.initiator_budgets.size
    with open(path, "w") as fh:
        fh.write(f"# step={snap.step} investors={n_inv} initiators={n_ini}\n")
        for k, j, w in zip(snap.edge_investors, snap.edge_initiators, snap.edge_weights):
            fh.write(f"{k} {j} {fmt(w)}\n")


_HEADER = re.compile(r"#\s*step=(\d+)\s+investors=(\d+)\s+initiators=(\d+)")


@dataclass
class EdgeFile:
    step: int
    investor_count: int
    initiator_count: int
    investors: np.ndarray
    initiators: np.ndarray
    weights: np.ndarray

    def graph(self) -> BipartiteGraph:
        keep = self.weights > 0
        return BipartiteGraph(
            self.investor_count, self.initiator_count, self.investors[keep], self.initiators[keep]
        )


def read_edges(path) -> EdgeFile:
    path = Path(path)
    header = None
    ks, js, ws = [], [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.startswith("#"):
                m = _HEADER.match(line)
                if m:
                    header = tuple(int(g) for g in m.groups())
                continue
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 3:
                raise ValueError(f"{path}: line {lineno}: expected 'k j w', got {line.strip()!r}")
            ks.append(int(parts[0]))
            js.append(int(parts[1]))
            ws.append(float(parts[2]))
    if header is None:
        raise ValueError(f"{path}: missing '# step=.. investors=.. initiators=..' header")
    return EdgeFile(
        header[0], header[1], header[2],
        np.array(ks, dtype=np.intp), np.array(js, dtype=np.intp), np.array(ws, dtype=np.float64),
    )


def read_budgets(path) -> tuple[np.ndarray, np.ndarray]:
    """Returns (investor budgets, initiator budgets) in agent-id order."""
    inv: dict[int, float] = {}
    ini: dict[int, float] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != BUDGET_COLUMNS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        for row in reader:
            target = {"investor": inv, "initiator": ini}.get(row["role"])
            if target is None:
                raise ValueError(f"{path}: unknown role {row['role']!r}")
            target[int(row["agent_id"])] = float(row["budget"])
    for name, d in (("investor", inv), ("initiator", ini)):
        if sorted(d) != list(range(len(d))):
            raise ValueError(f"{path}: {name} ids are not 0..{len(d) - 1}")
    return (
        np.array([inv[i] for i in range(len(inv))]),
        np.array([ini[i] for i in range(len(ini))]),
    )


# -- run ---------------------------------------------------------------------


def build_id() -> dict[str, str]:
    from invnet import __version__

    return {
        "package": f"invnet {__version__}",
        "python": platform.python_version(),
        "numpy": np.__version__,
        "platform": platform.platform(),
    }


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    config: dict
    seed: int
    build: dict
    started: str
    finished: str = ""
    files: list[dict] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2) + "\n"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunSummary:
    """In-memory by-products of a run, used by the sweep summary."""

    final: Snapshot
    launched: int = 0
    accepted: int = 0
    committed: float = 0.0
    snapshots_written: list[int] = field(default_factory=list)


def execute_run(config: SimConfig, out_dir) -> RunSummary:
    """Run the simulation and write every output into out_dir.

    Files are staged in a hidden directory and moved into place only after
    the run completes, so a failure leaves no partial snapshot behind.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".staging-", dir=out))
    manifest = RunManifest(
        config=dataclasses.asdict(config), seed=config.rng_seed, build=build_id(), started=_now()
    )
    summary: RunSummary | None = None
    try:
        (staging / "config.txt").write_text(format_config(config))
        with open(staging / "events.csv", "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(EVENT_COLUMNS)
            tally = {"launched": 0, "accepted": 0, "committed": 0.0}

            def on_event(ev: StepEvent) -> None:
                writer.writerow([
                    ev.step, ev.initiator, ev.contacted, ev.accepted,
                    fmt(ev.total_committed), ev.status, fmt(ev.return_value),
                ])
                if ev.status == "settled":
                    tally["launched"] += 1
                    tally["accepted"] += ev.accepted
                    tally["committed"] += ev.total_committed

            written = []
            snap = None
            for snap, _ in iter_run(config, on_event=on_event):
                write_budgets(staging / budgets_filename(snap.step), snap)
                write_edges(staging / edges_filename(snap.step), snap)
                written.append(snap.step)
                log.info("step %d: %d positive-weight links", snap.step, snap.num_edges)
        assert snap is not None
        summary = RunSummary(snap, tally["launched"], tally["accepted"], tally["committed"], written)
        names = sorted(p.name for p in staging.iterdir())
        manifest.files = [
            {"name": n, "sha256": sha256_file(staging / n), "bytes": (staging / n).stat().st_size}
            for n in names
        ]
        manifest.finished = _now()
        (staging / "manifest.json").write_text(manifest.to_json())
        for n in names + ["manifest.json"]:
            os.replace(staging / n, out / n)
    finally:
        shutil.rmtree(staging, ignore_errors=True)
    return summary


def cmd_run(config_path, out_dir, seed: int | None = None) -> int:
    try:
        config = parse_config(config_path)
        if seed is not None:
            config = config.replace(rng_seed=seed)
        execute_run(config, out_dir)
    except (ConfigError, ValueError) as exc:
        print(f"run: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"run: cannot write outputs to {out_dir}: {exc}", file=sys.stderr)
        return 1
    return 0


# -- analyze -----------------------------------------------------------------


def snapshot_steps_in(directory: Path) -> list[int]:
    steps = set()
    for p in directory.iterdir():
        m = re.fullmatch(r"(?:budgets|edges)_(\d+)\.(?:csv|txt)", p.name)
        if m:
            steps.add(int(m.group(1)))
    return sorted(steps)


def metrics_row(edge_file: EdgeFile) -> dict:
    m = network_metrics(edge_file.graph())
    return {
        "step": edge_file.step,
        "V": m.links,
        "k_max": m.max_degree,
        "avg_degree": m.average_degree,
        "l": m.avg_path_length,
        "C_bipartite": m.clustering,
        "C_projected": m.clustering_projected,
        "l_rand": m.l_rand,
        "C_rand": m.C_rand,
    }


def analyze_directory(in_dir, tail_fraction: float = DEFAULT_TAIL_FRACTION):
    """Compute metric and tail-fit rows for every snapshot in a run directory.

    Returns (metric rows, tail-fit rows, error messages).
    """
    directory = Path(in_dir)
    metrics, tails, errors = [], [], []
    prev_budgets = None
    for stp in snapshot_steps_in(directory):
        try:
            edge_file = read_edges(directory / edges_filename(stp))
            metrics.append(metrics_row(edge_file))
        except (OSError, ValueError) as exc:
            errors.append(f"step {stp}: edges: {exc}")
        try:
            inv, ini = read_budgets(directory / budgets_filename(stp))
            budgets = np.concatenate((inv, ini))
            fit = powerlaw_tail_slope(budgets, tail_fraction)
            dist = consecutive_distances([prev_budgets, budgets])[0] if prev_budgets is not None else None
            tails.append({
                "step": stp,
                "slope": fit.slope,
                "intercept": fit.intercept,
                "tail_fraction": fit.tail_fraction,
                "points_used": fit.points_used,
                "r_squared": fit.r_squared,
                "l1_to_previous": dist,
            })
            prev_budgets = budgets
        except (OSError, ValueError) as exc:
            errors.append(f"step {stp}: budgets: {exc}")
    return metrics, tails, errors


def write_rows(path: Path, columns: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(row[c]) for c in columns])


def cmd_analyze(in_dir, out_file) -> int:
    in_dir = Path(in_dir)
    if not in_dir.is_dir():
        print(f"analyze: {in_dir} is not a directory", file=sys.stderr)
        return 1
    metrics, tails, errors = analyze_directory(in_dir)
    for msg in errors:
        print(f"analyze: {msg}", file=sys.stderr)
    if not metrics and not tails:
        print(f"analyze: no snapshots found in {in_dir}", file=sys.stderr)
        return 1
    out = Path(out_file)
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        write_rows(out, METRIC_COLUMNS, metrics)
        write_rows(out.with_name("tailfit.csv"), TAILFIT_COLUMNS, tails)
    except OSError as exc:
        print(f"analyze: cannot write {out}: {exc}", file=sys.stderr)
        return 1
    return 1 if errors else 0


# -- sweep -------------------------------------------------------------------


@dataclass
class SweepSpec:
    base: SimConfig
    axis: str
    values: list
    seeds_per_point: int = 1

    def __post_init__(self) -> None:
        if self.axis not in SWEEP_AXES:
            raise ConfigError(f"axis must be one of {sorted(SWEEP_AXES)}, got {self.axis!r}")
        if not self.values:
            raise ConfigError("sweep needs at least one value")
        if self.seeds_per_point < 1:
            raise ConfigError("seeds_per_point must be >= 1")
        self.points()  # derived configs validate on construction

    def points(self) -> list[tuple[object, list[SimConfig]]]:
        name = SWEEP_AXES[self.axis]
        out = []
        for value in self.values:
            try:
                if self.axis == "seed":
                    cfgs = [self.base.replace(rng_seed=int(value))]
                else:
                    point = self.base.replace(**{name: value})
                    cfgs = [point.replace(rng_seed=self.base.rng_seed + i) for i in range(self.seeds_per_point)]
            except ValueError as exc:
                raise ConfigError(f"sweep value {self.axis}={value}: {exc}") from None
            out.append((value, cfgs))
        return out


def parse_sweep(path) -> SweepSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read sweep spec {path}: {exc.strerror}") from None
    entries = parse_key_values(text, str(path))
    try:
        axis_raw, _ = entries.pop("axis")
        values_raw, vline = entries.pop("values")
    except KeyError as exc:
        raise ConfigError(f"{path}: missing required key {exc.args[0]!r}") from None
    seeds_raw, sline = entries.pop("seeds_per_point", ("1", 0))
    axis = axis_raw.strip()
    kind = int if SWEEP_AXES.get(axis) in INT_FIELDS else float
    try:
        values = [kind(v.strip()) for v in values_raw.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"{path}: line {vline}: cannot parse values {values_raw!r}") from None
    try:
        seeds = int(seeds_raw)
    except ValueError:
        raise ConfigError(f"{path}: line {sline}: seeds_per_point must be an integer") from None
    return SweepSpec(config_from_entries(entries, str(path)), axis, values, seeds)


def _run_label(axis: str, value, seed: int) -> str:
    return f"{axis}_{value}_seed_{seed}"


def _sweep_job(args):
    config, out_dir = args
    try:
        summary = execute_run(config, out_dir)
        m = network_metrics(
            BipartiteGraph(
                config.num_investors, config.num_initiators,
                summary.final.edge_investors, summary.final.edge_initiators,
            )
        )
        fit = powerlaw_tail_slope(summary.final.budgets)
        launched = summary.launched
        return {
            "ok": True,
            "V": m.links,
            "k_max": m.max_degree,
            "avg_degree": m.average_degree,
            "l": m.avg_path_length,
            "C_projected": m.clustering_projected,
            "tail_slope": fit.slope,
            "launch_rate": launched / max(config.num_steps, 1),
            "investors_per_project": summary.accepted / launched if launched else None,
            "committed_per_project": summary.committed / launched if launched else None,
            "committed_per_initiator": summary.committed / config.num_initiators,
        }
    except Exception as exc:  # a failed sub-run must not stop the sweep
        return {"ok": False, "error": f"{type(exc).__name__}: {exc}"}


SUMMARY_METRICS = [
    "V", "k_max", "avg_degree", "l", "C_projected", "tail_slope", "launch_rate",
    "investors_per_project", "committed_per_project", "committed_per_initiator",
]


def summarize_point(axis: str, value, results: list[dict]) -> dict:
    row = {"axis": axis, "value": value, "runs": len(results), "failed": sum(not r["ok"] for r in results)}
    good = [r for r in results if r["ok"]]
    for name in SUMMARY_METRICS:
        vals = np.array([r[name] for r in good if r[name] is not None], dtype=float)
        row[f"{name}_mean"] = float(vals.mean()) if vals.size else None
        row[f"{name}_std"] = float(vals.std(ddof=1)) if vals.size > 1 else (0.0 if vals.size else None)
    return row


def summary_columns() -> list[str]:
    cols = ["axis", "value", "runs", "failed"]
    for name in SUMMARY_METRICS:
        cols += [f"{name}_mean", f"{name}_std"]
    return cols


def execute_sweep(spec: SweepSpec, out_dir, parallel: int = 1) -> tuple[list[dict], list[str]]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs, owners = [], []
    for value, cfgs in spec.points():
        for cfg in cfgs:
            jobs.append((cfg, out / _run_label(spec.axis, value, cfg.rng_seed)))
            owners.append(value)
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(_sweep_job, jobs))
    else:
        results = [_sweep_job(job) for job in jobs]
    errors = [f"{job[1].name}: {res['error']}" for job, res in zip(jobs, results) if not res["ok"]]
    rows = []
    for value, _ in spec.points():
        rows.append(summarize_point(spec.axis, value, [r for o, r in zip(owners, results) if o == value]))
    write_rows(out / "summary.csv", summary_columns(), rows)
    return rows, errors


def cmd_sweep(spec_path, out_dir, parallel: int = 1) -> int:
    try:
        spec = parse_sweep(spec_path)
    except ConfigError as exc:
        print(f"sweep: {exc}", file=sys.stderr)
        return 2
    try:
        _, errors = execute_sweep(spec, out_dir, parallel)
    except OSError as exc:
        print(f"sweep: cannot write outputs to {out_dir}: {exc}", file=sys.stderr)
        return 1
    for msg in errors:
        print(f"sweep: run failed: {msg}", file=sys.stderr)
    return 1 if errors else 0


# -- entry point -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="invnet", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one configuration")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("analyze", help="network metrics and tail fits for a run directory")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("sweep", help="run a parameter sweep")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--parallel", type=int, default=1)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command == "run":
        return cmd_run(args.config, args.out, args.seed)
    if args.command == "analyze":
        return cmd_analyze(args.in_dir, args.out)
    return cmd_sweep(args.spec, args.out, args.parallel)
