"""Command line front end: datasets, training runs, sweeps, ensembles and reports.

Every command works inside a run root (``$ADVREG_RUNS``, default ``./runs``)
with one directory per run::

    runs/<id>/manifest       key=value text that reconstructs the run
    runs/<id>/dataset.csv
    runs/<id>/checkpoints/   generator snapshots
    runs/<id>/metrics.csv
    runs/<id>/reports/

Exit codes: 0 success, 1 usage error, 2 runtime error, 3 diverged run.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .errors import AdvRegError, ConfigurationError
from .gantrain import TrainConfig, build_references, checkpoint_name, format_value, train
from .metrics import (
    BLOCK_SIZE,
    MetricRecord,
    MomentSet,
    block_aggregate,
    ensemble_sample,
    kde,
    sample_conditional,
    score_sample,
)
from .nets import load_checkpoint
from .rng import derive_seed, substream
from .synthdata import ModelSpec, read_dataset_csv, sample_dataset, write_dataset_csv

log = logging.getLogger("advreg")

RUNS_ENV = "ADVREG_RUNS"
EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_DIVERGED = 0, 1, 2, 3

METRICS_HEADER = (
    "run_id", "model", "direction", "gan", "condition", "update",
    "ks", "kl", "js", "mean_abs_diff", "mean", "var", "skew", "kurt",
)
BLOCK_HEADER = ("run_id", "condition", "metric", "block", "count", "mean", "min", "q3", "max", "iqr", "partial")
SWEEP_AXES = ("noise_dim", "n_data", "batch_size", "gan")
DISTANCES = ("ks", "kl", "js", "mean_abs_diff")
ALIASES = {"n": "n_data", "lambda": "lambda_gp"}
CONFIG_KEYS = tuple(f.name for f in fields(TrainConfig))
# manifest lines that describe the run rather than configure it
MANIFEST_META = (
    "command", "run_id", "config_digest", "dataset", "checkpoints", "metrics", "reports",
    "tool_version", "status", "deviations", "sweep_axis", "sweep_values", "children", "failed",
)


class UsageError(ConfigurationError):
    pass


# ---------------------------------------------------------------------------
# configuration


def parse_pairs(items, source="command line") -> dict:
    """``key=value`` strings to a dict; aliases resolved, unknown keys rejected."""
    out = {}
    for item in items:
        item = item.strip()
        if not item or item.startswith("#"):
            continue
        if "=" not in item:
            raise UsageError(f"{source}: expected key=value, got {item!r}")
        key, value = (s.strip() for s in item.split("=", 1))
        key = ALIASES.get(key, key)
        if key in MANIFEST_META:
            continue
        if key not in CONFIG_KEYS:
            raise UsageError(f"{source}: unknown configuration key {key!r}")
        out[key] = value
    return out


def load_config(path=None, overrides=()) -> dict:
    """Merge a config (or manifest) file with overrides; the later value wins."""
    values = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise UsageError(f"config file {path} does not exist")
        values.update(parse_pairs(path.read_text().splitlines(), str(path)))
    values.update(parse_pairs(overrides))
    return values


def make_config(values: dict) -> TrainConfig:
    try:
        return TrainConfig.from_mapping(values)
    except (ConfigurationError, TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def deviations(cfg: TrainConfig) -> list[str]:
    """Keys whose value differs from the default for this GAN kind."""
    base = TrainConfig(gan=cfg.gan)
    return [k for k in CONFIG_KEYS if getattr(cfg, k) != getattr(base, k)]


# ---------------------------------------------------------------------------
# run directories and manifests


def runs_root(arg=None) -> Path:
    return Path(arg or os.environ.get(RUNS_ENV, "runs"))


def fresh_dir(root: Path, run_id: str) -> Path:
    """Create ``root/run_id``, suffixing ``-1``, ``-2``, ... instead of reusing a directory."""
    root.mkdir(parents=True, exist_ok=True)
    candidate, k = root / run_id, 0
    while True:
        try:
            candidate.mkdir()
            return candidate
        except FileExistsError:
            k += 1
            candidate = root / f"{run_id}-{k}"


def default_run_id(cfg: TrainConfig) -> str:
    return f"{cfg.model}-{cfg.direction}-{cfg.gan}-s{cfg.seed}"


def write_manifest(run_dir: Path, command: str, cfg: TrainConfig | None, extra: dict | None = None) -> Path:
    meta = {
        "command": command,
        "run_id": run_dir.name,
        "tool_version": __version__,
    }
    if cfg is not None:
        meta.update(
            config_digest=cfg.digest(),
            dataset="dataset.csv",
            checkpoints="checkpoints",
            metrics="metrics.csv",
            reports="reports",
            deviations=",".join(deviations(cfg)),
        )
    meta.update(extra or {})
    lines = [f"{k}={format_value(v)}" for k, v in meta.items()]
    if cfg is not None:
        lines.append(cfg.to_text().rstrip("\n"))
    path = run_dir / "manifest"
    path.write_text("\n".join(lines) + "\n")
    return path


def read_manifest(run_dir: Path) -> dict:
    path = Path(run_dir) / "manifest"
    if not path.is_file():
        raise UsageError(f"{run_dir} has no manifest")
    out = {}
    for line in path.read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k] = v
    return out


def manifest_config(run_dir: Path) -> TrainConfig:
    return make_config(load_config(Path(run_dir) / "manifest"))


def resolve_run(target: str, root: Path) -> Path:
    p = Path(target)
    if (p / "manifest").is_file():
        return p
    if (root / target / "manifest").is_file():
        return root / target
    raise UsageError(f"no run directory {target!r} (looked in . and {root})")


# ---------------------------------------------------------------------------
# metric CSV


def _num(v) -> str:
    return repr(float(v))


def metric_row(cfg: TrainConfig, r: MetricRecord) -> list[str]:
    m = r.moments
    return [
        r.run_id, cfg.model, cfg.direction, cfg.gan, _num(r.condition), str(r.update),
        _num(r.ks), _num(r.kl), _num(r.js), _num(r.mean_abs_diff),
        _num(m.mean), _num(m.variance), _num(m.skewness), _num(m.kurtosis),
    ]


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def read_metrics(path) -> list[MetricRecord]:
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"{path} does not exist")
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        m = MomentSet(float(row["mean"]), float(row["var"]), float(row["skew"]), float(row["kurt"]))
        out.append(
            MetricRecord(row["run_id"], int(row["update"]), float(row["condition"]), float(row["ks"]),
                         float(row["kl"]), float(row["js"]), float(row["mean_abs_diff"]), m)
        )
    return out


def block_rows(run_id: str, records, conditions, metrics=DISTANCES, block_size=BLOCK_SIZE) -> list[list[str]]:
    rows = []
    for c in conditions:
        recs = [r for r in records if r.condition == c]
        if not recs:
            continue
        for metric in metrics:
            for b in block_aggregate(recs, metric, block_size):
                rows.append([run_id, _num(c), metric, str(b.block), str(b.count), _num(b.mean), _num(b.min),
                             _num(b.q3), _num(b.max), _num(b.iqr), str(int(b.partial))])
    return rows


# ---------------------------------------------------------------------------
# commands


GEN_DATA_KEYS = ("model", "n_data", "seed")


def gen_data_values(values: dict) -> dict:
    """Validated ``model``, ``n_data`` and ``seed`` for ``gen-data``."""
    extra = sorted(set(values) - set(GEN_DATA_KEYS))
    if extra:
        raise UsageError(f"gen-data only takes model, n and seed; got {', '.join(extra)}")
    defaults = TrainConfig()
    try:
        model = ModelSpec(values.get("model", defaults.model))
        n = int(float(values.get("n_data", defaults.n_data)))
        seed = int(float(values.get("seed", defaults.seed)))
    except (ConfigurationError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    if n < 1:
        raise UsageError(f"n must be positive, got {n}")
    return {"model": model.kind, "n_data": n, "seed": seed}


def run_gen_data(values: dict, run_dir: Path) -> Path:
    v = gen_data_values(values)
    ds = sample_dataset(ModelSpec(v["model"]), v["n_data"], v["seed"])
    path = write_dataset_csv(ds, run_dir / "dataset.csv")
    lines = ["command=gen-data", f"run_id={run_dir.name}", f"tool_version={__version__}", "dataset=dataset.csv"]
    lines += [f"{k}={v[k]}" for k in GEN_DATA_KEYS]
    (run_dir / "manifest").write_text("\n".join(lines) + "\n")
    return path


def run_train(cfg: TrainConfig, run_dir: Path, dataset_path=None) -> str:
    """Train into ``run_dir`` and return the final status."""
    run_dir = Path(run_dir)
    if dataset_path is not None:
        ds = read_dataset_csv(dataset_path, cfg.model_spec, cfg.seed)
        if len(ds.X) != cfg.n_data:
            raise UsageError(f"dataset has {len(ds.X)} rows but n_data={cfg.n_data}")
    else:
        ds = sample_dataset(cfg.model_spec, cfg.n_data, cfg.seed)
    write_dataset_csv(ds, run_dir / "dataset.csv")
    write_manifest(run_dir, "train", cfg, {"status": "running"})
    metrics_path = run_dir / "metrics.csv"
    run_id = run_dir.name
    with metrics_path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRICS_HEADER)

        def sink(batch):
            writer.writerows(metric_row(cfg, r) for r in batch)
            fh.flush()

        run = train(cfg, ds, run_id=run_id, checkpoint_dir=run_dir / "checkpoints", on_records=sink,
                    keep_checkpoints=False)
    extra = {"status": run.status}
    if run.diagnostic:
        extra["failed"] = ";".join(f"{k}:{v}" for k, v in run.diagnostic.items())
    write_manifest(run_dir, "train", cfg, extra)
    (run_dir / "timing").write_text(f"wall_time_s={run.wall_time!r}\ng_updates={run.g_updates}\n"
                                    f"d_updates={run.d_updates}\n")
    return run.status


def _sweep_child(job):
    """Worker body: one sweep child in its own run directory."""
    values, run_dir = job
    try:
        status = run_train(make_config(values), Path(run_dir))
        return run_dir, status, ""
    except Exception as exc:  # a failed child must not stop the sweep
        return run_dir, "failed", f"{type(exc).__name__}: {exc}"


def run_sweep(axis: str, values, base: dict, root: Path, sweep_id: str, jobs: int = 1) -> Path:
    if axis not in SWEEP_AXES:
        raise UsageError(f"sweep axis must be one of {SWEEP_AXES}")
    values = [v for v in values if str(v).strip()]
    if not values:
        raise UsageError("a sweep needs at least one value")
    base = dict(base)
    seed = int(float(base.get("seed", 0)))
    sweep_dir = fresh_dir(root, sweep_id)
    jobs_list = []
    for i, v in enumerate(values):
        child = dict(base, **{axis: str(v)}, seed=str(derive_seed(seed, i)))
        make_config(child)  # reject bad values before any training starts
        run_dir = fresh_dir(root, f"{sweep_dir.name}-{axis}-{v}")
        jobs_list.append((child, str(run_dir)))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_child, jobs_list))
    else:
        results = [_sweep_child(j) for j in jobs_list]

    rows, failed = [], []
    for (child, _), v, (run_dir, status, err) in zip(jobs_list, values, results):
        run_dir = Path(run_dir)
        if err:
            failed.append(f"{run_dir.name}:{err}")
            log.warning("sweep child %s failed: %s", run_dir.name, err)
        cfg = make_config(child)
        mpath = run_dir / "metrics.csv"
        records = read_metrics(mpath) if mpath.is_file() else []
        for row in block_rows(run_dir.name, records, cfg.conditions):
            rows.append([sweep_dir.name, axis, str(v), str(cfg.seed), status] + row)
        if not records:
            rows.append([sweep_dir.name, axis, str(v), str(cfg.seed), status, run_dir.name] + [""] * 10)
    header = ("sweep_id", "axis", "value", "seed", "status") + BLOCK_HEADER
    (sweep_dir / "comparison.csv").write_text(_csv_text(header, rows))
    extra = {
        "sweep_axis": axis,
        "sweep_values": ",".join(str(v) for v in values),
        "children": ",".join(Path(r[0]).name for r in results),
        "status": "completed",
    }
    if failed:
        extra["failed"] = ";".join(failed)
    base_cfg = dict(base)
    base_cfg.pop(axis, None)
    lines = [f"{k}={v}" for k, v in extra.items()] + [f"{k}={v}" for k, v in sorted(base_cfg.items())]
    (sweep_dir / "manifest").write_text(
        f"command=sweep\nrun_id={sweep_dir.name}\ntool_version={__version__}\n" + "\n".join(lines) + "\n"
    )
    return sweep_dir


def run_ensemble(run_dir: Path, first: int, last: int, step: int, conditions=None, n_per: int = 5000) -> Path:
    """Pool checkpoints ``first..last`` (every ``step``) and score against the last one alone."""
    if step < 1 or first > last:
        raise UsageError("need first <= last and step >= 1")
    cfg = manifest_config(run_dir)
    updates = list(range(first, last + 1, step))
    paths = [run_dir / "checkpoints" / checkpoint_name(u) for u in updates]
    missing = [p.name for p in paths if not p.is_file()]
    if missing:
        raise FileNotFoundError(f"missing checkpoints in {run_dir}: {', '.join(missing)}")
    nets = [load_checkpoint(p).network for p in paths]
    conditions = cfg.conditions if conditions is None else tuple(conditions)
    cfg_refs = make_config(dict(load_config(run_dir / "manifest"), conditions=",".join(map(str, conditions))))
    refs = build_references(cfg_refs)
    rows = []
    for i, c in enumerate(conditions):
        rng = substream(cfg.seed, "ensemble", i)
        pooled = ensemble_sample(nets, c, n_per, rng)
        single = sample_conditional(nets[-1], c, len(pooled), rng)
        for kind, sample in (("pooled", pooled), ("single", single)):
            r = score_sample(sample, refs[c], run_dir.name, last)
            m = r.moments
            rows.append([run_dir.name, kind, str(first), str(last), str(step), str(len(nets) if kind == "pooled" else 1),
                         _num(c), str(len(sample)), _num(r.ks), _num(r.kl), _num(r.js), _num(r.mean_abs_diff),
                         _num(m.mean), _num(m.variance), _num(m.skewness), _num(m.kurtosis)])
    header = ("run_id", "kind", "first", "last", "step", "n_checkpoints", "condition", "n",
              "ks", "kl", "js", "mean_abs_diff", "mean", "var", "skew", "kurt")
    out = run_dir / f"ensemble-{first}-{last}-{step}.csv"
    out.write_text(_csv_text(header, rows))
    return out


# ---------------------------------------------------------------------------
# reports


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams.update({"svg.hashsalt": "advreg", "svg.fonttype": "none", "path.simplify": False})
    return plt


def _save(fig, path: Path):
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    fig.clf()


def _cond_tag(c: float) -> str:
    return format_value(float(c))


def report_run(run_dir: Path) -> list[Path]:
    run_dir = Path(run_dir)
    cfg = manifest_config(run_dir)
    records = read_metrics(run_dir / "metrics.csv")
    if not records:
        raise UsageError(f"{run_dir / 'metrics.csv'} has no rows")
    out_dir = run_dir / "reports"
    out_dir.mkdir(exist_ok=True)
    written = []
    path = out_dir / "blocks.csv"
    path.write_text(_csv_text(BLOCK_HEADER, block_rows(run_dir.name, records, cfg.conditions)))
    written.append(path)

    plt = _pyplot()
    fig = plt.figure(figsize=(7, 4.5))
    for c in cfg.conditions:
        recs = [r for r in records if r.condition == c]
        if not recs:
            continue
        u = [r.update for r in recs]
        ax = fig.add_subplot(1, 1, 1)
        for metric in DISTANCES:
            ax.plot(u, [getattr(r, metric) for r in recs], label=metric, linewidth=0.8)
        ax.set_yscale("symlog", linthresh=1e-3)
        ax.set_xlabel("generator update")
        ax.set_title(f"{cfg.model} {cfg.direction} {cfg.gan}: distances at {_cond_tag(c)}")
        ax.legend()
        path = out_dir / f"distance_{_cond_tag(c)}.svg"
        _save(fig, path)
        written.append(path)

    axes = fig.subplots(2, 2).ravel()
    for c in cfg.conditions:
        recs = [r for r in records if r.condition == c]
        u = [r.update for r in recs]
        for ax, (name, attr) in zip(axes, (("mean", "mean"), ("variance", "variance"),
                                           ("skewness", "skewness"), ("kurtosis", "kurtosis"))):
            ax.plot(u, [getattr(r.moments, attr) for r in recs], label=_cond_tag(c), linewidth=0.8)
            ax.set_title(name)
    axes[0].legend(title="condition")
    path = out_dir / "moments.svg"
    _save(fig, path)
    written.append(path)

    ckpts = sorted((run_dir / "checkpoints").glob("G_*.ckpt"))
    if ckpts:
        net = load_checkpoint(ckpts[-1]).network
        refs = build_references(cfg)
        grid = np.linspace(-0.5, 1.5, 401)
        for i, c in enumerate(cfg.conditions):
            ref = refs[c]
            gen = sample_conditional(net, c, ref.default_n_eval if not cfg.n_eval else cfg.n_eval,
                                     substream(cfg.seed, "eval", 0, i))
            if ref.analytic is not None:
                mu, sd = ref.analytic.mean, ref.analytic.sd
                dens = np.exp(-0.5 * ((grid - mu) / sd) ** 2) / (sd * np.sqrt(2 * np.pi))
            else:
                dens = kde(ref.values, grid)
            ax = fig.add_subplot(1, 1, 1)
            ax.plot(grid, dens, label="reference", linewidth=1.0)
            ax.plot(grid, kde(gen, grid), label=f"generated ({ckpts[-1].stem})", linewidth=1.0)
            ax.set_title(f"density at {_cond_tag(c)}")
            ax.legend()
            path = out_dir / f"density_{_cond_tag(c)}.svg"
            _save(fig, path)
            written.append(path)
    plt.close(fig)
    return written


def report_sweep(sweep_dir: Path) -> list[Path]:
    sweep_dir = Path(sweep_dir)
    meta = read_manifest(sweep_dir)
    path = sweep_dir / "comparison.csv"
    if not path.is_file():
        raise UsageError(f"{path} does not exist")
    with path.open(newline="") as fh:
        rows = [r for r in csv.DictReader(fh) if r["metric"] == "js" and r["mean"]]
    if not rows:
        raise UsageError(f"{path} has no metric rows")
    out_dir = sweep_dir / "reports"
    out_dir.mkdir(exist_ok=True)
    final = {}
    for r in rows:
        key = (r["value"], r["condition"])
        if key not in final or int(r["block"]) > int(final[key]["block"]):
            final[key] = r
    values = meta["sweep_values"].split(",")
    table = [[meta["sweep_axis"], v, c, r["run_id"], r["status"], r["block"], r["mean"], r["q3"], r["max"]]
             for (v, c), r in sorted(final.items(), key=lambda kv: (values.index(kv[0][0]), float(kv[0][1])))]
    out = out_dir / "final_blocks.csv"
    out.write_text(_csv_text(("axis", "value", "condition", "run_id", "status", "block", "js_mean", "js_q3", "js_max"),
                             table))
    plt = _pyplot()
    fig = plt.figure(figsize=(7, 4.5))
    ax = fig.add_subplot(1, 1, 1)
    for c in sorted({row[2] for row in table}, key=float):
        pts = [(values.index(row[1]), float(row[6])) for row in table if row[2] == c]
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=c)
    ax.set_xticks(range(len(values)))
    ax.set_xticklabels(values)
    ax.set_xlabel(meta["sweep_axis"])
    ax.set_ylabel("final-block mean JS")
    ax.legend(title="condition")
    svg = out_dir / "final_js.svg"
    _save(fig, svg)
    plt.close(fig)
    return [out, svg]


def report(target: Path) -> list[Path]:
    meta = read_manifest(target)
    if meta.get("command") == "sweep":
        return report_sweep(target)
    return report_run(target)


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="advreg", description="Conditional GANs for regression on synthetic data.")
    p.add_argument("--version", action="version", version=f"advreg {__version__}")
    p.add_argument("--runs", help=f"run root directory (default ${RUNS_ENV} or ./runs)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def with_config(sp):
        sp.add_argument("--config", help="key=value file (a manifest also works)")
        sp.add_argument("--run-id", help="run directory name")
        sp.add_argument("overrides", nargs="*", metavar="key=value")

    with_config(sub.add_parser("gen-data", help="sample a synthetic dataset"))
    sp = sub.add_parser("train", help="train one conditional GAN")
    with_config(sp)
    sp.add_argument("--dataset", help="existing dataset CSV to train on")
    sp = sub.add_parser("sweep", help="one run per value of a config axis")
    with_config(sp)
    sp.add_argument("--axis", required=True, choices=SWEEP_AXES)
    sp.add_argument("--values", required=True, help="comma separated")
    sp.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    sp = sub.add_parser("ensemble", help="pool late checkpoints of a run")
    sp.add_argument("run")
    sp.add_argument("--first", type=int, default=310_000)
    sp.add_argument("--last", type=int, default=510_000)
    sp.add_argument("--step", type=int, default=10_000)
    sp.add_argument("--condition", type=float, action="append", help="repeatable; default all run conditions")
    sp.add_argument("--n-per", type=int, default=5000)
    sp = sub.add_parser("report", help="CSV tables and SVG plots for a run or sweep")
    sp.add_argument("target")
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"advreg: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    root = runs_root(args.runs)
    try:
        return _dispatch(args, root)
    except UsageError as exc:
        print(f"advreg: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (AdvRegError, OSError, ValueError) as exc:
        print(f"advreg: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def _dispatch(args, root: Path) -> int:
    if args.command == "gen-data":
        values = load_config(args.config, args.overrides)
        v = gen_data_values(values)
        run_dir = fresh_dir(root, args.run_id or f"data-{v['model']}-n{v['n_data']}-s{v['seed']}")
        print(run_gen_data(values, run_dir))
        return EXIT_OK
    if args.command == "train":
        cfg = make_config(load_config(args.config, args.overrides))
        run_dir = fresh_dir(root, args.run_id or default_run_id(cfg))
        status = run_train(cfg, run_dir, args.dataset)
        print(run_dir)
        if status == "diverged":
            print(f"advreg: run {run_dir.name} diverged; partial artifacts kept", file=sys.stderr)
            return EXIT_DIVERGED
        return EXIT_OK
    if args.command == "sweep":
        base = load_config(args.config, args.overrides)
        make_config(base)
        sweep_id = args.run_id or f"sweep-{args.axis}"
        print(run_sweep(args.axis, args.values.split(","), base, root, sweep_id, args.jobs))
        return EXIT_OK
    if args.command == "ensemble":
        print(run_ensemble(resolve_run(args.run, root), args.first, args.last, args.step, args.condition, args.n_per))
        return EXIT_OK
    if args.command == "report":
        for path in report(resolve_run(args.target, root)):
            print(path)
        return EXIT_OK
    raise UsageError(f"unknown command {args.command}")  # pragma: no cover


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
