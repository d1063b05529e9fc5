"""Command-line driver.

Every subcommand needs ``--seed``.  Input is either a set of files
(``--matrix`` plus optional ``--durations``/``--labels``) or the synthetic
generator, configured through a flat ``key=value`` file (``--config``) and
``--set key=value`` overrides.

Exit status: 0 on success, 1 on invalid data, 2 on usage errors and missing
files.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import pipeline
from .datasets import (
    SETUPS,
    Collection,
    GeneratorParams,
    extra_noise_needed,
    generate_collection,
    geometric_cardinality_weights,
    load_collection,
    save_collection,
    setup,
)
from .errors import FormatError, InvalidInputError
from .evaluation import evaluate, map_score, write_report_csv
from .graph import DissimilarityMatrix, load_matrix, symmetrize
from .metrics import threshold_sweep, write_sweep_csv
from .prototype import METHODS, run_prototype_experiment, write_prototype_csv

log = logging.getLogger("covernet")

GENERATOR_KEYS = {f.name for f in fields(GeneratorParams)} - {"cardinality_weights", "duration_range"}
GENERATOR_KEYS |= {"n_groups", "cardinality_mean", "duration_min", "duration_max"}
SWEEP_KEYS = {"thresholds", "er_trials", "efficiency", "directed"}
EVAL_KEYS = {"c"}
PARAM_KEYS = set().union(*pipeline._KNOWN_PARAMS.values())


class UsageError(Exception):
    pass


def parse_value(text: str):
    text = text.strip()
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def parse_list(text) -> list:
    """``a,b,c`` or ``lo:hi:step`` (inclusive of hi within rounding)."""
    if isinstance(text, (int, float)):
        return [text]
    text = str(text).strip()
    if not text:
        return []
    if ":" in text:
        lo, hi, step = (float(x) for x in text.split(":"))
        if step <= 0:
            raise UsageError(f"range step must be positive: {text!r}")
        count = int(np.floor((hi - lo) / step + 1e-9)) + 1
        return [round(lo + k * step, 10) for k in range(count)]
    return [parse_value(x) for x in text.split(",") if x.strip()]


def read_config(path) -> dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise FormatError("expected key=value", path, lineno)
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


@dataclass
class RunConfig:
    command: str
    seed: int
    out: Path
    matrix: Path | None = None
    durations: Path | None = None
    labels: Path | None = None
    generator: GeneratorParams | None = None
    n_groups: int = 523
    options: dict = field(default_factory=dict)
    algo_params: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)

    @property
    def uses_files(self) -> bool:
        return self.matrix is not None


def build_config(args) -> RunConfig:
    raw: dict[str, str] = {}
    if args.config:
        raw.update(read_config(args.config))
    for item in args.set or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        raw[k.strip()] = v.strip()

    gen_raw, options, algo, grid = {}, {}, {}, {}
    for key, value in raw.items():
        if key.startswith("grid."):
            parts = key.split(".")[1:]
            alg, name = (parts[0], parts[1]) if len(parts) == 2 else (None, parts[0])
            if name not in PARAM_KEYS:
                raise UsageError(f"unknown grid parameter {name!r}")
            values = parse_list(value)
            grid.setdefault(alg, {})[name] = values
        elif "." in key:
            alg, name = key.split(".", 1)
            if alg not in pipeline.ALGORITHMS:
                raise UsageError(f"unknown algorithm {alg!r} in key {key!r}")
            if name not in pipeline._KNOWN_PARAMS[alg]:
                raise UsageError(f"{alg} has no parameter {name!r}")
            algo.setdefault(alg, {})[name] = parse_value(value)
        elif key in PARAM_KEYS:
            algo.setdefault(None, {})[key] = parse_value(value)
        elif key in GENERATOR_KEYS:
            gen_raw[key] = parse_value(value)
        elif key in SWEEP_KEYS | EVAL_KEYS:
            options[key] = value
        else:
            raise UsageError(f"unknown configuration key {key!r}")

    cfg = RunConfig(command=args.command, seed=args.seed, out=Path(args.out), options=options, algo_params=algo, grid=grid)
    if getattr(args, "matrix", None):
        if gen_raw:
            raise UsageError("give either input files or generator parameters, not both")
        cfg.matrix = Path(args.matrix)
        cfg.durations = Path(args.durations) if args.durations else None
        cfg.labels = Path(args.labels) if args.labels else None
        for p in (cfg.matrix, cfg.durations, cfg.labels):
            if p is not None and not p.exists():
                raise FileNotFoundError(str(p))
    else:
        if getattr(args, "durations", None) or getattr(args, "labels", None):
            raise UsageError("--durations/--labels need --matrix")
        cfg.n_groups = int(gen_raw.pop("n_groups", 523))
        kw = {}
        if "cardinality_mean" in gen_raw:
            kw["cardinality_weights"] = geometric_cardinality_weights(float(gen_raw.pop("cardinality_mean")))
        if "duration_min" in gen_raw or "duration_max" in gen_raw:
            kw["duration_range"] = (float(gen_raw.pop("duration_min", 120.0)), float(gen_raw.pop("duration_max", 360.0)))
        cfg.generator = GeneratorParams(**gen_raw, **kw)
    return cfg


def params_for(cfg: RunConfig, algorithm: str) -> dict:
    merged = {}
    known = pipeline._KNOWN_PARAMS[algorithm]
    merged.update({k: v for k, v in cfg.algo_params.get(None, {}).items() if k in known})
    merged.update(cfg.algo_params.get(algorithm, {}))
    return pipeline.resolve_params(algorithm, merged)


def grid_for(cfg: RunConfig, algorithm: str) -> dict:
    if not cfg.grid:
        return pipeline.DEFAULT_GRIDS[algorithm]
    known = pipeline._KNOWN_PARAMS[algorithm]
    grid = {k: v for k, v in cfg.grid.get(None, {}).items() if k in known}
    grid.update(cfg.grid.get(algorithm, {}))
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise UsageError(f"parameter grid for {algorithm} is empty")
    return grid


def load_input(cfg: RunConfig, need_labels: bool, extra_noise: int = 0) -> tuple[Collection | None, DissimilarityMatrix]:
    if cfg.uses_files:
        if cfg.labels is None:
            if need_labels:
                raise UsageError("this command needs --labels")
            return None, load_matrix(cfg.matrix, cfg.durations)
        if cfg.durations is None:
            raise UsageError("--labels needs --durations")
        return load_collection(cfg.matrix, cfg.durations, cfg.labels)
    gen = cfg.generator
    if extra_noise > gen.n_noise:
        gen = replace(gen, n_noise=extra_noise)
    return generate_collection(gen, cfg.n_groups, cfg.seed)


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


def write_rows(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for r in rows:
            out.writerow([_fmt(x) for x in r])
    validate_csv(path, header, len(rows))


def validate_csv(path: Path, header: list[str], n_rows: int) -> None:
    with open(path, newline="") as fh:
        got = list(csv.reader(fh))
    if not got or got[0] != header or len(got) - 1 != n_rows:
        raise RuntimeError(f"output {path} failed validation")


def _split(values) -> list[str]:
    out = []
    for v in values or []:
        out.extend(x.strip() for x in v.split(",") if x.strip())
    return out


# --- commands ---------------------------------------------------------------------

def cmd_generate(cfg: RunConfig, args) -> int:
    if cfg.uses_files:
        raise UsageError("generate takes no input files")
    c, m = load_input(cfg, need_labels=True)
    cfg.out.mkdir(parents=True, exist_ok=True)
    save_collection(c, m, cfg.out / "matrix.txt", cfg.out / "durations.txt", cfg.out / "labels.txt")
    log.info("wrote %d items to %s", c.n, cfg.out)
    return 0


def cmd_sweep(cfg: RunConfig, args) -> int:
    _, m = load_input(cfg, need_labels=False)
    thresholds = parse_list(args.thresholds or cfg.options.get("thresholds", "0.1:0.9:0.05"))
    trials = int(args.trials or cfg.options.get("er_trials", 100))
    mode = args.efficiency or cfg.options.get("efficiency", "hop")
    directed = parse_value(cfg.options.get("directed", "true")) and not args.symmetric
    if not directed:
        m = symmetrize(m)
    rows = threshold_sweep(m, thresholds, trials, cfg.seed, mode, directed)
    cfg.out.mkdir(parents=True, exist_ok=True)
    path = cfg.out / "sweep.csv"
    write_sweep_csv(rows, path)
    from .metrics import SWEEP_HEADER

    validate_csv(path, SWEEP_HEADER, len(rows))
    return 0


DETECT_HEADER = [
    "algorithm", "setup", "trials", "n_mean", "mean_precision", "mean_recall", "f",
    "map_original", "map_refined", "delta", "delta_positive_fraction", "params",
]


def _algorithms(args) -> list[str]:
    names = _split(args.algorithm) or ["PM1"]
    if names == ["all"]:
        names = list(pipeline.ALGORITHMS)
    for a in names:
        if a not in pipeline.ALGORITHMS:
            raise UsageError(f"unknown algorithm {a!r}; choose from {', '.join(pipeline.ALGORITHMS)}")
    return names


def _setups(args, default: str, trials: int | None, seed: int):
    names = _split(args.setup) or default.split(",")
    specs = {}
    for name in names:
        if name not in SETUPS and name != "full":
            raise UsageError(f"unknown setup {name!r}; choose from full, {', '.join(SETUPS)}")
        specs[name] = None if name == "full" else setup(name, seed=seed, trials=trials)
    return specs


def _trial_sets(cfg: RunConfig, specs: dict):
    needed = max([extra_noise_needed(cfg.n_groups, s) for s in specs.values() if s is not None] + [0])
    c, m = load_input(cfg, need_labels=True, extra_noise=needed)
    out = {}
    for name, spec in specs.items():
        if spec is None:
            sym = symmetrize(m)
            truth = c.truth()
            out[name] = [pipeline.Trial(c, sym, truth, map_score(sym, truth))]
        else:
            out[name] = pipeline.prepare_trials(c, m, spec)
    return out


def cmd_detect_eval(cfg: RunConfig, args) -> int:
    algorithms = _algorithms(args)
    specs = _setups(args, "2.1", args.trials, cfg.seed)
    c_const = float(cfg.options.get("c", 2.0))
    trial_sets = _trial_sets(cfg, specs)
    cfg.out.mkdir(parents=True, exist_ok=True)
    rows, timing = [], []
    for alg in algorithms:
        params = params_for(cfg, alg)
        for name, trials in trial_sets.items():
            res = pipeline.run_setup(alg, params, trials, name, cfg.seed, c_const)
            rows.append([
                alg, name, len(res.trials), res.mean("n"), res.mean("precision"), res.mean("recall"),
                res.mean("f"), res.mean("map_original"), res.mean("map_refined"), res.mean("delta"),
                res.delta_positive_fraction, pipeline.format_params(res.params),
            ])
            timing.append((alg, name, res.mean("seconds")))
            log.info("%s %s: F=%.3f delta=%.2f%%", alg, name, res.mean("f"), res.mean("delta"))
            first = trials[0]
            report = evaluate(
                first.matrix,
                pipeline.detect(alg, first.matrix, params, cfg.seed),
                first.truth,
                c_const,
                keep_per_query=args.per_query,
            )
            write_report_csv(report, cfg.out / f"report_{alg}_{name}.csv", per_query=args.per_query)
    write_rows(cfg.out / "detect_eval.csv", DETECT_HEADER, rows)
    # wall-clock times vary run to run, so they stay out of the CSV outputs
    with open(cfg.out / "timings.txt", "w") as fh:
        for alg, name, sec in timing:
            fh.write(f"{alg}\t{name}\t{sec:.6f}\n")
    return 0


GRID_HEADER = ["algorithm", "params", "f", "map", "delta"]
GRID_BEST_HEADER = ["objective", "algorithm", "params", "f", "map", "delta"]


def cmd_grid(cfg: RunConfig, args) -> int:
    algorithms = _algorithms(args)
    grids = {alg: grid_for(cfg, alg) for alg in algorithms}
    specs = _setups(args, "1.1,1.2,1.3,1.4", args.trials, cfg.seed)
    trial_sets = list(_trial_sets(cfg, specs).values())
    cfg.out.mkdir(parents=True, exist_ok=True)
    rows, best = [], []
    for alg in algorithms:
        grid_rows, best_f, best_map = pipeline.grid_search(alg, grids[alg], trial_sets, cfg.seed)
        rows += [[r.algorithm, pipeline.format_params(r.params), r.f, r.map, r.delta] for r in grid_rows]
        for objective, r in (("F", best_f), ("MAP", best_map)):
            best.append([objective, r.algorithm, pipeline.format_params(r.params), r.f, r.map, r.delta])
    write_rows(cfg.out / "grid.csv", GRID_HEADER, rows)
    write_rows(cfg.out / "grid_best.csv", GRID_BEST_HEADER, best)
    return 0


def cmd_prototype(cfg: RunConfig, args) -> int:
    methods = _split(args.method) or list(METHODS)
    for meth in methods:
        if meth not in METHODS:
            raise UsageError(f"unknown method {meth!r}; choose from {', '.join(METHODS)}")
    c, m = load_input(cfg, need_labels=True)
    if not c.is_original.any():
        raise InvalidInputError("no originals in the collection")
    rows = []
    for meth in methods:
        rows += run_prototype_experiment(c, m, meth, seed=cfg.seed)
    cfg.out.mkdir(parents=True, exist_ok=True)
    path = cfg.out / "prototype.csv"
    write_prototype_csv(rows, path)
    from .prototype import PROTOTYPE_HEADER

    validate_csv(path, PROTOTYPE_HEADER, len(rows))
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "sweep": cmd_sweep,
    "detect-eval": cmd_detect_eval,
    "grid": cmd_grid,
    "prototype": cmd_prototype,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="covernet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, inputs=True):
        p.add_argument("--seed", type=int, required=True)
        p.add_argument("--config", help="flat key=value file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
        if inputs:
            p.add_argument("--matrix", help="dissimilarity matrix file")
            p.add_argument("--durations", help="durations file")
            p.add_argument("--labels", help="labels file (group_id original_flag)")

    common(sub.add_parser("generate", help="write a synthetic collection"), inputs=False)

    p = sub.add_parser("sweep", help="network metrics against random baselines over thresholds")
    common(p)
    p.add_argument("--thresholds", help="a,b,c or lo:hi:step")
    p.add_argument("--trials", type=int, help="random graphs per threshold")
    p.add_argument("--efficiency", choices=("hop", "weighted"))
    p.add_argument("--symmetric", action="store_true", help="sweep the symmetrised matrix")

    p = sub.add_parser("detect-eval", help="detect groups and evaluate F and MAP gain")
    common(p)
    p.add_argument("--algorithm", action="append", help=f"{', '.join(pipeline.ALGORITHMS)} or all")
    p.add_argument("--setup", action="append", help="setup names, or 'full' for the whole input")
    p.add_argument("--trials", type=int, help="override trials per setup")
    p.add_argument("--per-query", action="store_true", help="add per-query rows to report files")

    p = sub.add_parser("grid", help="in-sample grid search")
    common(p)
    p.add_argument("--algorithm", action="append")
    p.add_argument("--setup", action="append")
    p.add_argument("--trials", type=int)

    p = sub.add_parser("prototype", help="original-item detection hit rates")
    common(p)
    p.add_argument("--method", action="append", help="closeness, mst")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = build_config(args)
        return COMMANDS[args.command](cfg, args)
    except FileNotFoundError as exc:
        print(f"covernet: error: no such file: {exc.filename or exc}", file=sys.stderr)
        return 2
    except UsageError as exc:
        print(f"covernet: error: {exc}", file=sys.stderr)
        return 2
    except (FormatError, InvalidInputError) as exc:
        print(f"covernet: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
