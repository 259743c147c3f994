"""Command-line entry point.

Each subcommand reads a JSON config, accepts a ``--seed`` override and keeps
its artifacts in ``--workdir`` so stages can be rerun one at a time::

    mixbalance prepare  --config exp.json --workdir run/
    mixbalance generate --config exp.json --workdir run/
    mixbalance search   --config exp.json --workdir run/
    mixbalance evaluate --config exp.json --workdir run/ [--ratio 0.5:0.3:0.2]
    mixbalance report   --config exp.json --workdir run/ --format markdown

The stage commands reproduce repetition 0 of ``report`` for the same
config and seed. Exit codes: 0 success, 1 configuration error, 2 stage
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import harness
from .classifiers import predict
from .data import load_dataset, save_dataset
from .ga import GaResult, MixRatio
from .generators import SyntheticPool, load_external_pool
from .harness import ConfigError, ExperimentConfig, StageError, derive_seed
from .metrics import score

EXIT_OK, EXIT_CONFIG, EXIT_STAGE = 0, 1, 2


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _read_json(path: Path):
    return json.loads(path.read_text())


def _require(path: Path, made_by: str) -> Path:
    if not path.exists():
        raise FileNotFoundError(f"{path} is missing; run `mixbalance {made_by}` first")
    return path


def _run_seed(cfg: ExperimentConfig) -> int:
    return derive_seed(cfg.seed, 0)


def _load_split(work: Path):
    train = load_dataset(_require(work / "train.csv", "prepare"))
    test = load_dataset(_require(work / "test.csv", "prepare"))
    return train, test


def _load_pools(work: Path):
    manifest = _read_json(_require(work / "pools.json", "generate"))
    pools = []
    for entry in manifest["pools"]:
        p = load_external_pool(work / entry["file"])
        pools.append(SyntheticPool(p.rows, entry["source"], entry.get("note", ""), p.schema))
    return pools


# --- stages -----------------------------------------------------------------

def cmd_prepare(cfg: ExperimentConfig, work: Path, args) -> dict:
    train, test, params, info = harness.prepare_data(cfg, _run_seed(cfg))
    save_dataset(train, work / "train.csv")
    save_dataset(test, work / "test.csv")
    params.save(work / "normalizer.json")
    _write_json(work / "prepare.json", info)
    harness.log(f"prepare: train {info['train']}, test {info['test']} (pos, neg)")
    return info


def cmd_generate(cfg: ExperimentConfig, work: Path, args) -> dict:
    train, _ = _load_split(work)
    pools, quality = harness.build_pools(cfg, train, _run_seed(cfg))
    entries = []
    for i, (pool, q) in enumerate(zip(pools, quality), start=1):
        name = f"pool_{i}.csv"
        pool.save(work / name)
        _write_json(work / f"pool_{i}_quality.json", q)
        entries.append({"file": name, "source": pool.source, "note": pool.note, "rows": len(pool)})
        harness.log(f"generate: pool {i} ({pool.source}) {len(pool)} rows")
    manifest = {"pools": entries}
    _write_json(work / "pools.json", manifest)
    return manifest


def _classifiers(cfg: ExperimentConfig, args) -> list:
    if args.classifier:
        if args.classifier not in cfg.classifiers:
            raise ConfigError(f"classifier {args.classifier!r} is not in the config")
        return [args.classifier]
    return list(cfg.classifiers)


def cmd_search(cfg: ExperimentConfig, work: Path, args) -> dict:
    train, test = _load_split(work)
    pools = _load_pools(work)
    out = {}
    for name in _classifiers(cfg, args):
        ci = cfg.classifiers.index(name)
        harness.log(f"search: {name}")
        res = harness.search_ratio(cfg, name, train, pools,
                                   derive_seed(_run_seed(cfg), 50, ci), None,
                                   test if cfg.fitness_on_test else None, progress=not args.quiet)
        _write_json(work / f"ga_{name}.json", res.to_dict())
        out[name] = res.to_dict()
    return out


def _parse_ratio(text: str) -> MixRatio:
    try:
        parts = [float(x) for x in text.split(":")]
    except ValueError:
        raise ConfigError(f"--ratio must look like a:b:c, got {text!r}") from None
    if len(parts) != 3 or min(parts) < 0 or sum(parts) <= 0:
        raise ConfigError(f"--ratio needs three non-negative parts, got {text!r}")
    return MixRatio.from_weights(parts)


def cmd_evaluate(cfg: ExperimentConfig, work: Path, args) -> dict:
    train, test = _load_split(work)
    pools = _load_pools(work)
    fixed = _parse_ratio(args.ratio) if args.ratio else None
    models_dir = work / "models"
    models_dir.mkdir(exist_ok=True)
    seed = _run_seed(cfg)
    results, notes = {}, []
    for name in _classifiers(cfg, args):
        if fixed is not None:
            ratio = fixed
        else:
            ratio = GaResult.from_dict(_read_json(_require(work / f"ga_{name}.json", "search"))).ratio
        models = {v: harness.train_variant(cfg, name, v, train, pools, ratio, seed, notes)
                  for v in harness.VARIANTS}
        results[name] = {"ratio": list(ratio.r), "metrics": {}}
        for variant, model in models.items():
            _write_json(models_dir / f"{name}_{variant}.json", model.to_dict())
            results[name]["metrics"][variant] = score(test.labels, predict(model, test.rows))
        harness.log(f"evaluate: {name} G-mean "
                    + ", ".join(f"{v} {m['g_mean']:.3f}"
                                for v, m in results[name]["metrics"].items()))
    out = {"classifiers": results, "notes": sorted(set(notes))}
    _write_json(work / "evaluate.json", out)
    return out


def cmd_report(cfg: ExperimentConfig, work: Path, args) -> dict:
    report = harness.run_experiment(cfg, progress=not args.quiet)
    for fmt, ext in (("json", "json"), ("markdown", "md"), ("csv", "csv")):
        (work / f"report.{ext}").write_text(harness.render_report(report, fmt))
    sys.stdout.write(harness.render_report(report, args.format))
    if report.partial:
        raise StageError(report.failed_stage, RuntimeError(report.error))
    return report.to_dict()


COMMANDS = {
    "prepare": (cmd_prepare, "ingest, normalize and split; writes train/test CSVs"),
    "generate": (cmd_generate, "fit the three generators and write pool CSVs"),
    "search": (cmd_search, "run the GA per classifier and write GaResult JSON"),
    "evaluate": (cmd_evaluate, "train every variant and score it on the test rows"),
    "report": (cmd_report, "run the full experiment and render the report"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mixbalance",
                                     description="GA-mixed synthetic oversampling experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, help="JSON experiment config (defaults if omitted)")
        p.add_argument("--seed", type=int, help="override the config's master seed")
        p.add_argument("--workdir", type=Path, default=Path("mixbalance-run"),
                       help="directory for intermediate files (default: mixbalance-run)")
        p.add_argument("--quiet", action="store_true", help="no per-generation progress lines")
        if name in ("search", "evaluate"):
            p.add_argument("--classifier", help="restrict to one configured classifier")
        if name == "evaluate":
            p.add_argument("--ratio", help="explicit mixing ratio a:b:c instead of the GA result")
        if name == "report":
            p.add_argument("--format", choices=["json", "markdown", "csv"], default="markdown",
                           help="format printed to stdout (all three are written to the workdir)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        args.workdir.mkdir(parents=True, exist_ok=True)
    except (ConfigError, TypeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: cannot use workdir {args.workdir}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    func = COMMANDS[args.command][0]
    try:
        func(cfg, args.workdir, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except Exception as exc:
        print(f"error: stage {args.command!r} failed: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return EXIT_STAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
