"""Command-line entry point.

Subcommands: ``slices`` (membership dump + summary), ``train`` (seeded runs
with checkpoints and epoch logs), ``eval`` (per-slice reports, optional lift
columns), ``report`` (render saved reports), ``attention`` (per-sample slice
distribution inspection). Every command is driven by a JSON run config;
flags override the stochastic/attention settings. Outputs are deterministic
for a fixed config + seed.

Exit codes: 0 success, 2 configuration/contract errors, 3 data errors,
4 numeric failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt_mod
from . import data as data_mod
from . import metrics as met
from .config import Pipeline, build_pipeline, load_run_config
from .errors import (
    ConfigError,
    ContractError,
    DataError,
    DimensionError,
    NumericError,
    ParameterError,
    SliceMoaError,
)
from .model import Model, ModelConfig
from .rng import derive_run_seed
from .training import TrainConfig, train

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _apply_overrides(cfg, args):
    if getattr(args, "model", None):
        cfg.model.kind = args.model.replace("-", "_")
    if getattr(args, "phi", None):
        cfg.model.moa.phi = args.phi.replace("-", "_")
    if getattr(args, "combine_op", None):
        cfg.model.moa.combine_op = args.combine_op
    if getattr(args, "tau", None) is not None:
        cfg.model.moa.tau = args.tau
    if getattr(args, "expert_confidence", False):
        cfg.model.moa.use_expert_confidence = True
    if getattr(args, "stochastic_eval", False):
        cfg.model.moa.stochastic_eval = True
    if getattr(args, "seed", None) is not None:
        cfg.train.seed = args.seed
    if getattr(args, "runs", None) is not None:
        cfg.runs = args.runs
    if getattr(args, "lift_mode", None):
        cfg.lift_mode = args.lift_mode
    if getattr(args, "output_dir", None):
        cfg.output_dir = args.output_dir
    return cfg


def _load_config(args):
    cfg = load_run_config(args.config)
    return _apply_overrides(cfg, args)


def _out_dir(cfg) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_jsonl(path: Path, records):
    path.write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in records), encoding="utf-8")


# -- slices -----------------------------------------------------------------


def cmd_slices(args) -> int:
    cfg = _load_config(args)
    dataset = data_mod.load_dataset(
        cfg.dataset.path, cfg.dataset.format, cfg.dataset.text_col, cfg.dataset.label_col,
        id_col=cfg.dataset.id_col, lowercase=cfg.dataset.lowercase,
    )
    gamma = cfg.schema.assign_all(dataset.texts)
    out = _out_dir(cfg)
    _write_jsonl(
        out / "memberships.jsonl",
        ({"id": rid, "gamma": row.tolist()} for rid, row in zip(dataset.ids, gamma)),
    )
    names = cfg.schema.names
    sizes = gamma.sum(axis=0)
    print(f"{len(dataset)} samples, {len(names)} slices -> {out / 'memberships.jsonl'}")
    for name, size in zip(names, sizes):
        print(f"  {name:>12s}: {int(size)}")
    print("pairwise overlaps (monitored slices):")
    for i in range(1, len(names)):
        for j in range(i + 1, len(names)):
            both = int(((gamma[:, i] == 1) & (gamma[:, j] == 1)).sum())
            print(f"  {names[i]} & {names[j]}: {both}")
    return 0


# -- train ------------------------------------------------------------------


def _resolve_model_config(cfg, pipeline: Pipeline) -> ModelConfig:
    mc = cfg.model
    mc.d = pipeline.d
    mc.C = pipeline.dataset.num_classes
    mc.k = cfg.schema.k
    return mc.validate()


def _checkpoint_meta(cfg, mc: ModelConfig, pipeline: Pipeline, seed: int) -> dict:
    return {
        "model": mc.to_record(),
        "schema": cfg.schema.to_config(),
        "slices_lowercase": cfg.schema.lowercase,
        "label_vocab": pipeline.dataset.label_vocab,
        "train": cfg.train.to_record(),
        "seed": seed,
    }


def _evaluate(model: Model, pipeline: Pipeline, cfg):
    test = pipeline.splits[2]
    preds = model.predict(test.X)
    num_classes = pipeline.dataset.num_classes
    reports = {}
    for metric in cfg.metric_names(num_classes):
        reports[metric] = met.per_slice(
            metric, preds, test.y, test.gamma, cfg.schema.names, num_classes, cfg.f1_average
        )
    return reports


def _report_records(label: str, reports: dict) -> list[dict]:
    records = []
    for metric, rep in sorted(reports.items()):
        records.append({"model": label, "metric": metric, "slice": "overall", "value": rep.overall, "n": rep.n})
        for name in rep.slices:
            records.append(
                {"model": label, "metric": metric, "slice": name,
                 "value": rep.slices[name], "n": rep.slice_sizes.get(name, 0)}
            )
    return records


def _reports_from_records(records: list[dict]):
    """Rebuild {model: {metric: SliceReport}} from report.jsonl records."""
    tree: dict[str, dict[str, dict]] = {}
    for rec in records:
        by_metric = tree.setdefault(rec["model"], {})
        slot = by_metric.setdefault(rec["metric"], {"slices": {}, "sizes": {}, "overall": None, "n": 0})
        if rec["slice"] == "overall":
            slot["overall"] = rec["value"]
            slot["n"] = rec["n"]
        else:
            slot["slices"][rec["slice"]] = rec["value"]
            slot["sizes"][rec["slice"]] = rec["n"]
    out = {}
    for model, metrics in tree.items():
        out[model] = {
            m: met.SliceReport(metric=m, overall=s["overall"], slices=s["slices"],
                               slice_sizes=s["sizes"], n=s["n"])
            for m, s in metrics.items()
        }
    return out


def _load_report_file(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise DataError(f"report file not found: {path}")
    records = [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line]
    return _reports_from_records(records)


def cmd_train(args) -> int:
    cfg = _load_config(args)
    pipeline = build_pipeline(cfg)
    mc = _resolve_model_config(cfg, pipeline)
    out = _out_dir(cfg)
    data_mod.write_label_vocab(out / "labels.txt", pipeline.dataset.label_vocab)

    per_run_reports = []
    for run_idx in range(cfg.runs):
        seed = cfg.train.seed if cfg.runs == 1 else derive_run_seed(cfg.train.seed, run_idx)
        run_dir = out / f"run{run_idx}"
        run_dir.mkdir(parents=True, exist_ok=True)
        model = Model(mc, seed=seed)
        train_cfg = TrainConfig(**{**cfg.train.to_record(), "seed": seed})
        state = train(model, pipeline.splits[0], pipeline.splits[1], train_cfg,
                      log_path=run_dir / "epochs.jsonl")
        ckpt_mod.save_checkpoint(run_dir / "model.ckpt", model.state_dict(),
                                 _checkpoint_meta(cfg, mc, pipeline, seed))
        reports = _evaluate(model, pipeline, cfg)
        _write_jsonl(run_dir / "report.jsonl", _report_records(mc.kind, reports))
        per_run_reports.append(reports)
        print(f"run {run_idx}: seed={seed} best_epoch={state.best_epoch} "
              f"val_{train_cfg.selection_metric}={state.best_score:.4f}")

    metric_names = cfg.metric_names(pipeline.dataset.num_classes)
    aggregate = {}
    for metric in metric_names:
        overall = float(np.mean([r[metric].overall for r in per_run_reports]))
        slices = {}
        for name in cfg.schema.monitored:
            vals = [r[metric].slices.get(name) for r in per_run_reports]
            vals = [v for v in vals if v is not None]
            slices[name] = float(np.mean(vals)) if vals else None
        aggregate[metric] = {"overall": overall, "slices": slices}
        line = f"mean {metric}: overall={overall:.4f}"
        for name, v in slices.items():
            line += f" {name}={'NA' if v is None else f'{v:.4f}'}"
        print(line)
    (out / "aggregate.json").write_text(json.dumps(aggregate, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return 0


# -- eval ----------------------------------------------------------------------


def _load_model_from_checkpoint(path, cfg, pipeline: Pipeline) -> tuple[Model, dict]:
    state, meta = ckpt_mod.load_checkpoint(path)
    mc = ModelConfig.from_record(meta["model"])
    schema_names = [entry["name"] for entry in meta["schema"]]
    if list(schema_names) != list(cfg.schema.names):
        raise ContractError(
            f"checkpoint schema {schema_names} does not match config schema {list(cfg.schema.names)}"
        )
    if mc.d != pipeline.d:
        raise ContractError(f"checkpoint d={mc.d} does not match backbone width {pipeline.d}")
    if meta.get("label_vocab") != pipeline.dataset.label_vocab:
        raise ContractError("checkpoint label vocabulary does not match the dataset")
    model = Model(mc, seed=meta.get("seed", 0))
    model.load_state_dict(state)
    return model, meta


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    pipeline = build_pipeline(cfg)
    model, meta = _load_model_from_checkpoint(args.checkpoint, cfg, pipeline)
    label = meta["model"]["kind"]
    reports = _evaluate(model, pipeline, cfg)
    out = _out_dir(cfg)
    report_path = Path(args.out) if args.out else out / "report.jsonl"
    _write_jsonl(report_path, _report_records(label, reports))

    rows = [(label, reports)]
    baseline_name = None
    if args.baseline_report:
        base = _load_report_file(args.baseline_report)
        for base_label, base_reports in base.items():
            rows.insert(0, (base_label, base_reports))
            baseline_name = base_label
            break
    print(met.render_table(rows, cfg.metric_names(pipeline.dataset.num_classes),
                           list(cfg.schema.names), baseline=baseline_name, lift_mode=cfg.lift_mode))
    print(f"report written to {report_path}")
    return 0


# -- report ---------------------------------------------------------------------


def cmd_report(args) -> int:
    cfg = _load_config(args)
    rows = []
    metrics_seen: list[str] = []
    baseline_name = None
    if args.baseline_report:
        for label, reports in _load_report_file(args.baseline_report).items():
            rows.append((label, reports))
            baseline_name = label
            metrics_seen.extend(m for m in reports if m not in metrics_seen)
    for path in args.reports:
        for label, reports in _load_report_file(path).items():
            rows.append((label, reports))
            metrics_seen.extend(m for m in reports if m not in metrics_seen)
    if not rows:
        raise ConfigError("report: no report files supplied")
    print(met.render_table(rows, metrics_seen, list(cfg.schema.names),
                           baseline=baseline_name, lift_mode=cfg.lift_mode))
    return 0


# -- attention --------------------------------------------------------------------


def cmd_attention(args) -> int:
    cfg = _load_config(args)
    pipeline = build_pipeline(cfg)
    model, meta = _load_model_from_checkpoint(args.checkpoint, cfg, pipeline)
    if meta["model"]["kind"] == "baseline":
        raise ContractError("attention inspection needs a slice-aware checkpoint, got a baseline model")
    records = []
    for sample_id in args.ids:
        idx = pipeline.index_of(sample_id)
        trace = model.trace(pipeline.X[idx])
        rec = {
            "id": sample_id,
            "text": pipeline.dataset.texts[idx],
            "slices": list(cfg.schema.names),
            "gamma": pipeline.gamma[idx].tolist(),
            "p1": [round(float(v), 6) for v in trace.p1],
            "p2": [round(float(v), 6) for v in trace.p2] if trace.p2 is not None else None,
        }
        records.append(rec)
        print(f"{sample_id}: {rec['text']!r}")
        print(f"  gamma: {rec['gamma']}")
        for dist_name, dist in (("p1", trace.p1), ("p2", trace.p2)):
            if dist is None:
                continue
            bars = "  ".join(
                f"{name}={v:.3f} {'#' * int(round(20 * v))}" for name, v in zip(cfg.schema.names, dist)
            )
            print(f"  {dist_name}: {bars}")
    out = _out_dir(cfg)
    target = Path(args.out) if args.out else out / "attention.jsonl"
    _write_jsonl(target, records)
    print(f"records written to {target}")
    return 0


# -- entry point ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slicemoa", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, checkpoint=False):
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--model", choices=["baseline", "sbl", "sbl-moa", "sbl_moa"])
        p.add_argument("--phi", choices=["softmax", "gumbel-soft", "gumbel-hard", "gumbel_soft", "gumbel_hard"])
        p.add_argument("--combine-op", dest="combine_op", choices=["add", "mul"])
        p.add_argument("--tau", type=float)
        p.add_argument("--expert-confidence", dest="expert_confidence", action="store_true")
        p.add_argument("--stochastic-eval", dest="stochastic_eval", action="store_true")
        p.add_argument("--seed", type=int)
        p.add_argument("--runs", type=int)
        p.add_argument("--lift-mode", dest="lift_mode", choices=["points", "relative"])
        p.add_argument("--output-dir", dest="output_dir")
        if checkpoint:
            p.add_argument("--checkpoint", required=True)

    p = sub.add_parser("slices", help="write per-sample memberships and print slice sizes")
    common(p)
    p.set_defaults(func=cmd_slices)

    p = sub.add_parser("train", help="run seeded training, write checkpoints and logs")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint with per-slice metrics")
    common(p, checkpoint=True)
    p.add_argument("--baseline-report", dest="baseline_report")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="render saved reports as an aligned table")
    common(p)
    p.add_argument("reports", nargs="*")
    p.add_argument("--baseline-report", dest="baseline_report")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("attention", help="inspect per-sample slice distributions")
    common(p, checkpoint=True)
    p.add_argument("--ids", nargs="+", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_attention)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ParameterError, ContractError, DimensionError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except SliceMoaError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
