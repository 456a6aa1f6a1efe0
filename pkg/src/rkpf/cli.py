"""Command-line entry point wiring the engine into batch workflows.

Subcommands: ingest, weights, fit, suite, simulate, mc, stats. A bundle is
a plain directory holding dataset.csv plus a manifest; every command is
deterministic given its inputs and seed, and manifests record content
digests so reruns are verifiable. Exit codes: 0 success, 2 input or
validation error, 1 internal error.
"""
from __future__ import annotations

import argparse
import json
import sys
import traceback
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    EngineError,
    InvalidTag,
    MissingData,
    RegionOrderMismatch,
    UnknownSubjectArea,
)
from .indicators import load_publications, load_vocabulary, region_year_indicators, write_indicator_csv
from .manifest import build_manifest
from .panel import (
    PanelDataset,
    descriptive_stats,
    load_panel_csv,
    render_stats_text,
    validate_balanced,
    write_panel_csv,
)
from .simulate import DgpConfig, generate_panel, monte_carlo
from .estimation import fit_model
from .suite import (
    MAIN_TAGS,
    ComparisonTable,
    expand_notation,
    render_fit_text,
    render_table,
    run_suite,
)
from .weights import (
    build_profile_matrix,
    build_weights,
    correlation_matrix,
    load_profiles_csv,
    load_weights_csv,
    write_profiles_csv,
    write_weights_csv,
    write_weights_json,
)

DATASET_NAME = "dataset.csv"


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
        if not text.endswith("\n"):
            fh.write("\n")


def _out_dir(args) -> Path:
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_bundle(bundle: str) -> PanelDataset:
    path = Path(bundle) / DATASET_NAME
    if not path.exists():
        raise MissingData(f"bundle {bundle!r} has no {DATASET_NAME}")
    return load_panel_csv(path)


def _tag_list(raw: str) -> list[str]:
    tags = [t.strip() for t in raw.split(",") if t.strip()]
    if not tags:
        raise InvalidTag("empty tag list")
    return tags


def _reorder_profiles(profiles, region_order):
    """Align a profile matrix with a bundle's region order."""
    from .weights import ThematicProfileMatrix

    if profiles.regions == tuple(region_order):
        return profiles
    missing = set(region_order) - set(profiles.regions)
    if missing:
        raise RegionOrderMismatch(
            f"profiles missing bundle regions: {sorted(missing)}"
        )
    index = {r: i for i, r in enumerate(profiles.regions)}
    rows = [profiles.shares[index[r]] for r in region_order]
    return ThematicProfileMatrix(
        tuple(region_order), profiles.subject_areas, np.asarray(rows)
    )


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_ingest(args) -> int:
    out = _out_dir(args)
    dataset = load_panel_csv(args.panel)
    inputs = [args.panel]

    if args.pubs:
        pubs = load_publications(args.pubs)
        inputs.append(args.pubs)
        if args.vocab:
            vocabulary = set(load_vocabulary(args.vocab))
            inputs.append(args.vocab)
            for rec in pubs:
                unknown = rec.subject_areas - vocabulary
                if unknown:
                    raise UnknownSubjectArea(
                        f"record {rec.id!r}: subject areas {sorted(unknown)} "
                        "not in vocabulary"
                    )
        rows = region_year_indicators(pubs)
        write_indicator_csv(rows, out / "indicators.csv")
        merged = {
            name: np.full((dataset.n_regions, dataset.n_years), np.nan)
            for name in ("PUBS", "FWCI", "Q1SH", "NQSH")
        }
        region_index = {r: i for i, r in enumerate(dataset.region_ids)}
        year_index = {y: j for j, y in enumerate(dataset.years)}
        for row in rows:
            i = region_index.get(row.region)
            j = year_index.get(row.year)
            if i is None or j is None:
                continue  # record outside the panel frame
            merged["PUBS"][i, j] = row.pub_count
            merged["FWCI"][i, j] = row.fwci
            merged["Q1SH"][i, j] = row.q1_share
            merged["NQSH"][i, j] = row.nq_share
        for name, values in merged.items():
            dataset = dataset.with_variable(name, values)

    report = validate_balanced(dataset)
    _write_json(out / "validation.json", report.to_dict())
    print(report.render_text())
    if not report.passed:
        return 2

    write_panel_csv(dataset, out / DATASET_NAME)
    build_manifest("ingest", inputs).write(out / "manifest.json")
    print(f"bundle written to {out}")
    return 0


def cmd_weights(args) -> int:
    out = _out_dir(args)
    inputs = []
    if args.profiles:
        profiles = load_profiles_csv(args.profiles)
        inputs.append(args.profiles)
        if args.bundle:
            profiles = _reorder_profiles(profiles, _load_bundle(args.bundle).region_ids)
    elif args.pubs:
        pubs = load_publications(args.pubs)
        inputs.append(args.pubs)
        if args.vocab:
            vocabulary = load_vocabulary(args.vocab)
            inputs.append(args.vocab)
        else:
            vocabulary = sorted({a for rec in pubs for a in rec.subject_areas})
        regions = None
        if args.bundle:
            regions = list(_load_bundle(args.bundle).region_ids)
        profiles = build_profile_matrix(pubs, vocabulary, regions)
    else:
        raise MissingData("weights needs --profiles or --pubs")

    w = build_weights(correlation_matrix(profiles), profiles.regions)
    write_weights_csv(w, out / "weights.csv")
    write_weights_json(w, out / "weights.json")
    build_manifest("weights", inputs).write(out / "manifest.json")
    print(
        f"weights written to {out} "
        f"({len(w.regions)} regions, {len(w.isolated)} isolated)"
    )
    return 0


def cmd_fit(args) -> int:
    out = _out_dir(args)
    dataset = _load_bundle(args.bundle)
    spec = expand_notation(args.spec, args.covariance)
    w = load_weights_csv(args.weights) if args.weights else None
    fit = fit_model(dataset, spec, w)

    _write_json(out / "fit.json", fit.to_dict())
    fmt = args.format
    if fmt in ("csv", "md"):
        table = ComparisonTable((args.spec,), (fit,))
        _write_text(out / f"fit.{fmt}", render_table(table, fmt))
    elif fmt != "json":
        _write_text(out / "fit.txt", render_fit_text(fit))
    inputs = [Path(args.bundle) / DATASET_NAME] + ([args.weights] if args.weights else [])
    build_manifest("fit", inputs, config_text=args.spec).write(out / "manifest.json")
    print(render_fit_text(fit))
    return 0


def cmd_suite(args) -> int:
    out = _out_dir(args)
    dataset = _load_bundle(args.bundle)
    tags = _tag_list(args.specs)
    w = load_weights_csv(args.weights) if args.weights else None
    table = run_suite(dataset, w, tags, args.covariance, dual_errors=args.dual_errors)

    _write_json(out / "suite.json", table.to_dict())
    fmt = args.format
    ext = {"text": "txt", "csv": "csv", "md": "md"}
    if fmt != "json":
        _write_text(out / f"suite.{ext[fmt]}", render_table(table, "text" if fmt == "text" else fmt))
    inputs = [Path(args.bundle) / DATASET_NAME] + ([args.weights] if args.weights else [])
    build_manifest("suite", inputs, config_text=args.specs).write(out / "manifest.json")
    print(render_table(table, "text"))
    return 0


def cmd_simulate(args) -> int:
    out = _out_dir(args)
    cfg = DgpConfig.from_yaml(args.config) if args.config else DgpConfig()
    if args.seed is not None:
        from dataclasses import replace

        cfg = replace(cfg, seed=args.seed)
    generated = generate_panel(cfg)

    write_panel_csv(generated.dataset, out / DATASET_NAME)
    write_profiles_csv(generated.profiles, out / "profiles.csv")
    write_weights_csv(generated.weights, out / "weights.csv")
    write_weights_json(generated.weights, out / "weights.json")
    cfg.to_yaml(out / "dgp.yaml")
    config_text = json.dumps(cfg.to_mapping(), sort_keys=True)
    build_manifest("simulate", [args.config] if args.config else [], config_text).write(
        out / "manifest.json"
    )
    print(
        f"synthetic bundle written to {out} "
        f"({cfg.n_regions} regions x {cfg.n_years} years, seed {cfg.seed})"
    )
    return 0


def cmd_mc(args) -> int:
    out = _out_dir(args)
    cfg = DgpConfig.from_yaml(args.config) if args.config else DgpConfig()
    if args.seed is not None:
        from dataclasses import replace

        cfg = replace(cfg, seed=args.seed)
    report = monte_carlo(cfg, args.spec, args.reps, args.covariance)

    _write_json(out / "mc.json", report.to_dict())
    _write_text(out / "mc.txt", report.render_text())
    config_text = json.dumps(cfg.to_mapping(), sort_keys=True) + f"|{args.spec}|{args.reps}"
    build_manifest("mc", [args.config] if args.config else [], config_text).write(
        out / "manifest.json"
    )
    print(report.render_text())
    return 0


def cmd_stats(args) -> int:
    out = _out_dir(args)
    dataset = _load_bundle(args.bundle)
    names = _tag_list(args.vars) if args.vars else list(dataset.variables)
    table = descriptive_stats(dataset, names)
    _write_json(out / "stats.json", table)
    _write_text(out / "stats.txt", render_stats_text(table))
    build_manifest("stats", [Path(args.bundle) / DATASET_NAME]).write(out / "manifest.json")
    print(render_stats_text(table))
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _positive_reps(raw: str) -> int:
    value = int(raw)
    if value < 2:
        raise argparse.ArgumentTypeError("replications must be >= 2")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rkpf",
        description="Regional knowledge production function engine",
    )
    parser.add_argument("--version", action="version", version=f"rkpf {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--output-dir", default=".", help="directory for outputs")
        p.add_argument(
            "--format",
            choices=("text", "csv", "md", "json"),
            default="text",
            help="rendering for human-readable outputs",
        )
        p.add_argument(
            "--seed",
            type=int,
            help="seed override; consumed by the stochastic commands",
        )

    p = sub.add_parser("ingest", help="validate a panel CSV into a bundle")
    common(p)
    p.add_argument("--panel", required=True, help="long-format panel CSV")
    p.add_argument("--pubs", help="publication records (CSV or JSON-lines)")
    p.add_argument("--vocab", help="subject-area vocabulary, one code per line")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("weights", help="build the thematic weights matrix")
    common(p)
    p.add_argument("--profiles", help="precomputed region x subject share CSV")
    p.add_argument("--pubs", help="publication records to derive profiles from")
    p.add_argument("--vocab", help="subject-area vocabulary")
    p.add_argument("--bundle", help="bundle whose region order the weights follow")
    p.set_defaults(func=cmd_weights)

    p = sub.add_parser("fit", help="estimate one specification")
    common(p)
    p.add_argument("--bundle", required=True)
    p.add_argument("--spec", required=True, help="specification tag, e.g. fe.tw.q.sl")
    p.add_argument("--weights", help="weights CSV (required for sl tags)")
    p.add_argument(
        "--covariance",
        choices=("classical", "cluster_by_region"),
        default="cluster_by_region",
    )
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("suite", help="run a specification comparison table")
    common(p)
    p.add_argument("--bundle", required=True)
    p.add_argument(
        "--specs",
        default=",".join(MAIN_TAGS),
        help="comma-separated tags (default: the seven-model ladder)",
    )
    p.add_argument("--weights", help="weights CSV (required for sl tags)")
    p.add_argument(
        "--covariance",
        choices=("classical", "cluster_by_region"),
        default="cluster_by_region",
    )
    p.add_argument(
        "--dual-errors",
        action="store_true",
        help="report classical and robust standard errors per cell",
    )
    p.set_defaults(func=cmd_suite)

    p = sub.add_parser("simulate", help="generate a synthetic bundle")
    common(p)
    p.add_argument("--config", help="DGP config YAML")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("mc", help="Monte Carlo bias/coverage study")
    common(p)
    p.add_argument("--config", help="DGP config YAML")
    p.add_argument("--spec", default="fe.tw.q.sl")
    p.add_argument("--reps", type=_positive_reps, required=True)
    p.add_argument(
        "--covariance",
        choices=("classical", "cluster_by_region"),
        default="cluster_by_region",
    )
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("stats", help="descriptive statistics for bundle variables")
    common(p)
    p.add_argument("--bundle", required=True)
    p.add_argument("--vars", help="comma-separated variable names (default: all)")
    p.set_defaults(func=cmd_stats)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
