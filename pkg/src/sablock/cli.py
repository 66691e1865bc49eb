"""Command-line experiment harness.

Subcommands: ``gen`` (synthetic traces), ``compress`` (one eviction plan),
``compare`` (policies head to head), ``sweep`` (budget grids over a trace
corpus), ``metrics`` (diagnostics for one trace).  Exit codes: 0 success,
1 I/O or input-file failure, 2 configuration/usage failure.  Report-style
subcommands render figures next to their CSV/JSON outputs unless
``--no-figures`` is given.  Set SABLOCK_LOG=debug|info for verbosity.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .blocksearch import DEFAULT_LADDER, SearchConfig, compress
from .errors import ConfigError, ParseError, SpecError, ValidationError
from .figures import (
    save_blocksize_sweep_figure,
    save_compare_figure,
    save_fidelity_sweep_figure,
    save_tradeoff_figure,
)
from .metrics import (
    blocksize_histogram,
    cross_sentence_rate,
    kv_bytes_estimate,
    needle_recall,
    redundancy_rate,
    retention_fidelity,
    spearman,
)
from .policies import parse_policy, run_policy
from .scoring import ScoringConfig, head_mean, score_trace, window_scores
from .segment import segment_tokens
from .trace import (
    SyntheticSpec,
    generate_synthetic,
    parse_trace,
    serialize_trace,
    write_plan,
)

log = logging.getLogger("sablock")

EXIT_OK = 0
EXIT_IO = 1
EXIT_CONFIG = 2

DEFAULT_DELIMS = ".,!?;:\n"


def _setup_logging() -> None:
    level_name = os.environ.get("SABLOCK_LOG", "warning").lower()
    level = {
        "debug": logging.DEBUG,
        "info": logging.INFO,
        "warning": logging.WARNING,
        "error": logging.ERROR,
    }.get(level_name, logging.WARNING)
    logging.basicConfig(stream=sys.stderr, level=level, format="%(levelname)s %(message)s")


def _int_list(text: str, flag: str) -> list[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"{flag} expects comma-separated integers, got {text!r}") from None
    if not values:
        raise ConfigError(f"{flag} must not be empty")
    return values


def _manifest(args: argparse.Namespace, inputs: list[str], outputs: list[str]) -> dict:
    config = {
        k: (str(v) if isinstance(v, Path) else v)
        for k, v in sorted(vars(args).items())
        if k not in ("func", "command") and not k.startswith("_")
    }
    return {
        "tool": f"sablock {__version__}",
        "subcommand": args.command,
        "config": config,
        "inputs": inputs,
        "outputs": outputs,
    }


def _load_trace(path: str | Path):
    raw = Path(path).read_bytes()
    try:
        return parse_trace(raw)
    except (ParseError, ValidationError) as e:
        raise type(e)(f"{path}: {e}") from e


def _scoring_cfg(args: argparse.Namespace) -> ScoringConfig:
    try:
        return ScoringConfig(alpha=args.alpha, eta=args.eta, epsilon=args.epsilon)
    except ValueError as e:
        raise ConfigError(str(e)) from None


def _search_cfg(args: argparse.Namespace, budget: int) -> SearchConfig:
    ladder = tuple(_int_list(args.ladder, "--ladder"))
    return SearchConfig(
        budget=budget,
        tau=args.tau,
        g_max=args.gmax,
        ladder=ladder,
        dense_range=args.dense_range,
    )


def _needle_span(args: argparse.Namespace, trace) -> tuple[int, int] | None:
    if getattr(args, "needle_at", None) is not None:
        return (args.needle_at, args.needle_len)
    meta = trace.meta or {}
    needle = meta.get("needle")
    if isinstance(needle, dict) and "start" in needle and "len" in needle:
        return (int(needle["start"]), int(needle["len"]))
    return None


def cmd_gen(args: argparse.Namespace) -> int:
    spec = SyntheticSpec(
        total_tokens=args.tokens,
        num_heads=args.heads,
        window=args.window,
        needle_start=args.needle_at,
        needle_len=args.needle_len if args.needle_at is not None else None,
        needle_boost=args.needle_boost,
        punctuation_period=args.punct_period,
        skew=args.skew,
        seed=args.seed,
    )
    trace = generate_synthetic(spec)
    out = Path(args.out)
    meta = dict(trace.meta or {})
    meta["manifest"] = _manifest(args, inputs=[], outputs=[str(out)])
    trace.meta = meta
    out.write_bytes(serialize_trace(trace))
    segments = segment_tokens(trace, args.delims, args.max_seg_len)
    print(
        f"wrote {out}: heads={trace.num_heads} window={trace.window} "
        f"T={trace.compressible_len} segments={len(segments)}"
    )
    return EXIT_OK


def cmd_compress(args: argparse.Namespace) -> int:
    scoring_cfg = _scoring_cfg(args)
    search_cfg = _search_cfg(args, args.budget)
    trace = _load_trace(args.trace)
    plan = compress(trace, scoring_cfg, search_cfg, args.delims, args.max_seg_len)

    segments = segment_tokens(trace, args.delims, args.max_seg_len)
    scores = score_trace(trace, segments, scoring_cfg)
    fidelity = retention_fidelity(scores.adjusted, plan.retained, args.budget)

    print(f"retained {len(plan.retained)} of {trace.compressible_len} tokens "
          f"(budget {args.budget}), window keeps {len(plan.window_tokens)} more")
    print(f"{'seg':>5} {'span':>13} {'budget':>6} {'g*':>3} {'fidelity':>8}")
    for seg in plan.segments:
        if seg.budget == 0:
            continue
        print(
            f"{seg.index:>5} [{seg.start:>5},{seg.end:>5}) {seg.budget:>6} "
            f"{seg.block_size:>3} {seg.fidelity:>8.4f}"
        )
    skipped = sum(1 for seg in plan.segments if seg.budget == 0)
    if skipped:
        print(f"({skipped} segments received no budget)")
    print(f"global fidelity: {fidelity:.6f}")

    if args.out:
        plan.config = {**plan.config,
                       "manifest": _manifest(args, [str(args.trace)], [str(args.out)])}
        Path(args.out).write_bytes(write_plan(plan, trace))
        print(f"wrote {args.out}")
    return EXIT_OK


def _policy_rows(args: argparse.Namespace, trace, policies: list[str]) -> list[dict]:
    scoring_cfg = _scoring_cfg(args)
    search_cfg = _search_cfg(args, args.budget)
    raw = window_scores(head_mean(trace))
    span = _needle_span(args, trace)
    rows = []
    for name in policies:
        result = run_policy(
            name,
            trace,
            args.budget,
            scoring_cfg=scoring_cfg,
            search_cfg=search_cfg,
            delimiters=args.delims,
            max_len=args.max_seg_len,
        )
        row = {
            "policy": result.policy,
            "kept": len(result.retained),
            "fidelity": retention_fidelity(raw, result.retained, args.budget),
            "redundancy": redundancy_rate(raw, result.retained, args.budget),
            "needle_recall": needle_recall(result.retained, span) if span else None,
            "retained": result.retained,
        }
        rows.append(row)
    return rows


def _print_rows(rows: list[dict]) -> None:
    print(f"{'policy':<14} {'kept':>6} {'fidelity':>9} {'redundancy':>11} {'recall':>7}")
    for row in rows:
        recall = f"{row['needle_recall']:.3f}" if row["needle_recall"] is not None else "-"
        print(
            f"{row['policy']:<14} {row['kept']:>6} {row['fidelity']:>9.4f} "
            f"{row['redundancy']:>11.4f} {recall:>7}"
        )


def cmd_compare(args: argparse.Namespace) -> int:
    policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    if not policies:
        raise ConfigError("no policies given; valid names include snapkv, chunkkv:<g>, sablock")
    for name in policies:
        parse_policy(name)
    _search_cfg(args, args.budget)
    trace = _load_trace(args.trace)
    rows = _policy_rows(args, trace, policies)
    _print_rows(rows)
    if args.out:
        out = Path(args.out)
        manifest = _manifest(args, [str(args.trace)], [str(out)])
        if args.format == "csv":
            with out.open("w", newline="") as fh:
                fh.write(f"# manifest: {json.dumps(manifest, sort_keys=True)}\n")
                writer = csv.writer(fh)
                writer.writerow(["policy", "kept", "fidelity", "redundancy", "needle_recall"])
                for row in rows:
                    recall = "" if row["needle_recall"] is None else f"{row['needle_recall']:.6f}"
                    writer.writerow(
                        [row["policy"], row["kept"], f"{row['fidelity']:.6f}",
                         f"{row['redundancy']:.6f}", recall]
                    )
        else:
            doc = {"rows": rows, "manifest": manifest}
            out.write_text(json.dumps(doc, indent=2, sort_keys=True))
        print(f"wrote {out}")
        if not args.no_figures:
            fig = save_compare_figure(rows, out.with_suffix(".png"))
            print(f"wrote {fig}")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    budgets = _int_list(args.budgets, "--budgets")
    policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    if not policies:
        raise ConfigError("no policies given")
    for name in policies:
        parse_policy(name)
    corpus_dir = Path(args.trace_dir)
    paths = sorted(corpus_dir.glob("*.json"))
    if not paths:
        print(f"error: no trace files found in {corpus_dir}", file=sys.stderr)
        return EXIT_IO
    traces = [(p, _load_trace(p)) for p in paths]

    scoring_cfg = _scoring_cfg(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    mean_g: dict[int, float] = {}
    histograms: dict[int, dict[int, int]] = {}
    fidelity: dict[str, dict[int, float]] = {name: {} for name in policies}
    recall: dict[str, dict[int, float]] = {name: {} for name in policies}
    has_needles = False

    for budget in budgets:
        search_cfg = _search_cfg(args, budget)
        plans = []
        per_policy_fid: dict[str, list[float]] = {name: [] for name in policies}
        per_policy_rec: dict[str, list[float]] = {name: [] for name in policies}
        for path, trace in traces:
            raw = window_scores(head_mean(trace))
            span = _needle_span(args, trace)
            plans.append(compress(trace, scoring_cfg, search_cfg, args.delims, args.max_seg_len))
            for name in policies:
                result = run_policy(
                    name, trace, budget,
                    scoring_cfg=scoring_cfg, search_cfg=search_cfg,
                    delimiters=args.delims, max_len=args.max_seg_len,
                )
                per_policy_fid[name].append(retention_fidelity(raw, result.retained, budget))
                if span:
                    per_policy_rec[name].append(needle_recall(result.retained, span))
                    has_needles = True
        hist = blocksize_histogram(plans)
        mean_g[budget] = hist.mean
        histograms[budget] = hist.counts
        for name in policies:
            fidelity[name][budget] = float(np.mean(per_policy_fid[name]))
            if per_policy_rec[name]:
                recall[name][budget] = float(np.mean(per_policy_rec[name]))
        print(f"budget={budget:>6} mean_block_size={hist.mean:.3f} "
              f"histogram={hist.counts}")

    corr = spearman(budgets, [mean_g[b] for b in budgets]) if len(budgets) >= 2 else float("nan")
    print(f"spearman(budget, mean_block_size) = {corr:.4f}")

    manifest = _manifest(args, [str(p) for p, _ in traces],
                         [str(out_dir / "sweep.csv"), str(out_dir / "histograms.json")])

    csv_path = out_dir / "sweep.csv"
    with csv_path.open("w", newline="") as fh:
        fh.write(f"# manifest: {json.dumps(manifest, sort_keys=True)}\n")
        writer = csv.writer(fh)
        writer.writerow(["budget", "policy", "fidelity", "redundancy", "needle_recall",
                         "mean_block_size"])
        for budget in budgets:
            for name in policies:
                rec = recall[name].get(budget)
                writer.writerow([
                    budget, name, f"{fidelity[name][budget]:.6f}",
                    f"{1.0 - fidelity[name][budget]:.6f}",
                    "" if rec is None else f"{rec:.6f}",
                    f"{mean_g[budget]:.6f}" if name == "sablock" else "",
                ])

    json_path = out_dir / "histograms.json"
    doc = {
        "budgets": budgets,
        "mean_block_size": {str(b): mean_g[b] for b in budgets},
        "histograms": {str(b): {str(g): c for g, c in histograms[b].items()} for b in budgets},
        "spearman_budget_blocksize": corr,
        "fidelity": {n: {str(b): v for b, v in f.items()} for n, f in fidelity.items()},
        "needle_recall": {n: {str(b): v for b, v in r.items()} for n, r in recall.items()}
        if has_needles else {},
        "manifest": manifest,
    }
    json_path.write_text(json.dumps(doc, indent=2, sort_keys=True))
    print(f"wrote {csv_path}")
    print(f"wrote {json_path}")

    if not args.no_figures:
        fig1 = save_blocksize_sweep_figure(budgets, histograms, mean_g,
                                           out_dir / "blocksize_vs_budget.png")
        fig2 = save_fidelity_sweep_figure(
            budgets, {n: [fidelity[n][b] for b in budgets] for n in policies},
            out_dir / "fidelity_vs_budget.png")
        print(f"wrote {fig1}")
        print(f"wrote {fig2}")
    return EXIT_OK


def cmd_metrics(args: argparse.Namespace) -> int:
    trace = _load_trace(args.trace)
    segments = segment_tokens(trace, args.delims, args.max_seg_len)
    raw = window_scores(head_mean(trace))
    sizes = _int_list(args.gs, "--gs")
    t = trace.compressible_len

    cross = {g: cross_sentence_rate(segments, g, t) for g in sizes}
    redundancy = {}
    for g in sizes:
        result = run_policy(f"chunkkv:{g}", trace, args.budget)
        redundancy[g] = redundancy_rate(raw, result.retained, args.budget)

    report: dict = {
        "T": t,
        "segments": len(segments),
        "budget": args.budget,
        "cross_sentence_rate": {str(g): cross[g] for g in sizes},
        "fixed_block_redundancy": {str(g): redundancy[g] for g in sizes},
    }
    if args.kv:
        dims = _int_list(args.kv, "--kv")
        if len(dims) != 6:
            raise ConfigError("--kv expects 6 integers: batch,layers,seq,heads,dim,bytes")
        report["kv_bytes"] = kv_bytes_estimate(*dims)

    print(f"T={t} segments={len(segments)} budget={args.budget}")
    print(f"{'g':>4} {'cross_rate':>11} {'redundancy':>11}")
    for g in sizes:
        print(f"{g:>4} {cross[g]:>11.4f} {redundancy[g]:>11.4f}")
    if "kv_bytes" in report:
        print(f"kv_bytes={report['kv_bytes']} ({report['kv_bytes'] / 2**30:.2f} GiB)")

    if args.out:
        out = Path(args.out)
        report["manifest"] = _manifest(args, [str(args.trace)], [str(out)])
        out.write_text(json.dumps(report, indent=2, sort_keys=True))
        print(f"wrote {out}")
        if not args.no_figures:
            fig = save_tradeoff_figure(sizes, [cross[g] for g in sizes],
                                       [redundancy[g] for g in sizes],
                                       out.with_suffix(".png"))
            print(f"wrote {fig}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sablock",
        description="KV-cache eviction experiments on attention-trace files",
    )
    parser.add_argument("--version", action="version", version=f"sablock {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    seg_opts = argparse.ArgumentParser(add_help=False)
    seg_opts.add_argument("--delims", default=DEFAULT_DELIMS,
                          help="delimiter characters ending a segment "
                               "(default: .,!?;: and newline)")
    seg_opts.add_argument("--max-seg-len", type=int, default=256,
                          help="split unpunctuated spans longer than this")

    scoring_opts = argparse.ArgumentParser(add_help=False)
    scoring_opts.add_argument("--alpha", type=float, default=0.9,
                              help="segment-weight influence on token scores")
    scoring_opts.add_argument("--eta", type=float, default=1.0,
                              help="diversity influence inside segment weights")
    scoring_opts.add_argument("--epsilon", type=float, default=1e-6,
                              help="entropy smoothing constant")

    search_opts = argparse.ArgumentParser(add_help=False)
    search_opts.add_argument("--tau", type=float, default=0.85,
                             help="minimum fidelity ratio to accept a block size")
    search_opts.add_argument("--gmax", type=int, default=13, help="largest block size")
    search_opts.add_argument("--ladder", default=",".join(str(g) for g in DEFAULT_LADDER),
                             help="candidate block sizes, comma-separated")
    search_opts.add_argument("--dense-range", action="store_true",
                             help="search every integer block size instead of the ladder")

    fig_opts = argparse.ArgumentParser(add_help=False)
    fig_opts.add_argument("--no-figures", action="store_true",
                          help="skip rendering PNG figures next to report files")

    p_gen = sub.add_parser("gen", parents=[seg_opts],
                           help="generate a synthetic attention trace")
    p_gen.add_argument("--tokens", type=int, required=True,
                       help="total token count including the observation window")
    p_gen.add_argument("--heads", type=int, default=4)
    p_gen.add_argument("--window", type=int, default=8)
    p_gen.add_argument("--needle-at", type=int, default=None,
                       help="needle start within the compressible region")
    p_gen.add_argument("--needle-len", type=int, default=8)
    p_gen.add_argument("--needle-boost", type=float, default=50.0)
    p_gen.add_argument("--punct-period", type=float, default=8.0,
                       help="mean tokens between delimiter tokens")
    p_gen.add_argument("--skew", type=float, default=1.0,
                       help="heavy-tail concentration of attention rows")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("-o", "--out", required=True, help="trace file to write")
    p_gen.set_defaults(func=cmd_gen)

    p_compress = sub.add_parser("compress", parents=[seg_opts, scoring_opts, search_opts],
                                help="compute an eviction plan for one trace")
    p_compress.add_argument("--trace", required=True)
    p_compress.add_argument("--budget", type=int, required=True)
    p_compress.add_argument("--seed", type=int, default=0)
    p_compress.add_argument("-o", "--out", default=None, help="plan file to write")
    p_compress.set_defaults(func=cmd_compress)

    p_compare = sub.add_parser("compare", parents=[seg_opts, scoring_opts, search_opts, fig_opts],
                               help="run several policies on one trace")
    p_compare.add_argument("--trace", required=True)
    p_compare.add_argument("--budget", type=int, required=True)
    p_compare.add_argument("--policies", required=True,
                           help="comma-separated: streaming,h2o,snapkv,chunkkv:<g>,"
                                "sentencekv,sablock")
    p_compare.add_argument("--needle-at", type=int, default=None,
                           help="override needle start for recall")
    p_compare.add_argument("--needle-len", type=int, default=8)
    p_compare.add_argument("--format", choices=("json", "csv"), default="json")
    p_compare.add_argument("--seed", type=int, default=0)
    p_compare.add_argument("-o", "--out", default=None, help="report file to write")
    p_compare.set_defaults(func=cmd_compare)

    p_sweep = sub.add_parser("sweep", parents=[seg_opts, scoring_opts, search_opts, fig_opts],
                             help="budget sweep over a trace corpus")
    p_sweep.add_argument("--trace-dir", required=True)
    p_sweep.add_argument("--budgets", required=True, help="comma-separated budgets")
    p_sweep.add_argument("--policies", default="snapkv,chunkkv:7,sablock")
    p_sweep.add_argument("--seed", type=int, default=0)
    p_sweep.add_argument("-o", "--out", required=True, help="output directory")
    p_sweep.set_defaults(func=cmd_sweep)

    p_metrics = sub.add_parser("metrics", parents=[seg_opts, fig_opts],
                               help="diagnostic metrics for one trace")
    p_metrics.add_argument("--trace", required=True)
    p_metrics.add_argument("--budget", type=int, default=96)
    p_metrics.add_argument("--gs", default="1,3,5,7,9",
                           help="block sizes to evaluate, comma-separated")
    p_metrics.add_argument("--kv", default=None,
                           help="batch,layers,seq,heads,dim,bytes for the KV size estimate")
    p_metrics.add_argument("--seed", type=int, default=0)
    p_metrics.add_argument("-o", "--out", default=None, help="report file to write")
    p_metrics.set_defaults(func=cmd_metrics)

    return parser


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, SpecError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParseError, ValidationError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
