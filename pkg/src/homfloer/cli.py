"""Command line entry point: ``run``, ``validate`` and ``snf``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import serialize
from .config import load_config
from .errors import ConfigError, HomFloerError
from .homology import smith_normal_form, snf_json

log = logging.getLogger("homfloer")


def _cmd_run(args) -> int:
    from .pipeline import run_pipeline
    from .report import emit_reports

    cfg = load_config(args.config)
    overrides = {}
    if args.wide_scan:
        overrides["wide_scan"] = True
    if args.dump_curves:
        overrides["dump_curves"] = True
    if args.out:
        overrides["out_dir"] = args.out
    cfg = cfg.with_(**overrides)
    res = run_pipeline(cfg)
    files = emit_reports(res, cfg.out_dir)
    r = res.report
    print(f"classes {r.n_primary_classes}  c_k {dict(sorted(r.c_k.items()))}  h_k {dict(sorted(r.h_k.items()))}")
    if cfg.wide_scan:
        print(f"wide scan: {r.oracle['pairs_scanned']} generator pairs, {len(r.oracle['violations'])} violations")
    for w in r.warnings:
        print(f"warning: {w}")
    print("wrote " + ", ".join(sorted(str(p) for p in files.values())))
    return 0


def _cmd_validate(args) -> int:
    from .pipeline import run_pipeline
    from .report import emit_partial

    cfg = load_config(args.config)
    if args.out:
        cfg = cfg.with_(out_dir=args.out)
    res = run_pipeline(cfg, upto=3)
    emit_partial(res, cfg.out_dir)
    for pair, pts in res.points.items():
        t = res.tangles[pair]
        n_cls = sum(c.pair == pair for c in res.classes)
        print(f"pair {pair[0]:+d}{pair[1]:+d}: {len(pts)} points, {int(t.primary.sum())} primary, {n_cls} classes")
    for w in res.warnings:
        print(f"warning: {w}")
    return 0


def _cmd_snf(args) -> int:
    try:
        data = json.loads(Path(args.matrix).read_text())
    except (OSError, ValueError) as e:
        raise ConfigError(f"cannot read matrix file {args.matrix}: {e}") from None
    A = data["matrix"] if isinstance(data, dict) else data
    if not isinstance(A, list) or not all(isinstance(r, list) and all(isinstance(v, int) for v in r) for r in A):
        raise ConfigError("matrix must be a list of integer rows (or {\"matrix\": [...]})")
    if len({len(r) for r in A}) > 1:
        raise ConfigError("matrix rows have different lengths")
    import numpy as np

    shape = (len(A), len(A[0]) if A else 0)
    res = smith_normal_form(np.array(A, dtype=object).reshape(shape))
    sys.stdout.write(serialize.dumps(snf_json(res)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="homfloer", description="Primary homoclinic Floer homology of planar maps")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="full pipeline with all artifacts")
    run.add_argument("--config", required=True)
    run.add_argument("--wide-scan", action="store_true", help="cross-check every coefficient with a wide bigon scan")
    run.add_argument("--dump-curves", action="store_true", help="also write curves.csv")
    run.add_argument("--out", help="output directory (overrides the config)")
    run.set_defaults(func=_cmd_run)
    val = sub.add_parser("validate", help="steps 0 to 3 only: tracing, crossings, primary classes")
    val.add_argument("--config", required=True)
    val.add_argument("--out")
    val.set_defaults(func=_cmd_validate)
    snf = sub.add_parser("snf", help="exact Smith normal form of an integer matrix in JSON")
    snf.add_argument("matrix")
    snf.set_defaults(func=_cmd_snf)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = logging.StreamHandler()
    handler.setLevel(logging.INFO if args.verbose else logging.ERROR)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except HomFloerError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    finally:
        log.removeHandler(handler)


if __name__ == "__main__":
    sys.exit(main())
