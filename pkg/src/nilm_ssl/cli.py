"""Command-line entry point: ``nilm-ssl <subcommand> ...``.

Every subcommand accepts ``--seed``, ``--config`` and ``--out``.  Errors
print a single ``error: <Kind>: <message>`` line on stderr and exit 1;
usage errors exit 2.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import models as M
from .data.series import (
    CHANNEL_DAT,
    REFIT_CSV,
    load_channel_household,
    load_refit_household,
    read_canonical_csv,
    write_canonical_csv,
)
from .data.synthetic import desk_appliances, generate_synthetic
from .errors import NilmError, UsageError
from .metrics import Cell, emit_report, evaluate, read_estimate_csv, write_estimate_csv
from .pipeline import (
    FSSL,
    PSSL,
    ZSL,
    CaseConfig,
    DataCatalog,
    disaggregate,
    downstream_finetune,
    pretext_train,
    run_case,
    train_zsl,
    write_desk_case,
)

log = logging.getLogger("nilm_ssl")


def _pairs(items, flag):
    out = {}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"{flag} expects NAME=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k] = v
    return out


def _need(args, name):
    if getattr(args, name) is None:
        raise UsageError(f"--{name.replace('_', '-')} is required")
    return getattr(args, name)


def cmd_ingest(args):
    out = _need(args, "out")
    chans = _pairs(args.channel, "--channel")
    if args.format == REFIT_CSV:
        h = load_refit_household(_need(args, "input"), chans, start=args.start, end=args.end)
    else:
        h = load_channel_household(_need(args, "input"), chans, start=args.start, end=args.end)
    write_canonical_csv(h, out)
    print(f"wrote {len(h)} samples ({int(h.valid.sum())} valid) to {out}")


def cmd_synth(args):
    out = Path(_need(args, "out"))
    seed = 0 if args.seed is None else args.seed
    if args.desk_case:
        cfg = write_desk_case(out, days=args.days, seed=seed, n_sources=args.sources,
                              noise_std=args.noise)
        print(f"wrote desk corpus and {cfg}")
        return
    h = generate_synthetic(desk_appliances(), args.days, seed, noise_std=args.noise, name="synthetic")
    path = write_canonical_csv(h, out / "household.csv")
    print(f"wrote {path}")


def _experiment(args, scheme):
    cfg = CaseConfig.load(_need(args, "config"), seed=args.seed)
    appliance = args.appliance or cfg.appliances[0]
    return cfg, cfg.experiment(args.arch, appliance, scheme)


def cmd_pretrain(args):
    cfg, spec = _experiment(args, FSSL)
    if args.window is not None:
        spec.window = args.window
    model = pretext_train(spec)
    M.save_checkpoint(model, _need(args, "out"))


def cmd_finetune(args):
    cfg, spec = _experiment(args, args.scheme)
    pretext = M.load_checkpoint(_need(args, "pretext"))
    spec.window = pretext.window
    model = downstream_finetune(pretext, spec)
    M.save_checkpoint(model, _need(args, "out"))


def cmd_train_zsl(args):
    cfg, spec = _experiment(args, ZSL)
    model = train_zsl(spec)
    M.save_checkpoint(model, _need(args, "out"))


def cmd_disaggregate(args):
    model = M.load_checkpoint(_need(args, "model"))
    h = read_canonical_csv(_need(args, "input"))
    estimate = disaggregate(model, h.aggregate)
    truth = None
    if args.truth_channel:
        truth = h.channel(args.truth_channel)
    write_estimate_csv(_need(args, "out"), estimate, truth)


def cmd_evaluate(args):
    pred = read_estimate_csv(_need(args, "pred"), args.pred_column)
    truth = read_estimate_csv(_need(args, "truth"), args.truth_column)
    report = evaluate(pred, truth)
    table = emit_report([Cell(args.appliance, args.method, report)])
    if args.out:
        table.write_csv(args.out)
    s = "—" if report.sae is None else repr(report.sae)
    print(f"mae_w={report.mae!r} sae={s} epd_kwh_per_day={report.epd!r} "
          f"true_kwh={report.true_kwh!r} pred_kwh={report.pred_kwh!r} days={report.days}")


def cmd_run_case(args):
    cfg = CaseConfig.load(_need(args, "config"), seed=args.seed)
    out = Path(_need(args, "out"))
    result = run_case(cfg, out, DataCatalog())
    failed = [c for c in result.cells if c.report is None]
    print(f"{len(result.cells) - len(failed)}/{len(result.cells)} cells populated; results in {out / 'results.csv'}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="random seed (overrides the config)")
    common.add_argument("--config", default=None, help="case configuration (YAML)")
    common.add_argument("--out", default=None, help="output file or directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="nilm-ssl", description="Self-supervised seq2point NILM toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", parents=[common], help="meter files -> canonical aligned CSV")
    s.add_argument("--format", choices=[REFIT_CSV, CHANNEL_DAT], required=True)
    s.add_argument("--input", help="REFIT CSV, or the aggregate channel file")
    s.add_argument("--channel", action="append",
                   help="APPLIANCE=ApplianceK (refit_csv) or APPLIANCE=path (channel_dat)")
    s.add_argument("--start", type=int, default=None, help="unix seconds")
    s.add_argument("--end", type=int, default=None, help="unix seconds")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("synth", parents=[common], help="write a seeded synthetic corpus")
    s.add_argument("--days", type=int, default=14)
    s.add_argument("--noise", type=float, default=20.0, help="aggregate noise std (W)")
    s.add_argument("--sources", type=int, default=2, help="number of labeled source houses")
    s.add_argument("--desk-case", action="store_true", default=True,
                   help="write target/source houses plus desk_case.cfg (default)")
    s.add_argument("--single", dest="desk_case", action="store_false",
                   help="write one household.csv only")
    s.set_defaults(func=cmd_synth)

    for name, func, extra in (
        ("pretrain", cmd_pretrain, ()),
        ("finetune", cmd_finetune, ("scheme", "pretext")),
        ("train-zsl", cmd_train_zsl, ()),
    ):
        s = sub.add_parser(name, parents=[common])
        s.add_argument("--arch", choices=list(M.ARCHITECTURES), required=True)
        s.add_argument("--appliance", default=None)
        if name == "pretrain":
            s.add_argument("--window", type=int, default=None)
        if "scheme" in extra:
            s.add_argument("--scheme", choices=[PSSL, FSSL], required=True)
            s.add_argument("--pretext", required=True, help="pretext checkpoint")
        s.set_defaults(func=func)

    s = sub.add_parser("disaggregate", parents=[common], help="estimate one appliance from an aggregate")
    s.add_argument("--model", required=True)
    s.add_argument("--input", required=True, help="canonical household CSV")
    s.add_argument("--truth-channel", default=None, help="also write this channel as truth_watts")
    s.set_defaults(func=cmd_disaggregate)

    s = sub.add_parser("evaluate", parents=[common], help="MAE/SAE/EpD of an estimate CSV")
    s.add_argument("--pred", required=True)
    s.add_argument("--truth", required=True)
    s.add_argument("--pred-column", default="estimate_watts")
    s.add_argument("--truth-column", default="estimate_watts")
    s.add_argument("--appliance", default="appliance")
    s.add_argument("--method", default="estimate")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("run-case", parents=[common], help="all architecture x scheme x appliance cells")
    s.set_defaults(func=cmd_run_case)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        print(f"error: UsageError: {exc}", file=sys.stderr)
        return 2
    except NilmError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: OSError: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
