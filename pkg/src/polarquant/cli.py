"""Command line entry point: design, simulate, report, verify."""

from __future__ import annotations

import argparse
import sys

import numpy as np


def _cmd_design(args) -> int:
    from polarquant.codec import CodeConfig
    from polarquant.fa_design import design_decoder

    cfg = CodeConfig.construct(args.n, args.k, args.construction)
    spec = design_decoder(cfg, args.w, args.wint, args.ebn0, args.variant,
                          rate=args.rate if args.rate is not None else None)
    spec.save(args.out)
    print(f"wrote {args.variant} spec (N={spec.N}, w={spec.w}, w'={spec.w_internal}, "
          f"design {spec.design_ebn0_db} dB) to {args.out}")
    return 0


def _cmd_simulate(args) -> int:
    from polarquant.harness import ExperimentConfig, emit_results, run_bler

    config = ExperimentConfig.load(args.config)
    if args.workers is not None:
        config = ExperimentConfig.from_dict({**config.to_dict(), "workers": args.workers})

    def show(r):
        print(f"{r.decoder}  {r.ebn0_db:5.2f} dB  frames={r.frames:7d}  errors={r.block_errors:5d}  "
              f"bler={r.bler:.4g}  ({r.wallclock:.1f} s)", flush=True)

    records = run_bler(config, args.out, resume=not args.fresh, progress=show)
    if args.plotdata:
        emit_results(records, args.plotdata, "plotdata")
    return 0


def _cmd_report(args) -> int:
    from polarquant.fa_design import DecoderSpec
    from polarquant.harness import report_complexity

    if args.spec:
        print(report_complexity(DecoderSpec.load(args.spec)))
    else:
        print(report_complexity(w=args.w, w_internal=args.wint, N=args.n))
    return 0


def _cmd_verify(args) -> int:
    from polarquant.verify import run_all

    ok = run_all(n=args.n, w=args.w, w_internal=args.wint, design_ebn0_db=args.ebn0, out=sys.stdout)
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polarquant", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("design", help="design a finite-alphabet decoder spec")
    d.add_argument("--n", type=int, required=True, help="block length N")
    d.add_argument("--k", type=int, required=True, help="information bits K")
    d.add_argument("--w", type=int, default=4, help="message width in bits")
    d.add_argument("--wint", type=int, default=6, help="internal datapath width in bits")
    d.add_argument("--ebn0", type=float, required=True, help="design Eb/N0 in dB")
    d.add_argument("--variant", default="ms-cd-uniform",
                   choices=["ib-ib", "ms-ib", "ms-cd-nonuniform", "ms-cd-uniform"])
    d.add_argument("--construction", default="nr5g", choices=["nr5g", "bhattacharyya"])
    d.add_argument("--rate", type=float, default=None, help="rate used for Eb/N0 (default K/N)")
    d.add_argument("--out", required=True)
    d.set_defaults(func=_cmd_design)

    s = sub.add_parser("simulate", help="run a BLER sweep from a JSON config")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True, help="CSV output (resumed if present)")
    s.add_argument("--plotdata", default=None, help="also write plot data here")
    s.add_argument("--workers", type=int, default=None)
    s.add_argument("--fresh", action="store_true", help="ignore existing rows in --out")
    s.set_defaults(func=_cmd_simulate)

    r = sub.add_parser("report", help="lower-branch complexity table")
    r.add_argument("--spec", default=None)
    r.add_argument("--w", type=int, default=4)
    r.add_argument("--wint", type=int, default=6)
    r.add_argument("--n", type=int, default=1024)
    r.set_defaults(func=_cmd_report)

    v = sub.add_parser("verify", help="exhaustive oracle-equivalence checks")
    v.add_argument("--n", type=int, default=1024, help="block length of the designed spec")
    v.add_argument("--w", type=int, default=4)
    v.add_argument("--wint", type=int, default=6)
    v.add_argument("--ebn0", type=float, default=0.5)
    v.set_defaults(func=_cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    np.seterr(all="ignore")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
