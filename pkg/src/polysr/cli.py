"""Command-line entry point: ``polysr reconstruct`` and ``polysr synth``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import pipeline
from .errors import DataError, NumericalError
from .operators import OperatorKind, dump_sparsity
from .pnm import read_image, write_pgm
from .solver import SolveConfig, SolveMethod

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3

log = logging.getLogger("polysr")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="polysr", description="Multi-frame super-resolution reconstruction.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    rec = sub.add_parser("reconstruct", help="reconstruct a high-resolution image from a dataset")
    rec.add_argument("--input", required=True, help="dataset directory containing dataset.txt")
    rec.add_argument("--zoom", type=float, default=2.0)
    rec.add_argument("--lambda", dest="lam", type=float, default=0.05, help="damping weight")
    rec.add_argument("--operator", choices=[k.value for k in OperatorKind], default="polygon")
    rec.add_argument("--solver", choices=[m.value for m in SolveMethod], default="cg")
    rec.add_argument("--prior", choices=[p.value for p in pipeline.Prior], default="average")
    rec.add_argument("--max-iter", type=_positive_int, default=None)
    rec.add_argument("--tol", type=float, default=1e-8)
    rec.add_argument("--output", required=True, help="output PGM (16-bit)")
    rec.add_argument("--dump-sparsity", metavar="FILE", help="write the stacked operator, one row per line")
    rec.add_argument("--residuals", metavar="CSV", help="write iteration,residual history")
    rec.add_argument("--figures", metavar="DIR", help="write sparsity, residual and image figures")
    rec.add_argument("--workers", type=_positive_int, default=1, help="processes for operator assembly")

    syn = sub.add_parser("synth", help="simulate registered low-resolution frames from an image")
    syn.add_argument("--truth", required=True)
    syn.add_argument("--frames", type=_positive_int, required=True)
    syn.add_argument("--zoom", type=float, required=True)
    syn.add_argument("--noise", type=float, default=0.0)
    syn.add_argument("--seed", type=int, default=0)
    syn.add_argument("--max-shift", type=float, default=0.5, help="largest translation, low-res pixels")
    syn.add_argument("--max-rotation", type=float, default=0.0, help="largest rotation, degrees")
    syn.add_argument("--output", required=True, help="dataset directory to create")
    return parser


def _reconstruct(args) -> None:
    cfg = pipeline.ReconstructionConfig(
        zoom=args.zoom,
        operator=args.operator,
        prior=args.prior,
        solver=SolveConfig(lam=args.lam, max_iterations=args.max_iter, tolerance=args.tol, method=args.solver),
    )
    fs = pipeline.load_dataset(args.input)
    log.info("loaded %d frames of %dx%d", len(fs), *fs.shape)
    a = pipeline.build_system(fs, cfg.zoom, cfg.operator, workers=args.workers)
    result, report = pipeline.run_reconstruction(fs, cfg, operator=a)
    write_pgm(args.output, result)
    if args.dump_sparsity:
        with open(args.dump_sparsity, "w") as fh:
            dump_sparsity(a, fh)
    if args.residuals:
        with open(args.residuals, "w") as fh:
            fh.write("iteration,residual\n")
            for k, r in enumerate(report.residual_history):
                fh.write(f"{k},{r!r}\n")
    if args.figures:
        from .plotting import write_report_figures

        prior = pipeline.compute_prior(fs, cfg.zoom, cfg.prior)
        write_report_figures(args.figures, a, report, {"prior": prior, "reconstruction": result})
    if not report.converged:
        log.warning("solver did not converge; output is the last iterate")


def _synth(args) -> None:
    truth = read_image(args.truth)
    fs, _ = pipeline.generate_synthetic(
        truth,
        args.frames,
        args.zoom,
        args.noise,
        seed=args.seed,
        max_shift=args.max_shift,
        max_rotation=args.max_rotation,
    )
    pipeline.save_dataset(fs, args.output)
    write_pgm(os.path.join(args.output, "truth.pgm"), pipeline.crop_to_zoom(truth, args.zoom))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "reconstruct":
            _reconstruct(args)
        else:
            _synth(args)
    except NumericalError as exc:
        log.error("%s", exc)
        return EXIT_NUMERICAL
    except (DataError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_DATA
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
