"""Command-line front end (``urnlab``)."""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
import tempfile
import time
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .errors import NoConvergence, ReducibleMatrix, UrnError
from .flip import FAMILIES, N_URN, family_model, scan_region
from .model import flip_profile, model_to_document, theoretical_limits, validate_model
from .sim import SimConfig, convergence_report, run_trajectory, write_trajectory_csv

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_VALIDATION = 4
EXIT_NUMERIC = 5
EXIT_IO = 6

EXIT_CODES_HELP = """\
exit status:
  0  success
  1  verify: some urn's mean distance exceeds --tol
  2  usage error
  3  model file could not be parsed
  4  model failed validation
  5  numerical failure (reducible matrix, no convergence)
  6  I/O error
"""


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str, **extra):
        super().__init__(message)
        self.code, self.kind, self.extra = code, kind, extra

    def to_dict(self) -> dict:
        return {"error": self.kind, "message": str(self), **self.extra}


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2)


def atomic_write_text(path: Path, text: str) -> None:
    """Write `text` to `path` through a temporary file and a rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def manifest_path(out: Path) -> Path:
    out = Path(out)
    return out.with_name(out.name + ".manifest.json")


def default_seed() -> int:
    env = os.environ.get("URNLAB_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise CliError(EXIT_USAGE, "UsageError", f"URNLAB_SEED is not an integer: {env!r}")


# -- model loading -----------------------------------------------------------

def load_document(path: str) -> dict:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise CliError(EXIT_IO, "IOError", f"cannot read {path}: {exc.strerror or exc}")
    try:
        text = data.decode("utf-8")
        doc = json.loads(text)
    except UnicodeDecodeError as exc:
        raise CliError(EXIT_PARSE, "ParseError", f"{path}: not UTF-8", byte_offset=exc.start)
    except json.JSONDecodeError as exc:
        offset = len(text[:exc.pos].encode("utf-8"))
        raise CliError(
            EXIT_PARSE, "ParseError", f"{path}: {exc.msg} at byte {offset}",
            byte_offset=offset, line=exc.lineno, column=exc.colno,
        )
    if not isinstance(doc, dict):
        raise CliError(EXIT_PARSE, "ParseError", f"{path}: top-level value must be an object", byte_offset=0)
    return doc


def _validation_error(exc: Exception) -> CliError:
    code = EXIT_NUMERIC if isinstance(exc, (ReducibleMatrix, NoConvergence)) else EXIT_VALIDATION
    return CliError(code, type(exc).__name__, str(exc))


def load_model(args):
    """Resolve ``--model`` or the builtin family flags into a validated model."""
    if args.model is not None and args.family is not None:
        raise CliError(EXIT_USAGE, "UsageError", "--model and --family are mutually exclusive")
    try:
        if args.model is not None:
            return validate_model(load_document(args.model))
        if args.family is None:
            raise CliError(EXIT_USAGE, "UsageError", "give --model FILE or --family NAME")
        missing = {
            "two-urn": ["alpha", "beta"],
            "three-urn": ["alpha", "beta", "gamma"],
            "n-urn": ["a"],
        }[args.family]
        absent = [f"--{k}" for k in missing if getattr(args, k) is None]
        if absent:
            raise CliError(EXIT_USAGE, "UsageError", f"--family {args.family} needs {', '.join(absent)}")
        return family_model(args.family, alpha=args.alpha, beta=args.beta, gamma=args.gamma, a=args.a)
    except CliError:
        raise
    except (UrnError, ValueError, TypeError) as exc:
        raise _validation_error(exc)


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be positive, got {v}")
    return v


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {v}")
    return v


# -- commands ----------------------------------------------------------------

def _limit_payload(model) -> dict:
    try:
        limits = theoretical_limits(model)
    except (ReducibleMatrix, NoConvergence) as exc:
        raise _validation_error(exc)
    flips, margins = flip_profile(model, limits)
    return {"limits": [p.tolist() for p in limits], "flips": flips, "margins": margins}


def cmd_validate(args) -> int:
    model = load_model(args)
    summary = {
        "m": model.m,
        "N": model.n_colors,
        "scheme": model.scheme,
        "combined_order": model.combined.shape[0],
        "irreducible": True,
        "dominant": None if model.dominant is None else [d + 1 for d in model.dominant],
    }
    print(_dumps(summary))
    return EXIT_OK


def cmd_limit(args) -> int:
    print(_dumps(_limit_payload(load_model(args))))
    return EXIT_OK


def _write_manifest(out: Path, command: str, config: dict, seeds, artifacts, started: float, t0: float):
    manifest = {
        "command": command,
        "argv": sys.argv[1:],
        "config": config,
        "seeds": seeds,
        "artifacts": [str(a) for a in artifacts],
        "version": __version__,
        "started_at": datetime.fromtimestamp(started, timezone.utc).isoformat(),
        "duration_s": time.perf_counter() - t0,
    }
    path = manifest_path(out)
    try:
        atomic_write_text(path, _dumps(manifest) + "\n")
    except OSError as exc:
        raise CliError(EXIT_IO, "IOError", f"cannot write {path}: {exc.strerror or exc}")
    return path


def _write_artifact(out: Path, text: str) -> None:
    try:
        atomic_write_text(out, text)
    except OSError as exc:
        raise CliError(EXIT_IO, "IOError", f"cannot write {out}: {exc.strerror or exc}")


def cmd_simulate(args) -> int:
    started, t0 = time.time(), time.perf_counter()
    model = load_model(args)
    seed = args.seed if args.seed is not None else default_seed()
    stride = args.stride
    if stride is None and args.rounds > 0:
        stride = max(1, args.rounds // 100)
    try:
        cfg = SimConfig(args.rounds, seed, stride)
    except ValueError as exc:
        raise CliError(EXIT_USAGE, "UsageError", str(exc))
    snaps = run_trajectory(model, cfg)
    buf = io.StringIO()
    write_trajectory_csv(snaps, buf)
    out = Path(args.out)
    _write_artifact(out, buf.getvalue())
    config = {"model": model_to_document(model), "rounds": cfg.rounds, "seed": seed, "stride": cfg.stride}
    mpath = _write_manifest(out, "simulate", config, [seed], [out], started, t0)
    print(_dumps({"csv": str(out), "manifest": str(mpath), "snapshots": len(snaps)}))
    return EXIT_OK


def cmd_verify(args) -> int:
    started, t0 = time.time(), time.perf_counter()
    model = load_model(args)
    seed = args.seed if args.seed is not None else default_seed()
    try:
        report = convergence_report(model, args.rounds, args.replicates, seed, workers=args.workers)
    except (ReducibleMatrix, NoConvergence) as exc:
        raise _validation_error(exc)
    ok = bool((report.mean <= args.tol).all())
    payload = {"passed": ok, "tol": args.tol, **report.to_dict()}
    text = _dumps(payload)
    print(text)
    if args.out is not None:
        out = Path(args.out)
        _write_artifact(out, text + "\n")
        config = {"model": model_to_document(model), "rounds": args.rounds,
                  "replicates": args.replicates, "tol": args.tol}
        _write_manifest(out, "verify", config, report.seeds, [out], started, t0)
    return EXIT_OK if ok else EXIT_VERIFY_FAILED


def cmd_flipscan(args) -> int:
    started, t0 = time.time(), time.perf_counter()
    if args.family == N_URN and args.n is None:
        raise CliError(EXIT_USAGE, "UsageError", "--family n-urn needs --n")
    try:
        scan = scan_region(args.family, args.resolution, args.n)
    except (UrnError, ValueError) as exc:
        raise CliError(EXIT_USAGE, type(exc).__name__, str(exc))
    buf = io.StringIO()
    scan.write_csv(buf)
    out = Path(args.out)
    _write_artifact(out, buf.getvalue())
    config = {"family": args.family, "resolution": args.resolution, "n": args.n}
    mpath = _write_manifest(out, "flipscan", config, [], [out], started, t0)
    print(_dumps({"csv": str(out), "manifest": str(mpath), "rows": int(scan.points.shape[0]),
                  "counts": scan.counts()}))
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def _model_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model selection")
    g.add_argument("--model", metavar="FILE", help="model description (JSON)")
    g.add_argument("--family", choices=FAMILIES, help="builtin parametric family")
    g.add_argument("--alpha", type=float)
    g.add_argument("--beta", type=float)
    g.add_argument("--gamma", type=float)
    g.add_argument("--a", type=_float_list, metavar="A1,A2,...", help="n-urn parameters")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="urnlab",
        description="Feedback interacting urn models: limits, simulation, flip regions.",
        epilog=EXIT_CODES_HELP + "\nURNLAB_SEED sets the default --seed.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"urnlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a model against the convergence hypotheses")
    _model_args(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("limit", help="print the almost-sure limit of every urn")
    _model_args(p)
    p.set_defaults(func=cmd_limit)

    p = sub.add_parser("simulate", help="simulate one trajectory to CSV")
    _model_args(p)
    p.add_argument("--rounds", type=_nonneg_int, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--stride", type=_positive_int, help="rounds between snapshots (default rounds/100)")
    p.add_argument("--out", required=True, metavar="FILE")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="compare replicate trajectories with the limits")
    _model_args(p)
    p.add_argument("--rounds", type=_nonneg_int, default=200_000)
    p.add_argument("--replicates", type=_positive_int, default=32)
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=float, default=0.02)
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--out", metavar="FILE", help="also write the report here")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("flipscan", help="flip flags and margins on a parameter grid")
    p.add_argument("--family", choices=FAMILIES, required=True)
    p.add_argument("--resolution", type=int, required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--out", required=True, metavar="FILE")
    p.set_defaults(func=cmd_flipscan)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(_dumps(exc.to_dict()), file=sys.stderr)
        return exc.code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
