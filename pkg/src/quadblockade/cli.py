"""Command-line front end: ``quadblockade {point,sweep,reproduce,validate}``.

Settings are resolved in this order, later sources winning: built-in
defaults, a flat JSON config file with dotted keys (``--config``),
explicit flags, then ``--set key=value`` overrides. The resolved settings
are written to ``<out>/config.json`` next to the results.

Exit codes: 0 success, 1 parameter or usage error, 2 convergence or
validation failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time
from pathlib import Path

from . import __version__
from .errors import ParameterError, QuadBlockadeError
from .hilbert import ModelParams
from .output import FORMATS, dumps, write_outputs
from .perturbation import g2_analytic, longtime_amplitudes
from .lindblad import photon_moments
from .sweep import (PRESETS, Axis, DriveCondition, SweepSpec, Truncation, fig3_spec,
                    numeric_g2, resonance_detunings, run_sweep)

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_PARAM, EXIT_FAIL = 0, 1, 2
FAILURE_FRACTION = 0.01

# flag dest -> dotted config key
FLAG_KEYS = {
    "g0": "params.g0",
    "delta_c": "params.delta_c",
    "gamma_c": "params.gamma_c",
    "gamma_m": "params.gamma_m",
    "n_th": "params.n_th",
    "omega_drive": "params.omega_drive",
    "omega_m": "params.omega_m",
    "n_photon_max": "truncation.n_photon_max",
    "n_phonon_max": "truncation.n_phonon_start",
    "n_phonon_cap": "truncation.n_phonon_cap",
    "rtol": "truncation.rtol",
    "drive": "drive",
    "out": "output.directory",
    "formats": "output.formats",
    "axis": "sweep.axis1",
    "axis2": "sweep.axis2",
    "solvers": "sweep.solvers",
    "workers": "workers",
}

_default_params = ModelParams()
_default_trunc = Truncation()
DEFAULTS = {
    **{f"params.{k}": v for k, v in dataclasses.asdict(_default_params).items()},
    **{f"truncation.{k}": v for k, v in dataclasses.asdict(_default_trunc).items()},
    "drive": "fixed",
    "output.directory": "results",
    "output.formats": ",".join(FORMATS),
    "sweep.axis1": None,
    "sweep.axis2": None,
    "sweep.solvers": "analytic,numeric",
    "workers": None,
}


class UsageError(ParameterError):
    pass


class _Parser(argparse.ArgumentParser):
    # usage mistakes are parameter errors (exit 1), not failures (exit 2)
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PARAM, f"{self.prog}: error: {message}\n")


def _coerce(key, value):
    """Convert a ``--set`` string to the type of its default."""
    if key not in DEFAULTS:
        raise UsageError(f"unknown config key {key!r}")
    default = DEFAULTS[key]
    if not isinstance(value, str):
        return value
    if isinstance(default, bool):
        return value.lower() in ("1", "true", "yes")
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float) or key.startswith("params."):
        return float(value)
    if key == "workers":
        return int(value)
    return value


def resolve_config(args) -> dict:
    """Merge defaults, config file, flags and ``--set`` overrides."""
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            file_cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as err:
            raise UsageError(f"cannot read config {args.config}: {err}") from None
        if not isinstance(file_cfg, dict):
            raise UsageError("config file must hold a single JSON object")
        for k, v in file_cfg.items():
            cfg[k] = _coerce(k, v)
    for dest, key in FLAG_KEYS.items():
        v = getattr(args, dest, None)
        if v is not None:
            cfg[key] = v
    for item in getattr(args, "set", None) or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects key=value, got {item!r}")
        cfg[key.strip()] = _coerce(key.strip(), value.strip())
    return cfg


def params_from(cfg) -> ModelParams:
    try:
        return ModelParams(**{k.split(".", 1)[1]: float(v) for k, v in cfg.items()
                              if k.startswith("params.")})
    except (TypeError, ValueError) as err:
        raise ParameterError(str(err)) from None


def truncation_from(cfg) -> Truncation:
    try:
        return Truncation(**{k.split(".", 1)[1]: v for k, v in cfg.items()
                             if k.startswith("truncation.")})
    except (TypeError, ValueError) as err:
        raise ParameterError(str(err)) from None


def parse_axis(text: str) -> Axis:
    """``name=start:stop:num`` or ``name=v1,v2,...``."""
    name, sep, rest = text.partition("=")
    if not sep:
        raise UsageError(f"axis must look like name=start:stop:num, got {text!r}")
    try:
        if ":" in rest:
            start, stop, num = rest.split(":")
            return Axis.linspace(name.strip(), float(start), float(stop), int(num))
        return Axis(name.strip(), tuple(float(v) for v in rest.split(",")))
    except ValueError as err:
        raise UsageError(f"bad axis {text!r}: {err}") from None


def _formats(cfg):
    fmts = cfg["output.formats"]
    fmts = [f.strip() for f in (fmts.split(",") if isinstance(fmts, str) else fmts) if f.strip()]
    bad = set(fmts) - set(FORMATS)
    if bad:
        raise UsageError(f"unknown output formats {sorted(bad)}; choose from {FORMATS}")
    return fmts


def _drive(cfg) -> DriveCondition:
    try:
        return DriveCondition.parse(str(cfg["drive"]))
    except ValueError as err:
        raise UsageError(str(err)) from None


def echo_config(cfg, out_dir, command):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(dumps({"command": command, **cfg}))


# --- commands -------------------------------------------------------------


def cmd_point(args) -> int:
    cfg = resolve_config(args)
    params = params_from(cfg)
    trunc = truncation_from(cfg)
    params.check_stability(trunc.n_photon_max)
    params = _drive(cfg).apply(params)

    amps = longtime_amplitudes(params)
    g2a = g2_analytic(amps) if params.omega_drive > 0 else float("nan")
    dm, history, converged = numeric_g2(params, trunc)
    g2n = history[-1][1]
    probs = dm.photon_distribution()
    n_mean, _ = photon_moments(dm)

    print(f"parameters     {' '.join(f'{k}={v:g}' for k, v in dataclasses.asdict(params).items())}")
    print(f"drive          {cfg['drive']}")
    print(f"g2_numeric     {g2n:.6f}")
    print(f"g2_analytic    {g2a:.6f}")
    print(f"P1             {probs[1]:.6e}   (analytic {amps.p1:.6e})")
    print(f"P2             {probs[2]:.6e}   (analytic {amps.p2:.6e})")
    print(f"<a'a>          {n_mean:.8f}")
    print(f"truncation     n_photon_max={dm.space.n_photon_max} n_phonon_max={dm.space.n_phonon_max}"
          f"{'' if converged else '  (g2 not settled at cap)'}")
    print(f"resonances at g0={params.g0:g}:")
    for r in resonance_detunings(params, 4):
        print(f"  {r.label:<3} {r.kind:<4} l={r.sideband}  delta_c={r.delta_c:+.6f}"
              f"{'' if r.dominant else '  (odd, weak)'}")
    if args.out:
        echo_config(cfg, args.out, "point")
    return EXIT_OK if converged else EXIT_FAIL


def _progress(done, total):
    if sys.stderr.isatty() and (done == total or done % max(1, total // 50) == 0):
        print(f"\r{done}/{total}", end="" if done < total else "\n", file=sys.stderr)


def _report_failures(results) -> int:
    total = sum(len(r.records) for r in results)
    bad = [rec for r in results for rec in r.records if rec.status != "ok"]
    for rec in bad[:10]:
        print(f"  point {rec.index} {rec.point}: {rec.status}: {rec.reason}", file=sys.stderr)
    if bad:
        print(f"{len(bad)} of {total} points not ok", file=sys.stderr)
    return EXIT_FAIL if bad and len(bad) > FAILURE_FRACTION * total else EXIT_OK


def cmd_sweep(args) -> int:
    cfg = resolve_config(args)
    if not cfg["sweep.axis1"]:
        raise UsageError("sweep needs --axis name=start:stop:num")
    axis1 = parse_axis(cfg["sweep.axis1"])
    axis2 = parse_axis(cfg["sweep.axis2"]) if cfg["sweep.axis2"] else None
    solvers = cfg["sweep.solvers"]
    solvers = tuple(s.strip() for s in solvers.split(",")) if isinstance(solvers, str) else tuple(solvers)
    try:
        spec = SweepSpec(params_from(cfg), axis1, axis2, drive=_drive(cfg), solvers=solvers,
                         truncation=truncation_from(cfg), name=args.name)
    except ValueError as err:
        raise UsageError(str(err)) from None
    formats = _formats(cfg)
    result = run_sweep(spec, workers=cfg["workers"], progress=_progress)
    out = cfg["output.directory"]
    echo_config(cfg, out, "sweep")
    for path in write_outputs([result], out, spec.name, formats):
        print(path)
    return _report_failures([result])


def cmd_reproduce(args) -> int:
    cfg = resolve_config(args)
    formats = _formats(cfg)
    if args.figure == "fig2":
        specs = PRESETS["fig2"](step=args.step)
    elif args.figure in ("fig3a", "fig3b"):
        specs = [fig3_spec("spr:0" if args.figure == "fig3a" else "spr:2", n=args.grid)]
    else:
        specs = PRESETS[args.figure]()
    out = cfg["output.directory"]
    # presets carry their own parameters; echo those instead of the model defaults
    echo_config({"reproduce.figure": args.figure, "reproduce.grid": args.grid,
                 "reproduce.step": args.step, "output.directory": out,
                 "output.formats": ",".join(formats), "workers": cfg["workers"],
                 "reproduce.specs": [s.to_dict() for s in specs]}, out, "reproduce")
    results = []
    for spec in specs:
        t0 = time.perf_counter()
        results.append(run_sweep(spec, workers=cfg["workers"], progress=_progress))
        logger.info("%s: %d points in %.1f s", spec.name, len(results[-1].records),
                    time.perf_counter() - t0)
    for path in write_outputs(results, out, args.figure, formats):
        print(path)
    return _report_failures(results)


def cmd_validate(args) -> int:
    from .oracles import validation_suite
    t0 = time.perf_counter()
    reports = validation_suite(include_evolution=not args.quick)
    for rep in reports:
        print(rep.line())
    ok = all(r.passed for r in reports)
    print(f"{sum(r.passed for r in reports)}/{len(reports)} oracles passed "
          f"in {time.perf_counter() - t0:.1f} s")
    return EXIT_OK if ok else EXIT_FAIL


# --- parser ---------------------------------------------------------------


def _add_model_flags(p):
    g = p.add_argument_group("model (units of omega_m)")
    g.add_argument("--g0", type=float, help="quadratic coupling")
    g.add_argument("--delta-c", dest="delta_c", type=float, help="cavity-drive detuning")
    g.add_argument("--gamma-c", dest="gamma_c", type=float, help="cavity loss rate")
    g.add_argument("--gamma-m", dest="gamma_m", type=float, help="mechanical damping rate")
    g.add_argument("--n-th", dest="n_th", type=float, help="thermal phonon number")
    g.add_argument("--omega-drive", dest="omega_drive", type=float, help="drive amplitude")
    g.add_argument("--omega-m", dest="omega_m", type=float, help=argparse.SUPPRESS)
    g.add_argument("--drive", help="fixed | spr:l | tpr:l (sets delta_c)")
    t = p.add_argument_group("truncation")
    t.add_argument("--n-photon-max", dest="n_photon_max", type=int)
    t.add_argument("--n-phonon-max", dest="n_phonon_max", type=int,
                   help="starting phonon cutoff, doubled until g2 settles")
    t.add_argument("--n-phonon-cap", dest="n_phonon_cap", type=int)
    t.add_argument("--rtol", type=float, help="relative g2 change accepted when doubling")


def _add_io_flags(p):
    p.add_argument("--config", help="flat JSON file with dotted keys")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config key after the file and flags")
    p.add_argument("--out", help="output directory")
    p.add_argument("--formats", help="comma-separated subset of csv,json,svg")
    p.add_argument("--workers", type=int, help="process count (capped by QUADBLOCKADE_THREADS)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="quadblockade", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("point", help="g2(0) at one parameter point")
    _add_model_flags(p)
    _add_io_flags(p)
    p.set_defaults(func=cmd_point)

    p = sub.add_parser("sweep", help="scan one or two parameters")
    _add_model_flags(p)
    _add_io_flags(p)
    p.add_argument("--axis", help="name=start:stop:num or name=v1,v2,...")
    p.add_argument("--axis2", help="second axis, same syntax")
    p.add_argument("--solvers", help="analytic,numeric (default both)")
    p.add_argument("--name", default="sweep", help="output file stem")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("reproduce", help="run a figure preset")
    p.add_argument("figure", choices=sorted(PRESETS))
    _add_io_flags(p)
    p.add_argument("--grid", type=int, default=60, help="points per axis for 2-D maps")
    p.add_argument("--step", type=float, default=0.01, help="detuning step for fig2")
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("validate", help="run the oracle suite")
    p.add_argument("--quick", action="store_true", help="skip the time-evolution checks")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # usage errors and --help/--version end here; hand back the code
        return exc.code
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ParameterError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_PARAM
    except QuadBlockadeError as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
