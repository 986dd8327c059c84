"""Command-line interface.

Subcommands:

  forward              potential -> impedance data CSV (+ grid CSV)
  invert               data CSV -> reconstruction CSV + diagnostics
  experiment <preset>  end-to-end run with CSVs and figures
  verify               run the invariant suite; exit 0 only if all pass
  converge <axis>      convergence study along h / omega / nfreq

A plain-text ``key=value`` config file (``--config``) overrides any flags
of the same name.  Exit code 0 is reserved for runs whose gated checks all
pass.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .errors import HelmringError
from .forward import ImpedanceData, generate_data
from .harness import (ExperimentSpec, convergence_study, preset,
                      preset_names, run_experiment)
from .inversion import ReconstructionConfig, reconstruct
from .quadrature import FrequencyGrid


_SPEC_KEYS = {"omega": float, "nfreq": int, "h": float, "scheme": str,
              "richardson": int, "n": int, "grid_kind": str}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", default="gauss-n0-reduced",
                   help=f"experiment preset ({', '.join(preset_names())})")
    p.add_argument("--omega", type=float, help="bandlimit of the base grid")
    p.add_argument("--nfreq", type=int, help="trapezoid node count")
    p.add_argument("--h", type=float, dest="h", help="spatial step size")
    p.add_argument("--scheme", choices=("euler", "heun-cn"))
    p.add_argument("--richardson", type=int, help="extrapolation levels")
    p.add_argument("--n", type=int, help="mode index")
    p.add_argument("--grid-kind", choices=("trapezoid", "accelerated"))
    p.add_argument("--out-dir", default="out", help="artifact directory")
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads for data generation")
    p.add_argument("--config", help="key=value file overriding flags")
    p.add_argument("--no-figures", action="store_true",
                   help="skip figure rendering")


def _read_config(path) -> dict:
    overrides = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise HelmringError(f"malformed config line: {line!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        overrides[key.replace("-", "_")] = val
    return overrides


def _effective_args(args) -> argparse.Namespace:
    if getattr(args, "config", None):
        conv = dict(_SPEC_KEYS)
        conv.update({"out_dir": str, "threads": int, "preset": str,
                     "levels": int, "budget_s": float})
        for key, raw in _read_config(args.config).items():
            if key not in conv:
                raise HelmringError(f"unknown config key {key!r}")
            setattr(args, key, conv[key](raw))
    return args


def _spec_from_args(args) -> ExperimentSpec:
    spec = preset(args.preset)
    updates = {}
    if args.omega is not None:
        updates["omega"] = args.omega
    if args.nfreq is not None:
        updates["n_freq"] = args.nfreq
    if args.h is not None:
        updates["h"] = args.h
    if args.scheme is not None:
        updates["scheme"] = args.scheme
    if args.richardson is not None:
        updates["richardson_levels"] = args.richardson
    if args.n is not None:
        updates["n"] = args.n
    if args.grid_kind is not None:
        updates["grid_kind"] = args.grid_kind
    return replace(spec, **updates) if updates else spec


def _cmd_forward(args) -> int:
    spec = _spec_from_args(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = spec.build_grid()
    data = generate_data(spec.potential, spec.n, grid,
                         steps=spec.forward_steps, workers=args.threads)
    data_path = out / f"{spec.name}_data.csv"
    grid_path = out / f"{spec.name}_grid.csv"
    data.write_csv(data_path)
    grid.write_csv(grid_path)
    print(f"wrote {data_path} ({len(data.frequencies)} frequencies) and {grid_path}")
    return 0


def _cmd_invert(args) -> int:
    data = ImpedanceData.read_csv(args.data)
    spec = _spec_from_args(args)
    grid = FrequencyGrid.read_csv(args.grid) if args.grid else spec.build_grid()
    cfg = ReconstructionConfig(h=spec.h, grid=grid, scheme=spec.scheme,
                               n=data.n, a=data.a, b=data.b)
    result = reconstruct(data, cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.data).stem.replace("_data", "")
    rec_path = out / f"{stem}_reconstruction.csv"
    result.write_csv(rec_path)
    result.write_diagnostics(out / f"{stem}_diagnostics.txt")
    print(f"wrote {rec_path}; terminal defect "
          f"{result.diagnostics.terminal_defect:.3e}")
    return 0


def _cmd_experiment(args) -> int:
    spec = _spec_from_args(args)
    report = run_experiment(spec, out_dir=args.out_dir, workers=args.threads,
                            make_figures=not args.no_figures)
    print(f"{spec.name}: linf={report.linf:.6e} l2={report.l2:.6e} "
          f"(generate {report.wall_generate_s:.1f} s, "
          f"solve {report.wall_solve_s:.1f} s)")
    print(f"artifacts in {args.out_dir}/")
    return 0


def _cmd_verify(args) -> int:
    from .verification import run_all
    results = run_all()
    width = max(len(r.name) for r in results)
    failed = 0
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{r.name:<{width}}  {status}  ({r.seconds:5.1f} s)  {r.detail}")
        failed += 0 if r.passed else 1
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 0 if failed == 0 else 1


def _cmd_converge(args) -> int:
    spec = _spec_from_args(args)
    report = convergence_study(spec, args.axis, levels=args.levels,
                               budget_s=args.budget_s, workers=args.threads)
    print(report)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="helmring",
        description="Forward and inverse multi-frequency impedance "
                    "scattering on radially symmetric annuli.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("forward", help="synthesize impedance data")
    _add_common(p)
    p.set_defaults(fn=_cmd_forward)

    p = sub.add_parser("invert", help="reconstruct a potential from data")
    p.add_argument("data", help="impedance data CSV")
    p.add_argument("--grid", help="grid CSV (k,w); defaults to preset grid")
    _add_common(p)
    p.set_defaults(fn=_cmd_invert)

    p = sub.add_parser("experiment", help="end-to-end preset run")
    p.add_argument("preset_name", nargs="?", help="preset name")
    _add_common(p)
    p.set_defaults(fn=_cmd_experiment)

    p = sub.add_parser("verify", help="run the invariant suite")
    p.add_argument("--config", help="key=value file overriding flags")
    p.set_defaults(fn=_cmd_verify)

    p = sub.add_parser("converge", help="convergence study")
    p.add_argument("axis", choices=("h", "omega", "nfreq"))
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--budget-s", type=float, dest="budget_s",
                   help="refuse if the finest level exceeds this many seconds")
    _add_common(p)
    p.set_defaults(fn=_cmd_converge)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "preset_name", None):
        args.preset = args.preset_name
    try:
        args = _effective_args(args)
        return args.fn(args)
    except HelmringError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
