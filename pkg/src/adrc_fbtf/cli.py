"""Command-line front end.

    adrc-fbtf synth --order N --b0 X --ts T --wcl W --keso K --out PATH [--format json|c-header]
    adrc-fbtf sim   --scenario PATH --out PATH [--seed N] [--controller fbtf|ss] [--precision single|double]
    adrc-fbtf audit [--max-order N]

Summaries go to stdout as ``key=value`` lines. Exit codes: 0 success,
1 I/O failure, 2 invalid input or failed validation, 3 simulation
divergence, 4 cost audit mismatch.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from . import cost, formats
from .design import IDENTITY_RTOL, DesignError, DesignSpec, design_warnings, dc_residuals, fbtf_synthesize
from .sim import SimulationDiverged, settling_time, simulate

EXIT_OK, EXIT_IO, EXIT_INVALID, EXIT_DIVERGED, EXIT_AUDIT = 0, 1, 2, 3, 4


def _fmt(values) -> str:
    return ",".join(repr(float(v)) for v in values)


def cmd_synth(args) -> int:
    try:
        spec = DesignSpec(args.order, args.b0, args.ts, args.wcl, args.keso)
        coeffs = fbtf_synthesize(spec)
    except DesignError as exc:
        print(f"error={exc}")
        return EXIT_INVALID
    for w in design_warnings(spec):
        print(f"warning={w}")
    residuals = dc_residuals(coeffs)
    print(f"order={coeffs.order}")
    print(f"z_eso={coeffs.z_eso!r}")
    print(f"alpha={_fmt(coeffs.alpha)}")
    print(f"beta={_fmt(coeffs.beta)}")
    print(f"gamma={_fmt(coeffs.gamma)}")
    print(f"feedforward={coeffs.feedforward!r}")
    for name, value in residuals.items():
        print(f"residual[{name}]={value:.3e}")
    failed = [name for name, value in residuals.items() if not value <= IDENTITY_RTOL]
    if failed:
        print(f"error=DC identity violated: {', '.join(failed)}")
        return EXIT_INVALID
    try:
        if args.format == "c-header":
            with open(args.out, "w") as fh:
                fh.write(formats.c_header(coeffs))
        else:
            formats.write_coefficients(args.out, coeffs)
    except OSError as exc:
        print(f"error={exc}")
        return EXIT_IO
    print(f"written={args.out}")
    return EXIT_OK


def _event_times(sc) -> list[float]:
    return sorted({t for t, _ in sc.setpoint_schedule} | {t for t, _ in sc.disturbance_schedule})


def sim_summary(sc, trace) -> dict[str, str]:
    out = {"samples": str(len(trace))}
    steps = [t for t, _ in sc.setpoint_schedule if t > 0]
    settle = None
    if steps:
        later = [t for t in _event_times(sc) if t > steps[0]]
        settle = settling_time(trace, steps[0], end_time=later[0] if later else None)
    out["settling_time_s"] = "none" if settle is None else repr(settle)
    du = np.abs(np.diff(trace.u_lim)) if len(trace) > 1 else np.zeros(1)
    out["max_du_lim"] = repr(float(du.max()))
    out["saturation_duty"] = repr(float(trace.sat.mean())) if len(trace) else "0.0"
    return out


def cmd_sim(args) -> int:
    try:
        sc = formats.load_scenario(args.scenario)
    except OSError as exc:
        print(f"error={exc}")
        return EXIT_IO
    except (formats.SchemaError, DesignError) as exc:
        print(f"error={exc}")
        return EXIT_INVALID
    if args.seed is not None:
        sc.seed = args.seed
    if args.controller is not None:
        sc.controller = args.controller
    if args.precision is not None:
        sc.precision = args.precision
    try:
        trace = simulate(sc)
    except SimulationDiverged as exc:
        print(f"error={exc}")
        print(f"diverged_at={exc.index}")
        return EXIT_DIVERGED
    try:
        formats.write_trace(args.out, trace)
    except OSError as exc:
        print(f"error={exc}")
        return EXIT_IO
    for key, value in sim_summary(sc, trace).items():
        print(f"{key}={value}")
    return EXIT_OK


def cmd_audit(args) -> int:
    lines, ok = cost.audit_table(args.max_order)
    print("\n".join(lines))
    print(f"audit_ok={'true' if ok else 'false'}")
    return EXIT_OK if ok else EXIT_AUDIT


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adrc-fbtf", description="Minimum-footprint discrete-time ADRC toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize controller coefficients")
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--b0", type=float, required=True)
    p.add_argument("--ts", type=float, required=True, help="sample time [s]")
    p.add_argument("--wcl", type=float, required=True, help="closed-loop bandwidth [rad/s]")
    p.add_argument("--keso", type=float, required=True, help="observer bandwidth factor")
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("json", "c-header"), default="json")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("sim", help="simulate a scenario and write the trace CSV")
    p.add_argument("--scenario", required=True, help="scenario JSON path or bundled name (e.g. buck_step_load)")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--controller", choices=("fbtf", "ss"))
    p.add_argument("--precision", choices=("single", "double"))
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("audit", help="measure per-step operation counts")
    p.add_argument("--max-order", type=_positive_int, default=6)
    p.set_defaults(func=cmd_audit)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
