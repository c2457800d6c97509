"""File formats: coefficient JSON, C header export, scenario JSON, trace CSV."""
from __future__ import annotations

import csv
import io
import json
import math
from importlib import resources
from pathlib import Path

from .design import DesignSpec, FbtfCoefficients
from .sim import BuckAveraged, IntegratorChain, LimiterConfig, Scenario, SimTrace

__all__ = [
    "SchemaError",
    "SCHEMA_VERSION",
    "coefficients_to_dict",
    "coefficients_from_dict",
    "write_coefficients",
    "read_coefficients",
    "c_header",
    "scenario_from_dict",
    "scenario_to_dict",
    "load_scenario",
    "bundled_scenario_path",
    "trace_to_csv",
    "write_trace",
    "read_trace",
    "CSV_HEADER",
]

SCHEMA_VERSION = "1"
CSV_HEADER = ("k", "t", "r", "y", "y_true", "u", "u_lim", "sat", "dist")


class SchemaError(ValueError):
    pass


def coefficients_to_dict(coeffs: FbtfCoefficients) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "order": coeffs.order,
        "T": coeffs.T,
        "b0": coeffs.b0,
        "omega_cl": coeffs.omega_cl,
        "k_eso": coeffs.k_eso,
        "z_eso": coeffs.z_eso,
        "alpha": list(coeffs.alpha),
        "beta": list(coeffs.beta),
        "gamma": list(coeffs.gamma),
        "feedforward": coeffs.feedforward,
    }


def _number(doc: dict, key: str) -> float:
    try:
        value = doc[key]
    except KeyError:
        raise SchemaError(f"missing key {key!r}") from None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{key!r} must be a number, got {value!r}")
    return float(value)


def _numbers(doc: dict, key: str, length: int) -> list[float]:
    values = doc.get(key)
    if not isinstance(values, list) or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in values):
        raise SchemaError(f"{key!r} must be an array of numbers")
    if len(values) != length:
        raise SchemaError(f"{key!r} must have {length} entries, got {len(values)}")
    return [float(v) for v in values]


def coefficients_from_dict(doc: dict) -> FbtfCoefficients:
    if not isinstance(doc, dict):
        raise SchemaError("coefficient file must be a JSON object")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema_version {doc.get('schema_version')!r}")
    order = doc.get("order")
    if isinstance(order, bool) or not isinstance(order, int) or order < 1:
        raise SchemaError(f"'order' must be an integer >= 1, got {order!r}")
    N = order + 1
    return FbtfCoefficients(
        order=order,
        alpha=tuple(_numbers(doc, "alpha", N)),
        beta=tuple(_numbers(doc, "beta", N)),
        gamma=tuple(_numbers(doc, "gamma", N)),
        feedforward=_number(doc, "feedforward"),
        T=_number(doc, "T"),
        b0=_number(doc, "b0"),
        omega_cl=_number(doc, "omega_cl"),
        k_eso=_number(doc, "k_eso"),
        z_eso=_number(doc, "z_eso"),
    )


def write_coefficients(path, coeffs: FbtfCoefficients) -> None:
    Path(path).write_text(json.dumps(coefficients_to_dict(coeffs), indent=2) + "\n")


def read_coefficients(path) -> FbtfCoefficients:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from None
    return coefficients_from_dict(doc)


def c_header(coeffs: FbtfCoefficients, prefix: str = "ADRC") -> str:
    """Self-contained C header holding the coefficients as ``static const`` data."""
    n = coeffs.order
    guard = f"{prefix}_COEFFS_H"

    def arr(name, values):
        body = ", ".join(f"{v!r}" for v in values)
        return f"static const double {prefix}_{name}[{len(values)}] = {{{body}}};"

    return "\n".join(
        [
            f"#ifndef {guard}",
            f"#define {guard}",
            "",
            f"/* Discrete-time ADRC, order n = {n}",
            f" * T = {coeffs.T!r} s, b0 = {coeffs.b0!r}, omega_cl = {coeffs.omega_cl!r} rad/s,",
            f" * k_eso = {coeffs.k_eso!r}, z_eso = {coeffs.z_eso!r}",
            " *",
            " * Per sample, with storage x[0..n] (zero or directly initialized):",
            " *   c     = GAMMA[0]*y + x[0];",
            " *   u     = FEEDFORWARD*r - c;",
            " *   u_lim = limit(u);",
            " *   for (i = 0; i < n; i++)",
            " *     x[i] = x[i+1] - ALPHA[i]*c + BETA[i]*u_lim + GAMMA[i+1]*y;",
            " *   x[n]  = BETA[n]*u_lim - ALPHA[n]*c;",
            " * ALPHA holds alpha_1..alpha_{n+1}; BETA, GAMMA hold indices 0..n.",
            " */",
            "",
            f"#define {prefix}_ORDER {n}",
            f"#define {prefix}_NSTATE {n + 1}",
            "",
            arr("ALPHA", coeffs.alpha),
            arr("BETA", coeffs.beta),
            arr("GAMMA", coeffs.gamma),
            f"static const double {prefix}_FEEDFORWARD = {coeffs.feedforward!r};",
            "",
            f"#endif /* {guard} */",
            "",
        ]
    )


def _schedule(doc: dict, key: str) -> list[tuple[float, float]]:
    raw = doc.get(key, [])
    if not isinstance(raw, list):
        raise SchemaError(f"{key!r} must be a list of [time, value] pairs")
    out = []
    for item in raw:
        if not isinstance(item, (list, tuple)) or len(item) != 2:
            raise SchemaError(f"{key!r} entries must be [time, value] pairs, got {item!r}")
        out.append((float(item[0]), float(item[1])))
    return out


def _limit(value) -> float:
    return math.inf if value is None else float(value)


def scenario_from_dict(doc: dict) -> Scenario:
    """Build a :class:`Scenario` from its JSON form.

    Limiter bounds may be ``null`` for "unbounded". Plant ``type`` is
    ``"buck_averaged"`` (``C``, ``R``) or ``"integrator_chain"``
    (``order``, ``b0``).
    """
    if not isinstance(doc, dict):
        raise SchemaError("scenario must be a JSON object")
    if doc.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema_version {doc.get('schema_version')!r}")
    try:
        T = float(doc["T"])
        ctrl = doc["controller"]
        design = DesignSpec(ctrl["order"], ctrl["b0"], T, ctrl["omega_cl"], ctrl["k_eso"])
        lim = doc.get("limiter", {})
        limiter = LimiterConfig(
            -math.inf if lim.get("u_min") is None else float(lim["u_min"]),
            _limit(lim.get("u_max")),
            _limit(lim.get("rate_max")),
        )
        p = doc["plant"]
        kind = p.get("type")
        if kind == "buck_averaged":
            plant = BuckAveraged(float(p["C"]), float(p["R"]), int(p.get("substeps", 4)), float(p.get("v0", 0.0)))
        elif kind == "integrator_chain":
            plant = IntegratorChain(int(p["order"]), float(p["b0"]), int(p.get("substeps", 4)))
        else:
            raise SchemaError(f"unknown plant type {kind!r}")
        if plant.substeps < 4:
            raise SchemaError("plant substeps must be >= 4")
        return Scenario(
            duration=float(doc["duration"]),
            T=T,
            design=design,
            plant=plant,
            limiter=limiter,
            setpoint_schedule=_schedule(doc, "setpoint_schedule"),
            disturbance_schedule=_schedule(doc, "disturbance_schedule"),
            noise_sigma=float(doc.get("noise_sigma", 0.0)),
            seed=int(doc.get("seed", 0)),
            loop_delay_samples=int(doc.get("loop_delay_samples", 0)),
            controller=doc.get("implementation", "fbtf"),
            precision=doc.get("precision", "double"),
        )
    except SchemaError:
        raise
    except KeyError as exc:
        raise SchemaError(f"missing key {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise SchemaError(str(exc)) from None


def scenario_to_dict(sc: Scenario) -> dict:
    def bound(v):
        return None if math.isinf(v) else v

    if isinstance(sc.plant, BuckAveraged):
        plant = {"type": "buck_averaged", "C": sc.plant.C, "R": sc.plant.R, "substeps": sc.plant.substeps, "v0": sc.plant.v0}
    else:
        plant = {"type": "integrator_chain", "order": sc.plant.order, "b0": sc.plant.b0, "substeps": sc.plant.substeps}
    d = sc.design
    return {
        "schema_version": SCHEMA_VERSION,
        "duration": sc.duration,
        "T": sc.T,
        "controller": {"order": d.order, "b0": d.b0, "omega_cl": d.omega_cl, "k_eso": d.k_eso},
        "limiter": {"u_min": bound(sc.limiter.u_min), "u_max": bound(sc.limiter.u_max), "rate_max": bound(sc.limiter.rate_max)},
        "plant": plant,
        "setpoint_schedule": [list(p) for p in sc.setpoint_schedule],
        "disturbance_schedule": [list(p) for p in sc.disturbance_schedule],
        "noise_sigma": sc.noise_sigma,
        "seed": sc.seed,
        "loop_delay_samples": sc.loop_delay_samples,
        "implementation": sc.controller,
        "precision": sc.precision,
    }


def bundled_scenario_path(name: str):
    """Path of a scenario shipped with the package (``name`` with or without ``.json``)."""
    if not name.endswith(".json"):
        name += ".json"
    ref = resources.files("adrc_fbtf") / "scenarios" / name
    return ref if ref.is_file() else None


def load_scenario(path) -> Scenario:
    """Read a scenario file; falls back to the bundled scenarios by name."""
    p = Path(path)
    if not p.exists():
        bundled = bundled_scenario_path(str(path))
        if bundled is not None:
            return scenario_from_dict(json.loads(bundled.read_text()))
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from None
    return scenario_from_dict(doc)


def trace_to_csv(trace: SimTrace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for i in range(len(trace)):
        w.writerow(
            [
                int(trace.k[i]),
                repr(float(trace.t[i])),
                repr(float(trace.r[i])),
                repr(float(trace.y[i])),
                repr(float(trace.y_true[i])),
                repr(float(trace.u[i])),
                repr(float(trace.u_lim[i])),
                int(bool(trace.sat[i])),
                repr(float(trace.dist[i])),
            ]
        )
    return buf.getvalue()


def write_trace(path, trace: SimTrace) -> None:
    Path(path).write_text(trace_to_csv(trace))


def read_trace(path) -> dict[str, list[float]]:
    """Columns of a trace CSV as lists of floats."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {key: [float(row[key]) for row in rows] for key in CSV_HEADER}
