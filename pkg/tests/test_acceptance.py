"""Acceptance gate: each criterion at its stated tolerance, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v``; the summary lines are
printed at the end of the session.
"""
import math
import time

import numpy as np
import pytest

from adrc_fbtf import DesignSpec, FbtfController, Limiter, SsController, formats
from adrc_fbtf.cli import main
from adrc_fbtf.cost import audit, audit_formula
from adrc_fbtf.design import eso_design, fbtf_synthesize, observer_gain, closed_form_coefficients, zoh_discretize
from adrc_fbtf.sim import settling_time, simulate

from conftest import ACCEPTANCE_LINES, random_spec


def report(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


# 1 -------------------------------------------------------------------------


def test_criterion_1_operation_counts():
    t0 = time.perf_counter()
    expected = {
        ("fbtf", 1): (7, 6, 2),
        ("fbtf", 2): (10, 9, 3),
        ("state-space", 1): (11, 10, 2),
        ("state-space", 2): (19, 18, 3),
    }
    for n in range(3, 9):
        expected[("fbtf", n)] = (3 * n + 4, 3 * n + 3, n + 1)
        expected[("state-space", n)] = (n * n + 5 * n + 5, n * n + 5 * n + 4, n + 1)
    bad = []
    for (impl, n), want in expected.items():
        got = audit(impl, n)
        if (got.mul, got.add, got.vars) != want or audit_formula(impl, n) != got:
            bad.append(f"{impl} n={n}: {got}")
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 1.0
    report(1, "operation counts", ok, f"{len(expected) - len(bad)}/{len(expected)} exact, {elapsed:.3f} s {bad}")


# 2 -------------------------------------------------------------------------


def test_criterion_2_closed_form_coefficients():
    rng = np.random.default_rng(20)
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(100):
        spec = random_spec(rng, 1 + i % 2)
        a, b = fbtf_synthesize(spec), closed_form_coefficients(spec)
        pairs = list(zip(a.alpha + a.beta + a.gamma, b.alpha + b.beta + b.gamma))
        pairs.append((a.feedforward, b.feedforward))
        for x, y in pairs:
            worst = max(worst, abs(x - y) / abs(y) if y else abs(x))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-11 and elapsed < 1.0
    report(2, "synthesis vs closed form", ok, f"max rel diff {worst:.2e} (tol 1e-11), {elapsed:.3f} s")


# 3 -------------------------------------------------------------------------


def equivalence_error(spec: DesignSpec, rng: np.random.Generator, steps: int = 1000) -> tuple[float, int]:
    coeffs = fbtf_synthesize(spec)
    fb = FbtfController(coeffs)
    ss = SsController(eso_design(spec), spec.b0)
    limits = (-0.5, 0.5, 0.2 / spec.T, spec.T)
    lim_f, lim_s = Limiter(*limits), Limiter(*limits)
    scale = 1.0 / coeffs.feedforward
    ry = rng.uniform(-scale, scale, size=(steps, 2))
    du = 0.0
    u_max = 0.0
    limited = 0
    for r, y in ry:
        a, a_lim = fb.step(r, y, lim_f)
        b, _ = ss.step(r, y, lim_s)
        du = max(du, abs(a - b))
        u_max = max(u_max, abs(b))
        limited += a != a_lim
    return du / u_max, limited


def test_criterion_3_fbtf_equals_state_space():
    rng = np.random.default_rng(30)
    t0 = time.perf_counter()
    parts, ok = [], True
    for n in (1, 2, 3):
        errs, limited = [], 0
        for _ in range(200):
            e, hits = equivalence_error(random_spec(rng, n), rng)
            errs.append(e)
            limited += hits > 0
        errs = np.array(errs)
        fails = int(np.sum(errs > 1e-9))
        ok &= fails == 0 and limited == 200
        parts.append(f"n={n} max {errs.max():.1e} ({fails}/200 over tol)")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 10.0
    report(3, "FBTF vs state-space", ok, f"{'; '.join(parts)}; tol 1e-9, {elapsed:.2f} s")


# 4 -------------------------------------------------------------------------


def test_criterion_4_pole_placement():
    rng = np.random.default_rng(40)
    worst = 0.0
    for n in range(1, 7):
        for _ in range(100):
            spec = random_spec(rng, n)
            d = eso_design(spec)
            target = np.array([math.comb(n + 1, j) * (-spec.z_eso) ** j for j in range(n + 2)])
            got = np.poly(d.A_eso)
            worst = max(worst, np.max(np.abs(got - target)) / np.max(np.abs(target)))
    l_max = max(np.max(np.abs(observer_gain(zoh_discretize(n, 1.0, 1e-3)[0], 1.0))) for n in range(1, 7))
    ok = worst <= 1e-9 and l_max <= 1e-12
    report(4, "pole placement", ok, f"max rel char-poly error {worst:.1e} (tol 1e-9), |l| at z=1: {l_max:.1e}")


# 5 -------------------------------------------------------------------------


def test_criterion_5_buck_scenario():
    t0 = time.perf_counter()
    sc = formats.load_scenario("buck_step_load")
    tr = simulate(sc)
    elapsed = time.perf_counter() - t0
    T = sc.T
    checks = {}

    step_time = sc.setpoint_schedule[1][0]
    next_event = min(t for t, _ in sc.disturbance_schedule if t > step_time)
    ts = settling_time(tr, step_time, end_time=next_event)
    checks["settling"] = (ts is not None and 0.8e-3 <= ts <= 1.2e-3, f"settling {ts * 1e3 if ts else float('nan'):.2f} ms")

    # steady windows: last 30% of each interval between events, saturated interval excluded
    events = sorted({t for t, _ in sc.setpoint_schedule} | {t for t, _ in sc.disturbance_schedule} | {sc.duration})
    sat_start = next(t for t, d in sc.disturbance_schedule if d > sc.limiter.u_max)
    band = 3 * sc.noise_sigma
    err = 0.0
    for a, b in zip(events, events[1:]):
        if a == sat_start:
            continue
        k = slice(round((b - 0.3 * (b - a)) / T), round(b / T))
        err = max(err, float(np.max(np.abs(tr.y_true[k] - tr.r[k]))))
    checks["steady state"] = (err <= band, f"steady-state |e| {err:.3f} V (3 sigma {band:.3f})")

    step = np.float32(sc.limiter.rate_max * T)
    du = np.diff(tr.u_lim.astype(np.float32))
    ramp = np.abs(du) > step / 2
    # every rate-limited sample moves by exactly one float32 step
    exact = all(
        tr.u_lim[k + 1] == np.float32(np.float32(tr.u_lim[k]) + np.float32(math.copysign(step, du[k])))
        for k in np.nonzero(ramp)[0]
        if np.abs(tr.u[k + 1] - tr.u_lim[k]) > step and sc.limiter.u_min < tr.u_lim[k + 1] < sc.limiter.u_max
    )
    ulp6 = float(np.spacing(np.float32(sc.limiter.u_max)))
    max_du = float(np.max(np.abs(du)))
    checks["rate"] = (exact and abs(max_du - 0.4) <= ulp6, f"max |du_lim| {max_du!r} A")

    checks["bounds"] = (tr.u_lim.min() >= 0.0 and tr.u_lim.max() <= 6.0, f"u_lim in [{tr.u_lim.min()}, {tr.u_lim.max()}]")

    sat_end = next(t for t, _ in sc.disturbance_schedule if t > sat_start)
    k_end = round(sat_end / T)
    pinned = tr.u_lim[k_end - 20 : k_end] == sc.limiter.u_max
    leave = np.nonzero(tr.u_lim[k_end:] < sc.limiter.u_max)[0]
    left = int(leave[0]) if len(leave) else None
    checks["anti-windup"] = (
        pinned.all() and left is not None and left <= 10,
        f"leaves 6 A {left} samples after release",
    )
    checks["runtime"] = (elapsed < 5.0, f"{elapsed:.2f} s")
    ok = all(v[0] for v in checks.values())
    report(5, "buck scenario", ok, "; ".join(v[1] + ("" if v[0] else " [x]") for v in checks.values()))


# 6 -------------------------------------------------------------------------


def step_terms(coeffs, x, y, u):
    c = coeffs.gamma[0] * y + x[0]
    return [abs(v) for v in (*x, c, u, y, coeffs.feedforward * y)] + [
        abs(t) for a, b, g in zip(coeffs.alpha, coeffs.beta, coeffs.gamma) for t in (a * c, b * u, g * y)
    ]


def tail_ratio(errs: np.ndarray) -> float:
    """Per-step decay factor fitted to log(err) once it lies below 1e-6 of the start.

    The fit stops at 1e-10 so rounding noise stays out; a single-step ratio
    of a max-norm would jump whenever one mode crosses zero.
    """
    above = np.nonzero(errs >= 1e-6 * errs[0])[0]
    k = np.arange(above[-1] + 1, len(errs))
    k = k[errs[k] > 1e-10 * errs[0]]
    if len(k) < 3:
        return 0.0
    return math.exp(np.polyfit(k, np.log(errs[k]), 1)[0])


def init_specs():
    rng = np.random.default_rng(60)
    specs = [DesignSpec(1, 1e4, 2e-5, 4000.0, 5.0)]
    for n in (1, 2, 3):
        specs += [random_spec(rng, n) for _ in range(30)]
    return specs, rng


def test_criterion_6_initialization():
    specs, rng = init_specs()
    out_ulp = state_ulp = 0.0
    state_fail = track_fail = ratio_fail = 0
    track_worst = ratio_worst = 0.0
    for spec in specs:
        coeffs = fbtf_synthesize(spec)
        y, u = rng.uniform(-1, 1, 2) / np.array([coeffs.feedforward, 1.0])
        # fixed point of the direct initialization
        ctrl = FbtfController(coeffs)
        ctrl.init_direct(y, u)
        x0 = list(ctrl.x)
        ulp = math.ulp(max(step_terms(coeffs, x0, y, u)))
        got, _ = ctrl.step(y, y)
        out_ulp = max(out_ulp, abs(got - u) / ulp)
        s = max(abs(a - b) for a, b in zip(ctrl.x, x0)) / ulp
        state_ulp = max(state_ulp, s)
        state_fail += s > 4

        # tracking initialization from the zero state
        z = spec.z_eso
        iters = math.ceil(10 / (1 - z))
        track = FbtfController(coeffs)
        scale = max(abs(v) for v in x0) or 1.0
        errs = []
        for k in range(100 * iters):
            track.init_tracking(y, u)
            errs.append(max(abs(a - b) for a, b in zip(track.x, x0)) / scale)
            if k >= iters and errs[-1] < 1e-10 * errs[0]:
                break
        e = errs[iters - 1]
        track_worst = max(track_worst, e)
        track_fail += e > 1e-9
        ratio = tail_ratio(np.array(errs))
        ratio_worst = max(ratio_worst, abs(ratio - z))
        ratio_fail += abs(ratio - z) > 0.05
    ok = state_fail == 0 and out_ulp <= 4 and track_fail == 0 and ratio_fail == 0
    report(
        6,
        "initialization",
        ok,
        f"output {out_ulp:.1f} ulp; state {state_ulp:.1f} ulp ({state_fail}/{len(specs)} over 4); "
        f"tracking after 10/(1-z) iters worst {track_worst:.1e} ({track_fail}/{len(specs)} over 1e-9); "
        f"ratio |r - z| worst {ratio_worst:.3f} ({ratio_fail} over 0.05)",
    )


# 7 -------------------------------------------------------------------------


def test_criterion_7_determinism(tmp_path, capsys):
    runs = [
        ["synth", "--order", "2", "--b0", "1e4", "--ts", "2e-5", "--wcl", "4000", "--keso", "5", "--out", "{}"],
        ["synth", "--order", "3", "--b0", "3", "--ts", "1e-3", "--wcl", "40", "--keso", "4", "--format", "c-header", "--out", "{}"],
        ["sim", "--scenario", "buck_step_load", "--seed", "7", "--out", "{}"],
        ["sim", "--scenario", "buck_step_load", "--seed", "7", "--controller", "ss", "--precision", "double", "--out", "{}"],
    ]
    same = []
    for i, argv in enumerate(runs):
        blobs = []
        for rep in range(2):
            path = tmp_path / f"{i}_{rep}.out"
            assert main([a.replace("{}", str(path)) for a in argv]) == 0
            stdout = capsys.readouterr().out.replace(str(path), "")
            blobs.append((path.read_bytes(), stdout))
        same.append(blobs[0] == blobs[1])
    main(["audit"])
    first = capsys.readouterr().out
    main(["audit"])
    same.append(first == capsys.readouterr().out)
    report(7, "determinism", all(same), f"{sum(same)}/{len(same)} commands byte-identical")
