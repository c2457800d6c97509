"""Fixed-step closed-loop simulation of ADRC against simple plant models.

Plants are integrated with classical RK4 between control samples; the
controller command is held constant over each sample (zero-order hold) and
can be delayed by a number of samples. Measurement noise is Gaussian, drawn
from a Philox (counter-based) generator seeded by ``Scenario.seed``.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .design import DesignSpec, eso_design, fbtf_synthesize
from .runtime import FbtfController, Limiter, SsController, resolve_dtype

__all__ = [
    "SimulationDiverged",
    "LimiterConfig",
    "IntegratorChain",
    "BuckAveraged",
    "Scenario",
    "SimTrace",
    "simulate",
    "settling_time",
]


class SimulationDiverged(ArithmeticError):
    def __init__(self, index: int):
        super().__init__(f"non-finite plant state at sample {index}")
        self.index = index


@dataclass
class LimiterConfig:
    u_min: float = -math.inf
    u_max: float = math.inf
    rate_max: float = math.inf


@dataclass
class IntegratorChain:
    """``y^(n) = b0 * (u + d)`` with ``d`` an input disturbance."""

    order: int
    b0: float
    substeps: int = 4
    x0: tuple[float, ...] | None = None

    def initial_state(self) -> np.ndarray:
        x = np.zeros(self.order)
        if self.x0 is not None:
            x[:] = self.x0
        return x

    def derivative(self, x: np.ndarray, u: float, d: float) -> np.ndarray:
        dx = np.empty_like(x)
        dx[:-1] = x[1:]
        dx[-1] = self.b0 * (u + d)
        return dx


@dataclass
class BuckAveraged:
    """Averaged output stage of a current-mode buck converter.

    The inner current loop is ideal, so the inductor current equals the
    (delayed, limited) current command: ``dv/dt = (i_L - v/R - i_load)/C``.
    """

    C: float
    R: float
    substeps: int = 4
    v0: float = 0.0

    def initial_state(self) -> np.ndarray:
        return np.array([self.v0])

    def derivative(self, x: np.ndarray, u: float, d: float) -> np.ndarray:
        return np.array([(u - x[0] / self.R - d) / self.C])


def _rk4(plant, x: np.ndarray, u: float, d: float, T: float) -> np.ndarray:
    h = T / plant.substeps
    f = plant.derivative
    for _ in range(plant.substeps):
        k1 = f(x, u, d)
        k2 = f(x + 0.5 * h * k1, u, d)
        k3 = f(x + 0.5 * h * k2, u, d)
        k4 = f(x + h * k3, u, d)
        x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return x


@dataclass
class Scenario:
    duration: float
    T: float
    design: DesignSpec
    plant: IntegratorChain | BuckAveraged
    limiter: LimiterConfig = field(default_factory=LimiterConfig)
    setpoint_schedule: list[tuple[float, float]] = field(default_factory=list)
    disturbance_schedule: list[tuple[float, float]] = field(default_factory=list)
    noise_sigma: float = 0.0
    seed: int = 0
    loop_delay_samples: int = 0
    controller: str = "fbtf"
    precision: str = "double"

    def __post_init__(self):
        if not self.duration >= 0:
            raise ValueError(f"duration must be >= 0, got {self.duration}")
        if not self.T > 0:
            raise ValueError(f"T must be > 0, got {self.T}")
        if not math.isclose(self.T, self.design.T, rel_tol=1e-12):
            raise ValueError(f"scenario T ({self.T}) differs from controller T ({self.design.T})")
        for name in ("setpoint_schedule", "disturbance_schedule"):
            sched = [(float(t), float(v)) for t, v in getattr(self, name)]
            if any(a[0] > b[0] for a, b in zip(sched, sched[1:])):
                raise ValueError(f"{name} must be sorted by time")
            setattr(self, name, sched)
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.loop_delay_samples < 0:
            raise ValueError("loop_delay_samples must be >= 0")
        if self.controller not in ("fbtf", "ss"):
            raise ValueError(f"controller must be 'fbtf' or 'ss', got {self.controller!r}")
        resolve_dtype(self.precision)

    @property
    def samples(self) -> int:
        return int(round(self.duration / self.T))


@dataclass
class SimTrace:
    """Per-sample record; ``sat[k]`` is true iff the limiter changed ``u``."""

    k: np.ndarray
    t: np.ndarray
    r: np.ndarray
    y: np.ndarray
    y_true: np.ndarray
    u: np.ndarray
    u_lim: np.ndarray
    sat: np.ndarray
    dist: np.ndarray
    T: float

    def __len__(self):
        return len(self.k)


def _sample_index(time: float, T: float) -> int:
    return max(0, math.ceil(time / T - 1e-9))


def _schedule_array(schedule, n: int, T: float) -> np.ndarray:
    out = np.zeros(n)
    for time, v in schedule:
        out[min(_sample_index(time, T), n) :] = v
    return out


def simulate(scenario: Scenario) -> SimTrace:
    """Run the closed loop for ``scenario.samples`` control periods."""
    sc = scenario
    N = sc.samples
    T = sc.T
    dtype = resolve_dtype(sc.precision)
    if sc.controller == "fbtf":
        ctrl = FbtfController(fbtf_synthesize(sc.design), dtype=dtype)
    else:
        ctrl = SsController(eso_design(sc.design), sc.design.b0, dtype=dtype)
    lim = sc.limiter
    limiter = Limiter(lim.u_min, lim.u_max, lim.rate_max, T, dtype=dtype)
    ctrl.init_direct(0.0, 0.0, limiter)

    rng = np.random.Generator(np.random.Philox(sc.seed))
    noise = rng.standard_normal(N) * sc.noise_sigma
    r_arr = _schedule_array(sc.setpoint_schedule, N, T)
    d_arr = _schedule_array(sc.disturbance_schedule, N, T)
    y_true = np.zeros(N)
    y_meas = np.zeros(N)
    u_arr = np.zeros(N)
    ul_arr = np.zeros(N)
    sat = np.zeros(N, dtype=bool)

    plant = sc.plant
    x = plant.initial_state()
    pending = deque([0.0] * sc.loop_delay_samples)
    for k in range(N):
        y_true[k] = x[0]
        y_meas[k] = x[0] + noise[k]
        u, u_lim = ctrl.step(r_arr[k], y_meas[k], limiter)
        u_arr[k] = u
        ul_arr[k] = u_lim
        sat[k] = u != u_lim
        pending.append(float(u_lim))
        with np.errstate(over="ignore", invalid="ignore"):
            x = _rk4(plant, x, pending.popleft(), d_arr[k], T)
        if not np.all(np.isfinite(x)):
            raise SimulationDiverged(k)
    return SimTrace(np.arange(N), np.arange(N) * T, r_arr, y_meas, y_true, u_arr, ul_arr, sat, d_arr, T)


def settling_time(trace: SimTrace, step_time: float, band: float = 0.02, end_time: float | None = None):
    """Time after ``step_time`` from which ``y_true`` stays in the band.

    The band is ``band`` times the setpoint step size (or times the final
    setpoint if the step is zero) and is checked up to ``end_time`` (default:
    the next setpoint change or the end of the trace). Returns ``None`` if
    the output never settles.
    """
    T = trace.T
    k0 = _sample_index(step_time, T)
    if k0 >= len(trace):
        raise ValueError("step_time lies beyond the trace")
    r = trace.r
    r_final = r[k0]
    r_before = r[k0 - 1] if k0 > 0 else r_final
    if end_time is None:
        changes = np.nonzero(r[k0 + 1 :] != r_final)[0]
        k1 = k0 + 1 + int(changes[0]) if len(changes) else len(trace)
    else:
        k1 = min(_sample_index(end_time, T), len(trace))
    tol = band * (abs(r_final - r_before) if r_final != r_before else abs(r_final))
    outside = np.nonzero(np.abs(trace.y_true[k0:k1] - r_final) > tol)[0]
    if len(outside) == 0:
        return 0.0
    last = int(outside[-1])
    if k0 + last + 1 >= k1:
        return None
    return (last + 1) * T
