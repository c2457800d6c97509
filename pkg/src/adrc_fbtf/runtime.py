"""Real-time execution of discrete-time ADRC.

Two interchangeable controllers with the same ``step(r, y, limiter)``
signature:

* :class:`FbtfController` runs the feedback transfer functions as one
  transposed-direct-form-II filter with ``n + 1`` storage variables.
* :class:`SsController` runs the current-observer ESO and the state-feedback
  law directly. It is the reference the FBTF form must reproduce.

Arithmetic is plain Python scalar arithmetic on whatever type ``dtype``
produces (``float``, ``numpy.float32`` or an instrumented type), so the
same step code serves single-precision runs and operation counting.
"""
from __future__ import annotations

import math

import numpy as np

from .design import EsoDesign, FbtfCoefficients

__all__ = ["NotInitializedError", "Limiter", "FbtfController", "SsController", "resolve_dtype"]

_DTYPES = {"double": float, "single": np.float32}


def resolve_dtype(precision):
    """Map ``"single"``/``"double"`` (or a callable) to a scalar constructor."""
    if callable(precision):
        return precision
    try:
        return _DTYPES[precision]
    except KeyError:
        raise ValueError(f"precision must be 'single' or 'double', got {precision!r}") from None


class NotInitializedError(RuntimeError):
    pass


class Limiter:
    """Discrete magnitude and rate limiter.

    The increment towards the requested value is clamped to
    ``+-rate_max*T`` first, then the result is clamped to
    ``[u_min, u_max]``. One state variable holds the previous output.
    """

    def __init__(self, u_min=-math.inf, u_max=math.inf, rate_max=math.inf, T=1.0, u_init=0.0, dtype=float):
        if not u_min <= u_max:
            raise ValueError(f"u_min ({u_min}) must not exceed u_max ({u_max})")
        if not rate_max > 0:
            raise ValueError(f"rate_max must be > 0, got {rate_max}")
        if not T > 0:
            raise ValueError(f"T must be > 0, got {T}")
        self.dtype = resolve_dtype(dtype)
        self.u_min = self.dtype(u_min)
        self.u_max = self.dtype(u_max)
        self.rate_max = float(rate_max)
        self.T = float(T)
        self.max_step = self.dtype(self.rate_max * self.T)
        self.u_prev = self.dtype(u_init)

    def reset(self, u) -> None:
        self.u_prev = self.dtype(u)

    def limit(self, u):
        prev = self.u_prev
        step = self.max_step
        du = u - prev
        # pass u through untouched when the rate bound is inactive
        if du > step:
            v = prev + step
        elif du < -step:
            v = prev - step
        else:
            v = u
        if v > self.u_max:
            v = self.u_max
        elif v < self.u_min:
            v = self.u_min
        self.u_prev = v
        return v

    __call__ = limit


class FbtfController:
    """Minimum-footprint ADRC: ``u = (k1/b0) r - c`` with ``c = C_u u_lim + C_y y``.

    ``x`` holds the storage variables x_1..x_{n+1} (0-indexed here). With
    ``strict=True`` stepping before :meth:`start`, :meth:`init_direct` or
    :meth:`init_tracking` raises :class:`NotInitializedError`.
    """

    def __init__(self, coeffs: FbtfCoefficients, dtype=float, strict: bool = False):
        self.coeffs = coeffs
        self.order = coeffs.order
        self.dtype = dt = resolve_dtype(dtype)
        self._alpha = [dt(a) for a in coeffs.alpha]
        self._beta = [dt(b) for b in coeffs.beta]
        self._gamma = [dt(g) for g in coeffs.gamma]
        self._ff = dt(coeffs.feedforward)
        self.strict = strict
        self.x = [dt(0)] * (self.order + 1)
        self.started = False

    def start(self) -> None:
        """Enable from the zero state."""
        self.x = [self.dtype(0)] * (self.order + 1)
        self.started = True

    def _update_storage(self, c, u_lim, y) -> None:
        a, b, g, x = self._alpha, self._beta, self._gamma, self.x
        n = self.order
        # ascending i reads x[i+1] before it is overwritten
        for i in range(n):
            x[i] = x[i + 1] - a[i] * c + b[i] * u_lim + g[i + 1] * y
        x[n] = b[n] * u_lim - a[n] * c

    def step(self, r, y, limiter: Limiter | None = None):
        """One control cycle; returns ``(u, u_lim)``."""
        if self.strict and not self.started:
            raise NotInitializedError("controller stepped before start/init")
        dt = self.dtype
        r = dt(r)
        y = dt(y)
        c = self._gamma[0] * y + self.x[0]
        u = self._ff * r - c
        u_lim = u if limiter is None else limiter.limit(u)
        self._update_storage(c, u_lim, y)
        return u, u_lim

    def init_tracking(self, y, u_star, limiter: Limiter | None = None) -> None:
        """Run one cycle while disabled, with the output forced to ``u_star``."""
        dt = self.dtype
        y = dt(y)
        u_star = dt(u_star)
        c = self._gamma[0] * y + self.x[0]
        if limiter is not None:
            limiter.reset(u_star)
        self._update_storage(c, u_star, y)
        self.started = True

    def init_direct(self, y, u_star, limiter: Limiter | None = None) -> None:
        """Set the storage to the steady state for measurement ``y`` and output ``u_star``."""
        dt = self.dtype
        y = dt(y)
        u_star = dt(u_star)
        a, b, g = self._alpha, self._beta, self._gamma
        n = self.order
        c = self._ff * y - u_star
        if limiter is not None:
            limiter.reset(u_star)
        x = [dt(0)] * (n + 1)
        x[n] = b[n] * u_star - a[n] * c
        for i in range(n - 1, -1, -1):
            x[i] = x[i + 1] - a[i] * c + b[i] * u_star + g[i + 1] * y
        self.x = x
        self.started = True


class SsController:
    """State-space ADRC with current observer.

    ``xhat <- A_eso xhat + b_eso u_prev + l y``, then
    ``u = (k1 r - [k^T 1] xhat) / b0``. The limited output is fed back as
    ``u_prev``.
    """

    def __init__(self, design: EsoDesign, b0: float, dtype=float, strict: bool = False):
        self.design = design
        self.b0 = float(b0)
        self.order = n = design.order
        self.dtype = dt = resolve_dtype(dtype)
        self._A = [[dt(v) for v in row] for row in np.asarray(design.A_eso)]
        self._b = [dt(v) for v in design.b_eso]
        self._l = [dt(v) for v in design.l]
        self._k = [dt(v) for v in design.k]
        self._inv_b0 = dt(1.0 / self.b0)
        self.strict = strict
        self.xhat = [dt(0)] * (n + 1)
        self.u_prev = dt(0)
        self.started = False

    @property
    def feedforward(self) -> float:
        return float(self.design.k[0]) / self.b0

    def start(self) -> None:
        dt = self.dtype
        self.xhat = [dt(0)] * (self.order + 1)
        self.u_prev = dt(0)
        self.started = True

    def step(self, r, y, limiter: Limiter | None = None):
        if self.strict and not self.started:
            raise NotInitializedError("controller stepped before start/init")
        dt = self.dtype
        r = dt(r)
        y = dt(y)
        xh, u_prev = self.xhat, self.u_prev
        zero = dt(0)
        new = []
        for row, bi, li in zip(self._A, self._b, self._l):
            acc = zero
            for a, v in zip(row, xh):
                acc = acc + a * v
            acc = acc + bi * u_prev
            acc = acc + li * y
            new.append(acc)
        k = self._k
        acc = k[0] * r
        for i in range(self.order):
            acc = acc - k[i] * new[i]
        acc = acc - new[-1]
        u = acc * self._inv_b0
        u_lim = u if limiter is None else limiter.limit(u)
        self.xhat = new
        self.u_prev = u_lim
        return u, u_lim

    def init_direct(self, y, u_star, limiter: Limiter | None = None) -> None:
        """Steady-state estimate: x1 = y, derivatives zero, disturbance = -b0 u_star."""
        dt = self.dtype
        x = [dt(0)] * (self.order + 1)
        x[0] = dt(y)
        x[-1] = dt(-self.b0 * float(u_star))
        self.xhat = x
        self.u_prev = dt(u_star)
        if limiter is not None:
            limiter.reset(u_star)
        self.started = True
