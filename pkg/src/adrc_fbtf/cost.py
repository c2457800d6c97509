"""Arithmetic cost audit of the controller implementations.

Counts are measured, not derived: one controller step is executed on
:class:`Counted` scalars that tally every multiplication and addition
(subtraction counts as an addition). The limiter is left out, as are
conversions of inputs into the scalar type.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .design import EsoDesign, FbtfCoefficients
from .runtime import FbtfController, SsController

__all__ = ["OpCount", "Tally", "Counted", "audit", "audit_formula", "IMPLEMENTATIONS", "audit_table"]

IMPLEMENTATIONS = ("fbtf", "state-space")


@dataclass(frozen=True)
class OpCount:
    mul: int
    add: int
    vars: int


class Tally:
    def __init__(self):
        self.mul = 0
        self.add = 0


class Counted:
    """Float wrapper that reports each ``*``, ``+`` and ``-`` to a :class:`Tally`."""

    __slots__ = ("value", "tally")

    def __init__(self, value, tally: Tally):
        self.value = value.value if isinstance(value, Counted) else float(value)
        self.tally = tally

    @staticmethod
    def _v(other):
        return other.value if isinstance(other, Counted) else float(other)

    def __add__(self, other):
        self.tally.add += 1
        return Counted(self.value + self._v(other), self.tally)

    def __radd__(self, other):
        self.tally.add += 1
        return Counted(self._v(other) + self.value, self.tally)

    def __sub__(self, other):
        self.tally.add += 1
        return Counted(self.value - self._v(other), self.tally)

    def __rsub__(self, other):
        self.tally.add += 1
        return Counted(self._v(other) - self.value, self.tally)

    def __mul__(self, other):
        self.tally.mul += 1
        return Counted(self.value * self._v(other), self.tally)

    def __rmul__(self, other):
        self.tally.mul += 1
        return Counted(self._v(other) * self.value, self.tally)

    def __float__(self):
        return self.value

    def __repr__(self):
        return f"Counted({self.value!r})"


def _generic_values(count: int, seed: int) -> list[float]:
    # distinct, nonzero, non-unit values so nothing could be elided
    return list(np.random.default_rng(seed).uniform(0.1, 0.9, count))


def _fbtf_coeffs(n: int) -> FbtfCoefficients:
    v = _generic_values(3 * (n + 1) + 1, n)
    N = n + 1
    return FbtfCoefficients(n, v[:N], v[N : 2 * N], v[2 * N : 3 * N], v[-1], 1e-3, 2.0, 10.0, 3.0, 0.5)


def _eso_design(n: int) -> EsoDesign:
    N = n + 1
    v = _generic_values(N * N + 3 * N + n, 100 + n)
    A = np.array(v[: N * N]).reshape(N, N)
    rest = v[N * N :]
    return EsoDesign(A, np.array(rest[:N]), np.array(rest[N : 2 * N]), A, np.array(rest[2 * N : 3 * N]), np.array(rest[3 * N :]), 0.5)


def audit(implementation: str, n: int) -> OpCount:
    """Measured cost of one step of ``implementation`` at order ``n``."""
    if n < 1:
        raise ValueError(f"order must be >= 1, got {n}")
    tally = Tally()

    def dtype(v):
        return Counted(v, tally)

    if implementation == "fbtf":
        ctrl = FbtfController(_fbtf_coeffs(n), dtype=dtype)
        ctrl.init_direct(0.3, 0.7)
        state = ctrl.x
    elif implementation == "state-space":
        ctrl = SsController(_eso_design(n), b0=2.0, dtype=dtype)
        ctrl.init_direct(0.3, 0.7)
        state = ctrl.xhat
    else:
        raise ValueError(f"unknown implementation {implementation!r}; expected one of {IMPLEMENTATIONS}")
    tally.mul = tally.add = 0
    ctrl.step(0.4, 0.25)
    return OpCount(tally.mul, tally.add, len(state))


def audit_formula(implementation: str, n: int) -> OpCount:
    """Closed-form per-step cost; ``"tf-error"`` is the error-based transfer-function form (not implemented here)."""
    if implementation == "fbtf":
        return OpCount(3 * n + 4, 3 * n + 3, n + 1)
    if implementation == "state-space":
        return OpCount(n * n + 5 * n + 5, n * n + 5 * n + 4, n + 1)
    if implementation == "tf-error":
        return OpCount(4 * n + 3, 4 * n + 2, 2 * n + 2)
    raise ValueError(f"unknown implementation {implementation!r}")


def audit_table(max_order: int = 6) -> tuple[list[str], bool]:
    """Measured-vs-formula report lines and whether every count matched."""
    lines = [f"{'n':>2}  {'implementation':<12}  {'measured mul/add/var':>20}  {'formula mul/add/var':>19}  ok"]
    all_ok = True
    for n in range(1, max_order + 1):
        for impl in IMPLEMENTATIONS:
            got, want = audit(impl, n), audit_formula(impl, n)
            ok = got == want
            all_ok &= ok
            lines.append(
                f"{n:>2}  {impl:<12}  {f'{got.mul}/{got.add}/{got.vars}':>20}  "
                f"{f'{want.mul}/{want.add}/{want.vars}':>19}  {'yes' if ok else 'NO'}"
            )
        tf = audit_formula("tf-error", n)
        lines.append(f"{n:>2}  {'tf-error':<12}  {'(not implemented)':>20}  {f'{tf.mul}/{tf.add}/{tf.vars}':>19}  -")
    return lines, all_ok
