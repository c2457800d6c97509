"""Design-time synthesis for discrete-time linear ADRC.

Builds the ZOH-discretized extended state observer (current-observer form),
places all observer poles at a common location ``z_eso``, computes the
bandwidth-tuned state-feedback gains and condenses everything into the
coefficients of the two feedback transfer functions

    C_u(z) = z^-1 * (sum beta_i z^-i)  / (1 + sum alpha_i z^-i)
    C_y(z) =        (sum gamma_i z^-i) / (1 + sum alpha_i z^-i)

that the minimum-footprint runtime executes. The algebra is carried out
exactly over the rationals on the given double inputs and rounded once, so
closed forms and the general-order synthesis agree to the last bit
or two.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = [
    "DesignError",
    "SingularSystemError",
    "CoefficientOverflowError",
    "DesignSpec",
    "EsoDesign",
    "FbtfCoefficients",
    "controller_gains",
    "zoh_discretize",
    "faddeev_leverrier",
    "observer_gain",
    "eso_matrices",
    "eso_design",
    "fbtf_synthesize",
    "closed_form_coefficients",
    "dc_residuals",
    "design_warnings",
    "rel_err",
    "DEADBEAT_FLOOR",
    "IDENTITY_RTOL",
]

DEADBEAT_FLOOR = 1e-12
IDENTITY_RTOL = 1e-9
_ABS_FLOOR = 1e-300


class DesignError(ValueError):
    """Invalid tuning parameters."""


class SingularSystemError(DesignError):
    def __init__(self, message: str, condition: float):
        super().__init__(f"{message} (condition number {condition:.3e})")
        self.condition = condition


class CoefficientOverflowError(DesignError, ArithmeticError):
    pass


def rel_err(actual, expected) -> float:
    """Norm-wise relative error ``max|a - e| / max|e|`` (floored at 1e-300)."""
    a = np.atleast_1d(np.asarray(actual, dtype=float))
    e = np.atleast_1d(np.asarray(expected, dtype=float))
    return float(np.max(np.abs(a - e)) / max(float(np.max(np.abs(e))), _ABS_FLOOR))


@dataclass(frozen=True)
class DesignSpec:
    """The five tuning inputs of a bandwidth-parameterized ADRC."""

    order: int
    b0: float
    T: float
    omega_cl: float
    k_eso: float

    def __post_init__(self):
        if isinstance(self.order, bool) or int(self.order) != self.order:
            raise DesignError(f"order must be an integer >= 1, got {self.order!r}")
        object.__setattr__(self, "order", int(self.order))
        for name in ("b0", "T", "omega_cl", "k_eso"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise DesignError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        if self.order < 1:
            raise DesignError(f"order must be >= 1, got {self.order}")
        if self.T <= 0:
            raise DesignError(f"sample time T must be > 0, got {self.T}")
        if self.omega_cl <= 0:
            raise DesignError(f"omega_cl must be > 0, got {self.omega_cl}")
        if self.k_eso <= 0:
            raise DesignError(f"k_eso must be > 0, got {self.k_eso}")
        if self.b0 == 0:
            raise DesignError("b0 must be nonzero")

    @property
    def z_eso(self) -> float:
        """Observer pole in the z-domain, clamped to 0 below 1e-12."""
        z = math.exp(-self.k_eso * self.omega_cl * self.T)
        return 0.0 if z < DEADBEAT_FLOOR else z


@dataclass(frozen=True, eq=False)
class EsoDesign:
    A_d: np.ndarray
    b_d: np.ndarray
    l: np.ndarray
    A_eso: np.ndarray
    b_eso: np.ndarray
    k: np.ndarray
    z_eso: float

    @property
    def order(self) -> int:
        return len(self.k)


@dataclass(frozen=True)
class FbtfCoefficients:
    """Deployable coefficient set of the feedback-transfer-function controller.

    ``alpha`` holds alpha_1..alpha_{n+1}, ``beta`` and ``gamma`` hold the
    numerator coefficients for indices 0..n. The one-sample delay of C_u is
    not folded into ``beta``.
    """

    order: int
    alpha: tuple[float, ...]
    beta: tuple[float, ...]
    gamma: tuple[float, ...]
    feedforward: float
    T: float
    b0: float
    omega_cl: float
    k_eso: float
    z_eso: float

    def __post_init__(self):
        n = self.order
        for name in ("alpha", "beta", "gamma"):
            values = tuple(float(v) for v in getattr(self, name))
            if len(values) != n + 1:
                raise DesignError(f"{name} must have {n + 1} entries for order {n}, got {len(values)}")
            object.__setattr__(self, name, values)

    @property
    def spec(self) -> DesignSpec:
        return DesignSpec(self.order, self.b0, self.T, self.omega_cl, self.k_eso)


def controller_gains(n: int, omega_cl: float) -> np.ndarray:
    """State-feedback gains placing all n closed-loop poles at -omega_cl."""
    if n < 1:
        raise DesignError(f"order must be >= 1, got {n}")
    if not omega_cl > 0:
        raise DesignError(f"omega_cl must be > 0, got {omega_cl}")
    return np.array([math.comb(n, i - 1) * omega_cl ** (n - i + 1) for i in range(1, n + 1)], dtype=float)


def zoh_discretize(n: int, b0: float, T: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact ZOH equivalent of the (n+1)-state extended integrator chain.

    The continuous system matrix is nilpotent, so the matrix exponential
    series terminates and the result is the Toeplitz matrix T^m/m!.
    """
    if n < 1:
        raise DesignError(f"order must be >= 1, got {n}")
    if not T > 0:
        raise DesignError(f"sample time T must be > 0, got {T}")
    N = n + 1
    A_d = np.zeros((N, N))
    for i in range(N):
        for j in range(i, N):
            A_d[i, j] = T ** (j - i) / math.factorial(j - i)
    b_d = np.zeros(N)
    for i in range(n):
        b_d[i] = b0 * T ** (n - i) / math.factorial(n - i)
    return A_d, b_d


def faddeev_leverrier(A) -> tuple[list, list]:
    """Characteristic polynomial and resolvent coefficients of a square matrix.

    Returns ``(c, M)`` with ``det(zI - A) = sum_k c[k] z^(N-k)`` (``c[0] = 1``)
    and ``adj(zI - A) = sum_{k=1..N} M[k-1] z^(N-k)``; equivalently
    ``det(I - wA) = sum_k c[k] w^k`` and ``adj(I - wA) = sum_k M[k] w^k``.

    Works on nested lists of any field type; with ``Fraction`` entries the
    result is exact. Float input goes through numpy.
    """
    if isinstance(A, np.ndarray) and A.dtype.kind == "f":
        N = A.shape[0]
        c = np.zeros(N + 1)
        c[0] = 1.0
        M = np.zeros((N, N, N))
        prev = np.zeros((N, N))
        for k in range(1, N + 1):
            prev = A @ prev + c[k - 1] * np.eye(N)
            M[k - 1] = prev
            c[k] = -np.trace(A @ prev) / k
        return list(c), list(M)
    A = [list(row) for row in A]
    N = len(A)
    zero = A[0][0] * 0
    c = [zero + 1]
    M = []
    prev = [[zero] * N for _ in range(N)]
    for k in range(1, N + 1):
        Mk = _matmul(A, prev)
        for i in range(N):
            Mk[i][i] += c[k - 1]
        M.append(Mk)
        AM = _matmul(A, Mk)
        c.append(-sum(AM[i][i] for i in range(N)) / k)
        prev = Mk
    return c, M


def _matmul(A, B):
    Bt = list(zip(*B))
    return [[sum(a * b for a, b in zip(row, col)) for col in Bt] for row in A]


def _vecmat(v, A):
    return [sum(v[i] * A[i][j] for i in range(len(v))) for j in range(len(A[0]))]


def _dot(u, v):
    return sum(a * b for a, b in zip(u, v))


def _exact(values):
    return [Fraction(float(v)) for v in values]


def _solve_exact(S, rhs):
    """Gaussian elimination over the rationals; ``None`` if singular."""
    N = len(S)
    aug = [list(S[i]) + [rhs[i]] for i in range(N)]
    for col in range(N):
        piv = next((r for r in range(col, N) if aug[r][col] != 0), None)
        if piv is None:
            return None
        aug[col], aug[piv] = aug[piv], aug[col]
        p = aug[col][col]
        for r in range(col + 1, N):
            f = aug[r][col] / p
            if f:
                aug[r] = [x - f * y for x, y in zip(aug[r], aug[col])]
    x = [Fraction(0)] * N
    for i in reversed(range(N)):
        x[i] = (aug[i][N] - sum(aug[i][j] * x[j] for j in range(i + 1, N))) / aug[i][i]
    return x


def _to_float(values, what: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in values])
    except OverflowError:
        raise CoefficientOverflowError(f"{what} overflows double precision") from None


def _observer_gain_exact(A, z):
    """Exact observer gain for a Fraction matrix ``A`` and Fraction pole ``z``."""
    N = len(A)
    c, M = faddeev_leverrier(A)
    m = A[0]
    # row k: coefficient of z^(N-1-k) in m^T adj(zI - A) l
    S = [_vecmat(m, M[k]) for k in range(N)]
    rhs = [math.comb(N, k) * (-z) ** k - c[k] for k in range(1, N + 1)]
    l = _solve_exact(S, rhs)
    if l is None:
        Sf = np.array([[float(v) for v in row] for row in S])
        scale = np.max(np.abs(Sf), axis=0)
        scale[scale == 0] = 1.0
        raise SingularSystemError("observer gain system is singular", float(np.linalg.cond(Sf / scale)))
    return l


def observer_gain(A_d, z_eso: float) -> np.ndarray:
    """Observer gain placing every eigenvalue of A_d - l c^T A_d at ``z_eso``.

    The characteristic polynomial of the corrected matrix is affine in ``l``:
    ``det(zI - A_d + l m^T) = det(zI - A_d) + m^T adj(zI - A_d) l`` with
    ``m^T = c^T A_d``, so matching coefficients against the binomial
    expansion of ``(z - z_eso)^N`` is one linear solve. The solve is done
    exactly on the given double values and rounded once.
    """
    if not 0 <= z_eso <= 1:
        raise DesignError(f"z_eso must lie in [0, 1], got {z_eso}")
    A = [_exact(row) for row in np.asarray(A_d, dtype=float)]
    return _to_float(_observer_gain_exact(A, Fraction(float(z_eso))), "observer gain")


def eso_matrices(A_d: np.ndarray, b_d: np.ndarray, l: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Current-observer matrices A_eso = A_d - l c^T A_d, b_eso = b_d - l c^T b_d."""
    A_d = np.asarray(A_d, dtype=float)
    b_d = np.asarray(b_d, dtype=float)
    l = np.asarray(l, dtype=float)
    return A_d - np.outer(l, A_d[0]), b_d - l * b_d[0]


@dataclass(frozen=True)
class _ExactDesign:
    A_d: list
    b_d: list
    l: list
    A_eso: list
    b_eso: list
    k: list
    z: Fraction


def _exact_design(spec: DesignSpec) -> _ExactDesign:
    n = spec.order
    N = n + 1
    T = Fraction(spec.T)
    b0 = Fraction(spec.b0)
    A = [[T ** (j - i) / math.factorial(j - i) if j >= i else Fraction(0) for j in range(N)] for i in range(N)]
    b = [b0 * T ** (n - i) / math.factorial(n - i) for i in range(n)] + [Fraction(0)]
    z = Fraction(spec.z_eso)
    l = _observer_gain_exact(A, z)
    A_eso = [[A[i][j] - l[i] * A[0][j] for j in range(N)] for i in range(N)]
    b_eso = [b[i] - l[i] * b[0] for i in range(N)]
    w = Fraction(spec.omega_cl)
    k = [math.comb(n, i - 1) * w ** (n - i + 1) for i in range(1, n + 1)]
    return _ExactDesign(A, b, l, A_eso, b_eso, k, z)


def eso_design(spec: DesignSpec) -> EsoDesign:
    d = _exact_design(spec)
    return EsoDesign(
        A_d=np.array([_to_float(row, "A_d") for row in d.A_d]),
        b_d=_to_float(d.b_d, "b_d"),
        l=_to_float(d.l, "observer gain"),
        A_eso=np.array([_to_float(row, "A_eso") for row in d.A_eso]),
        b_eso=_to_float(d.b_eso, "b_eso"),
        k=controller_gains(spec.order, spec.omega_cl),
        z_eso=spec.z_eso,
    )


def fbtf_synthesize(spec: DesignSpec) -> FbtfCoefficients:
    """Coefficients of C_u and C_y for an arbitrary-order design.

    The denominator is the characteristic polynomial of A_eso in z^-1; the
    numerators come from the resolvent ``adj(I - z^-1 A_eso)``. Everything
    is exact over the rationals until the final rounding, so each
    coefficient is the correctly rounded value for the given double inputs.
    """
    d = _exact_design(spec)
    n = spec.order
    c, M = faddeev_leverrier(d.A_eso)
    b0 = Fraction(spec.b0)
    q = [ki / b0 for ki in d.k] + [1 / b0]
    beta = [_dot(_vecmat(q, M[i]), d.b_eso) for i in range(n + 1)]
    gamma = [_dot(_vecmat(q, M[i]), d.l) for i in range(n + 1)]
    return FbtfCoefficients(
        order=n,
        alpha=tuple(_to_float(c[1:], "alpha")),
        beta=tuple(_to_float(beta, "beta")),
        gamma=tuple(_to_float(gamma, "gamma")),
        feedforward=float(_to_float([q[0]], "feedforward")[0]),
        T=spec.T,
        b0=spec.b0,
        omega_cl=spec.omega_cl,
        k_eso=spec.k_eso,
        z_eso=spec.z_eso,
    )


def closed_form_coefficients(spec: DesignSpec) -> FbtfCoefficients:
    """Closed-form coefficients for first- and second-order ADRC.

    Each cell is evaluated exactly from the double inputs, then rounded.
    """
    n = spec.order
    if n not in (1, 2):
        raise DesignError(f"closed forms exist only for order 1 and 2, got {n}")
    T, b0, w, z = (Fraction(v) for v in (spec.T, spec.b0, spec.omega_cl, spec.z_eso))
    Tw = T * w
    half = Fraction(1, 2)
    if n == 1:
        alpha = (-2 * z, z**2)
        beta = (Tw * z**2 - (1 - z) ** 2, -Tw * z**2)
        gamma = (
            1 / (b0 * T) * (Tw * (1 - z**2) + (1 - z) ** 2),
            1 / (b0 * T) * (2 * Tw * (z**2 - z) - (1 - z) ** 2),
        )
        ff = w / b0
    else:
        alpha = (-3 * z, 3 * z**2, -(z**3))
        beta = (
            half * (-Tw * z**3 * (4 - Tw) + Tw * (1 + z) ** 3 - (1 - z) ** 3),
            half * (-Tw * (1 + z) ** 3 - (1 - z) ** 3),
            half * (Tw * z**3 * (4 - Tw)),
        )
        g = 1 / (b0 * T**2)
        gamma = (
            g * (Tw**2 * (1 - z**3) + 3 * Tw * (1 - z - z**2 + z**3) + (1 - z) ** 3),
            g * (3 * Tw**2 * (-z + z**3) + 4 * Tw * (-1 + 3 * z**2 - 2 * z**3) - 2 * (1 - z) ** 3),
            g * (3 * Tw**2 * (z**2 - z**3) + Tw * (1 + 3 * z - 9 * z**2 + 5 * z**3) + (1 - z) ** 3),
        )
        ff = w**2 / b0
    return FbtfCoefficients(
        n,
        tuple(_to_float(alpha, "alpha")),
        tuple(_to_float(beta, "beta")),
        tuple(_to_float(gamma, "gamma")),
        float(ff),
        spec.T,
        spec.b0,
        spec.omega_cl,
        spec.k_eso,
        spec.z_eso,
    )


def dc_residuals(coeffs: FbtfCoefficients) -> dict[str, float]:
    """Relative residuals of the three DC-gain identities.

    ``denominator``: 1 + sum(alpha) = (1 - z_eso)^(n+1);
    ``C_u(1)``: sum(beta) = -(1 + sum(alpha));
    ``C_y(1)``: sum(gamma) = feedforward * (1 + sum(alpha)).
    """
    n = coeffs.order
    den = 1.0 + math.fsum(coeffs.alpha)
    # scale each residual by the size of the terms summed, not the (tiny) sum
    a_scale = max(1.0, max(abs(a) for a in coeffs.alpha))
    b_scale = max(abs(b) for b in coeffs.beta)
    g_scale = max(abs(g) for g in coeffs.gamma)
    target = (1.0 - coeffs.z_eso) ** (n + 1)
    return {
        "denominator": abs(den - target) / a_scale,
        "C_u(1)": abs(math.fsum(coeffs.beta) + den) / max(b_scale, _ABS_FLOOR),
        "C_y(1)": abs(math.fsum(coeffs.gamma) - coeffs.feedforward * den) / max(g_scale, _ABS_FLOOR),
    }


def design_warnings(spec: DesignSpec) -> list[str]:
    out = []
    if spec.omega_cl * spec.T > 1:
        out.append(f"omega_cl*T = {spec.omega_cl * spec.T:g} > 1: sampling is slow relative to the bandwidth")
    if math.exp(-spec.k_eso * spec.omega_cl * spec.T) < DEADBEAT_FLOOR:
        out.append("z_eso below 1e-12 clamped to 0 (deadbeat observer)")
    return out
