"""Pattern functions for density-matrix sampling from quadrature data.

The estimator rho_nm = mean over samples of f_nm(x_k) e^{i(n-m) phi_k}
(phases uniform on [0, pi)) needs the kernels

    f_nm(x) = d/dx [ psi_a(x) phi_b(x) ],   a = min(n, m), b = max(n, m),

where psi is the normalizable oscillator eigenfunction and phi the irregular
second solution of the same equation, normalized so that the Wronskian
psi phi' - psi' phi equals 2. Taking the regular solution at the smaller
index is what keeps f bounded; the other pairing grows polynomially.

The irregular solutions are tabulated by integrating the oscillator equation
outward from exact parity initial conditions at the origin (integrating the
dominant solution outward is uniformly stable; order recurrences lose the
far tail to contamination by the regular family). Evaluation interpolates
the tabulated kernels with cubic splines.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from .errors import DomainError, OrderOverflowError, PatternInstabilityError
from .fock import wavefunction_table

DEFAULT_ENVELOPE = 4.0  # sanity bound on |f_nm|; valid for max_index <= 9
SPLINE_ORDER = 3
_ODE_RTOL = 1e-12


def _grid_step(max_index: int) -> float:
    # cubic-interpolation error ~ (5/384) (h k)^4 max|f| with local wavenumber
    # k <= sqrt(2 max_index + 1); keep it under 1e-6
    k = np.sqrt(2.0 * max_index + 1.0)
    return min(0.05, ((1e-6 * 384.0) / (5.0 * 4.0)) ** 0.25 / k)


def _irregular_tables(max_index: int, x_half: np.ndarray):
    """phi_b and phi_b' for b <= max_index on a nonnegative grid.

    Integrates y_b'' = (x^2 - (2b+1)) y_b for all orders as one system, from
    parity initial conditions fixed by the Wronskian psi phi' - psi' phi = 2:
    even b: phi(0) = 0, phi'(0) = 2/psi_b(0); odd b: phi(0) = -2/psi_b'(0),
    phi'(0) = 0. Negative x follows from parity (-1)^(b+1).
    """
    orders = np.arange(max_index + 1)
    psi0 = wavefunction_table(max_index, np.array([0.0]))[:, 0]
    y0 = np.zeros(2 * (max_index + 1))
    for b in orders:
        if b % 2 == 0:
            y0[2 * b + 1] = 2.0 / psi0[b]
        else:
            y0[2 * b] = -2.0 / (np.sqrt(2.0 * b) * psi0[b - 1])

    def rhs(t, y):
        out = np.empty_like(y)
        out[0::2] = y[1::2]
        out[1::2] = (t * t - (2 * orders + 1)) * y[0::2]
        return out

    sol = solve_ivp(
        rhs, (0.0, float(x_half[-1])), y0, t_eval=x_half,
        method="DOP853", rtol=_ODE_RTOL, atol=1e-30,
    )
    if not sol.success:
        raise PatternInstabilityError(f"irregular-solution integration failed: {sol.message}")
    return sol.y[0::2, :], sol.y[1::2, :]


def _kernel_tables(max_index: int, x: np.ndarray) -> np.ndarray:
    """f_nm on the symmetric grid x for all n >= m, shape (M+1, M+1, len(x)).

    The grid must be mirror-symmetric around 0; the negative half follows
    from the parity (-1)^(b+1) of the irregular solutions.
    """
    half = x[x >= 0.0]
    phi_half, dphi_half = _irregular_tables(max_index, half)

    parity = (-1.0) ** (np.arange(max_index + 1) + 1)
    mirror = phi_half[:, :0:-1]        # columns at h_k .. h_1 for x = -h_k .. -h_1
    dmirror = dphi_half[:, :0:-1]
    phi = np.concatenate([parity[:, None] * mirror, phi_half], axis=1)
    dphi = np.concatenate([-parity[:, None] * dmirror, dphi_half], axis=1)

    psi = wavefunction_table(max_index, x)
    dpsi = np.empty_like(psi)
    for a in range(max_index + 1):
        lower = np.sqrt(2.0 * a) * psi[a - 1] if a >= 1 else 0.0
        dpsi[a] = lower - x * psi[a]

    out = np.zeros((max_index + 1, max_index + 1, x.size))
    for b in range(max_index + 1):
        for a in range(b + 1):
            f = dpsi[a] * phi[b] + psi[a] * dphi[b]
            out[b, a] = f
            out[a, b] = f
    return out


class PatternFunctionEvaluator:
    """Tabulated pattern-function kernels f_nm with spline evaluation.

    The grid spans [-x_max, x_max] with x_max = sqrt(2 max_index + 1) + 6 by
    default; queries beyond it trigger a rebuild on a wider grid. Tabulated
    values are scanned against the magnitude envelope at construction, since
    a numerically unstable construction shows up as runaway values.
    """

    def __init__(self, max_index: int, x_max: float | None = None,
                 envelope: float = DEFAULT_ENVELOPE):
        if max_index < 0:
            raise DomainError(f"max_index must be >= 0, got {max_index}")
        self.max_index = int(max_index)
        self.envelope = float(envelope)
        self.grid_step = _grid_step(max_index)
        self.spline_order = SPLINE_ORDER
        target = float(x_max) if x_max is not None else np.sqrt(2.0 * max_index + 1.0) + 6.0
        self._build(target)

    def _build(self, target_x_max: float):
        n_half = int(np.ceil(target_x_max / self.grid_step))
        half = np.linspace(0.0, n_half * self.grid_step, n_half + 1)
        grid = np.concatenate([-half[:0:-1], half])
        tables = _kernel_tables(self.max_index, grid)

        peak = float(np.max(np.abs(tables)))
        if peak > self.envelope:
            b, a, i = np.unravel_index(np.argmax(np.abs(tables)), tables.shape)
            raise PatternInstabilityError(
                f"|f_{b}{a}({grid[i]:.3f})| = {peak:.3g} exceeds envelope "
                f"{self.envelope}; construction unstable or envelope too tight"
            )
        splines = {
            (n, m): CubicSpline(grid, tables[n, m])
            for n in range(self.max_index + 1)
            for m in range(n + 1)
        }
        # publish the wider coverage only after the new tables exist
        self.grid = grid
        self._tables = tables
        self._splines = splines
        self.x_max = float(half[-1])

    def _ensure_cover(self, x_abs_max: float):
        if x_abs_max > self.x_max:
            self._build(x_abs_max + 1.0)

    def value(self, n: int, m: int, x):
        """f_nm evaluated at x (scalar or array); symmetric in (n, m)."""
        if min(n, m) < 0:
            raise DomainError(f"indices must be >= 0, got ({n}, {m})")
        if max(n, m) > self.max_index:
            raise OrderOverflowError(
                f"index {max(n, m)} exceeds evaluator max_index {self.max_index}"
            )
        x_arr = np.asarray(x, dtype=float)
        if x_arr.size and not np.all(np.isfinite(x_arr)):
            raise DomainError("pattern-function argument must be finite")
        if x_arr.size:
            self._ensure_cover(float(np.max(np.abs(x_arr))))
        key = (n, m) if n >= m else (m, n)
        result = self._splines[key](x_arr)
        if np.isscalar(x) or x_arr.ndim == 0:
            return float(result)
        return result

    __call__ = value

    def sampling_value(self, n: int, m: int, x, phi):
        """Full sampling kernel f_nm(x) e^{i(n-m) phi} / pi."""
        return self.value(n, m, x) * np.exp(1j * (n - m) * np.asarray(phi)) / np.pi


@lru_cache(maxsize=8)
def cached_evaluator(max_index: int) -> PatternFunctionEvaluator:
    """Shared evaluator per max_index; construction is the expensive part."""
    return PatternFunctionEvaluator(max_index)


def pattern_function(n: int, m: int, x, max_index: int | None = None):
    """f_nm(x) through a cached evaluator sized for max(n, m, max_index)."""
    size = max(n, m) if max_index is None else max_index
    return cached_evaluator(size).value(n, m, x)
