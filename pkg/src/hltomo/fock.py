"""Fock-space state construction, oscillator wavefunctions, and state metrics.

Quadrature convention used throughout: x = (a e^{-i phi} + a^dag e^{i phi}) / sqrt(2),
so the vacuum quadrature variance is 1/2 and psi_0(x) = pi^{-1/4} exp(-x^2/2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.stats import poisson

from .errors import (
    CutoffTooSmallError,
    DimensionMismatchError,
    DomainError,
    NonHermitianError,
    OrderOverflowError,
)

DEFAULT_DIM = 12          # cutoff for |alpha| ~ 1 signals
DEFAULT_FOCK_DIM = 6      # cutoff for single-photon states
DEFAULT_TAIL_LIMIT = 1e-8
DEFAULT_MAX_ORDER = 2 * DEFAULT_DIM + 2

HERMITICITY_TOL = 1e-10


# ---------------------------------------------------------------------------
# state preparations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Coherent:
    """Coherent state |alpha>."""

    amplitude: complex

    def __post_init__(self):
        if not np.isfinite(self.amplitude):
            raise DomainError("coherent amplitude must be finite")


@dataclass(frozen=True)
class Phav:
    """Phase-averaged coherent state: Poissonian diagonal mixture of |n><n|."""

    modulus: float

    def __post_init__(self):
        if not (np.isfinite(self.modulus) and self.modulus >= 0):
            raise DomainError("phase-averaged modulus must be finite and >= 0")


@dataclass(frozen=True)
class Fock:
    """Photon-number state |n>, n in {0, 1}."""

    n: int

    def __post_init__(self):
        if self.n not in (0, 1):
            raise DomainError(f"only Fock n in {{0, 1}} is supported, got {self.n}")


@dataclass(frozen=True)
class AttenuatedFock1:
    """Single photon after loss: eta |1><1| + (1 - eta) |0><0|."""

    eta: float

    def __post_init__(self):
        if not (0.0 < self.eta <= 1.0):
            raise DomainError(f"attenuation eta must be in (0, 1], got {self.eta}")


StatePrep = Union[Coherent, Phav, Fock, AttenuatedFock1]


def default_dim(prep: StatePrep) -> int:
    """Recommended Fock cutoff for building a given preparation."""
    if isinstance(prep, (Coherent, Phav)):
        return DEFAULT_DIM
    return DEFAULT_FOCK_DIM


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

class FockBasisMatrix:
    """Truncated density matrix in the photon-number basis.

    ``tail_mass`` records the probability mass lost to truncation for
    analytically built states (0 for exact finite states, and for
    reconstructed matrices where it is not meaningful).
    """

    __slots__ = ("matrix", "tail_mass")

    def __init__(self, matrix: np.ndarray, tail_mass: float = 0.0):
        matrix = np.asarray(matrix, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise DomainError(f"density matrix must be square, got shape {matrix.shape}")
        if matrix.shape[0] < 1:
            raise DomainError("density matrix must be at least 1x1")
        matrix = matrix.copy()
        matrix.setflags(write=False)
        self.matrix = matrix
        self.tail_mass = float(tail_mass)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    def hermiticity_defect(self) -> float:
        """Largest |rho_nm - conj(rho_mn)|."""
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def photon_number_distribution(self) -> "PhotonNumberDistribution":
        return PhotonNumberDistribution(np.real(np.diag(self.matrix)))

    def __repr__(self) -> str:
        return f"FockBasisMatrix(dim={self.dim}, tail_mass={self.tail_mass:.3g})"


class PhotonNumberDistribution:
    """Probabilities over photon number; tiny negative entries are clamped."""

    __slots__ = ("probs",)

    def __init__(self, probs: np.ndarray):
        probs = np.asarray(probs, dtype=float)
        if probs.ndim != 1:
            raise DomainError("photon-number probabilities must be a vector")
        if np.min(probs) < -1e-12:
            raise DomainError(f"negative probability {np.min(probs):.3e} beyond tolerance")
        total = float(np.sum(probs))
        if total > 1.0 + 1e-9:
            raise DomainError(f"probabilities sum to {total} > 1")
        probs = np.clip(probs, 0.0, None)
        probs.setflags(write=False)
        self.probs = probs

    def mean(self) -> float:
        return float(np.sum(np.arange(self.probs.size) * self.probs))

    def __len__(self) -> int:
        return self.probs.size


# ---------------------------------------------------------------------------
# oscillator wavefunctions
# ---------------------------------------------------------------------------

def oscillator_wavefunction(n: int, x, max_order: int = DEFAULT_MAX_ORDER):
    """n-th normalized harmonic-oscillator eigenfunction at x.

    Evaluated with the stable three-term recurrence
    psi_{k+1} = sqrt(2/(k+1)) x psi_k - sqrt(k/(k+1)) psi_{k-1},
    never through factorials.
    """
    if n < 0:
        raise DomainError(f"order must be >= 0, got {n}")
    if n > max_order:
        raise OrderOverflowError(f"order {n} exceeds max order {max_order}")
    x_arr = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x_arr)):
        raise DomainError("wavefunction argument must be finite")
    table = wavefunction_table(n, x_arr)
    result = table[n]
    if np.isscalar(x) or x_arr.ndim == 0:
        return float(result)
    return result


def wavefunction_table(nmax: int, x: np.ndarray) -> np.ndarray:
    """psi_0..psi_nmax evaluated at an array of points, shape (nmax+1, len(x))."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros((nmax + 1, x.size))
    out[0] = np.pi ** -0.25 * np.exp(-0.5 * x * x)
    if nmax >= 1:
        out[1] = np.sqrt(2.0) * x * out[0]
    for k in range(1, nmax):
        out[k + 1] = np.sqrt(2.0 / (k + 1)) * x * out[k] - np.sqrt(k / (k + 1.0)) * out[k - 1]
    return out


# ---------------------------------------------------------------------------
# state building
# ---------------------------------------------------------------------------

def coherent_truncation_tail(modulus: float, dim: int) -> float:
    """Poisson mass beyond the cutoff for a coherent/phase-averaged state."""
    return float(poisson.sf(dim - 1, modulus * modulus))


def build_state(prep: StatePrep, dim: int, tail_limit: float | None = DEFAULT_TAIL_LIMIT) -> FockBasisMatrix:
    """Truncated density matrix of a state preparation.

    ``tail_limit`` bounds the admissible truncation tail for coherent-type
    states; pass None to skip the check (the tail is still reported).
    """
    if dim < 2:
        raise DomainError(f"cutoff must be >= 2, got {dim}")

    if isinstance(prep, (Coherent, Phav)):
        modulus = abs(prep.amplitude) if isinstance(prep, Coherent) else prep.modulus
        tail = coherent_truncation_tail(modulus, dim)
        if tail_limit is not None and tail >= tail_limit:
            raise CutoffTooSmallError(
                f"truncation tail {tail:.3e} at dim {dim} exceeds limit {tail_limit:.1e}"
            )
        n = np.arange(dim)
        # amplitudes alpha^n / sqrt(n!) with the e^{-|alpha|^2/2} prefactor,
        # built multiplicatively to avoid factorial overflow
        if isinstance(prep, Coherent):
            alpha = complex(prep.amplitude)
            amps = np.ones(dim, dtype=complex)
            for k in range(1, dim):
                amps[k] = amps[k - 1] * alpha / np.sqrt(k)
            amps *= np.exp(-abs(alpha) ** 2 / 2.0)
            return FockBasisMatrix(np.outer(amps, amps.conj()), tail_mass=tail)
        probs = poisson.pmf(n, modulus * modulus)
        return FockBasisMatrix(np.diag(probs.astype(complex)), tail_mass=tail)

    if isinstance(prep, Fock):
        mat = np.zeros((dim, dim), dtype=complex)
        mat[prep.n, prep.n] = 1.0
        return FockBasisMatrix(mat)

    if isinstance(prep, AttenuatedFock1):
        mat = np.zeros((dim, dim), dtype=complex)
        mat[0, 0] = 1.0 - prep.eta
        mat[1, 1] = prep.eta
        return FockBasisMatrix(mat)

    raise DomainError(f"unsupported state preparation {prep!r}")


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def _require_hermitian(rho: FockBasisMatrix, tol: float = HERMITICITY_TOL) -> np.ndarray:
    defect = rho.hermiticity_defect()
    if defect > tol:
        raise NonHermitianError(f"hermiticity defect {defect:.3e} exceeds {tol:.1e}")
    return (rho.matrix + rho.matrix.conj().T) / 2.0


def clip_to_physical(matrix: np.ndarray) -> np.ndarray:
    """Clip negative eigenvalues to zero and renormalize to unit trace."""
    vals, vecs = np.linalg.eigh(matrix)
    vals = np.clip(vals, 0.0, None)
    total = float(np.sum(vals))
    if total <= 0.0:
        raise DomainError("matrix has no positive spectral weight")
    vals /= total
    return (vecs * vals) @ vecs.conj().T


def fidelity(rho: FockBasisMatrix, sigma: FockBasisMatrix, clip_negative: bool = True) -> float:
    """Uhlmann fidelity F(rho, sigma) = (Tr sqrt(sqrt(sigma) rho sqrt(sigma)))^2.

    By default both inputs are clipped to their nearest physical (positive,
    unit-trace) spectrum first, which is the convention used when scoring
    reconstructed matrices; pass clip_negative=False for the raw value.
    For a pair of diagonal matrices this reduces to the squared Bhattacharyya
    overlap of the photon-number distributions.
    """
    if rho.dim != sigma.dim:
        raise DimensionMismatchError(f"dimension mismatch: {rho.dim} vs {sigma.dim}")
    a = _require_hermitian(rho)
    b = _require_hermitian(sigma)
    if clip_negative:
        a = clip_to_physical(a)
        b = clip_to_physical(b)

    vals_b, vecs_b = np.linalg.eigh(b)
    sqrt_b = (vecs_b * np.sqrt(np.clip(vals_b, 0.0, None))) @ vecs_b.conj().T
    inner = sqrt_b @ a @ sqrt_b
    inner = (inner + inner.conj().T) / 2.0
    vals = np.linalg.eigvalsh(inner)
    root_sum = float(np.sum(np.sqrt(np.clip(vals, 0.0, None))))
    return root_sum * root_sum


def mean_photon_number(rho: FockBasisMatrix) -> float:
    """<n> = sum_n n Re(rho_nn)."""
    diag = np.real(np.diag(rho.matrix))
    return float(np.sum(np.arange(rho.dim) * diag))
