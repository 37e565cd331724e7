"""Density-matrix and quadrature-moment estimation from detection traces.

Matrix elements are sampled as block averages of
f_nm(Delta_phi) e^{i(n-m) phi} over events whose phases are uniform on
[0, pi); block scatter provides the statistical errors. Quadrature moments
use the mean and second-moment kernels evaluated on the same events.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .detection import HLTrace
from .errors import DomainError, PhaseCoverageError
from .fock import Coherent, FockBasisMatrix, Phav, StatePrep
from .patterns import PatternFunctionEvaluator, cached_evaluator

DEFAULT_BLOCKS = 10
PHASE_BINS = 12
MIN_BIN_FRACTION = 0.01


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------

@dataclass
class ReconstructionResult:
    """Block-averaged density matrix with per-element block scatter."""

    rho: FockBasisMatrix
    rho_err: np.ndarray
    n_blocks: int
    n_samples: int
    metadata: dict = field(default_factory=dict)

    def mean_photon_number(self) -> tuple[float, float]:
        """<n> from the diagonal, with the quadrature-summed block error."""
        n = np.arange(self.rho.dim)
        value = float(np.sum(n * np.real(np.diag(self.rho.matrix))))
        err = float(np.sqrt(np.sum((n * np.diag(self.rho_err)) ** 2)) / np.sqrt(self.n_blocks))
        return value, err

    def trace(self) -> tuple[float, float]:
        value = float(np.real(np.trace(self.rho.matrix)))
        err = float(np.sqrt(np.sum(np.diag(self.rho_err) ** 2)) / np.sqrt(self.n_blocks))
        return value, err

    def to_json_document(self) -> dict:
        re = np.real(self.rho.matrix).ravel()
        im = np.imag(self.rho.matrix).ravel()
        return {
            "dim": self.rho.dim,
            "rho_re": re.tolist(),
            "rho_im": im.tolist(),
            "rho_err": self.rho_err.ravel().tolist(),
            "n_blocks": self.n_blocks,
            "n_samples": self.n_samples,
            "metadata": self.metadata,
        }

    def save_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json_document(), indent=2) + "\n",
                              encoding="utf-8")

    @classmethod
    def from_json_document(cls, doc: dict) -> "ReconstructionResult":
        dim = int(doc["dim"])
        mat = (np.asarray(doc["rho_re"], dtype=float)
               + 1j * np.asarray(doc["rho_im"], dtype=float)).reshape(dim, dim)
        return cls(
            rho=FockBasisMatrix(mat),
            rho_err=np.asarray(doc["rho_err"], dtype=float).reshape(dim, dim),
            n_blocks=int(doc["n_blocks"]),
            n_samples=int(doc["n_samples"]),
            metadata=dict(doc.get("metadata", {})),
        )

    @classmethod
    def load_json(cls, path) -> "ReconstructionResult":
        return cls.from_json_document(json.loads(Path(path).read_text(encoding="utf-8")))

    def magnitude_csv(self) -> str:
        """CSV of |rho_nm| for plotting, header n,m,abs_rho."""
        lines = ["n,m,abs_rho"]
        for n in range(self.rho.dim):
            for m in range(self.rho.dim):
                lines.append(f"{n},{m},{abs(self.rho.matrix[n, m])!r}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class MomentEstimate:
    """First two quadrature moments with block standard errors."""

    mean_x: float
    mean_x_err: float
    var_x: float
    var_x_err: float
    theta: float
    eta_assumed: float
    n_blocks: int
    n_samples: int


# ---------------------------------------------------------------------------
# shared block machinery
# ---------------------------------------------------------------------------

def _split_blocks(n_samples: int, n_blocks: int):
    if n_samples == 0:
        raise DomainError("cannot reconstruct from an empty trace")
    if n_blocks < 2:
        raise DomainError(f"need at least 2 blocks, got {n_blocks}")
    if n_samples < n_blocks:
        raise DomainError(f"{n_samples} samples cannot fill {n_blocks} blocks")
    return np.array_split(np.arange(n_samples), n_blocks)


def check_phase_coverage(phases: np.ndarray) -> None:
    """Require every [k pi/12, (k+1) pi/12) bin to hold >= 1% of the data."""
    bins = np.clip((np.asarray(phases) / (np.pi / PHASE_BINS)).astype(int), 0, PHASE_BINS - 1)
    counts = np.bincount(bins, minlength=PHASE_BINS)
    frac = counts / max(len(phases), 1)
    worst = int(np.argmin(frac))
    if frac[worst] < MIN_BIN_FRACTION:
        raise PhaseCoverageError(
            f"phase bin [{worst}pi/12, {worst + 1}pi/12) holds {frac[worst]:.2%} of the "
            f"data (< {MIN_BIN_FRACTION:.0%}); not enough coverage for a phase-sensitive "
            "reconstruction"
        )


# ---------------------------------------------------------------------------
# density-matrix reconstruction
# ---------------------------------------------------------------------------

def _block_matrix(evaluator, dim, delta, delta_phi, phases):
    """Sampling estimate of rho over one block of events.

    Events share lattice values of Delta_phi, so kernels are evaluated once
    per distinct lattice point and combined with per-difference phase sums.
    """
    uniq, first_idx, inv = np.unique(delta, return_index=True, return_inverse=True)
    x_uniq = delta_phi[first_idx]
    # S[j, l] = sum over events at lattice point j of e^{i l phi}
    S = np.empty((uniq.size, dim), dtype=complex)
    for l in range(dim):
        S[:, l] = (np.bincount(inv, weights=np.cos(l * phases), minlength=uniq.size)
                   + 1j * np.bincount(inv, weights=np.sin(l * phases), minlength=uniq.size))
    rho = np.zeros((dim, dim), dtype=complex)
    for n in range(dim):
        for m in range(n + 1):
            f = evaluator.value(n, m, x_uniq)
            rho[n, m] = np.sum(f * S[:, n - m])
            rho[m, n] = np.conj(rho[n, m])
    return rho / len(delta)


def reconstruct(
    samples: HLTrace,
    dim: int,
    n_blocks: int = DEFAULT_BLOCKS,
    evaluator: PatternFunctionEvaluator | None = None,
    require_phase_coverage: bool = True,
    metadata: dict | None = None,
) -> ReconstructionResult:
    """Estimate the density matrix from a detection trace.

    Samples are split into ``n_blocks`` contiguous blocks; the result is the
    block mean, with rho_err the per-element standard deviation over blocks.
    ``require_phase_coverage=False`` bypasses the [0, pi) coverage check for
    phase-insensitive states (e.g. randomly assigned phases make it moot).
    """
    if dim < 1:
        raise DomainError(f"reconstruction dim must be >= 1, got {dim}")
    if require_phase_coverage:
        check_phase_coverage(samples.phase)
    blocks = _split_blocks(len(samples), n_blocks)
    if evaluator is None:
        evaluator = cached_evaluator(dim - 1)

    delta = samples.delta
    delta_phi = samples.delta_phi
    phases = samples.phase
    per_block = np.stack([
        _block_matrix(evaluator, dim, delta[idx], delta_phi[idx], phases[idx])
        for idx in blocks
    ])
    mean = per_block.mean(axis=0)
    mean = (mean + mean.conj().T) / 2.0
    err = np.sqrt(np.mean(np.abs(per_block - mean) ** 2, axis=0) * n_blocks / (n_blocks - 1))

    meta = {
        "lo_magnitude": samples.lo_magnitude,
        "dim": dim,
        "n_blocks": n_blocks,
    }
    if metadata:
        meta.update(metadata)
    return ReconstructionResult(
        rho=FockBasisMatrix(mean),
        rho_err=err,
        n_blocks=n_blocks,
        n_samples=len(samples),
        metadata=meta,
    )


# ---------------------------------------------------------------------------
# quadrature moments
# ---------------------------------------------------------------------------

def estimate_moments(
    samples: HLTrace,
    theta: float = 0.0,
    eta: float = 1.0,
    n_blocks: int = DEFAULT_BLOCKS,
) -> MomentEstimate:
    """Kernel estimates of <x_theta> and var(x_theta) with block errors.

    Kernels: mean 2 x cos(phi - theta); second moment
    (4x^2 - 1/eta)(4 cos^2(phi - theta) - 1)/4 + 1/4. The default eta = 1
    estimates moments of the detected state.
    """
    if not (0.0 < eta <= 1.0):
        raise DomainError(f"eta must be in (0, 1], got {eta}")
    blocks = _split_blocks(len(samples), n_blocks)
    x = samples.delta_phi
    c = np.cos(samples.phase - theta)
    k1 = 2.0 * x * c
    k2 = (4.0 * x * x - 1.0 / eta) * (4.0 * c * c - 1.0) / 4.0 + 0.25

    m1 = np.array([np.mean(k1[idx]) for idx in blocks])
    m2 = np.array([np.mean(k2[idx]) for idx in blocks])
    var = m2 - m1**2
    root_b = np.sqrt(len(blocks))
    return MomentEstimate(
        mean_x=float(np.mean(m1)),
        mean_x_err=float(np.std(m1, ddof=1) / root_b),
        var_x=float(np.mean(var)),
        var_x_err=float(np.std(var, ddof=1) / root_b),
        theta=float(theta),
        eta_assumed=float(eta),
        n_blocks=len(blocks),
        n_samples=len(samples),
    )


def theory_moments(prep: StatePrep, lo_magnitude: float, theta: float = 0.0):
    """Expected (mean, variance) of the rescaled count difference.

    Coherent alpha: mean sqrt(2) |alpha| cos(arg alpha - theta), variance
    1/2 + |alpha|^2/(2 |beta|^2) (the local-oscillator term vanishes as
    |beta| >> |alpha|). Phase-averaged: mean 0, variance
    1/2 + |alpha|^2 + |alpha|^2/(2 |beta|^2), independent of theta.
    """
    if not (np.isfinite(lo_magnitude) and lo_magnitude > 0):
        raise DomainError(f"LO magnitude must be positive, got {lo_magnitude}")
    if isinstance(prep, Coherent):
        alpha = complex(prep.amplitude)
        mean = np.sqrt(2.0) * abs(alpha) * np.cos(np.angle(alpha) - theta)
        var = 0.5 + abs(alpha) ** 2 / (2.0 * lo_magnitude**2)
        return float(mean), float(var)
    if isinstance(prep, Phav):
        var = 0.5 + prep.modulus**2 + prep.modulus**2 / (2.0 * lo_magnitude**2)
        return 0.0, float(var)
    raise DomainError(f"theory moments are defined for coherent and phase-averaged "
                      f"states, not {prep!r}")


def quadrature_profile(rho: FockBasisMatrix, phis: np.ndarray):
    """Mean and standard deviation of x_phi under rho, per phase.

    Used for the mean/std envelope drawn over trace scatter plots.
    """
    phis = np.asarray(phis, dtype=float)
    mat = rho.matrix
    n = np.arange(rho.dim)
    # Tr[rho a] = sum_n sqrt(n) rho_{n, n-1}; Tr[rho a^2] = sum sqrt(n(n-1)) rho_{n, n-2}
    tr_a = np.sum(np.sqrt(n[1:]) * np.diag(mat, k=-1))
    tr_aa = np.sum(np.sqrt(n[2:] * (n[2:] - 1)) * np.diag(mat, k=-2))
    tr_n = np.real(np.sum(n * np.diag(mat)))
    trace = np.real(np.trace(mat))

    mean = np.sqrt(2.0) * np.real(tr_a * np.exp(-1j * phis))
    second = np.real(tr_aa * np.exp(-2j * phis)) + tr_n + 0.5 * trace
    var = np.maximum(second - mean**2, 0.0)
    return mean, np.sqrt(var)
