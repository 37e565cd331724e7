"""Forward model of the homodyne-like detector.

The signal interferes with a weak local oscillator |beta| e^{i phi} at a
balanced beam splitter; each output is read by a photon-number-resolving
detector. The observable is the count difference Delta = n_c - n_d, rescaled
to quadrature units as Delta_phi = Delta / (sqrt(2) |beta|).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterator, Sequence

import numpy as np
from scipy.stats import poisson

from .errors import (
    CutoffCapExceededError,
    DomainError,
    UnequalEfficiencyError,
)
from .fock import AttenuatedFock1, Coherent, Fock, Phav, StatePrep

# Counter-based generator with fixed chunked substreams: traces are
# bit-reproducible for a given seed regardless of how chunks are scheduled.
RNG_ID = "numpy-philox4x64/seedsequence-spawn/chunk65536/v1"
CHUNK_SIZE = 65536

DEFAULT_TAIL_TARGET = 1e-9
SAMPLING_TAIL_TARGET = 1e-12
DEFAULT_CUTOFF_CAP = 2048


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LOField:
    """Local oscillator: coherent field of magnitude |beta| and phase phi."""

    magnitude: float
    phase: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.magnitude) and self.magnitude > 0):
            raise DomainError(f"LO magnitude must be positive, got {self.magnitude}")
        if not np.isfinite(self.phase):
            raise DomainError("LO phase must be finite")


@dataclass(frozen=True)
class DetectorEfficiency:
    """Quantum efficiencies of the two detectors, each in (0, 1]."""

    eta_c: float = 1.0
    eta_d: float = 1.0

    def __post_init__(self):
        for name, eta in (("eta_c", self.eta_c), ("eta_d", self.eta_d)):
            if not (0.0 < eta <= 1.0):
                raise DomainError(f"{name} must be in (0, 1], got {eta}")

    @classmethod
    def equal(cls, eta: float) -> "DetectorEfficiency":
        return cls(eta, eta)

    @property
    def is_equal(self) -> bool:
        return abs(self.eta_c - self.eta_d) <= 1e-12


class JointCountDistribution:
    """Probability table q(n, m) over detector count pairs, plus the mass
    beyond the square cutoff."""

    __slots__ = ("table", "tail_mass")

    def __init__(self, table: np.ndarray, tail_mass: float):
        table = np.asarray(table, dtype=float)
        if table.ndim != 2 or table.shape[0] != table.shape[1]:
            raise DomainError("count table must be square")
        if np.min(table) < -1e-12:
            raise DomainError(f"negative probability {np.min(table):.3e} in count table")
        table = np.clip(table, 0.0, None)
        table.setflags(write=False)
        self.table = table
        self.tail_mass = float(tail_mass)

    @property
    def n_max(self) -> int:
        return self.table.shape[0] - 1

    def mean_difference(self) -> float:
        n = np.arange(self.table.shape[0])
        return float(np.sum(self.table * (n[:, None] - n[None, :])))


@dataclass(frozen=True)
class HLSample:
    """One detection event: count difference, its quadrature-unit rescaling,
    and the local-oscillator phase it was taken at."""

    delta: int
    delta_phi: float
    phase: float


class HLTrace(Sequence[HLSample]):
    """Array-backed sequence of detection events sharing one LO magnitude."""

    __slots__ = ("delta", "phase", "lo_magnitude")

    def __init__(self, delta: np.ndarray, phase: np.ndarray, lo_magnitude: float):
        delta = np.asarray(delta, dtype=np.int64)
        phase = np.asarray(phase, dtype=float)
        if delta.shape != phase.shape or delta.ndim != 1:
            raise DomainError("delta and phase must be 1-d arrays of equal length")
        if not (np.isfinite(lo_magnitude) and lo_magnitude > 0):
            raise DomainError(f"LO magnitude must be positive, got {lo_magnitude}")
        delta.setflags(write=False)
        phase.setflags(write=False)
        self.delta = delta
        self.phase = phase
        self.lo_magnitude = float(lo_magnitude)

    @property
    def delta_phi(self) -> np.ndarray:
        return self.delta / (np.sqrt(2.0) * self.lo_magnitude)

    def __len__(self) -> int:
        return self.delta.size

    def __getitem__(self, index):
        if isinstance(index, slice):
            return HLTrace(self.delta[index], self.phase[index], self.lo_magnitude)
        i = int(index)
        return HLSample(
            delta=int(self.delta[i]),
            delta_phi=float(self.delta[i] / (np.sqrt(2.0) * self.lo_magnitude)),
            phase=float(self.phase[i]),
        )

    def __iter__(self) -> Iterator[HLSample]:
        scale = np.sqrt(2.0) * self.lo_magnitude
        for d, p in zip(self.delta, self.phase):
            yield HLSample(delta=int(d), delta_phi=float(d / scale), phase=float(p))

    def __repr__(self) -> str:
        return f"HLTrace(n={len(self)}, lo_magnitude={self.lo_magnitude})"


def rescale_delta(delta, lo_magnitude: float):
    """Delta -> Delta / (sqrt(2) |beta|)."""
    if not (np.isfinite(lo_magnitude) and lo_magnitude > 0):
        raise DomainError(f"LO magnitude must be positive, got {lo_magnitude}")
    return np.asarray(delta) / (np.sqrt(2.0) * lo_magnitude) if np.ndim(delta) else (
        float(delta) / (np.sqrt(2.0) * lo_magnitude)
    )


# ---------------------------------------------------------------------------
# joint photon statistics
# ---------------------------------------------------------------------------

def _poisson_means_coherent(alpha: complex, lo: LOField, eff: DetectorEfficiency):
    """Detected Poisson means at the two outputs for a coherent signal."""
    beta = lo.magnitude * np.exp(1j * lo.phase)
    mu_c = 0.5 * np.abs(beta + alpha) ** 2
    mu_d = 0.5 * np.abs(beta - alpha) ** 2
    return eff.eta_c * mu_c, eff.eta_d * mu_d

def _coherent_table(alpha: complex, lo: LOField, eff: DetectorEfficiency, size: int) -> np.ndarray:
    mu_c, mu_d = _poisson_means_coherent(alpha, lo, eff)
    n = np.arange(size)
    return np.outer(poisson.pmf(n, mu_c), poisson.pmf(n, mu_d))


def _phav_table(modulus: float, lo: LOField, eff: DetectorEfficiency, size: int) -> np.ndarray:
    """Signal-phase average of the coherent table over [0, 2pi).

    Periodic trapezoid rule (here: equal-weight nodes) with doubling until no
    entry changes by more than 1e-12; the integrand is smooth and periodic so
    convergence is spectral.
    """
    n_theta = 16
    prev = None
    while n_theta <= 4096:
        thetas = 2.0 * np.pi * np.arange(n_theta) / n_theta
        acc = np.zeros((size, size))
        for theta in thetas:
            acc += _coherent_table(modulus * np.exp(1j * theta), lo, eff, size)
        acc /= n_theta
        if prev is not None and np.max(np.abs(acc - prev)) <= 1e-12:
            return acc
        prev = acc
        n_theta *= 2
    return prev


def _fock1_table(eta: float, lo: LOField, size: int) -> np.ndarray:
    """Closed-form joint statistics for a single-photon signal, equal
    efficiencies; exact for any eta in (0, 1]."""
    beta_sq = lo.magnitude ** 2
    lam = eta * beta_sq / 2.0
    n = np.arange(size)
    pois = poisson.pmf(n, lam)
    diff_sq = (n[:, None] - n[None, :]) ** 2
    bracket = 1.0 + (diff_sq - eta * beta_sq) / beta_sq
    if np.min(bracket) < 1.0 - eta - 1e-12:
        raise DomainError("joint-statistics bracket fell below its positivity bound")
    return np.outer(pois, pois) * bracket


def joint_statistics(
    prep: StatePrep,
    lo: LOField,
    eff: DetectorEfficiency = DetectorEfficiency(),
    n_max: int | None = None,
    tail_target: float = DEFAULT_TAIL_TARGET,
    n_max_cap: int = DEFAULT_CUTOFF_CAP,
) -> JointCountDistribution:
    """Joint probability q(n, m) of detecting (n, m) photons at the outputs.

    The cutoff grows automatically until the mass outside the square table is
    below ``tail_target``; exceeding ``n_max_cap`` raises.
    """
    if n_max is None:
        lam = max(eff.eta_c, eff.eta_d) * lo.magnitude ** 2 / 2.0
        if isinstance(prep, (Coherent, Phav)):
            amp = abs(prep.amplitude) if isinstance(prep, Coherent) else prep.modulus
            lam = max(eff.eta_c, eff.eta_d) * (lo.magnitude + amp) ** 2 / 2.0
        n_max = int(np.ceil(lam + 12.0 * np.sqrt(max(lam, 1.0)))) + 10

    while True:
        size = n_max + 1
        if isinstance(prep, Coherent):
            table = _coherent_table(complex(prep.amplitude), lo, eff, size)
        elif isinstance(prep, Phav):
            table = _phav_table(prep.modulus, lo, eff, size)
        elif isinstance(prep, Fock) and prep.n == 0:
            table = _coherent_table(0.0, lo, eff, size)
        elif isinstance(prep, (Fock, AttenuatedFock1)):
            if not eff.is_equal:
                raise UnequalEfficiencyError(
                    "single-photon joint statistics require eta_c == eta_d"
                )
            eta = eff.eta_c
            if isinstance(prep, AttenuatedFock1):
                eta *= prep.eta
            table = _fock1_table(eta, lo, size)
        else:
            raise DomainError(f"unsupported state preparation {prep!r}")

        tail = 1.0 - float(np.sum(table))
        if tail < tail_target:
            return JointCountDistribution(table, tail_mass=tail)
        if 2 * n_max > n_max_cap:
            raise CutoffCapExceededError(
                f"tail {tail:.3e} still above {tail_target:.1e} at cutoff cap {n_max_cap}"
            )
        n_max *= 2


def hl_distribution(q: JointCountDistribution) -> Dict[int, float]:
    """Probability distribution of the count difference Delta = n - m.

    p(Delta) sums q over the diagonal n - m = Delta; the result sums to
    1 - tail_mass of the input table.
    """
    size = q.table.shape[0]
    return {
        delta: float(np.trace(q.table, offset=-delta))
        for delta in range(-(size - 1), size)
    }


# ---------------------------------------------------------------------------
# Monte Carlo trace generation
# ---------------------------------------------------------------------------

def _chunk_generators(seed: int, n_chunks: int):
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    return [np.random.Generator(np.random.Philox(child)) for child in children]


def sample_counts(
    prep: StatePrep,
    lo_magnitude: float,
    phases: np.ndarray,
    eff: DetectorEfficiency = DetectorEfficiency(),
    seed: int = 0,
):
    """Draw per-pulse detected counts (n_c, n_d) at the given LO phases.

    The phase sequence is split into fixed-size chunks, each drawn from a
    substream derived from (seed, chunk index), so output is reproducible and
    independent of scheduling. Returns two int arrays in input order.
    """
    phases = np.asarray(phases, dtype=float)
    if phases.size == 0:
        raise DomainError("phase sequence must be non-empty")
    if not (np.isfinite(lo_magnitude) and lo_magnitude > 0):
        raise DomainError(f"LO magnitude must be positive, got {lo_magnitude}")

    if isinstance(prep, (Fock, AttenuatedFock1)):
        # phase-independent: one table, inverse-CDF sampling over its flattening
        q = joint_statistics(
            prep, LOField(lo_magnitude, 0.0), eff, tail_target=SAMPLING_TAIL_TARGET
        )
        flat = q.table.ravel()
        cdf = np.cumsum(flat)
        cdf /= cdf[-1]
        width = q.table.shape[1]
    n_chunks = (phases.size + CHUNK_SIZE - 1) // CHUNK_SIZE
    gens = _chunk_generators(seed, n_chunks)

    n_out = np.empty(phases.size, dtype=np.int64)
    m_out = np.empty(phases.size, dtype=np.int64)
    for i, rng in enumerate(gens):
        sl = slice(i * CHUNK_SIZE, min((i + 1) * CHUNK_SIZE, phases.size))
        chunk_phases = phases[sl]
        if isinstance(prep, Coherent):
            alpha = complex(prep.amplitude)
            beta = lo_magnitude * np.exp(1j * chunk_phases)
            n_out[sl] = rng.poisson(eff.eta_c * 0.5 * np.abs(beta + alpha) ** 2)
            m_out[sl] = rng.poisson(eff.eta_d * 0.5 * np.abs(beta - alpha) ** 2)
        elif isinstance(prep, Phav):
            theta = rng.uniform(0.0, 2.0 * np.pi, chunk_phases.size)
            alpha = prep.modulus * np.exp(1j * theta)
            beta = lo_magnitude * np.exp(1j * chunk_phases)
            n_out[sl] = rng.poisson(eff.eta_c * 0.5 * np.abs(beta + alpha) ** 2)
            m_out[sl] = rng.poisson(eff.eta_d * 0.5 * np.abs(beta - alpha) ** 2)
        elif isinstance(prep, (Fock, AttenuatedFock1)):
            u = rng.random(chunk_phases.size)
            idx = np.searchsorted(cdf, u, side="right")
            n_out[sl] = idx // width
            m_out[sl] = idx % width
        else:
            raise DomainError(f"unsupported state preparation {prep!r}")
    return n_out, m_out


def sample_trace(
    prep: StatePrep,
    lo_magnitude: float,
    phases: np.ndarray,
    eff: DetectorEfficiency = DetectorEfficiency(),
    seed: int = 0,
) -> HLTrace:
    """Monte Carlo trace of detection events, one per phase entry."""
    n, m = sample_counts(prep, lo_magnitude, phases, eff, seed)
    return HLTrace(n - m, np.asarray(phases, dtype=float), lo_magnitude)
