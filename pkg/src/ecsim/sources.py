"""Phase-symmetric source models: the ideal Poissonian cavity field, its
multimode output in the number-state and coherent-state decompositions, and a
phase-diffusion model of finite coherence time.

The number-state output uses the circle weight e^{-i m phi}; with the
coherent-state expansion convention used throughout (|alpha> carries
e^{+i n phi}) this is the sign that actually reproduces |m> under synthesis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .circle import ECSState, PhaseGrid, ecs_to_fock
from .coupler import equal_multimode_split
from .errors import SizingError, ValidationError
from .fock import (
    BASIS_SIZE_CAP,
    FockVector,
    ModeShape,
    NumberDiagonalDensity,
    basis_state,
    coherent_log_amplitudes,
    poisson_pmf,
    poisson_tail,
)


@dataclass(frozen=True)
class LaserSpec:
    """Ideal intracavity field: mean photon number and truncation cutoff."""

    nbar: float
    cutoff: int

    def __post_init__(self):
        if self.nbar < 0:
            raise ValidationError("nbar must be nonnegative")
        if self.cutoff < 0:
            raise ValidationError("cutoff must be nonnegative")


@dataclass(frozen=True)
class PhaseWalkSpec:
    """Discrete phase random walk across the output modes.

    Mode k carries phase phi + W_k where W_k accumulates independent Gaussian
    increments of variance `step_variance`. Zero variance reduces to the fully
    coherent equal split.
    """

    step_variance: float
    mode_count: int
    photon_number: int
    seed: int = 0

    def __post_init__(self):
        if self.step_variance < 0:
            raise ValidationError("step_variance must be nonnegative")
        if self.mode_count < 1:
            raise ValidationError("mode_count must be >= 1")
        if self.photon_number < 0:
            raise ValidationError("photon_number must be nonnegative")
        if (self.photon_number + 1) ** self.mode_count > BASIS_SIZE_CAP:
            raise SizingError(
                f"{self.mode_count} modes at cutoff {self.photon_number} exceed the basis cap"
            )


def laser_density(spec: LaserSpec) -> NumberDiagonalDensity:
    """Poissonian mixture of number states; equals the phase average of the
    coherent-state projector with the same mean photon number."""
    weights = poisson_pmf(spec.nbar, np.arange(spec.cutoff + 1))
    return NumberDiagonalDensity(ModeShape((spec.cutoff,)), weights)


def multimode_output_number(m: int, n_modes: int, cutoff: int | None = None) -> ECSState:
    """Circle representation of m photons split equally over n_modes.

    Each grid point carries the same amplitude sqrt(m / n_modes) e^{i phi} in
    every mode; the phase weight e^{-i m phi} selects the m-photon sector, so
    the synthesized state equals the coupler-cascade split of |m>.
    """
    if m < 0:
        raise ValidationError("photon number must be nonnegative")
    if n_modes < 1:
        raise ValidationError("need at least one output mode")
    cut = m if cutoff is None else int(cutoff)
    if cut < m:
        raise ValidationError("cutoff below the photon number")
    if (cut + 1) ** n_modes > BASIS_SIZE_CAP:
        raise SizingError("multimode synthesis exceeds the basis cap")
    grid = PhaseGrid.for_cutoff(cut)
    phis = grid.points
    weight = np.exp(-1j * m * phis) / math.sqrt(poisson_pmf(float(m), m))
    amp = math.sqrt(m / n_modes) * np.exp(1j * phis)
    amps = np.repeat(amp[:, None], n_modes, axis=1)
    return ECSState((grid,), weight, tuple(range(n_modes)), amps, ModeShape.uniform(n_modes, cut))


def multimode_output_coherent(nbar: float, phi: float, n_modes: int, cutoff: int) -> FockVector:
    """Product of n_modes coherent states with amplitude sqrt(nbar/n_modes) e^{i phi}."""
    if nbar < 0:
        raise ValidationError("nbar must be nonnegative")
    if (cutoff + 1) ** n_modes > BASIS_SIZE_CAP:
        raise SizingError("multimode product exceeds the basis cap")
    alpha = math.sqrt(nbar / n_modes) * np.exp(1j * phi)
    row = coherent_log_amplitudes(np.array([alpha]), cutoff)[0]
    amps = row
    for _ in range(n_modes - 1):
        amps = np.multiply.outer(amps, row)
    return FockVector(ModeShape.uniform(n_modes, cutoff), amps)


def _trace_norm_lowrank(vecs_l, w_l, vecs_r, w_r) -> float:
    """Trace norm of sum_i w_l[i] |l_i><l_i| - sum_j w_r[j] |r_j><r_j|.

    Works in the joint column space so the full matrices never exist.
    """
    V = np.concatenate([vecs_l, vecs_r], axis=0).T  # columns are vectors
    Q, _ = np.linalg.qr(V)
    L = Q.conj().T @ vecs_l.T
    R = Q.conj().T @ vecs_r.T
    small = (L * w_l) @ L.conj().T - (R * w_r) @ R.conj().T
    eigs = np.linalg.eigvalsh((small + small.conj().T) / 2.0)
    return float(np.abs(eigs).sum())


@dataclass(frozen=True)
class EquivalenceReport:
    trace_distance: float
    tail_bound: float
    m_max: int


def decomposition_equivalence_check(nbar: float, n_modes: int, cutoff: int) -> EquivalenceReport:
    """Trace distance between the two decompositions of the split laser output.

    Route one mixes coupler-cascade splits of number states with Poisson
    weights; route two phase-averages coherent products on an exact grid. The
    distance is reported together with the Poisson mass necessarily dropped by
    the m <= cutoff restriction, which bounds the honest disagreement.
    """
    if nbar < 0:
        raise ValidationError("nbar must be nonnegative")
    shape = ModeShape.uniform(n_modes, cutoff)
    m_max = cutoff
    number_vecs = []
    number_weights = []
    for m in range(m_max + 1):
        split = equal_multimode_split(basis_state(ModeShape((cutoff,)), (m,)), n_modes)
        number_vecs.append(split.amplitudes.ravel())
        number_weights.append(poisson_pmf(nbar, m))
    # exact phase average needs the grid to resolve all total-number coherences
    M = 2 * n_modes * cutoff + 3
    coherent_vecs = []
    for phi in 2.0 * math.pi * np.arange(M) / M:
        coherent_vecs.append(multimode_output_coherent(nbar, phi, n_modes, cutoff).amplitudes.ravel())
    distance = _trace_norm_lowrank(
        np.array(number_vecs),
        np.array(number_weights),
        np.array(coherent_vecs),
        np.full(M, 1.0 / M),
    )
    tail = poisson_tail(nbar, m_max) + n_modes * poisson_tail(nbar / n_modes, cutoff)
    return EquivalenceReport(distance, tail, m_max)


@dataclass(frozen=True)
class PhaseWalkResult:
    g1: np.ndarray
    stderr: np.ndarray
    realizations: int

    def to_csv_rows(self):
        rows = []
        for k in range(self.g1.shape[0]):
            for l in range(self.g1.shape[1]):
                rows.append((k, l, self.g1[k, l].real, self.g1[k, l].imag, abs(self.g1[k, l]), self.stderr[k, l]))
        return rows


def phase_walk_correlation(
    spec: PhaseWalkSpec, realizations: int, pairs: list[tuple[int, int]] | None = None
) -> PhaseWalkResult:
    """First-order coherence <b_k^dag b_l> / sqrt(<n_k><n_l>) of the walk,
    averaged over realizations of the phase path.

    Each realization synthesizes the truncated multimode state exactly (the
    per-mode cutoff equals the photon number, so nothing is lost) and takes
    matrix elements on it; nothing is inferred from the weight algebra. |g1|
    decays like exp(-step_variance |k - l| / 2) in the realization average.
    `pairs` restricts which (k, l) entries are computed (the full matrix costs
    mode_count^2 contractions per realization).
    """
    if realizations < 1:
        raise ValidationError("need at least one realization")
    N, m = spec.mode_count, spec.photon_number
    rng = np.random.default_rng(spec.seed)
    if pairs is None:
        pairs = [(k, l) for k in range(N) for l in range(N)]
    needed_modes = sorted({k for p in pairs for k in p})
    grid = PhaseGrid(2 * N * m + 3)
    phis = grid.points
    weight = np.exp(-1j * m * phis) / math.sqrt(poisson_pmf(float(m), m)) if m > 0 else np.ones(grid.size)
    shape = ModeShape.uniform(N, m)
    base_amp = math.sqrt(m / N) if N > 0 else 0.0
    samples = {p: np.zeros(realizations, dtype=np.complex128) for p in pairs}
    for r in range(realizations):
        walk = np.concatenate([[0.0], np.cumsum(rng.normal(0.0, math.sqrt(spec.step_variance), N - 1))])
        amps = base_amp * np.exp(1j * (phis[:, None] + walk[None, :]))
        ecs = ECSState((grid,), weight, tuple(range(N)), amps, shape)
        psi = ecs_to_fock(ecs).normalize()
        lowered = {}
        for k in needed_modes:
            idx = [slice(None)] * N
            idx[k] = slice(1, None)
            src = psi.amplitudes[tuple(idx)]
            scaled = src * np.sqrt(np.arange(1, m + 1)).reshape([-1 if a == k else 1 for a in range(N)])
            pad = [(0, 1) if a == k else (0, 0) for a in range(N)]
            lowered[k] = np.pad(scaled, pad)
        occupancy = {k: float(np.vdot(lowered[k], lowered[k]).real) for k in needed_modes}
        for (k, l) in pairs:
            corr = complex(np.vdot(lowered[k], lowered[l]))
            denom = math.sqrt(occupancy[k] * occupancy[l])
            samples[(k, l)][r] = corr / denom if denom > 0 else 0.0
    g1 = np.zeros((N, N), dtype=np.complex128)
    stderr = np.zeros((N, N))
    for (k, l), vals in samples.items():
        mean = vals.mean()
        g1[k, l] = mean
        if realizations > 1:
            direction = mean / abs(mean) if abs(mean) > 0 else 1.0
            aligned = np.real(vals / direction)
            stderr[k, l] = float(aligned.std(ddof=1) / math.sqrt(realizations))
    return PhaseWalkResult(g1, stderr, realizations)
