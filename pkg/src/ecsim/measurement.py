"""Photon counting: exact count distributions, projective collapse, seeded
sampling, and the repeated-detection trajectory that phase-locks two
independent number-state cavities.

Trajectory internals
--------------------
The two-cavity phase-pair weight w(phi, phi') stays a trigonometric
polynomial throughout a run: it starts as e^{-i n (phi + phi')} and every
detection multiplies it by a polynomial in e^{i phi}, e^{i phi'}. The
trajectory therefore evolves the weight's Fourier table exactly; grids only
appear when a table or profile is exported. Detection probabilities reduce to
quadratic forms of the table against the coherent-overlap kernel

    K(phi1 - phi2) = exp(-rho^2 + rho^2 e^{i(phi1 - phi2)})
                   = sum_j  e^{-rho^2} rho^{2j} / j!  e^{i j (phi1 - phi2)},

which is diagonal in frequency, so sampling is exact Born-rule sampling (see
docs/trajectory_notes.md for the derivation and tests against the brute-force
Fock pipeline).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import lgamma

import numpy as np

from .coupler import CouplerParams, apply_coupler
from .errors import NumericsError, SizingError, ValidationError
from .fock import FockVector, ModeShape, tensor, vacuum

RNG_NAME = "numpy-pcg64"
STEP_TAIL_TOLERANCE = 1e-10


# ---------------------------------------------------------------------------
# Exact Born-rule bookkeeping on truncated states
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CountDistribution:
    """Probabilities over per-mode count tuples for a subset of modes."""

    modes: tuple[int, ...]
    dims: tuple[int, ...]
    probabilities: np.ndarray

    def prob(self, counts: tuple[int, ...]) -> float:
        return float(self.probabilities[tuple(counts)])

    def total(self) -> float:
        return float(self.probabilities.sum())

    def marginal(self, keep_positions: tuple[int, ...]) -> "CountDistribution":
        """Marginal over a subset of the measured modes (positions into `modes`)."""
        drop = tuple(i for i in range(len(self.modes)) if i not in keep_positions)
        probs = self.probabilities.sum(axis=drop) if drop else self.probabilities
        return CountDistribution(
            tuple(self.modes[i] for i in keep_positions),
            tuple(self.dims[i] for i in keep_positions),
            probs,
        )


def joint_count_distribution(state: FockVector, modes: tuple[int, ...] | None = None) -> CountDistribution:
    """Born-rule distribution of photon counts on the listed modes."""
    if abs(state.norm2 - 1.0) > 1e-9:
        raise ValidationError(f"state norm^2 = {state.norm2} is not 1 within 1e-9")
    K = state.shape.mode_count
    modes = tuple(range(K)) if modes is None else tuple(modes)
    if len(set(modes)) != len(modes) or any(m < 0 or m >= K for m in modes):
        raise ValidationError(f"invalid mode subset {modes}")
    others = tuple(m for m in range(K) if m not in modes)
    probs = np.abs(state.amplitudes) ** 2
    if others:
        probs = probs.sum(axis=others)
        # sum over `others` leaves axes ordered by original index; reorder to `modes`
        kept_sorted = tuple(m for m in range(K) if m in modes)
        perm = [kept_sorted.index(m) for m in modes]
        probs = np.transpose(probs, perm)
    dims = tuple(state.shape.dims[m] for m in modes)
    return CountDistribution(modes, dims, probs)


def total_number_distribution(state: FockVector, modes: tuple[int, ...] | None = None) -> np.ndarray:
    """Distribution of the summed photon number over `modes` (default all)."""
    K = state.shape.mode_count
    modes = tuple(range(K)) if modes is None else tuple(modes)
    tot = state.shape.total_occupation(modes)
    probs = state.probabilities().ravel()
    out = np.zeros(int(tot.max()) + 1)
    np.add.at(out, tot, probs)
    return out


def project_counts(
    state: FockVector, modes: tuple[int, ...], counts: tuple[int, ...]
) -> tuple[FockVector | None, float]:
    """Project the listed modes onto definite counts.

    Returns the renormalized state of the unmeasured modes together with the
    outcome probability; a zero-probability outcome returns (None, 0.0)
    rather than dividing by zero.
    """
    K = state.shape.mode_count
    modes = tuple(modes)
    counts = tuple(int(c) for c in counts)
    if len(modes) != len(counts):
        raise ValidationError("modes and counts must have equal length")
    if len(modes) >= K:
        raise ValidationError("at least one mode must remain unmeasured")
    for m, c in zip(modes, counts):
        if not 0 <= c <= state.shape.cutoffs[m]:
            raise ValidationError(f"count {c} outside cutoff of mode {m}")
    index: list = [slice(None)] * K
    for m, c in zip(modes, counts):
        index[m] = c
    sub = state.amplitudes[tuple(index)]
    prob = float(np.sum(np.abs(sub) ** 2))
    if prob == 0.0:
        return None, 0.0
    keep = tuple(m for m in range(K) if m not in modes)
    shape = ModeShape(tuple(state.shape.cutoffs[m] for m in keep))
    return FockVector(shape, sub / math.sqrt(prob)), prob


def sample_counts(
    state: FockVector, modes: tuple[int, ...], seed_or_rng
) -> tuple[tuple[int, ...], float]:
    """Draw one count tuple from the joint distribution. Reproducible by seed."""
    rng = seed_or_rng if isinstance(seed_or_rng, np.random.Generator) else np.random.default_rng(seed_or_rng)
    dist = joint_count_distribution(state, modes)
    flat = dist.probabilities.ravel()
    idx = int(rng.choice(flat.size, p=flat / flat.sum()))
    counts = tuple(int(x) for x in np.unravel_index(idx, dist.probabilities.shape))
    return counts, float(flat[idx])


# ---------------------------------------------------------------------------
# Trajectory in the phase representation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StepRecord:
    step: int
    counts: tuple[int, int]
    probability: float


@dataclass(frozen=True)
class DetectionRecord:
    """Per-step counts with probabilities and the PRNG identity for replay."""

    steps: tuple[StepRecord, ...]
    seed: int
    rng_name: str = RNG_NAME

    @property
    def totals(self) -> tuple[int, int]:
        a = sum(s.counts[0] for s in self.steps)
        b = sum(s.counts[1] for s in self.steps)
        return a, b

    def to_json_dict(self) -> dict:
        return {
            "rng": self.rng_name,
            "seed": self.seed,
            "steps": [
                {"step": s.step, "counts": list(s.counts), "probability": s.probability}
                for s in self.steps
            ],
            "totals": list(self.totals),
        }


def _kernel_weights(rho2: float, jmax: int) -> np.ndarray:
    """Fourier coefficients e^{-rho^2} rho^{2j} / j! of the overlap kernel."""
    if rho2 == 0.0:
        out = np.zeros(jmax + 1)
        out[0] = 1.0
        return out
    j = np.arange(jmax + 1)
    return np.exp(-rho2 + j * math.log(rho2) - np.array([lgamma(x + 1.0) for x in j]))


def _quadform(freq_table: np.ndarray, F: int, lam: np.ndarray) -> float:
    """sum_{j,j'>=0} lam_j lam_j' |w_hat(-j, -j')|^2 for a table indexed [f+F]."""
    W = freq_table[F::-1, F::-1]
    L = lam[: F + 1]
    return float(L @ (np.abs(W) ** 2) @ L)


def _shift_up(table: np.ndarray, axis: int) -> np.ndarray:
    """Multiply by e^{i phi_axis}: frequency index + 1, no wraparound."""
    out = np.zeros_like(table)
    if axis == 0:
        out[1:, :] = table[:-1, :]
    else:
        out[:, 1:] = table[:, :-1]
    return out


@dataclass(frozen=True)
class TrajectoryState:
    """Phase-pair weight of the two cavities, in frequency space, plus the
    per-cavity coherent radius (uniform across phase points by construction).

    `weight_freq[f1 + n, f2 + n]` is the coefficient of e^{i f1 phi + i f2 phi'}.
    """

    n: int
    eps_step: float
    weight_freq: np.ndarray
    radius2: float
    counts: tuple[int, int]
    steps_done: int
    overflow_bound: float = 0.0

    @property
    def radius(self) -> float:
        return math.sqrt(self.radius2)

    def weight_table(self, grid_points: int | None = None) -> np.ndarray:
        """Materialize w(phi, phi') on a uniform grid (complex table)."""
        n = self.n
        M = grid_points or max(64, 4 * n + 4)
        if M < 2 * n + 1:
            raise ValidationError(f"grid must resolve frequencies up to {n}; need M >= {2*n+1}")
        placed = np.zeros((M, M), dtype=np.complex128)
        f = np.arange(-n, n + 1)
        placed[np.ix_(f % M, f % M)] = self.weight_freq
        return np.fft.ifft2(placed) * M * M

    def delta_profile(self, points: int = 1024) -> tuple[np.ndarray, np.ndarray]:
        """|w| against the half phase difference Delta, normalized to unit peak.

        The weight's modulus depends on (phi, phi') only through Delta, so the
        slice phi = Delta, phi' = -Delta captures it.
        """
        diag_coeffs = {}
        n = self.n
        for f1 in range(-n, n + 1):
            for f2 in range(-n, n + 1):
                c = self.weight_freq[f1 + n, f2 + n]
                if c != 0.0:
                    diag_coeffs[f1 - f2] = diag_coeffs.get(f1 - f2, 0.0) + c
        deltas = -math.pi / 2 + math.pi * (np.arange(points) + 0.5) / points
        vals = np.zeros(points, dtype=np.complex128)
        for d, c in diag_coeffs.items():
            vals += c * np.exp(1j * d * deltas)
        mag = np.abs(vals)
        peak = mag.max()
        return deltas, mag / peak if peak > 0 else mag

    def cavity_state(self, cutoff: int | None = None) -> FockVector:
        """Synthesize the conditional two-cavity Fock state from the weight."""
        n = self.n
        cut = n if cutoff is None else min(cutoff, n)
        rho2 = self.radius2
        k = np.arange(cut + 1)
        if rho2 > 0:
            radial = np.exp(-rho2 / 2.0 + 0.5 * (k * math.log(rho2) - np.array([lgamma(x + 1.0) for x in k])))
        else:
            radial = np.zeros(cut + 1)
            radial[0] = 1.0
        block = self.weight_freq[n - k, :][:, n - k]  # w_hat(-k, -l)
        amps = np.outer(radial, radial) * block
        norm = np.linalg.norm(amps)
        if norm == 0.0:
            raise NumericsError("trajectory weight produced a null cavity state")
        return FockVector(ModeShape((cut, cut)), amps / norm)


def _enumerate_step(
    wf: np.ndarray, n: int, r2: float, eps: float, remaining: int
) -> tuple[list[tuple[int, int, float, np.ndarray]], float]:
    """Exact Born probabilities for this step's count pairs.

    Walks shells a + b = s with the recursions
        u_{a+1,b} = -c (S10 + S01) u_{a,b},   u_{a,b+1} = c (S10 - S01) u_{a,b},
    c = sqrt(eps r^2 / 2), stopping once the enumerated outcomes carry all but
    1e-12 of the probability. Returns (outcomes, tail) where each outcome is
    (a, b, probability, updated frequency table).
    """
    c = math.sqrt(eps * r2 / 2.0)
    rho2 = (1.0 - eps) * r2
    lam_now = _kernel_weights(r2, n)
    lam_next = _kernel_weights(rho2, n)
    norm = _quadform(wf, n, lam_now)
    if norm <= 0.0:
        raise NumericsError("weight table lost all norm")
    # |alpha_A|^2 + |alpha_B|^2 = 2 eps r^2 at every phase point
    gauss = math.exp(-2.0 * eps * r2)
    outcomes: list[tuple[int, int, float, np.ndarray]] = []
    shell = {(0, 0): wf}
    covered = 0.0
    s = 0
    while True:
        for (a, b), table in shell.items():
            q = _quadform(table, n, lam_next)
            p = gauss / (math.factorial(a) * math.factorial(b)) * q / norm
            outcomes.append((a, b, p, table))
            covered += p
        tail = max(0.0, 1.0 - covered)
        if tail < 1e-12 or s >= remaining:
            return outcomes, tail
        nxt: dict[tuple[int, int], np.ndarray] = {}
        for (a, b), table in shell.items():
            if b == 0:
                nxt[(a + 1, 0)] = -c * (_shift_up(table, 0) + _shift_up(table, 1))
            nxt[(a, b + 1)] = c * (_shift_up(table, 0) - _shift_up(table, 1))
        shell = nxt
        s += 1


def run_interference_trajectory(
    n: int, eps_step: float, steps: int, seed: int, stop_after_detections: int | None = None
) -> tuple[DetectionRecord, TrajectoryState]:
    """Repeatedly leak both cavities, mix the outputs 50/50, and count photons.

    Starts from n photons in each of two independent cavities with a uniform
    phase-pair weight; every detection multiplies the weight by the
    conditional coherent-overlap factor, concentrating it near
    Delta = +/- arctan(sqrt(B/A)) of the accumulated counts. If
    `stop_after_detections` is given the run ends at the first step whose
    cumulative count reaches it (useful for scanning fringes while the
    cavities still hold light).
    """
    if n < 0:
        raise ValidationError("n must be nonnegative")
    if not 0.0 < eps_step < 1.0:
        raise ValidationError("eps_step must lie in (0, 1)")
    if steps < 0:
        raise ValidationError("steps must be nonnegative")
    if (2 * n + 1) ** 2 > 2**24:
        raise SizingError(f"frequency table for n={n} exceeds the size cap")
    rng = np.random.default_rng(seed)
    wf = np.zeros((2 * n + 1, 2 * n + 1), dtype=np.complex128)
    wf[0, 0] = 1.0  # e^{-i n (phi + phi')}
    r2 = float(n)
    detected = 0
    records: list[StepRecord] = []
    worst_tail = 0.0
    for step in range(steps):
        remaining = 2 * n - detected
        outcomes, tail = _enumerate_step(wf, n, r2, eps_step, remaining)
        worst_tail = max(worst_tail, tail)
        if tail >= STEP_TAIL_TOLERANCE:
            raise NumericsError(
                f"step {step}: unenumerated outcome probability {tail:.2e} "
                f"exceeds {STEP_TAIL_TOLERANCE}"
            )
        probs = np.array([p for (_, _, p, _) in outcomes])
        pick = int(rng.choice(len(outcomes), p=probs / probs.sum()))
        a, b, p, table = outcomes[pick]
        scale = np.abs(table).max()
        wf = table / scale if scale > 0 else table
        detected += a + b
        r2 *= 1.0 - eps_step
        records.append(StepRecord(step, (a, b), float(p)))
        if stop_after_detections is not None and detected >= stop_after_detections:
            break
    totals = (
        sum(r.counts[0] for r in records),
        sum(r.counts[1] for r in records),
    )
    traj = TrajectoryState(n, eps_step, wf, r2, totals, steps, worst_tail)
    return DetectionRecord(tuple(records), seed), traj


# ---------------------------------------------------------------------------
# Fringe scan of the residual cavities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FringeScan:
    gammas: np.ndarray
    intensity: np.ndarray
    visibility: float


def _fringe_sums(freq_table: np.ndarray, F: int, rho2: float) -> tuple[float, complex, float]:
    lam = _kernel_weights(rho2, F)
    W = freq_table[F::-1, F::-1]  # W[j, j'] = w_hat(-j, -j')
    L = lam[: F + 1]
    norm = float(L @ (np.abs(W) ** 2) @ L)
    Wa = np.zeros_like(W)  # w_hat(-1-j, -j')
    Wa[: F, :] = W[1:, :]
    Wb = np.zeros_like(W)  # w_hat(-j, -1-j')
    Wb[:, : F] = W[:, 1:]
    t_dc = float(L @ (np.abs(Wa) ** 2) @ L + L @ (np.abs(Wb) ** 2) @ L)
    s1 = complex(L @ (Wb * np.conj(Wa)) @ L)
    return t_dc, s1, norm


def fringe_scan(
    traj: TrajectoryState, gamma_grid: np.ndarray, branch: str = "full"
) -> FringeScan:
    """Expected counts at one detector after a relative phase shift gamma and a
    50/50 mix of the residual cavity modes.

    The exact curve is sinusoidal in gamma. With `branch="full"` the scan uses
    the whole weight; because detections leave the weight symmetric in
    +/- Delta, the two mirrored components produce mirrored fringes whose sum
    suppresses the visibility by |cos 2*Delta_peak|. `branch="positive"`
    restricts the weight to Delta > 0 (conditioning on which cavity leads in
    phase), giving the single-branch pattern a subsequent experiment run
    displays once the branches are macroscopically distinct.
    """
    gammas = np.asarray(gamma_grid, dtype=float)
    n = traj.n
    if branch == "full":
        t_dc, s1, norm = _fringe_sums(traj.weight_freq, n, traj.radius2)
    elif branch == "positive":
        M = max(256, 8 * n + 8)
        table = traj.weight_table(M)
        phis = 2.0 * math.pi * np.arange(M) / M
        diff = phis[:, None] - phis[None, :]
        delta = ((diff + math.pi) % (2.0 * math.pi) - math.pi) / 2.0
        table = np.where((delta > 0) & (delta < math.pi / 2), table, 0.0)
        F = M // 2 - 1
        freqs = np.fft.fft2(table) / (M * M)
        big = np.zeros((2 * F + 1, 2 * F + 1), dtype=np.complex128)
        f = np.arange(-F, F + 1)
        big[np.ix_(f + F, f + F)] = freqs[np.ix_(f % M, f % M)]
        t_dc, s1, norm = _fringe_sums(big, F, traj.radius2)
    else:
        raise ValidationError(f"unknown branch {branch!r}")
    if norm <= 0:
        raise NumericsError("weight has no norm; cannot scan")
    intensity = (traj.radius2 / 2.0) * (t_dc + 2.0 * np.real(np.exp(1j * gammas) * s1)) / norm
    visibility = 0.0 if t_dc == 0.0 else 2.0 * abs(s1) / t_dc
    return FringeScan(gammas, intensity, float(visibility))


# ---------------------------------------------------------------------------
# Brute-force reference pipeline (small instances)
# ---------------------------------------------------------------------------


def exact_trajectory_branch(
    n: int, eps_step: float, outcomes: list[tuple[int, int]]
) -> tuple[FockVector | None, float]:
    """Exact-Fock evolution of the two-cavity experiment along a fixed branch
    of count outcomes. Returns the conditional cavity state and the branch
    probability. Small n only; used to validate the phase representation.
    """
    theta = math.acos(math.sqrt(1.0 - eps_step))
    cav = tensor(
        FockVector(ModeShape((n,)), _number_column(n)),
        FockVector(ModeShape((n,)), _number_column(n)),
    )
    prob = 1.0
    remaining = 2 * n
    for (a, b) in outcomes:
        out_cut = remaining
        psi = tensor(tensor(cav, vacuum(ModeShape((out_cut,)))), vacuum(ModeShape((out_cut,))))
        psi = apply_coupler(psi, (0, 2), CouplerParams(theta, 0.0))
        psi = apply_coupler(psi, (1, 3), CouplerParams(theta, 0.0))
        psi = apply_coupler(psi, (2, 3), CouplerParams(math.pi / 4, 0.0))
        if a > out_cut or b > out_cut:
            return None, 0.0
        cav_new, p = project_counts(psi, (2, 3), (a, b))
        prob *= p
        if cav_new is None:
            return None, 0.0
        cav = cav_new
        remaining -= a + b
    return cav, prob


def _number_column(n: int) -> np.ndarray:
    col = np.zeros(n + 1, dtype=np.complex128)
    col[n] = 1.0
    return col
