"""Cross-module invariant suites behind `ecsim verify`.

Each check returns (measured, tolerance); a check passes when measured does
not exceed tolerance. The fast suite is sized for interactive use; the full
suite adds the large oracle sweeps and the brute-force trajectory comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import circle as _circle
from .circle import ecs_apply_coupler, ecs_to_fock, two_mode_circle
from .coupler import CouplerParams, apply_coupler, coupler_block, oracle_block
from .fock import (
    DensityMatrix,
    ModeShape,
    coherent_amplitudes,
    fidelity,
    phase_shift,
    to_density,
    twirl,
)
from .measurement import exact_trajectory_branch
from .sources import LaserSpec, decomposition_equivalence_check, laser_density
from .squeezing import approximation_quality


@dataclass(frozen=True)
class CheckResult:
    name: str
    measured: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.measured <= self.tolerance


def _random_density(shape: ModeShape, seed: int) -> DensityMatrix:
    rng = np.random.default_rng(seed)
    vecs = rng.normal(size=(3, shape.size)) + 1j * rng.normal(size=(3, shape.size))
    w = rng.random(3)
    w /= w.sum()
    ent = sum(
        wi * np.outer(v, v.conj()) / np.vdot(v, v).real for wi, v in zip(w, vecs)
    )
    return DensityMatrix(shape, ent)


def check_twirl_idempotent() -> CheckResult:
    worst = 0.0
    for seed in (1, 2, 3):
        rho = _random_density(ModeShape((3, 2)), seed)
        once = twirl(rho)
        worst = max(worst, float(np.abs(twirl(once).entries - once.entries).max()))
    return CheckResult("twirl-idempotent", worst, 1e-12)


def check_twirl_invariance() -> CheckResult:
    worst = 0.0
    for seed, delta in ((4, 0.7), (5, 2.1)):
        rho = _random_density(ModeShape((3, 2)), seed)
        # conjugate by a global phase shift of both modes
        dims = rho.shape.dims
        tot = rho.shape.total_occupation()
        u = np.exp(1j * delta * tot)
        shifted = DensityMatrix(rho.shape, (u[:, None] * rho.entries) * u.conj()[None, :])
        worst = max(worst, float(np.abs(twirl(shifted).entries - twirl(rho).entries).max()))
    return CheckResult("twirl-invariance", worst, 1e-12)


def check_laser_dual_form() -> CheckResult:
    nbar, cutoff = 1.7, 30
    direct = laser_density(LaserSpec(nbar, cutoff)).to_density()
    phase_avg = twirl(to_density(coherent_amplitudes(math.sqrt(nbar), cutoff)))
    return CheckResult(
        "laser-dual-form", float(np.abs(direct.entries - phase_avg.entries).max()), 1e-12
    )


def check_oracle_agreement(n_max: int) -> CheckResult:
    worst = 0.0
    for theta in (math.pi / 8, math.pi / 4, math.pi / 3):
        params = CouplerParams(theta, 0.9)
        for N in range(n_max + 1):
            diff = np.abs(coupler_block(params, N).matrix - oracle_block(params, N).matrix).max()
            worst = max(worst, float(diff))
    return CheckResult(f"coupler-oracle-N{n_max}", worst, 1e-10)


def check_hong_ou_mandel() -> CheckResult:
    U = coupler_block(CouplerParams(math.pi / 4, 0.0), 2).matrix
    return CheckResult("hong-ou-mandel-null", float(abs(U[1, 1])), 1e-12)


def check_commuting_diagram(n_max: int) -> CheckResult:
    worst = 0.0
    for theta in (math.pi / 8, math.pi / 4, math.pi / 3):
        for phi in (0.0, math.pi / 2):
            params = CouplerParams(theta, phi)
            for n in range(n_max + 1):
                for nprime in {0, n}:
                    cut = max(n + nprime, 1)
                    ecs = two_mode_circle(n, nprime, cutoffs=(cut, cut))
                    via_ecs = ecs_to_fock(ecs_apply_coupler(ecs, (0, 1), params))
                    via_fock = apply_coupler(ecs_to_fock(ecs), (0, 1), params)
                    worst = max(worst, 1.0 - fidelity(via_ecs, via_fock))
    return CheckResult(f"commuting-diagram-n{n_max}", worst, 1e-10)


def check_quadrature_exactness() -> CheckResult:
    import dataclasses

    base = _circle.number_state_on_circle(4, cutoff=4)
    small = ecs_to_fock(base)
    grid = _circle.PhaseGrid(64)
    phis = grid.points
    from .fock import poisson_pmf

    big = dataclasses.replace(
        base,
        grids=(grid,),
        weight=np.exp(-4j * phis) / math.sqrt(poisson_pmf(4.0, 4)),
        amplitudes=(2.0 * np.exp(1j * phis))[:, None],
    )
    diff = float(np.abs(ecs_to_fock(big).amplitudes - small.amplitudes).max())
    return CheckResult("quadrature-grid-invariance", diff, 1e-12)


def check_decomposition_equivalence(nbar: float, modes: int, cutoff: int) -> CheckResult:
    rep = decomposition_equivalence_check(nbar, modes, cutoff)
    return CheckResult(
        f"decomposition-nbar{nbar}-N{modes}", rep.trace_distance, 1e-8 + rep.tail_bound
    )


def check_phase_shift_covariance() -> CheckResult:
    st = coherent_amplitudes(1.0, 24)
    rotated = phase_shift(st, 0, math.pi / 2)
    target = coherent_amplitudes(1.0j, 24)
    return CheckResult("phase-shift-covariance", 1.0 - fidelity(rotated, target), 1e-12)


def check_trajectory_brute_force(n_max: int, steps: int) -> CheckResult:
    from .measurement import _enumerate_step

    worst = 0.0
    for n in range(1, n_max + 1):
        eps = 0.4
        branches = _all_branches(n, eps, steps, floor=1e-6)
        for seq in branches:
            fock_state, p_fock = exact_trajectory_branch(n, eps, seq)
            phase_state, p_phase = _phase_branch(n, eps, seq)
            worst = max(worst, abs(p_fock - p_phase))
            if p_fock > 1e-8:
                worst = max(worst, 1.0 - fidelity(fock_state, phase_state))
    return CheckResult(f"trajectory-brute-force-n{n_max}", worst, 1e-8)


def _phase_branch(n, eps, outcomes):
    from .measurement import TrajectoryState, _enumerate_step

    wf = np.zeros((2 * n + 1, 2 * n + 1), dtype=np.complex128)
    wf[0, 0] = 1.0
    r2 = float(n)
    detected = 0
    prob = 1.0
    for (a, b) in outcomes:
        options, _ = _enumerate_step(wf, n, r2, eps, 2 * n - detected)
        table = None
        for (oa, ob, p, t) in options:
            if (oa, ob) == (a, b):
                prob *= p
                table = t
                break
        if table is None:
            return None, 0.0
        scale = np.abs(table).max()
        wf = table / scale if scale > 0 else table
        detected += a + b
        r2 *= 1.0 - eps
    traj = TrajectoryState(n, eps, wf, r2, (0, 0), len(outcomes))
    return traj.cavity_state(), prob


def _all_branches(n, eps, depth, floor):
    from .measurement import _enumerate_step

    out = []

    def recurse(wf, r2, detected, seq, p):
        if len(seq) == depth:
            out.append(list(seq))
            return
        options, _ = _enumerate_step(wf, n, r2, eps, 2 * n - detected)
        for (a, b, pstep, table) in options:
            if p * pstep < floor:
                continue
            scale = np.abs(table).max()
            recurse(
                table / scale if scale > 0 else table,
                r2 * (1 - eps),
                detected + a + b,
                seq + [(a, b)],
                p * pstep,
            )

    wf0 = np.zeros((2 * n + 1, 2 * n + 1), dtype=np.complex128)
    wf0[0, 0] = 1.0
    recurse(wf0, float(n), 0, [], 1.0)
    return out


def check_squeezing_monotone() -> CheckResult:
    points = approximation_quality([2, 4, 8], scale=0.2)
    worst = 0.0
    for earlier, later in zip(points, points[1:]):
        worst = max(worst, earlier.fidelity - later.fidelity)
    return CheckResult("squeezing-fidelity-monotone", worst, 1e-12)


def fast_suite() -> list[Callable[[], CheckResult]]:
    return [
        check_twirl_idempotent,
        check_twirl_invariance,
        check_laser_dual_form,
        check_phase_shift_covariance,
        lambda: check_oracle_agreement(20),
        check_hong_ou_mandel,
        lambda: check_commuting_diagram(4),
        check_quadrature_exactness,
        lambda: check_decomposition_equivalence(1.0, 2, 12),
        check_squeezing_monotone,
    ]


def full_suite() -> list[Callable[[], CheckResult]]:
    return fast_suite() + [
        lambda: check_oracle_agreement(60),
        lambda: check_commuting_diagram(8),
        lambda: check_decomposition_equivalence(2.0, 3, 14),
        lambda: check_trajectory_brute_force(4, 3),
    ]


def run_suite(name: str) -> list[CheckResult]:
    if name == "fast":
        checks = fast_suite()
    elif name == "full":
        checks = full_suite()
    else:
        raise ValueError(f"unknown suite {name!r}")
    return [check() for check in checks]
