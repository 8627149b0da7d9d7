"""Randomized geometry checks exposed as ``dcgd geometry-selftest``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dcgd import geometry as geo
from dcgd import optimizers as opt

DIMS = (2, 3, 10, 100)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def random_pairs(rng: np.random.Generator, n: int, dim: int, spread: float = 2.0):
    """Gaussian directions with log-uniform lengths in [10^-spread, 10^spread],
    so both balanced and dominated pairs occur."""
    r = rng.standard_normal((n, dim)) * 10.0 ** rng.uniform(-spread, spread, (n, 1))
    b = rng.standard_normal((n, dim)) * 10.0 ** rng.uniform(-spread, spread, (n, 1))
    return geo.gradient_pair(r, b)


def cone_margin(v: np.ndarray, gp: geo.GradientPair) -> np.ndarray:
    """Smallest normalized inner product of ``v`` with the two gradients."""
    nv = geo._norm(v)
    with np.errstate(invalid="ignore", divide="ignore"):
        m_r = geo._dot(v, gp.grad_r) / (nv * gp.norm_r)
        m_b = geo._dot(v, gp.grad_b) / (nv * gp.norm_b)
    return np.minimum(m_r, m_b)


def check_theorem1(n: int = 100_000, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    bad = used = members = 0
    for dim in DIMS:
        gp = random_pairs(rng, n, dim)
        keep = np.abs(cone_margin(gp.total, gp)) > 1e-9
        keep &= (gp.norm_r > 1e-6) & (gp.norm_b > 1e-6) & (np.abs(gp.cos_phi) < 1 - 1e-9)
        direct = geo.in_dual_cone(gp.total, gp)
        angle = geo.theorem1_membership(gp)
        bad += int(np.sum((direct != angle) & keep))
        used += int(keep.sum())
        members += int(np.sum(direct & keep))
    return CheckResult("theorem-1 equivalence", bad == 0,
                       f"{used} pairs, {members} members, {bad} disagreements")


def check_prop1(n: int = 100_000, seed: int = 1) -> CheckResult:
    rng = np.random.default_rng(seed)
    bad = 0
    for dim in DIMS:
        gp = random_pairs(rng, n, dim)
        c1, c2 = rng.exponential(1.0, n), rng.exponential(1.0, n)
        v = geo.conic_combination(c1, c2, gp)
        bad += int(np.sum(~geo.in_dual_cone(v, gp)))
    return CheckResult("conic combinations lie in the dual cone", bad == 0, f"{bad} violations")


def _rel(a, b, scale):
    return geo._norm(a - b) / scale


def check_unification(n: int = 100_000, seed: int = 2) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    worst_pc = worst_avg = worst_mgda = 0.0
    worst_nash = np.inf
    n_avg = 0
    for dim in DIMS:
        gp = random_pairs(rng, n, dim)
        scale = np.maximum(gp.norm_r, gp.norm_b)
        conflict = gp.cos_phi < 0
        pc = opt.pcgrad_update(gp)
        half = geo.conic_combination(np.full(n, 0.5), np.full(n, 0.5), gp)
        worst_pc = max(worst_pc, float(np.max(_rel(pc, half, scale)[conflict])))
        avg = opt.dcgd_average(gp)
        in_branch = conflict & (avg.branch == opt.Branch.Average)
        n_avg += int(in_branch.sum())
        if np.any(in_branch):
            worst_avg = max(worst_avg, float(np.max(_rel(pc, avg.g_dual, scale)[in_branch])))
        g = opt.mgda_update(gp)
        gamma = geo.min_norm_weight(gp)
        interior = (gamma > 0) & (gamma < 1)
        gap = np.abs(geo._dot(g, gp.grad_r) - geo._dot(g, gp.grad_b)) / scale ** 2
        worst_mgda = max(worst_mgda, float(np.max(gap[interior])) if np.any(interior) else 0.0)
        nash = opt.nash_direction(gp)
        gc = geo.center_direction(gp)
        cs = geo._dot(nash, gc) / (geo._norm(nash) * geo._norm(gc))
        worst_nash = min(worst_nash, float(np.min(cs)))
    return [
        CheckResult("PCGrad equals the averaged projections on conflicting pairs", worst_pc <= 1e-12,
                    f"max relative gap {worst_pc:.2e}"),
        CheckResult("PCGrad equals DCGD(Average) in its conflict branch", worst_avg <= 1e-12,
                    f"{n_avg} pairs, max relative gap {worst_avg:.2e}"),
        CheckResult("MGDA interior point has equal inner products", worst_mgda <= 1e-10,
                    f"max scaled gap {worst_mgda:.2e}"),
        CheckResult("Nash direction is parallel to the center direction", worst_nash > 1 - 1e-10,
                    f"min cosine {worst_nash:.16f}"),
    ]


def run_selftest(n: int = 100_000, seed: int = 0) -> list[CheckResult]:
    return [check_theorem1(n, seed), check_prop1(n, seed + 1), *check_unification(n, seed + 2)]
