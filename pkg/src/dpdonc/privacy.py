"""Laplace mechanism, sensitivity bound and privacy accounting."""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np


def sensitivity(alpha: float, theta: float, omega: float, d: int) -> float:
    """Per-step l1 sensitivity bound 2 sqrt(d) alpha theta / omega.

    ``alpha = 0`` is accepted and gives 0.
    """
    if alpha < 0 or theta <= 0 or omega <= 0 or d < 1:
        raise ValueError(f"invalid sensitivity parameters alpha={alpha}, theta={theta}, omega={omega}, d={d}")
    return 2.0 * math.sqrt(d) * alpha * theta / omega


@dataclass(frozen=True)
class NoiseSchedule:
    """Laplace scales sigma_t = sensitivity(t) / eps.

    ``eps = inf`` means no noise (sigma_t = 0).
    """

    eps: float
    theta: float
    omega: float
    d: int

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive (use inf to disable noise)")
        if self.theta <= 0 or self.omega <= 0:
            raise ValueError("theta and omega must be positive")

    @property
    def enabled(self) -> bool:
        return math.isfinite(self.eps)

    def sensitivity(self, alpha: float) -> float:
        return sensitivity(alpha, self.theta, self.omega, self.d)

    def sigma(self, alpha: float) -> float:
        if not self.enabled:
            return 0.0
        return self.sensitivity(alpha) / self.eps

    def sigmas(self, alphas) -> np.ndarray:
        return np.array([self.sigma(a) for a in alphas])


def noise_generator(seed: int, run: int, node: int) -> np.random.Generator:
    """Independent stream for one (seed, run, node) triple.

    Row ``t - 1`` of the draws from this stream is the node's noise at step
    ``t``, so noise is a pure function of (seed, run, node, t) and does not
    depend on how runs are scheduled across workers.
    """
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(1, run, node))
    return np.random.Generator(np.random.Philox(ss))


def unit_laplace(seed: int, run: int, n_nodes: int, T: int, d: int) -> np.ndarray:
    """Standard Laplace draws of shape (T, n_nodes, d) for one run."""
    out = np.empty((T, n_nodes, d))
    for i in range(n_nodes):
        out[:, i, :] = noise_generator(seed, run, i).laplace(0.0, 1.0, size=(T, d))
    return out


def laplace_at(seed: int, run: int, node: int, t: int, sigma: float, d: int) -> np.ndarray:
    """Noise of one node at step t (1-based); equals the matching row of :func:`unit_laplace`."""
    if sigma <= 0:
        raise ValueError("Laplace scale must be positive")
    rows = noise_generator(seed, run, node).laplace(0.0, 1.0, size=(t, d))
    return sigma * rows[t - 1]


def sample_laplace(sigma: float, d: int, rng) -> np.ndarray:
    """d i.i.d. Laplace(0, sigma) coordinates from ``rng`` (a Generator or seed)."""
    if not sigma > 0:
        raise ValueError("Laplace scale must be positive")
    rng = np.random.default_rng(rng)
    return rng.laplace(0.0, sigma, size=d)


@dataclass
class PrivacyAccountant:
    """Running sum of per-step privacy losses sensitivity(t) / sigma_t."""

    per_step: list = field(default_factory=list)

    @property
    def total(self) -> float:
        return math.fsum(self.per_step)

    def update(self, sens: float, sigma: float) -> "PrivacyAccountant":
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        self.per_step.append(sens / sigma)
        return self

    def to_dict(self) -> dict:
        eps = self.per_step
        return {
            "steps": len(eps),
            "per_step_min": float(min(eps)) if eps else None,
            "per_step_max": float(max(eps)) if eps else None,
            "epsilon_total": self.total,
        }


def accountant_update(acc: PrivacyAccountant, sens: float, sigma: float) -> PrivacyAccountant:
    return acc.update(sens, sigma)


@dataclass
class SensitivityReport:
    """Worst l1 gap between coupled adjacent executions at each step.

    ``worst[t - 1]`` is the max over trials and nodes of
    ||x_{t+1}^i - x_{t+1}^i'||_1 and ``bound[t - 1]`` the per-step
    sensitivity bound with the shared theta.
    """

    worst: np.ndarray
    bound: np.ndarray
    theta: float
    node: int | None

    @property
    def passed(self) -> bool:
        return bool(np.all(self.worst <= self.bound * (1 + 1e-12) + 1e-15))

    @property
    def max_ratio(self) -> float:
        return float(np.max(self.worst / self.bound))


def empirical_sensitivity_test(problem, adjacent, cfg, trials: int = 1) -> SensitivityReport:
    """Coupled executions of two adjacent problems.

    The first problem is run normally; the second reuses its consensus points
    z_t^i at every step (the observed broadcasts are identical), so its
    decisions follow x'_{t+1} = mirror_step(z_t, grad f'_t(x'_t)).  Both use
    theta = max of the two problems' bounds.
    """
    from .bregman import mirror_step
    from .engine import RunConfig, run_once

    diff_nodes = problem.differing_nodes(adjacent)
    if len(diff_nodes) > 1:
        raise ValueError(f"problems are not adjacent: nodes {diff_nodes} differ")
    theta = max(problem.theta, adjacent.theta)
    primary = copy.copy(problem)
    primary.theta = theta
    base = RunConfig(
        problem=primary, schedule=cfg.schedule, omega=cfg.omega, geometry=cfg.geometry,
        eps=cfg.eps, T=cfg.T, seed=cfg.seed, runs=trials, step_scale=cfg.step_scale,
        x1=cfg.x1, retain=True,
    )
    n, d, T = base.n, base.d, base.T
    omega_mod = cfg.geometry.omega
    alphas = base.alphas()
    bound = np.array([sensitivity(a, theta, omega_mod, d) for a in alphas])
    worst = np.zeros(T)
    diag = np.arange(n)
    for r in range(trials):
        rec = run_once(base, r)
        xp = rec.X[0].copy()
        for t in range(1, T + 1):
            g = adjacent.gradients(t, xp)[diag, diag]
            xp = mirror_step(cfg.geometry, cfg.omega, rec.Z[t - 1], g, alphas[t - 1])
            gap = np.abs(rec.X[t] - xp).sum(axis=-1).max()
            worst[t - 1] = max(worst[t - 1], gap)
    return SensitivityReport(worst=worst, bound=bound, theta=theta, node=diff_nodes[0] if diff_nodes else None)
