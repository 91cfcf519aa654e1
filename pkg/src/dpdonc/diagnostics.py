"""Theoretical constants and bounds, checked against empirical runs.

The contraction constants of the weight schedule are astronomically loose for
realistic schedules; every bound here is reported as an upper bound only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .engine import RegretReport, RunConfig, RunRecord
from .graph import Contraction


def theorem2_constants(N, d, C, lam, beta, eta, theta, omega, M, eps, x1_norm, one_minus_lam=None):
    """(U1, U2) of the O(sqrt(T)) regret bound E[R_T^i] <= U1 + U2 sqrt(T).

    ``eps = inf`` (no noise) drops the privacy terms.  Pass ``one_minus_lam``
    when lambda is within rounding of 1.
    """
    if not 0.0 < lam < 1.0:
        raise ValueError(f"lambda must lie in (0, 1), got {lam}")
    if min(N, d, C, theta, omega, M, eps) <= 0 or beta < 0 or eta < 0 or x1_norm < 0:
        raise ValueError("parameters must be positive")
    gap = 1.0 - lam if one_minus_lam is None else one_minus_lam
    inv_eps = 0.0 if math.isinf(eps) else 1.0 / eps
    bt = beta * eta + 2.0 * theta
    U1 = 2.0 * N**1.5 * math.sqrt(d) * C * bt * x1_norm / gap
    U2 = (
        8.0 * math.sqrt(2.0 * N) * d * theta**2 * inv_eps / omega
        + 2.0 * math.sqrt(N) * theta**2 / omega
        + M * eta**2 / 2.0
        + 8.0 * d**2 * M * theta**2 * inv_eps**2 / omega**2
        + 8.0 * math.sqrt(2.0) * d**1.5 * N * C * theta * bt * inv_eps / (omega * gap)
        + 4.0 * math.sqrt(d) * N * C * theta * bt / (omega * gap)
    )
    return U1, U2


def disagreement_bound(t, N, d, contraction: Contraction, theta, omega, x1_norm, sigmas, alphas) -> float:
    """Upper bound on E||x_t^i - x_t^j|| (t is 1-based; sigmas/alphas indexed by k - 1)."""
    C, lam = contraction.C, contraction.lam
    k = np.arange(1, t)
    first = 2.0 * math.sqrt(N * d) * C * lam ** (t - 1) * x1_norm
    second = 2.0 * math.sqrt(2.0) * N * d * C * float(np.sum(lam ** (t - k) * np.asarray(sigmas)[: t - 1]))
    third = 2.0 * math.sqrt(d) * N * theta * C / omega * float(np.sum(lam ** (t - k - 1) * np.asarray(alphas)[: t - 1]))
    return first + second + third


@dataclass
class DisagreementReport:
    empirical: np.ndarray
    bound: np.ndarray

    @property
    def violations(self) -> np.ndarray:
        return np.flatnonzero(self.empirical > self.bound)

    @property
    def passed(self) -> bool:
        return self.violations.size == 0


def disagreement_bound_check(records, cfg: RunConfig, contraction: Contraction | None = None) -> DisagreementReport:
    """Monte Carlo mean of max_{i,j} ||x_t^i - x_t^j|| against the per-t bound."""
    if isinstance(records, RunRecord):
        records = [records]
    contraction = cfg.schedule.contraction_constants() if contraction is None else contraction
    emp = np.mean([r.disagreement for r in records], axis=0)
    rec = records[0]
    x1 = float(np.linalg.norm(cfg.x1))
    bound = np.array([
        disagreement_bound(t, cfg.n, cfg.d, contraction, cfg.problem.theta, cfg.geometry.omega, x1, rec.sigmas, rec.alphas)
        for t in range(1, rec.T + 1)
    ])
    return DisagreementReport(empirical=emp, bound=bound)


class InsufficientCheckpoints(ValueError):
    pass


def sublinearity_check(checkpoints, regret=None) -> bool:
    """True iff R_tau / tau at the last checkpoint is below its value at the
    checkpoint nearest tau_final / 5, for every node.

    ``regret`` has shape (K,) or (K, N).  Accepts a :class:`RegretReport`.
    """
    if isinstance(checkpoints, RegretReport):
        checkpoints, regret = checkpoints.checkpoints, checkpoints.regret
    cps = np.asarray(checkpoints, dtype=float)
    reg = np.asarray(regret, dtype=float)
    if reg.ndim == 1:
        reg = reg[:, None]
    if cps.size < 2 or cps[-1] < 5 * cps[0]:
        raise InsufficientCheckpoints("need >= 2 checkpoints spanning at least a factor of 5")
    ref = int(np.argmin(np.abs(cps - cps[-1] / 5.0)))
    ratio = reg / cps[:, None]
    return bool(np.all(ratio[-1] < ratio[ref]))


@dataclass
class BoundReport:
    U1: float
    U2: float
    C: float
    lam: float
    one_minus_lam: float
    a: float
    B: int
    params: dict
    empirical: dict = field(default_factory=dict)

    def bound(self, T) -> float:
        return self.U1 + self.U2 * math.sqrt(T)

    def margins(self) -> dict:
        return {int(T): self.bound(T) - v for T, v in self.empirical.items()}

    def to_dict(self) -> dict:
        return {
            "U1": self.U1,
            "U2": self.U2,
            "contraction": {"C": self.C, "lambda": self.lam, "one_minus_lambda": self.one_minus_lam, "a": self.a, "B": self.B},
            "params": self.params,
            "bound": {str(T): self.bound(T) for T in self.empirical},
            "empirical_max_regret": {str(T): v for T, v in self.empirical.items()},
            "margin": {str(T): m for T, m in self.margins().items()},
            "note": "loose by construction: contraction constants come from the inferred weight bound a",
        }


def bound_report(cfg: RunConfig, report: RegretReport | None = None, taus=None) -> BoundReport:
    """Evaluate (U1, U2) for a configuration and compare with measured regret."""
    sched = cfg.schedule
    con = sched.contraction_constants()
    geom = cfg.geometry
    eta = cfg.omega.diameter()
    x1 = float(np.linalg.norm(cfg.x1))
    params = dict(
        N=cfg.n, d=cfg.d, beta=cfg.problem.beta, eta=eta, theta=cfg.problem.theta,
        omega=geom.omega, M=geom.M, eps=cfg.eps, x1_norm=x1,
    )
    U1, U2 = theorem2_constants(C=con.C, lam=con.lam, one_minus_lam=con.one_minus_lam, **params)
    emp = {}
    if report is not None:
        taus = [int(report.checkpoints[-1])] if taus is None else taus
        for tau in taus:
            emp[int(tau)] = float(report.regret[report.at(tau)].max())
    params = {k: (None if isinstance(v, float) and math.isinf(v) else v) for k, v in params.items()}
    return BoundReport(U1, U2, con.C, con.lam, con.one_minus_lam, sched.a, sched.window(), params, emp)
