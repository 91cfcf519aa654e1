"""Execution of the private distributed mirror-descent loop and regret estimation."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bregman import BregmanGeometry, InnerSolverError, mirror_step
from .geometry import ConstraintSet
from .graph import WeightSchedule
from .privacy import NoiseSchedule, PrivacyAccountant, unit_laplace
from .problems import OnlineProblem


class RunError(RuntimeError):
    def __init__(self, t, message):
        super().__init__(f"run aborted at t={t}: {message}")
        self.t = t


def default_checkpoints(T: int) -> np.ndarray:
    every = max(1, T // 100)
    cps = list(range(every, T + 1, every))
    if not cps or cps[-1] != T:
        cps.append(T)
    return np.array(cps, dtype=int)


@dataclass(frozen=True, eq=False)
class RunConfig:
    """Everything one Monte Carlo batch needs.

    The step size is ``step_scale / sqrt(t)`` with ``step_scale = 1/N`` by
    default.  ``eps = inf`` disables the noise.  ``retain`` keeps consensus
    points, broadcasts and noise in the records.
    """

    problem: OnlineProblem
    schedule: WeightSchedule
    omega: ConstraintSet
    geometry: BregmanGeometry
    eps: float = math.inf
    T: int | None = None
    seed: int = 0
    runs: int = 1
    step_scale: float | None = None
    x1: np.ndarray | None = None
    checkpoint_every: int | None = None
    retain: bool = False

    def __post_init__(self):
        T = self.problem.T if self.T is None else int(self.T)
        if T < 1 or T > self.problem.T:
            raise ValueError(f"horizon {T} outside 1..{self.problem.T}")
        object.__setattr__(self, "T", T)
        if self.schedule.n != self.problem.n:
            raise ValueError("schedule and problem disagree on the node count")
        if self.omega.d != self.problem.d:
            raise ValueError("constraint set and problem disagree on the dimension")
        if self.step_scale is not None and not self.step_scale > 0:
            raise ValueError("step scale must be positive")
        x1 = self.omega.default_start() if self.x1 is None else np.asarray(self.x1, float)
        x1 = np.broadcast_to(x1, (self.problem.n, self.problem.d)).copy()
        if not np.all(self.omega.contains(x1)):
            raise ValueError("initial points must lie in the constraint set")
        object.__setattr__(self, "x1", x1)

    @property
    def n(self) -> int:
        return self.problem.n

    @property
    def d(self) -> int:
        return self.problem.d

    def alpha(self, t: int) -> float:
        if self.step_scale is None:
            return 1.0 / (self.n * math.sqrt(t))
        return self.step_scale / math.sqrt(t)

    def alphas(self) -> np.ndarray:
        return np.array([self.alpha(t) for t in range(1, self.T + 1)])

    def noise(self) -> NoiseSchedule:
        return NoiseSchedule(self.eps, self.problem.theta, self.geometry.omega, self.d)

    def checkpoints(self) -> np.ndarray:
        if self.checkpoint_every is None:
            return default_checkpoints(self.T)
        cps = list(range(self.checkpoint_every, self.T + 1, self.checkpoint_every))
        if not cps or cps[-1] != self.T:
            cps.append(self.T)
        return np.array(cps, dtype=int)


@dataclass
class RunRecord:
    """Trajectory and regret accumulators of one run.

    ``X[t - 1]`` holds the decisions x_t for t = 1..T+1.  ``Z``, ``Qb`` and
    ``noise`` (index t - 1 for step t) are kept only when requested.
    ``G[k]`` and ``S[k]`` are the partial sums up to ``checkpoints[k]`` of
    sum_j grad f_t^j(x_t^i) and sum_j <grad f_t^j(x_t^i), x_t^i>.
    """

    run: int
    X: np.ndarray
    alphas: np.ndarray
    sigmas: np.ndarray
    checkpoints: np.ndarray
    G: np.ndarray
    S: np.ndarray
    disagreement: np.ndarray
    accountant: PrivacyAccountant | None
    Z: np.ndarray | None = None
    Qb: np.ndarray | None = None
    noise: np.ndarray | None = None

    @property
    def T(self) -> int:
        return self.alphas.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[1]

    @property
    def d(self) -> int:
        return self.X.shape[2]


def consensus_step(X, A, xi=None):
    """z^i = sum_j a_ij (x^j + xi^j) for all nodes at once."""
    X = np.asarray(X, dtype=float)
    A = np.asarray(A, dtype=float)
    if A.shape != (X.shape[0], X.shape[0]):
        raise ValueError(f"weight matrix {A.shape} does not match {X.shape[0]} nodes")
    q = X if xi is None else X + xi
    return A @ q


def max_disagreement(X) -> np.ndarray:
    """max over pairs of ||x^i - x^j|| for each leading index."""
    diff = X[..., :, None, :] - X[..., None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1)).max(axis=(-1, -2))


def run_once(cfg: RunConfig, run: int = 0) -> RunRecord:
    """One execution of the algorithm; deterministic in (cfg.seed, run)."""
    n, d, T = cfg.n, cfg.d, cfg.T
    noise = cfg.noise()
    alphas = cfg.alphas()
    sigmas = noise.sigmas(alphas)
    unit = unit_laplace(cfg.seed, run, n, T, d) if noise.enabled else None
    acc = PrivacyAccountant() if noise.enabled else None
    cps = cfg.checkpoints()
    cp_index = {int(t): k for k, t in enumerate(cps)}

    X = np.empty((T + 1, n, d))
    X[0] = cfg.x1
    Gp = np.empty((len(cps), n, d))
    Sp = np.empty((len(cps), n))
    Gacc = np.zeros((n, d))
    Sacc = np.zeros(n)
    keep = cfg.retain
    Z = np.empty((T, n, d)) if keep else None
    Qb = np.empty((T, n, d)) if keep else None
    Xi = np.zeros((T, n, d)) if keep else None
    diag = np.arange(n)

    for t in range(1, T + 1):
        x = X[t - 1]
        grads = cfg.problem.gradients(t, x)
        gsum = grads.sum(axis=0)
        Gacc += gsum
        Sacc += np.sum(gsum * x, axis=-1)
        k = cp_index.get(t)
        if k is not None:
            Gp[k] = Gacc
            Sp[k] = Sacc
        if noise.enabled:
            xi = sigmas[t - 1] * unit[t - 1]
            q = x + xi
            acc.update(noise.sensitivity(alphas[t - 1]), sigmas[t - 1])
        else:
            xi = None
            q = x
        z = cfg.schedule(t) @ q
        try:
            X[t] = mirror_step(cfg.geometry, cfg.omega, z, grads[diag, diag], alphas[t - 1])
        except InnerSolverError as exc:
            raise RunError(t, str(exc)) from exc
        if keep:
            Z[t - 1] = z
            Qb[t - 1] = q
            if xi is not None:
                Xi[t - 1] = xi

    return RunRecord(
        run=run,
        X=X,
        alphas=alphas,
        sigmas=sigmas,
        checkpoints=cps,
        G=Gp,
        S=Sp,
        disagreement=max_disagreement(X[:T]),
        accountant=acc,
        Z=Z,
        Qb=Qb,
        noise=Xi,
    )


def _run_indexed(args):
    cfg, run = args
    return run_once(cfg, run)


def run_monte_carlo(cfg: RunConfig, workers: int = 1) -> list[RunRecord]:
    """All ``cfg.runs`` runs, optionally spread over worker processes.

    Each run depends only on (seed, run index), so the worker count does not
    change any result.
    """
    jobs = [(cfg, r) for r in range(cfg.runs)]
    if workers <= 1 or cfg.runs <= 1:
        return [_run_indexed(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_indexed, jobs))


@dataclass
class RegretReport:
    """Monte Carlo regret estimates per node at each checkpoint.

    ``regret[k, i]`` estimates max_x E[R_tau^i] at ``tau = checkpoints[k]``:
    the accumulators are averaged over runs first and the maximum over the
    constraint set is taken once, on the averages.  ``stderr`` is the
    standard error of the per-run values at that maximizer.
    """

    checkpoints: np.ndarray
    regret: np.ndarray
    stderr: np.ndarray
    maximizers: np.ndarray
    runs: int
    extra: dict = field(default_factory=dict)

    @property
    def ratio(self) -> np.ndarray:
        return self.regret / self.checkpoints[:, None]

    @property
    def ratio_stderr(self) -> np.ndarray:
        return self.stderr / self.checkpoints[:, None]

    @property
    def final(self) -> np.ndarray:
        return self.regret[-1]

    def max_ratio(self) -> np.ndarray:
        return self.ratio.max(axis=1)

    def max_ratio_stderr(self) -> np.ndarray:
        """Standard error of the node attaining the max at each checkpoint."""
        k = np.argmax(self.ratio, axis=1)
        return self.ratio_stderr[np.arange(len(k)), k]

    def at(self, tau: int) -> int:
        hits = np.flatnonzero(self.checkpoints == tau)
        if hits.size == 0:
            raise KeyError(f"no checkpoint at tau={tau}")
        return int(hits[0])

    def to_dict(self) -> dict:
        return {
            "runs": self.runs,
            "T": int(self.checkpoints[-1]),
            "final_regret": self.final.tolist(),
            "final_stderr": self.stderr[-1].tolist(),
            "final_max_regret_over_T": float(self.ratio[-1].max()),
            "maximizers": self.maximizers[-1].tolist(),
        }


def estimate_regret(records: list[RunRecord], omega: ConstraintSet) -> RegretReport:
    if not records:
        raise ValueError("need at least one record")
    shape = records[0].G.shape
    cps = records[0].checkpoints
    for r in records:
        if r.G.shape != shape or not np.array_equal(r.checkpoints, cps):
            raise ValueError("records disagree on (checkpoints, N, d)")
    G = np.stack([r.G for r in records])
    S = np.stack([r.S for r in records])
    Gbar = G.mean(axis=0)
    Sbar = S.mean(axis=0)
    K, n, d = shape
    regret = np.empty((K, n))
    maxim = np.empty((K, n, d))
    stderr = np.zeros((K, n))
    m = len(records)
    for k in range(K):
        for i in range(n):
            x, val = omega.linear_minimizer(Gbar[k, i])
            regret[k, i] = Sbar[k, i] - val
            maxim[k, i] = x
            if m > 1:
                per_run = S[:, k, i] - G[:, k, i] @ x
                stderr[k, i] = per_run.std(ddof=1) / math.sqrt(m)
    return RegretReport(checkpoints=cps.copy(), regret=regret, stderr=stderr, maximizers=maxim, runs=m)
