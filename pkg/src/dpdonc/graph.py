"""Time-varying communication topologies and state-transition products."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

STOCHASTIC_TOL = 1e-12
PRODUCT_TOL = 1e-10


class ConnectivityError(ValueError):
    """Raised when no window length up to the cap gives strong connectivity."""

    def __init__(self, message, window=None):
        super().__init__(message)
        self.window = window


@dataclass(frozen=True)
class StochasticReport:
    ok: bool
    bad_rows: tuple[int, ...] = ()
    bad_cols: tuple[int, ...] = ()
    negative_entries: tuple[tuple[int, int], ...] = ()

    def __bool__(self):
        return self.ok


def validate_doubly_stochastic(m, tol=STOCHASTIC_TOL) -> StochasticReport:
    """Check row sums, column sums and entry range of a weight matrix.

    Indices in the report are 0-based.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"weight matrix must be square, got shape {m.shape}")
    rows = np.flatnonzero(np.abs(m.sum(axis=1) - 1.0) > tol)
    cols = np.flatnonzero(np.abs(m.sum(axis=0) - 1.0) > tol)
    out_of_range = np.argwhere((m < 0.0) | (m > 1.0))
    ok = rows.size == 0 and cols.size == 0 and out_of_range.size == 0
    return StochasticReport(
        ok=ok,
        bad_rows=tuple(int(i) for i in rows),
        bad_cols=tuple(int(j) for j in cols),
        negative_entries=tuple((int(i), int(j)) for i, j in out_of_range),
    )


def is_strongly_connected(support) -> bool:
    """Strong connectivity of the digraph with adjacency ``support`` (self-loops ignored)."""
    adj = np.array(support, dtype=bool)
    np.fill_diagonal(adj, False)
    n_comp, _ = connected_components(adj, directed=True, connection="strong")
    return n_comp == 1


@dataclass(frozen=True, eq=False)
class WeightSchedule:
    """The sequence A(1), A(2), ... of doubly stochastic weight matrices.

    ``policy="cyclic"`` repeats ``matrices`` forever; ``policy="sequence"``
    uses ``sequence[t - 1]`` as the matrix index at step ``t`` and is only
    defined for ``t <= len(sequence)``.

    The positive-weight lower bound ``a`` defaults to 0.999 times the smallest
    positive entry over all matrices.
    """

    matrices: tuple
    policy: str = "cyclic"
    sequence: tuple | None = None
    a: float | None = None
    tol: float = STOCHASTIC_TOL
    _window: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        mats = tuple(np.array(m, dtype=float) for m in self.matrices)
        if not mats:
            raise ValueError("schedule needs at least one matrix")
        n = mats[0].shape[0]
        for k, m in enumerate(mats):
            if m.shape != (n, n):
                raise ValueError(f"matrix {k} has shape {m.shape}, expected {(n, n)}")
            rep = validate_doubly_stochastic(m, self.tol)
            if not rep:
                raise ValueError(f"matrix {k} is not doubly stochastic: {rep}")
            m.setflags(write=False)
        object.__setattr__(self, "matrices", mats)

        if self.policy not in ("cyclic", "sequence"):
            raise ValueError(f"unknown schedule policy {self.policy!r}")
        if self.policy == "sequence":
            if not self.sequence:
                raise ValueError("sequence policy needs a nonempty index sequence")
            seq = tuple(int(k) for k in self.sequence)
            if min(seq) < 0 or max(seq) >= len(mats):
                raise ValueError("sequence indices out of range")
            object.__setattr__(self, "sequence", seq)

        min_pos = min(float(m[m > 0].min()) for m in mats)
        a = 0.999 * min_pos if self.a is None else float(self.a)
        if not 0.0 < a < 1.0:
            raise ValueError(f"lower weight bound a must lie in (0, 1), got {a}")
        for k, m in enumerate(mats):
            pos = m[m > 0]
            if np.any(pos <= a):
                raise ValueError(f"matrix {k} has a positive entry <= a={a}")
        object.__setattr__(self, "a", a)

    @property
    def n(self) -> int:
        return self.matrices[0].shape[0]

    @property
    def period(self) -> int:
        return len(self.matrices) if self.policy == "cyclic" else len(self.sequence)

    def index(self, t: int) -> int:
        if t < 1:
            raise ValueError(f"time index starts at 1, got {t}")
        if self.policy == "cyclic":
            return (t - 1) % len(self.matrices)
        if t > len(self.sequence):
            raise ValueError(f"sequence schedule undefined at t={t} (length {len(self.sequence)})")
        return self.sequence[t - 1]

    def __call__(self, t: int) -> np.ndarray:
        """A(t) for t >= 1."""
        return self.matrices[self.index(t)]

    def window(self, cap: int = 64) -> int:
        """Smallest connectivity window B (cached)."""
        if not self._window:
            self._window.append(check_B_strong_connectivity(self, cap))
        return self._window[0]

    def contraction_constants(self, cap: int = 64):
        return contraction_constants(self.a, self.n, self.window(cap))


def check_B_strong_connectivity(schedule: WeightSchedule, cap: int = 64) -> int:
    """Smallest B such that every B consecutive steps give a strongly connected union.

    Window starts range over one period for cyclic schedules (periodicity makes
    that sufficient) and over every admissible start for explicit sequences.
    """
    supports = [m > 0 for m in schedule.matrices]
    if schedule.policy == "cyclic":
        idx = list(range(len(supports)))
    else:
        idx = list(schedule.sequence)
    length = len(idx)
    last_bad = None
    for B in range(1, cap + 1):
        if schedule.policy == "cyclic":
            starts = range(length)
            get = lambda s, k: idx[(s + k) % length]  # noqa: E731
        else:
            if B > length:
                break
            starts = range(length - B + 1)
            get = lambda s, k: idx[s + k]  # noqa: E731
        ok = True
        for s in starts:
            union = np.zeros_like(supports[0])
            for k in range(B):
                union |= supports[get(s, k)]
            if not is_strongly_connected(union):
                ok = False
                last_bad = (s + 1, s + B)
                break
        if ok:
            return B
    raise ConnectivityError(
        f"no window length <= {cap} is strongly connected; failing window t={last_bad}",
        window=last_bad,
    )


def transition(schedule: WeightSchedule, s: int, t: int) -> np.ndarray:
    """Phi(t, s) = A(t-1) ... A(s); identity when t == s."""
    if t < s:
        raise ValueError(f"transition needs t >= s, got s={s}, t={t}")
    if s < 1:
        raise ValueError(f"time index starts at 1, got s={s}")
    phi = np.eye(schedule.n)
    for k in range(s, t):
        phi = schedule(k) @ phi
    return phi


def transition_products(schedule: WeightSchedule, t_max: int) -> np.ndarray:
    """Stack of Phi(t, 1) for t = 1..t_max (entry ``[t-1]``)."""
    out = np.empty((t_max, schedule.n, schedule.n))
    out[0] = np.eye(schedule.n)
    for t in range(2, t_max + 1):
        out[t - 1] = schedule(t - 1) @ out[t - 2]
    return out


@dataclass(frozen=True)
class Contraction:
    C: float
    lam: float
    one_minus_lam: float

    def __iter__(self):
        return iter((self.C, self.lam))


def contraction_constants(a: float, n: int, B: int) -> Contraction:
    """Geometric contraction constants (C, lambda) for products of the schedule.

    ``|[Phi(t, s)]_ij - 1/n| <= C * lambda**(t - s)`` with
    ``C = 2 (1 + a^-k) / (1 + a^k)`` and ``lambda = (1 - a^k)^(1/k)``,
    ``k = (n - 1) B``.  ``1 - lambda`` is returned separately because it
    underflows to zero for small ``a`` when formed by subtraction.
    """
    if not 0.0 < a < 1.0:
        raise ValueError(f"a must lie in (0, 1), got {a}")
    if B < 1 or n < 2:
        raise ValueError(f"need B >= 1 and n >= 2, got B={B}, n={n}")
    k = (n - 1) * B
    log_ak = k * math.log(a)
    ak = math.exp(log_ak)
    C = 2.0 * (1.0 + math.exp(-log_ak)) / (1.0 + ak)
    log_lam = math.log1p(-ak) / k
    return Contraction(C=C, lam=math.exp(log_lam), one_minus_lam=-math.expm1(log_lam))


def tracking_matrices() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """The three 6-node weight matrices of the localization experiment."""
    n = 6
    a1 = np.zeros((n, n))
    for i in range(n):
        a1[i, i] = 0.5
        a1[i, (i - 1) % n] = 0.5
    a2 = (np.ones((n, n)) - np.eye(n)) / 5.0
    a3 = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if (i - j) % 2 == 0:
                a3[i, j] = 1.0 / 3.0
    return a1, a2, a3


def complete_schedule(n: int) -> WeightSchedule:
    """Uniform averaging over all n nodes at every step."""
    return WeightSchedule((np.full((n, n), 1.0 / n),))


def as_schedule(matrices: Sequence, policy="cyclic", sequence=None) -> WeightSchedule:
    return WeightSchedule(tuple(matrices), policy=policy, sequence=sequence)
