"""Compact convex constraint sets and their oracles.

All oracles accept a single point of shape ``(d,)`` or a batch of shape
``(n, d)``; batches are processed row by row with identical arithmetic, so a
row's result does not depend on what else is in the batch.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

MEMBERSHIP_TOL = 1e-9
KINDS = ("box", "l1_ball", "l2_ball", "simplex")


def _check_dim(x, d):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != d:
        raise ValueError(f"dimension mismatch: expected {d}, got {x.shape[-1]}")
    return x


def _simplex_threshold_sort(v, z):
    """Row-wise threshold tau with sum(max(v - tau, 0)) = z (sort based)."""
    u = -np.sort(-v, axis=-1)
    css = np.cumsum(u, axis=-1) - z
    k = np.arange(1, v.shape[-1] + 1)
    cond = u - css / k > 0
    rho = cond.shape[-1] - np.argmax(cond[..., ::-1], axis=-1)
    return np.take_along_axis(css, rho[..., None] - 1, axis=-1)[..., 0] / rho


def project_simplex_sort(v, z=1.0):
    v = np.asarray(v, dtype=float)
    tau = _simplex_threshold_sort(v, z)
    return np.maximum(v - tau[..., None], 0.0)


def project_l1_sort(v, r):
    v = np.asarray(v, dtype=float)
    a = np.abs(v)
    inside = a.sum(axis=-1) <= r
    tau = _simplex_threshold_sort(a, r)
    tau = np.where(inside, 0.0, tau)
    return np.sign(v) * np.maximum(a - tau[..., None], 0.0)


def _bisect_threshold(a, z, iters=200):
    """Row-wise tau solving sum(max(a - tau, 0)) = z by bisection."""
    lo = a.min(axis=-1) - z / a.shape[-1] - 1.0
    hi = a.max(axis=-1)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        mass = np.maximum(a - mid[..., None], 0.0).sum(axis=-1)
        big = mass > z
        lo = np.where(big, mid, lo)
        hi = np.where(big, hi, mid)
        if np.all(hi - lo <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(hi))):
            break
    return 0.5 * (lo + hi)


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    """Bounded closed convex set.

    Use the constructors :func:`box`, :func:`l1_ball`, :func:`l2_ball` and
    :func:`simplex` rather than instantiating directly.
    """

    kind: str
    d: int
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    radius: float | None = None
    center: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown constraint kind {self.kind!r}")
        if self.d < 1:
            raise ValueError("dimension must be positive")
        if self.kind == "box":
            lo = np.broadcast_to(np.asarray(self.lower, float), (self.d,)).copy()
            hi = np.broadcast_to(np.asarray(self.upper, float), (self.d,)).copy()
            if np.any(hi < lo) or not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi)):
                raise ValueError("box needs finite lower <= upper")
            lo.setflags(write=False)
            hi.setflags(write=False)
            object.__setattr__(self, "lower", lo)
            object.__setattr__(self, "upper", hi)
        elif self.kind in ("l1_ball", "l2_ball"):
            if self.radius is None or not self.radius > 0:
                raise ValueError("ball radius must be positive")
            object.__setattr__(self, "radius", float(self.radius))
            c = np.zeros(self.d) if self.center is None else np.asarray(self.center, float)
            if c.shape != (self.d,):
                raise ValueError("center has wrong dimension")
            if self.kind == "l1_ball" and np.any(c != 0):
                raise ValueError("l1_ball is centered at the origin")
            c = c.copy()
            c.setflags(write=False)
            object.__setattr__(self, "center", c)
        elif self.kind == "simplex" and self.d < 2:
            raise ValueError("simplex needs d >= 2")

    def __eq__(self, other):
        return isinstance(other, ConstraintSet) and self.to_dict() == other.to_dict()

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "dim": self.d}
        if self.kind == "box":
            out.update(lower=self.lower.tolist(), upper=self.upper.tolist())
        elif self.kind == "l1_ball":
            out.update(radius=self.radius)
        elif self.kind == "l2_ball":
            out.update(radius=self.radius, center=self.center.tolist())
        return out

    @classmethod
    def from_dict(cls, spec: dict) -> "ConstraintSet":
        kind, d = spec["kind"], int(spec["dim"])
        if kind == "box":
            return box(spec["lower"], spec["upper"], d)
        if kind == "l1_ball":
            return l1_ball(spec["radius"], d)
        if kind == "l2_ball":
            return l2_ball(spec["radius"], d, spec.get("center"))
        if kind == "simplex":
            return simplex(d)
        raise ValueError(f"unknown constraint kind {kind!r}")

    # -- oracles -----------------------------------------------------------

    def contains(self, x, tol=MEMBERSHIP_TOL):
        x = _check_dim(x, self.d)
        if self.kind == "box":
            return np.all((x >= self.lower - tol) & (x <= self.upper + tol), axis=-1)
        if self.kind == "l1_ball":
            return np.abs(x).sum(axis=-1) <= self.radius + tol
        if self.kind == "l2_ball":
            return np.linalg.norm(x - self.center, axis=-1) <= self.radius + tol
        return np.all(x >= -tol, axis=-1) & (np.abs(x.sum(axis=-1) - 1.0) <= tol)

    def project(self, y):
        """Euclidean projection, exact (sort-based thresholding for l1 / simplex)."""
        y = _check_dim(y, self.d)
        if self.kind == "box":
            return np.clip(y, self.lower, self.upper)
        if self.kind == "l1_ball":
            return project_l1_sort(y, self.radius)
        if self.kind == "l2_ball":
            diff = y - self.center
            nrm = np.linalg.norm(diff, axis=-1, keepdims=True)
            scale = np.where(nrm > self.radius, self.radius / np.maximum(nrm, 1e-300), 1.0)
            return self.center + diff * scale
        return project_simplex_sort(y)

    def project_bisect(self, y):
        """Euclidean projection via bisection on the KKT multiplier.

        Same result as :meth:`project` by a different route; used by the
        inner mirror-step solver so that closed-form steps can be checked
        against it.
        """
        y = _check_dim(y, self.d)
        if self.kind in ("box", "l2_ball"):
            return self.project(y)
        if self.kind == "simplex":
            tau = _bisect_threshold(y, 1.0)
            return np.maximum(y - tau[..., None], 0.0)
        a = np.abs(y)
        inside = a.sum(axis=-1) <= self.radius
        tau = np.where(inside, 0.0, _bisect_threshold(a, self.radius))
        return np.sign(y) * np.maximum(a - tau[..., None], 0.0)

    def linear_minimizer(self, g):
        """argmin over the set of <g, x> and the minimum value.

        Ties go to the lowest coordinate index; for the l2 ball with g = 0 the
        center is returned.
        """
        g = _check_dim(g, self.d)
        if g.ndim != 1:
            raise ValueError("linear_minimizer takes a single vector")
        if self.kind == "box":
            x = np.where(g > 0, self.lower, self.upper)
            x = np.where(g == 0, self.lower, x)
        elif self.kind == "l1_ball":
            k = int(np.argmax(np.abs(g)))
            x = np.zeros(self.d)
            x[k] = -self.radius * np.sign(g[k])
        elif self.kind == "l2_ball":
            nrm = np.linalg.norm(g)
            x = self.center.copy() if nrm == 0 else self.center - self.radius * g / nrm
        else:
            x = np.zeros(self.d)
            x[int(np.argmin(g))] = 1.0
        return x, float(g @ x)

    def support(self, g) -> float:
        """max over the set of <g, x>."""
        return -self.linear_minimizer(-np.asarray(g, dtype=float))[1]

    def diameter(self) -> float:
        if self.kind == "box":
            return float(np.linalg.norm(self.upper - self.lower))
        if self.kind in ("l1_ball", "l2_ball"):
            return 2.0 * self.radius
        return math.sqrt(2.0)

    def vertices(self) -> np.ndarray:
        """Extreme points (polytopes only)."""
        if self.kind == "box":
            return np.array(list(itertools.product(*zip(self.lower, self.upper))), dtype=float)
        if self.kind == "l1_ball":
            e = np.eye(self.d) * self.radius
            return np.vstack([e, -e])
        if self.kind == "simplex":
            return np.eye(self.d)
        raise ValueError("l2 ball has no finite vertex set")

    def max_distance(self, p) -> float:
        """max over the set of ||x - p||."""
        p = _check_dim(p, self.d)
        if self.kind == "l2_ball":
            return float(np.linalg.norm(p - self.center) + self.radius)
        return float(np.linalg.norm(self.vertices() - p, axis=1).max())

    def min_distance(self, p) -> float:
        """min over the set of ||x - p||."""
        p = _check_dim(p, self.d)
        return float(np.linalg.norm(self.project(p) - p))

    def sample(self, rng, n: int) -> np.ndarray:
        """n points drawn from the set (not necessarily uniformly)."""
        if self.kind == "box":
            return rng.uniform(self.lower, self.upper, size=(n, self.d))
        if self.kind == "simplex":
            return rng.dirichlet(np.ones(self.d), size=n)
        if self.kind == "l1_ball":
            w = rng.dirichlet(np.ones(self.d + 1), size=n)[:, : self.d]
            return w * rng.choice([-1.0, 1.0], size=(n, self.d)) * self.radius
        u = rng.normal(size=(n, self.d))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        rad = self.radius * rng.uniform(size=(n, 1)) ** (1.0 / self.d)
        return self.center + u * rad

    def default_start(self) -> np.ndarray:
        """0 if it belongs to the set, else its projection."""
        zero = np.zeros(self.d)
        return zero if bool(self.contains(zero)) else self.project(zero)


def box(lower, upper, d=None) -> ConstraintSet:
    if d is None:
        d = np.broadcast(np.asarray(lower), np.asarray(upper)).shape[0]
    return ConstraintSet("box", int(d), lower=lower, upper=upper)


def l1_ball(radius, d) -> ConstraintSet:
    return ConstraintSet("l1_ball", int(d), radius=radius)


def l2_ball(radius, d, center=None) -> ConstraintSet:
    return ConstraintSet("l2_ball", int(d), radius=radius, center=center)


def simplex(d) -> ConstraintSet:
    return ConstraintSet("simplex", int(d))


# functional aliases mirroring the method names
def contains(omega: ConstraintSet, x, tol=MEMBERSHIP_TOL):
    return omega.contains(x, tol)


def project_euclidean(omega: ConstraintSet, y):
    return omega.project(y)


def linear_minimizer(omega: ConstraintSet, g):
    return omega.linear_minimizer(g)


def diameter(omega: ConstraintSet) -> float:
    return omega.diameter()
