"""Bregman generators, divergences and the mirror step.

The mirror step solves ``argmin_{x in omega} D(x, z) + <alpha g, x>``.
Closed forms are used where they exist; everything else goes through a
numerical inner solver on the strongly convex subproblem.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import ConstraintSet

ENTROPY_FLOOR = 1e-12
KINDS = ("squared_euclidean", "mahalanobis", "neg_entropy")


class DomainError(ValueError):
    pass


class UnsupportedCombination(ValueError):
    pass


class InnerSolverError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True, eq=False)
class BregmanGeometry:
    """Generator phi with its strong-convexity modulus ``omega`` and the
    smoothness constant ``M`` of ``D(x, .)``.

    * ``squared_euclidean``: phi = ||x||^2 / 2, omega = 1, M = 1
    * ``mahalanobis``: phi = x^T Q x, omega = 2 lambda_min(Q), M = 2 lambda_max(Q)
    * ``neg_entropy``: phi = sum x log x on the simplex, omega = 1; M is
      unbounded near the boundary and reported as ``inf``
    """

    kind: str
    Q: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown geometry {self.kind!r}")
        if self.kind == "mahalanobis":
            Q = np.array(self.Q, dtype=float)
            if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or not np.allclose(Q, Q.T, atol=0):
                raise ValueError("Q must be a symmetric square matrix")
            ev = np.linalg.eigvalsh(Q)
            if ev[0] <= 0:
                raise ValueError("Q must be positive definite")
            Q.setflags(write=False)
            object.__setattr__(self, "Q", Q)
            object.__setattr__(self, "_eig", (float(ev[0]), float(ev[-1])))
            object.__setattr__(self, "_Qinv", np.linalg.inv(Q))
            object.__setattr__(self, "_diag", bool(np.all(Q == np.diag(np.diag(Q)))))

    def __eq__(self, other):
        return isinstance(other, BregmanGeometry) and self.to_dict() == other.to_dict()

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "mahalanobis":
            out["Q"] = self.Q.tolist()
        return out

    @classmethod
    def from_dict(cls, spec: dict) -> "BregmanGeometry":
        return cls(spec["kind"], spec.get("Q"))

    @property
    def omega(self) -> float:
        if self.kind == "mahalanobis":
            return 2.0 * self._eig[0]
        return 1.0

    @property
    def M(self) -> float:
        if self.kind == "squared_euclidean":
            return 1.0
        if self.kind == "mahalanobis":
            return 2.0 * self._eig[1]
        return float("inf")

    @property
    def hessian_bound(self) -> float:
        """Upper bound on the Hessian of phi (entropy: none)."""
        if self.kind == "squared_euclidean":
            return 1.0
        if self.kind == "mahalanobis":
            return 2.0 * self._eig[1]
        return float("inf")

    def _check_domain(self, x):
        if self.kind == "neg_entropy" and np.any(np.asarray(x) <= 0):
            raise DomainError("negative entropy needs strictly positive coordinates")

    def phi(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "squared_euclidean":
            return 0.5 * np.sum(x * x, axis=-1)
        if self.kind == "mahalanobis":
            return np.einsum("...i,ij,...j->...", x, self.Q, x)
        self._check_domain(x)
        return np.sum(x * np.log(x), axis=-1)

    def grad_phi(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "squared_euclidean":
            return x.copy()
        if self.kind == "mahalanobis":
            return 2.0 * x @ self.Q
        self._check_domain(x)
        return np.log(x) + 1.0

    def divergence(self, x, y):
        """D(x, y) = phi(x) - phi(y) - <grad phi(y), x - y>, in closed form per kind."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "squared_euclidean":
            diff = x - y
            return 0.5 * np.sum(diff * diff, axis=-1)
        if self.kind == "mahalanobis":
            diff = x - y
            return np.einsum("...i,ij,...j->...", diff, self.Q, diff)
        self._check_domain(x)
        self._check_domain(y)
        return np.sum(x * np.log(x / y) - x + y, axis=-1)

    def grad_y_divergence(self, x, y):
        """Gradient of D(x, y) with respect to its second argument."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "squared_euclidean":
            return y - x
        if self.kind == "mahalanobis":
            return 2.0 * (y - x) @ self.Q
        self._check_domain(y)
        return 1.0 - x / y


def divergence(geom: BregmanGeometry, x, y):
    return geom.divergence(x, y)


# -- mirror step ----------------------------------------------------------


def _closed_form(geom, omega, z, g, alpha):
    """Exact step for the pairs that have one."""
    if geom.kind == "squared_euclidean":
        return omega.project(z - alpha * g)
    if geom.kind == "neg_entropy":
        w = np.log(z) - alpha * g
        w = w - w.max(axis=-1, keepdims=True)
        e = np.exp(w)
        return e / e.sum(axis=-1, keepdims=True)
    # mahalanobis with diagonal Q on a box separates per coordinate
    return omega.project(z - 0.5 * alpha * g @ geom._Qinv)


def _entropy_newton(z, lin, x, tol, max_iter):
    """Damped Newton on h(x) = KL(x, z) + <lin, x> restricted to the simplex.

    The step dx = -x (r - mu), r = log(x / z) + lin, is the Newton direction
    for the equality-constrained problem; it is multiplicative per coordinate,
    so optima within 1e-10 of the boundary are reached in a few iterations.
    """
    logz = np.log(z)

    def h(x, idx):
        return np.sum(x * (np.log(x) - logz[idx] - 1.0) + lin[idx] * x, axis=-1)

    n = x.shape[0]
    active = np.ones(n, dtype=bool)
    resid = np.full(n, np.inf)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        xa = x[idx]
        r = np.log(xa) - logz[idx] + lin[idx]
        mu = np.sum(xa * r, axis=-1, keepdims=True) / np.sum(xa, axis=-1, keepdims=True)
        dx = -xa * (r - mu)
        resid[idx] = np.linalg.norm(dx, axis=-1)
        # keep every coordinate positive: shrink at most 99% per iteration
        with np.errstate(divide="ignore"):
            room = np.where(dx < 0, -0.99 * xa / dx, np.inf).min(axis=-1)
        s = np.minimum(1.0, room)
        h0 = h(xa, idx)
        slope = np.sum(r * dx, axis=-1)
        for _ in range(60):
            xn = xa + s[:, None] * dx
            ok = h(xn, idx) <= h0 + 1e-4 * s * slope + 1e-14 * (1.0 + np.abs(h0))
            if np.all(ok):
                break
            s = np.where(ok, s, 0.5 * s)
        xn /= xn.sum(axis=-1, keepdims=True)
        x[idx] = xn
        active[idx[resid[idx] <= tol]] = False
    if np.any(active):
        raise InnerSolverError("mirror-step inner solver did not converge", float(resid[active].max()))
    return x


def inner_solve(geom, omega, z, g, alpha, tol=1e-12, max_iter=100_000, x0=None, projection="bisect"):
    """Numerical solution of argmin_{x in omega} D(x, z) + alpha <g, x>.

    Quadratic generators: projected gradient descent with the fixed step
    1/L, L the Hessian bound of phi, until the gradient-mapping norm is at
    most ``tol``.  Projections use the bisection route of the constraint set
    unless ``projection="sort"``.  Negative entropy on the simplex: damped
    Newton (see :func:`_entropy_newton`) until the Newton step is at most
    ``tol``; ``z`` is clamped to ``ENTROPY_FLOOR`` as in :func:`mirror_step`.
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    g = np.atleast_2d(np.asarray(g, dtype=float))
    lin = np.broadcast_to(alpha * g, z.shape)
    if geom.kind == "neg_entropy":
        if omega.kind != "simplex":
            raise UnsupportedCombination("negative entropy is only supported on the simplex")
        z = np.maximum(z, ENTROPY_FLOOR)
        x = np.full(z.shape, 1.0 / omega.d) if x0 is None else np.atleast_2d(np.array(x0, dtype=float))
        return _entropy_newton(z, lin, x, tol, max_iter)

    project = omega.project_bisect if projection == "bisect" else omega.project
    gz = geom.grad_phi(z)
    x = project(z) if x0 is None else np.atleast_2d(np.array(x0, dtype=float))
    step = 1.0 / geom.hessian_bound
    active = np.ones(x.shape[0], dtype=bool)
    resid = np.full(x.shape[0], np.inf)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        xa = x[idx]
        grad = geom.grad_phi(xa) - gz[idx] + lin[idx]
        xn = project(xa - step * grad)
        gm = np.linalg.norm(xa - xn, axis=-1) / step
        x[idx] = xn
        resid[idx] = gm
        active[idx[gm <= tol]] = False
    if np.any(active):
        raise InnerSolverError("mirror-step inner solver did not converge", float(resid[active].max()))
    return x


def mirror_step(geom: BregmanGeometry, omega: ConstraintSet, z, g, alpha, method="auto", tol=1e-12):
    """argmin_{x in omega} D(x, z) + <alpha g, x>, row-wise over a batch.

    ``method`` is ``"auto"`` (closed form when available), ``"closed"`` or
    ``"inner"``.  For negative entropy, ``z`` is clamped to ``ENTROPY_FLOOR``
    first since the noisy consensus point can leave the positive orthant.
    """
    if alpha <= 0:
        raise ValueError("step size must be positive")
    if geom.kind == "neg_entropy" and omega.kind != "simplex":
        raise UnsupportedCombination("negative entropy is only supported on the simplex")
    z = np.asarray(z, dtype=float)
    g = np.asarray(g, dtype=float)
    single = z.ndim == 1
    z2 = np.atleast_2d(z)
    g2 = np.broadcast_to(np.atleast_2d(g), z2.shape)
    if z2.shape[-1] != omega.d:
        raise ValueError(f"dimension mismatch: expected {omega.d}, got {z2.shape[-1]}")
    if geom.kind == "neg_entropy":
        z2 = np.maximum(z2, ENTROPY_FLOOR)

    if method == "inner":
        out = inner_solve(geom, omega, z2, g2, alpha, tol=tol)
    elif method not in ("auto", "closed"):
        raise ValueError(f"unknown method {method!r}")
    elif geom.kind == "mahalanobis" and not (omega.kind == "box" and geom._diag):
        if method == "closed":
            raise UnsupportedCombination(f"no closed form for mahalanobis on {omega.kind}")
        out = _closed_form_or_solve(geom, omega, z2, g2, alpha, tol)
    else:
        out = _closed_form(geom, omega, z2, g2, alpha)
    return out[0] if single else out


def _closed_form_or_solve(geom, omega, z, g, alpha, tol):
    # the unconstrained minimizer z - Q^{-1} alpha g / 2 is exact when feasible
    y = z - 0.5 * alpha * g @ geom._Qinv
    out = y.copy()
    outside = ~omega.contains(y, tol=0.0)
    if np.any(outside):
        out[outside] = inner_solve(geom, omega, z[outside], g[outside], alpha, tol=tol, projection="sort")
    return out


def variational_gap(geom, omega, z, g, alpha, x_plus, samples):
    """min over sampled x of <alpha g + grad phi(x+) - grad phi(z), x - x+>.

    Nonnegative (up to round-off) exactly when x+ is the mirror step.
    """
    v = alpha * np.asarray(g) + geom.grad_phi(x_plus) - geom.grad_phi(np.maximum(z, ENTROPY_FLOOR) if geom.kind == "neg_entropy" else z)
    return float(np.min((np.asarray(samples) - x_plus) @ v))


# -- regularity of D(x, .) ----------------------------------------------------


@dataclass(frozen=True)
class Assumption4Report:
    jensen_worst: float
    smooth_worst: float
    M_declared: float
    M_empirical: float

    @property
    def passed(self) -> bool:
        return self.jensen_worst <= 1e-9 and self.smooth_worst <= 1e-9


def verify_assumption4(geom: BregmanGeometry, omega: ConstraintSet, samples: int, rng=None, delta=None, M=None):
    """Empirical check of convexity and M-smoothness of D(x, .) in its second argument.

    ``x`` is drawn from ``omega``.  Second arguments are drawn from an
    enlarged box around ``omega`` for quadratic generators and from the
    simplex truncated at ``delta`` (coordinates >= delta) for entropy.  The
    report carries the worst Jensen violation, the worst smoothness
    violation against ``M`` (default: the geometry's declared M) and the
    smallest M consistent with the samples.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(0) if rng is None else rng
    d = omega.d
    M_decl = geom.M if M is None else M

    def draw_y(n):
        if geom.kind == "neg_entropy":
            dl = 1e-3 if delta is None else delta
            w = rng.dirichlet(np.ones(d), size=n)
            return dl + (1.0 - d * dl) * w
        eta = omega.diameter()
        base = omega.sample(rng, n)
        return base + rng.uniform(-eta, eta, size=(n, d))

    x = omega.sample(rng, samples)
    if geom.kind == "neg_entropy":
        x = np.maximum(x, 1e-12)
        x /= x.sum(axis=1, keepdims=True)
    k = 4
    ys = np.stack([draw_y(samples) for _ in range(k)], axis=1)
    r = rng.dirichlet(np.ones(k), size=samples)
    ybar = np.einsum("nk,nkd->nd", r, ys)
    lhs = geom.divergence(x, ybar)
    rhs = np.einsum("nk,nk->n", r, geom.divergence(x[:, None, :], ys))
    jensen = float(np.max(lhs - rhs))

    y1, y2 = draw_y(samples), draw_y(samples)
    gap = geom.divergence(x, y1) - geom.divergence(x, y2) - np.sum(geom.grad_y_divergence(x, y2) * (y1 - y2), axis=-1)
    sq = np.sum((y1 - y2) ** 2, axis=-1)
    M_emp = float(np.max(2.0 * gap / sq))
    smooth = float(np.max(gap - 0.5 * M_decl * sq)) if np.isfinite(M_decl) else -np.inf
    return Assumption4Report(jensen_worst=jensen, smooth_worst=smooth, M_declared=M_decl, M_empirical=M_emp)
