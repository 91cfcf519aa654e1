"""Online cost families: moving-target localization and random quadratics."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .geometry import ConstraintSet

log = logging.getLogger(__name__)

SINGULAR_RADIUS = 1e-9
TARGET_START = (0.8, 0.95)


class OnlineProblem:
    """Interface shared by the cost families.

    Time ``t`` is 1-based, node indices are 0-based.  ``gradients(t, X)``
    returns ``G[j, i] = grad f_t^j(X[i])`` for all cost owners ``j`` and all
    evaluation points ``X[i]``.
    """

    n: int
    d: int
    T: int
    theta: float
    beta: float

    def cost(self, t, i, x):
        raise NotImplementedError

    def gradient(self, t, i, x):
        raise NotImplementedError

    def gradients(self, t, X):
        raise NotImplementedError

    def differing_nodes(self, other) -> list[int]:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


def localization_cost(sensor, distance, x):
    """(||s - x|| - d)^2 / 2."""
    r = np.linalg.norm(np.asarray(x, float) - sensor, axis=-1)
    return 0.5 * (r - distance) ** 2


def localization_gradient(sensor, distance, x):
    """(1 - d / ||s - x||) (x - s), and 0 within 1e-9 of the sensor."""
    diff = np.asarray(x, float) - sensor
    r = np.linalg.norm(diff, axis=-1, keepdims=True)
    singular = r < SINGULAR_RADIUS
    if np.any(singular):
        log.debug("gradient requested at a sensor location; returning zero")
    coef = np.where(singular, 0.0, 1.0 - np.asarray(distance)[..., None] / np.where(singular, 1.0, r))
    return coef * diff


def target_step(t: int, q: int) -> np.ndarray:
    """Displacement of the target between steps t and t + 1."""
    if t < 1:
        raise ValueError("target dynamics are defined for t >= 1")
    return np.array([(-1) ** q * math.sin(t / 50) / (10 * t), -q * math.cos(t / 70) / (40 * t)])


def evolve_target(x, t: int, q: int) -> np.ndarray:
    return np.asarray(x, dtype=float) + target_step(t, q)


@dataclass(frozen=True, eq=False)
class LocalizationScenario:
    """Sensors tracking a moving target from noisy range measurements.

    ``targets[t - 1]`` is the target at step t, ``distances[t - 1, i]`` the
    measurement of sensor i, ``flips[t - 1]`` the Bernoulli draw that moves the
    target from step t to t + 1.
    """

    sensors: np.ndarray
    targets: np.ndarray
    distances: np.ndarray
    flips: np.ndarray
    meas_noise: np.ndarray

    @classmethod
    def generate(cls, sensors, T, seed=0, x0=TARGET_START, noise_max=1e-3):
        """Seeded scenario; q_t and measurement noise come from separate streams
        so a shorter horizon is a prefix of a longer one."""
        sensors = np.array(sensors, dtype=float)
        q_rng, m_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
        flips = q_rng.integers(0, 2, size=T)
        targets = np.empty((T, sensors.shape[1]))
        targets[0] = x0
        for t in range(1, T):
            targets[t] = evolve_target(targets[t - 1], t, int(flips[t - 1]))
        noise = m_rng.uniform(0.0, noise_max, size=(T, sensors.shape[0]))
        dist = np.linalg.norm(sensors[None, :, :] - targets[:, None, :], axis=-1) + noise
        return cls(sensors, targets, dist, flips, noise)

    def with_distances(self, node: int, distances) -> "LocalizationScenario":
        """Copy with one sensor's measurement sequence replaced."""
        dist = self.distances.copy()
        dist[:, node] = distances
        return LocalizationScenario(self.sensors, self.targets, dist, self.flips, self.meas_noise)


class LocalizationProblem(OnlineProblem):
    """Each node i holds f_t^i(x) = (||s_i - x|| - d_t^i)^2 / 2.

    ``theta`` is the exact bound max |r - d| over the constraint set, where
    r = ||s_i - x|| ranges over [min_dist, max_dist] of the set.  ``beta`` is a
    Lipschitz constant of the gradient valid outside balls of radius
    ``exclusion`` around the sensors, 1 + 2 max(d) / exclusion.
    """

    def __init__(self, scenario: LocalizationScenario, omega: ConstraintSet, exclusion=1e-3, theta=None):
        self.scenario = scenario
        self.omega = omega
        self.n, self.d = scenario.sensors.shape
        self.T = scenario.distances.shape[0]
        self.exclusion = exclusion
        r_hi = np.array([omega.max_distance(s) for s in scenario.sensors])
        r_lo = np.array([omega.min_distance(s) for s in scenario.sensors])
        dist = scenario.distances
        exact = float(np.max(np.maximum(r_hi[None, :] - dist, dist - r_lo[None, :])))
        self.theta = exact if theta is None else float(theta)
        self.beta = 1.0 + 2.0 * float(dist.max()) / exclusion
        log.info("localization theta=%.6g beta=%.6g", self.theta, self.beta)

    def cost(self, t, i, x):
        return localization_cost(self.scenario.sensors[i], self.scenario.distances[t - 1, i], x)

    def gradient(self, t, i, x):
        return localization_gradient(self.scenario.sensors[i], self.scenario.distances[t - 1, i], x)

    def gradients(self, t, X):
        s = self.scenario.sensors
        diff = X[None, :, :] - s[:, None, :]
        r = np.sqrt(np.sum(diff * diff, axis=-1))
        singular = r < SINGULAR_RADIUS
        safe = np.where(singular, 1.0, r)
        coef = np.where(singular, 0.0, 1.0 - self.scenario.distances[t - 1][:, None] / safe)
        return coef[..., None] * diff

    def adjacent(self, node: int, distances) -> "LocalizationProblem":
        """Problem differing from this one only in ``node``'s measurements."""
        return LocalizationProblem(self.scenario.with_distances(node, distances), self.omega, self.exclusion)

    def differing_nodes(self, other) -> list[int]:
        a, b = self.scenario, other.scenario
        if a.distances.shape != b.distances.shape or not np.array_equal(a.sensors, b.sensors):
            return list(range(max(self.n, other.n)))
        return [int(i) for i in np.flatnonzero(np.any(a.distances != b.distances, axis=0))]

    def to_dict(self) -> dict:
        return {"kind": "localization", "theta": self.theta, "beta": self.beta}


class QuadraticProblem(OnlineProblem):
    """f_t^i(x) = ||x - c_t^i||^2 / 2 with random centers in a box.

    ``theta`` is max ||x - c|| over the set and all centers, ``beta = 1``.
    """

    def __init__(self, centers, omega: ConstraintSet):
        self.centers = np.array(centers, dtype=float)
        self.T, self.n, self.d = self.centers.shape
        self.omega = omega
        self.beta = 1.0
        self.theta = max(omega.max_distance(c) for c in self.centers.reshape(-1, self.d))

    @classmethod
    def generate(cls, n, d, T, omega, seed=0, spread=1.0):
        rng = np.random.default_rng(seed)
        return cls(rng.uniform(-spread, spread, size=(T, n, d)), omega)

    def cost(self, t, i, x):
        diff = np.asarray(x, float) - self.centers[t - 1, i]
        return 0.5 * np.sum(diff * diff, axis=-1)

    def gradient(self, t, i, x):
        return np.asarray(x, float) - self.centers[t - 1, i]

    def gradients(self, t, X):
        return X[None, :, :] - self.centers[t - 1][:, None, :]

    def differing_nodes(self, other) -> list[int]:
        if self.centers.shape != other.centers.shape:
            return list(range(max(self.n, other.n)))
        return [int(i) for i in np.flatnonzero(np.any(self.centers != other.centers, axis=(0, 2)))]

    def to_dict(self) -> dict:
        return {"kind": "quadratic", "theta": self.theta, "beta": self.beta}


def quadratic_problem(n, d, T, seed, omega, spread=1.0) -> QuadraticProblem:
    return QuadraticProblem.generate(n, d, T, omega, seed=seed, spread=spread)
