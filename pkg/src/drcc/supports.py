"""Support-set geometry: membership tests and the directional radius.

The radius of a set S in direction z is half the spread of a'z over S,
``r(z) = sup_{a1,a2 in S} (a1 - a2)'z / 2``. It is positively homogeneous
and convex in z, and has closed forms for the three shapes used here:

* hyperbox: ``0.5 * ||diag(upper - lower) z||_1``
* vertex polytope: ``0.5 * (max_k v_k'z - min_k v_k'z)``
* ellipsoid {(a-c)'V(a-c) <= 1}: ``sqrt(z' V^-1 z)``, independent of c
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
from scipy.optimize import linprog


def _frozen(values, dtype=float, ndim=1):
    arr = np.array(values, dtype=dtype)
    if arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-dimensional array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("support data must be finite")
    arr.flags.writeable = False
    return arr


class Box:
    """Axis-aligned box [lower, upper]."""

    def __init__(self, lower, upper):
        self.lower = _frozen(lower)
        self.upper = _frozen(upper)
        if self.lower.shape != self.upper.shape:
            raise ValueError("lower and upper bounds differ in length")
        if np.any(self.lower > self.upper):
            raise ValueError("box needs lower <= upper elementwise")
        self.dim = len(self.lower)

    @property
    def widths(self):
        return self.upper - self.lower

    def radius(self, z):
        z = _check_dim(z, self.dim)
        return 0.5 * float(np.abs(self.widths * z).sum())

    def radius_batch(self, rows):
        rows = _check_rows(rows, self.dim)
        return 0.5 * np.abs(rows * self.widths).sum(axis=1)

    def contains(self, a):
        a = _check_dim(a, self.dim)
        return bool(np.all(self.lower <= a) and np.all(a <= self.upper))


class Polytope:
    """Convex hull of an explicit vertex list."""

    def __init__(self, vertices):
        self.vertices = _frozen(vertices, ndim=2)
        if self.vertices.shape[0] < 1:
            raise ValueError("polytope needs at least one vertex")
        self.dim = self.vertices.shape[1]

    def radius(self, z):
        z = _check_dim(z, self.dim)
        values = self.vertices @ z
        return 0.5 * float(values.max() - values.min())

    def radius_batch(self, rows):
        rows = _check_rows(rows, self.dim)
        values = rows @ self.vertices.T
        return 0.5 * (values.max(axis=1) - values.min(axis=1))

    def contains(self, a):
        a = _check_dim(a, self.dim)
        m = self.vertices.shape[0]
        res = linprog(
            np.zeros(m),
            A_eq=np.vstack([self.vertices.T, np.ones((1, m))]),
            b_eq=np.concatenate([a, [1.0]]),
            bounds=(0.0, None),
            method="highs",
            options={"primal_feasibility_tolerance": 1e-9},
        )
        return bool(res.status == 0)


class Ellipsoid:
    """Set {a : (a - center)' shape (a - center) <= 1}, shape positive definite.

    The Cholesky factor of the shape matrix is taken once at construction;
    a matrix that fails to factor (not symmetric, or not PD) is rejected.
    """

    def __init__(self, center, shape):
        self.center = _frozen(center)
        self.shape = _frozen(shape, ndim=2)
        self.dim = len(self.center)
        if self.shape.shape != (self.dim, self.dim):
            raise ValueError("shape matrix size does not match center length")
        if not np.allclose(self.shape, self.shape.T, rtol=1e-10, atol=1e-12):
            raise ValueError("shape matrix must be symmetric")
        try:
            self._chol = scipy.linalg.cholesky(self.shape, lower=True)
        except scipy.linalg.LinAlgError as exc:
            raise ValueError("shape matrix must be positive definite") from exc
        self._chol.flags.writeable = False

    def inverse_factor(self):
        """Matrix F with F F' = shape^-1 (so radius(z) = ||F' z||)."""
        return scipy.linalg.solve_triangular(
            self._chol, np.eye(self.dim), lower=True
        ).T

    def radius(self, z):
        z = _check_dim(z, self.dim)
        w = scipy.linalg.solve_triangular(self._chol, z, lower=True)
        return float(np.linalg.norm(w))

    def radius_batch(self, rows):
        rows = _check_rows(rows, self.dim)
        w = scipy.linalg.solve_triangular(self._chol, rows.T, lower=True)
        return np.linalg.norm(w, axis=0)

    def contains(self, a):
        a = _check_dim(a, self.dim)
        d = a - self.center
        return bool(d @ self.shape @ d <= 1.0 + 1e-12)


def _check_dim(z, dim):
    z = np.asarray(z, dtype=float)
    if z.shape != (dim,):
        raise ValueError(f"vector of length {dim} required, got shape {z.shape}")
    return z


def _check_rows(rows, dim):
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[1] != dim:
        raise ValueError(f"array of shape (m, {dim}) required, got {rows.shape}")
    return rows


def to_config(support) -> dict:
    if isinstance(support, Box):
        return {"box": {"lower": support.lower.tolist(), "upper": support.upper.tolist()}}
    if isinstance(support, Polytope):
        return {"polytope": {"vertices": support.vertices.tolist()}}
    if isinstance(support, Ellipsoid):
        return {
            "ellipsoid": {
                "center": support.center.tolist(),
                "shape": support.shape.tolist(),
            }
        }
    raise ValueError(f"not a support set: {type(support).__name__}")


def from_config(config: dict):
    if not isinstance(config, dict) or len(config) != 1:
        raise ValueError("support config must have exactly one variant key")
    (variant, body), = config.items()
    if variant == "box":
        return Box(body["lower"], body["upper"])
    if variant == "polytope":
        return Polytope(body["vertices"])
    if variant == "ellipsoid":
        return Ellipsoid(body["center"], body["shape"])
    raise ValueError(f"unknown support variant {variant!r}")
