"""Bounded convex feasible regions.

Every set exposes a linear minimization oracle, Euclidean projection,
membership testing and its exact diameter. All array methods act on the last
axis and broadcast over leading (batch) axes.

LMO ties are broken towards the lowest coordinate index, with the positive
sign preferred, so ``lmo(0)`` is always the set's canonical vertex.
"""

from __future__ import annotations

import itertools
from abc import ABC, abstractmethod

import numpy as np

from ._validation import check_positive_int, check_positive_real, check_vector

__all__ = [
    "ConstraintSet",
    "L1Ball",
    "L2Ball",
    "Simplex",
    "Box",
    "CONSTRAINT_KINDS",
    "make_constraint",
    "project_simplex",
]

DEFAULT_TOL = 1e-9


def project_simplex(points, radius=1.0):
    """Project rows of ``points`` onto ``{x >= 0, sum(x) = radius}``.

    Sort-and-threshold; O(d log d) per row.
    """
    p = np.asarray(points, dtype=float)
    d = p.shape[-1]
    u = -np.sort(-p, axis=-1)
    css = np.cumsum(u, axis=-1) - radius
    k = np.arange(1, d + 1)
    cond = u - css / k > 0
    # cond is true on a prefix; its length is the support size.
    rho = np.sum(cond, axis=-1, keepdims=True)
    theta = np.take_along_axis(css, rho - 1, axis=-1) / rho
    return np.maximum(p - theta, 0.0)


class ConstraintSet(ABC):
    """Abstract bounded convex set in R^dim."""

    kind = None

    def __init__(self, dim):
        self.dim = check_positive_int(dim, "dim")

    @abstractmethod
    def lmo(self, direction):
        """Return ``argmin_{v in K} <direction, v>``."""

    @abstractmethod
    def project(self, point):
        """Euclidean projection onto the set."""

    @abstractmethod
    def contains(self, point, tol=DEFAULT_TOL):
        """Membership test within ``tol``."""

    @abstractmethod
    def diameter(self):
        """Exact Euclidean diameter ``sup ||x - y||``."""

    @abstractmethod
    def max_norm(self):
        """``sup_{x in K} ||x||_2``."""

    def vertices(self):
        """Extreme points for polytopes, ``None`` otherwise."""
        return None

    def canonical_vertex(self):
        return self.lmo(np.zeros(self.dim))

    def sample(self, rng, size=None):
        """Random members (not uniform): random convex mixes or radial draws."""
        shape = () if size is None else (size,) if np.isscalar(size) else tuple(size)
        verts = self.vertices()
        weights = rng.dirichlet(np.full(len(verts), 0.3), size=shape)
        return weights @ verts

    def to_dict(self):
        return {"kind": self.kind, "dim": self.dim}

    def __repr__(self):
        params = ", ".join(f"{k}={v!r}" for k, v in self.to_dict().items() if k != "kind")
        return f"{type(self).__name__}({params})"

    def _check(self, x, name):
        return check_vector(x, self.dim, name)


class L1Ball(ConstraintSet):
    """``{x : ||x||_1 <= radius}``."""

    kind = "l1_ball"

    def __init__(self, dim, radius=1.0):
        super().__init__(dim)
        self.radius = check_positive_real(radius, "radius")

    def lmo(self, direction):
        d = self._check(direction, "direction")
        k = np.argmax(np.abs(d), axis=-1)[..., None]
        dk = np.take_along_axis(d, k, axis=-1)
        sign = np.where(dk > 0, -1.0, 1.0)
        out = np.zeros_like(d)
        np.put_along_axis(out, k, sign * self.radius, axis=-1)
        return out

    def project(self, point):
        p = self._check(point, "point")
        inside = np.sum(np.abs(p), axis=-1, keepdims=True) <= self.radius
        proj = np.sign(p) * project_simplex(np.abs(p), self.radius)
        return np.where(inside, p, proj)

    def contains(self, point, tol=DEFAULT_TOL):
        p = self._check(point, "point")
        return np.sum(np.abs(p), axis=-1) <= self.radius + tol

    def diameter(self):
        return 2.0 * self.radius

    def max_norm(self):
        return self.radius

    def vertices(self):
        eye = np.eye(self.dim) * self.radius
        return np.concatenate([eye, -eye])

    def to_dict(self):
        return {"kind": self.kind, "dim": self.dim, "radius": self.radius}


class L2Ball(ConstraintSet):
    """``{x : ||x||_2 <= radius}``."""

    kind = "l2_ball"

    def __init__(self, dim, radius=1.0):
        super().__init__(dim)
        self.radius = check_positive_real(radius, "radius")

    def lmo(self, direction):
        d = self._check(direction, "direction")
        norm = np.linalg.norm(d, axis=-1, keepdims=True)
        e0 = np.zeros(self.dim)
        e0[0] = self.radius
        safe = np.where(norm > 0, norm, 1.0)
        return np.where(norm > 0, -self.radius * d / safe, e0)

    def project(self, point):
        p = self._check(point, "point")
        norm = np.linalg.norm(p, axis=-1, keepdims=True)
        scale = np.where(norm > self.radius, self.radius / np.where(norm > 0, norm, 1.0), 1.0)
        return p * scale

    def contains(self, point, tol=DEFAULT_TOL):
        p = self._check(point, "point")
        return np.linalg.norm(p, axis=-1) <= self.radius + tol

    def diameter(self):
        return 2.0 * self.radius

    def max_norm(self):
        return self.radius

    def sample(self, rng, size=None):
        shape = () if size is None else (size,) if np.isscalar(size) else tuple(size)
        g = rng.standard_normal(shape + (self.dim,))
        g /= np.linalg.norm(g, axis=-1, keepdims=True)
        r = self.radius * rng.random(shape + (1,)) ** (1.0 / self.dim)
        return g * r

    def to_dict(self):
        return {"kind": self.kind, "dim": self.dim, "radius": self.radius}


class Simplex(ConstraintSet):
    """Probability simplex ``{x >= 0, sum(x) = 1}``."""

    kind = "simplex"

    def __init__(self, dim):
        super().__init__(dim)
        if self.dim < 2:
            raise ValueError("simplex needs dim >= 2 to have positive diameter")

    def lmo(self, direction):
        d = self._check(direction, "direction")
        k = np.argmin(d, axis=-1)[..., None]
        out = np.zeros_like(d)
        np.put_along_axis(out, k, 1.0, axis=-1)
        return out

    def project(self, point):
        return project_simplex(self._check(point, "point"), 1.0)

    def contains(self, point, tol=DEFAULT_TOL):
        p = self._check(point, "point")
        return np.all(p >= -tol, axis=-1) & (np.abs(np.sum(p, axis=-1) - 1.0) <= tol)

    def diameter(self):
        return float(np.sqrt(2.0))

    def max_norm(self):
        return 1.0

    def vertices(self):
        return np.eye(self.dim)


class Box(ConstraintSet):
    """Axis-aligned box ``{lo <= x <= hi}``."""

    kind = "box"

    def __init__(self, dim, lo=-1.0, hi=1.0):
        super().__init__(dim)
        self.lo = np.broadcast_to(np.asarray(lo, dtype=float), (self.dim,)).copy()
        self.hi = np.broadcast_to(np.asarray(hi, dtype=float), (self.dim,)).copy()
        if not (np.all(np.isfinite(self.lo)) and np.all(np.isfinite(self.hi))):
            raise ValueError("box bounds must be finite")
        if np.any(self.hi <= self.lo):
            raise ValueError("box needs hi > lo in every coordinate")

    def lmo(self, direction):
        d = self._check(direction, "direction")
        return np.where(d > 0, self.lo, self.hi)

    def project(self, point):
        return np.clip(self._check(point, "point"), self.lo, self.hi)

    def contains(self, point, tol=DEFAULT_TOL):
        p = self._check(point, "point")
        return np.all((p >= self.lo - tol) & (p <= self.hi + tol), axis=-1)

    def diameter(self):
        return float(np.linalg.norm(self.hi - self.lo))

    def max_norm(self):
        return float(np.linalg.norm(np.maximum(np.abs(self.lo), np.abs(self.hi))))

    def vertices(self):
        if self.dim > 12:
            raise ValueError("vertex enumeration is limited to dim <= 12")
        corners = itertools.product(*zip(self.lo, self.hi))
        return np.array(list(corners), dtype=float)

    def sample(self, rng, size=None):
        shape = () if size is None else (size,) if np.isscalar(size) else tuple(size)
        return self.lo + (self.hi - self.lo) * rng.random(shape + (self.dim,))

    def to_dict(self):
        lo = self.lo.tolist()
        hi = self.hi.tolist()
        return {
            "kind": self.kind,
            "dim": self.dim,
            "lo": lo[0] if len(set(lo)) == 1 else lo,
            "hi": hi[0] if len(set(hi)) == 1 else hi,
        }


CONSTRAINT_KINDS = {cls.kind: cls for cls in (L1Ball, L2Ball, Simplex, Box)}


def make_constraint(kind, dim, **params):
    """Build a constraint set from a config descriptor."""
    try:
        cls = CONSTRAINT_KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown constraint kind {kind!r}; expected one of {sorted(CONSTRAINT_KINDS)}") from None
    return cls(dim, **params)
