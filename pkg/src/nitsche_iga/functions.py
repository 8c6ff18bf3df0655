"""Serializable prescribed fields for boundary data.

Every function maps points ``x`` of shape ``(npts, d_s)`` to values of shape
``(npts, ncomp)`` and round-trips through ``to_dict`` / :func:`from_dict`.
"""

from __future__ import annotations

import numpy as np


class Constant:
    def __init__(self, value):
        self.value = np.atleast_1d(np.asarray(value, dtype=float))

    def __call__(self, x):
        x = np.atleast_2d(x)
        return np.tile(self.value, (x.shape[0], 1))

    def to_dict(self):
        return {"type": "constant", "value": self.value.tolist()}


class Polynomial:
    """Sum of monomials per component.

    ``components[c]`` is a list of ``(coefficient, powers)`` pairs, e.g. the
    field ``u = (1 + 2x, 3xy)`` is ``[[(1, [0, 0]), (2, [1, 0])], [(3, [1, 1])]]``.
    """

    def __init__(self, components):
        self.components = [[(float(c), [int(p) for p in pw]) for c, pw in comp]
                           for comp in components]

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.zeros((x.shape[0], len(self.components)))
        for c, terms in enumerate(self.components):
            for coef, powers in terms:
                out[:, c] += coef * np.prod(x[:, : len(powers)] ** np.asarray(powers), axis=1)
        return out

    @classmethod
    def affine(cls, offset, matrix):
        """``u(x) = offset + matrix @ x``."""
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        dim = matrix.shape[1]
        comps = []
        for c, row in enumerate(matrix):
            terms = [(float(offset[c]), [0] * dim)]
            terms += [(float(a), [int(k == j) for k in range(dim)]) for j, a in enumerate(row) if a]
            comps.append(terms)
        return cls(comps)

    def to_dict(self):
        return {"type": "polynomial",
                "components": [[[c, pw] for c, pw in comp] for comp in self.components]}


class Timoshenko:
    """Exact cantilever displacement (``quantity='displacement'``) or the
    parabolic end shear traction (``quantity='traction'``)."""

    def __init__(self, quantity="displacement", L=48.0, D=6.0, P=1000.0, E=3e7, nu=0.3):
        if quantity not in ("displacement", "traction"):
            raise ValueError(f"unknown timoshenko quantity {quantity!r}")
        from .verification import TimoshenkoParams

        self.quantity = quantity
        self.params = TimoshenkoParams(L=L, D=D, P=P, E=E, nu=nu)

    def __call__(self, x):
        from .verification import timoshenko_exact, timoshenko_traction

        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.quantity == "traction":
            return timoshenko_traction(self.params, x[:, 1])
        u, _ = timoshenko_exact(self.params, x[:, 0], x[:, 1])
        return u

    def to_dict(self):
        p = self.params
        return {"type": "timoshenko", "quantity": self.quantity,
                "L": p.L, "D": p.D, "P": p.P, "E": p.E, "nu": p.nu}


def from_dict(spec: dict):
    kind = spec.get("type")
    if kind == "constant":
        return Constant(spec["value"])
    if kind == "polynomial":
        return Polynomial(spec["components"])
    if kind == "timoshenko":
        kw = {k: spec[k] for k in ("L", "D", "P", "E", "nu") if k in spec}
        return Timoshenko(spec.get("quantity", "displacement"), **kw)
    raise ValueError(f"unknown function type {kind!r}")
