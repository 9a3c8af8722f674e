"""Cross-channel discretisation and the jump-velocity profile v(y).

The channel cross-section is (-1, 1).  Functions of y live either as exact
:class:`~zapdisp.polynomial.YPolynomial` objects or as plain numpy arrays
sampled at Gauss-Legendre nodes (a "cross field").
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence, Union

import numpy as np

from .errors import InvalidArgument, InvalidProfile
from .polynomial import YPolynomial, as_fraction

DEFAULT_NODES = 16


@dataclass(frozen=True, eq=False)
class CrossSection:
    """Gauss-Legendre rule on (-1, 1); weights sum to 2."""

    n_nodes: int
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    def integrate(self, f) -> float:
        return float(np.dot(self.weights, _field_values(f, self)))


@lru_cache(maxsize=64)
def build_cross_section(n_nodes: int = DEFAULT_NODES) -> CrossSection:
    if int(n_nodes) != n_nodes or n_nodes < 2:
        raise InvalidArgument(f"n_nodes must be an integer >= 2, got {n_nodes!r}")
    nodes, weights = np.polynomial.legendre.leggauss(int(n_nodes))
    return CrossSection(int(n_nodes), nodes.copy(), weights.copy())


def _field_values(f, cs: CrossSection) -> np.ndarray:
    if isinstance(f, YPolynomial):
        return f(cs.nodes)
    values = np.asarray(f, dtype=float)
    if values.shape[-1] != cs.n_nodes:
        raise InvalidArgument(
            f"cross field has {values.shape[-1]} values, cross-section has {cs.n_nodes} nodes")
    return values


def cross_mean(f, cs: CrossSection | None = None):
    """Cross-sectional mean (1/2) * integral of f over (-1, 1).

    Exact ``Fraction`` for a YPolynomial; otherwise quadrature over the last
    axis of the sampled values (so a 2-D (x, y) array gives one mean per x).
    """
    if isinstance(f, YPolynomial):
        return f.mean()
    if cs is None:
        raise InvalidArgument("a CrossSection is required for sampled fields")
    values = _field_values(f, cs)
    # elementwise product then a fixed-order reduction: independent of BLAS threading
    return 0.5 * np.sum(values * cs.weights, axis=-1)


Coeffs = Sequence[Union[int, str, Fraction, float]]


@dataclass(frozen=True, eq=False)
class VelocityProfile:
    """Mean jump length v(y) > 0.

    Exactly one of ``poly`` (exact polynomial) or ``values`` (samples at the
    nodes of ``cs``) is set.
    """

    poly: YPolynomial | None = None
    values: np.ndarray | None = None
    cs: CrossSection | None = None
    label: str = "poly"

    @classmethod
    def polynomial(cls, coeffs: Coeffs | YPolynomial, label: str = "poly") -> "VelocityProfile":
        poly = coeffs if isinstance(coeffs, YPolynomial) else YPolynomial(coeffs)
        return cls(poly=poly, label=label)

    @classmethod
    def parabolic(cls) -> "VelocityProfile":
        return cls.polynomial([1, 0, -1], label="parabolic")

    @classmethod
    def constant(cls, c) -> "VelocityProfile":
        return cls.polynomial([as_fraction(c)], label="constant")

    @classmethod
    def sampled(cls, values, cs: CrossSection) -> "VelocityProfile":
        values = np.array(values, dtype=float)
        if values.shape != (cs.n_nodes,):
            raise InvalidArgument("sampled profile must have one value per node")
        values.setflags(write=False)
        return cls(values=values, cs=cs, label="sampled")

    @property
    def is_polynomial(self) -> bool:
        return self.poly is not None

    def __call__(self, y):
        """Evaluate at arbitrary y (barycentric interpolation for sampled form)."""
        if self.poly is not None:
            return self.poly(y)
        from scipy.interpolate import BarycentricInterpolator

        return BarycentricInterpolator(self.cs.nodes, self.values)(y)

    def describe(self) -> dict:
        if self.poly is not None:
            return {"form": "polynomial", "label": self.label, "coeffs": self.poly.to_strings()}
        return {"form": "sampled", "values": [float(v) for v in self.values]}


def eval_profile(v: VelocityProfile, cs: CrossSection) -> np.ndarray:
    """Sample v at the nodes; raises InvalidProfile at the first v <= 0."""
    if v.poly is not None:
        values = v.poly(cs.nodes)
    elif v.cs is cs or (v.cs is not None and v.cs.n_nodes == cs.n_nodes):
        values = np.array(v.values)
    else:
        values = np.asarray(v(cs.nodes), dtype=float)
    bad = np.flatnonzero(~(values > 0))
    if bad.size:
        j = int(bad[0])
        raise InvalidProfile(
            f"velocity profile is non-positive at node {j} (y={cs.nodes[j]:.17g}): v={values[j]!r}",
            node=j, y=float(cs.nodes[j]), value=float(values[j]))
    return values
