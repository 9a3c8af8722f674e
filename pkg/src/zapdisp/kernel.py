"""Jump kernels and their local x-moments as cross-channel operators.

For a rightward jump law with density p(s; y), s >= 0, the n-th local moment
of the full kernel (jumps plus uniform cross-channel remixing) acts on a
function f(y) as

    n = 0:  f -> mean(f) - f
    n >= 1: f -> m_n(y) f,   m_n = (-1)^n mu_n / n!

where mu_n(y) is the n-th raw moment of p.  For exponential jumps with mean
v(y), mu_n = n! v^n so m_n = (-v)^n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, NamedTuple

import numpy as np
from scipy import integrate

from .errors import InvalidArgument, MomentDivergence, UnsupportedKernel
from .polynomial import YPolynomial
from .profile import CrossSection, VelocityProfile, cross_mean, eval_profile

# A raw moment mu_n(y): exact polynomial, node samples, or None when divergent.
Moment = YPolynomial | np.ndarray | None
Density = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True, eq=False)
class JumpKernel:
    kind: str
    profile: VelocityProfile | None = None
    moments: Mapping[int, Moment] = field(default_factory=dict)
    density: Density | None = None

    @classmethod
    def exponential(cls, profile: VelocityProfile) -> "JumpKernel":
        return cls("exponential", profile=profile)

    @classmethod
    def general(cls, moments: Mapping[int, Moment], density: Density | None = None,
                profile: VelocityProfile | None = None) -> "JumpKernel":
        moments = dict(moments)
        moments.setdefault(0, YPolynomial([1]))
        m0 = moments[0]
        if isinstance(m0, YPolynomial) and m0 != YPolynomial([1]):
            raise InvalidArgument("zeroth raw moment must be 1 (jump law is a density)")
        if isinstance(m0, np.ndarray) and not np.allclose(m0, 1.0, rtol=0, atol=1e-12):
            raise InvalidArgument("zeroth raw moment must be 1 (jump law is a density)")
        return cls("general", profile=profile, moments=moments, density=density)

    @property
    def exact(self) -> bool:
        """True when every moment is an exact polynomial in y."""
        if self.kind == "exponential":
            return self.profile.is_polynomial
        return all(isinstance(m, YPolynomial) for m in self.moments.values())

    def raw_moment(self, n: int):
        """mu_n(y) as a YPolynomial (exact kernels) or node samples; None if divergent."""
        if self.kind == "exponential":
            if self.profile.is_polynomial:
                return math.factorial(n) * self.profile.poly ** n
            return math.factorial(n) * np.asarray(self.profile.values) ** n
        return self.moments.get(n)

    def jump_density(self, s, j: int, cs: CrossSection) -> np.ndarray:
        """One-sided jump-length density at node j evaluated at distances s >= 0."""
        s = np.asarray(s, dtype=float)
        if self.kind == "exponential":
            vj = eval_profile(self.profile, cs)[j]
            return np.where(s >= 0, np.exp(-np.maximum(s, 0) / vj) / vj, 0.0)
        if self.density is None:
            raise UnsupportedKernel("general kernel has no sampled jump density")
        return np.asarray(self.density(s, float(cs.nodes[j])), dtype=float)

    def describe(self) -> dict:
        out = {"kind": self.kind}
        if self.profile is not None:
            out["profile"] = self.profile.describe()
        if self.kind == "general":
            table = []
            for n in sorted(self.moments):
                m = self.moments[n]
                if m is None:
                    table.append([n, "divergent"])
                elif isinstance(m, YPolynomial):
                    table.append([n, m.to_strings()])
                else:
                    table.append([n, [float(x) for x in m]])
            out["moments"] = table
        return out


class MomentCheck(NamedTuple):
    ok: bool
    first_failing: int | None
    message: str


def moment_exists(n: int, k: JumpKernel, cs: CrossSection | None = None) -> MomentCheck:
    """Check that raw moments 0..n are finite; never raises."""
    if k.kind == "exponential":
        return MomentCheck(True, None, "all moments of the exponential jump law exist")
    for order in range(n + 1):
        m = k.raw_moment(order)
        if m is None:
            return MomentCheck(False, order, f"moment of order {order} is divergent or missing")
        if isinstance(m, np.ndarray) and not np.all(np.isfinite(m)):
            return MomentCheck(False, order, f"moment of order {order} is non-finite at some node")
        if isinstance(m, YPolynomial):
            continue
        if cs is not None and np.shape(m) != (cs.n_nodes,):
            return MomentCheck(False, order, f"moment of order {order} has wrong node count")
    return MomentCheck(True, None, f"moments 0..{n} are finite")


def moment_multiplier(n: int, k: JumpKernel):
    """m_n = (-1)^n mu_n / n! as a YPolynomial or node array."""
    if k.kind == "exponential":
        if k.profile.is_polynomial:
            return (-k.profile.poly) ** n
        return (-np.asarray(k.profile.values)) ** n
    mu = k.raw_moment(n)
    if mu is None:
        raise MomentDivergence(f"raw moment of order {n} does not exist", order=n)
    if isinstance(mu, YPolynomial):
        return mu * Fraction((-1) ** n, math.factorial(n))
    return (-1) ** n * np.asarray(mu, dtype=float) / math.factorial(n)


@dataclass(frozen=True, eq=False)
class MomentOperator:
    order: int
    cs: CrossSection
    poly: YPolynomial | None = None
    multiplier: np.ndarray | None = None

    def __call__(self, f):
        return apply(self, f)

    def matrix(self) -> np.ndarray:
        """Dense matrix acting on node samples."""
        n = self.cs.n_nodes
        if self.order == 0:
            return 0.5 * np.outer(np.ones(n), self.cs.weights) - np.eye(n)
        return np.diag(self.multiplier)


def moment_operator(n: int, k: JumpKernel, cs: CrossSection) -> MomentOperator:
    if n < 0:
        raise InvalidArgument("moment order must be non-negative")
    check = moment_exists(n, k, cs)
    if not check.ok:
        raise MomentDivergence(check.message, order=check.first_failing)
    if n == 0:
        return MomentOperator(0, cs)
    if k.kind == "exponential":
        eval_profile(k.profile, cs)
    m = moment_multiplier(n, k)
    if isinstance(m, YPolynomial):
        return MomentOperator(n, cs, poly=m, multiplier=m(cs.nodes))
    return MomentOperator(n, cs, multiplier=np.asarray(m, dtype=float))


def apply(op: MomentOperator, f):
    """Apply a moment operator to a YPolynomial (exact) or node samples."""
    if isinstance(f, YPolynomial):
        if op.order == 0:
            return YPolynomial([f.mean()]) - f
        if op.poly is None:
            raise InvalidArgument("exact application needs a polynomial moment")
        return op.poly * f
    f = np.asarray(f, dtype=float)
    if f.shape[-1] != op.cs.n_nodes:
        raise InvalidArgument(
            f"field has {f.shape[-1]} values, operator expects {op.cs.n_nodes}")
    if op.order == 0:
        return np.expand_dims(cross_mean(f, op.cs), -1) - f
    return op.multiplier * f


def quadrature_moment(n: int, k: JumpKernel, j: int, cs: CrossSection) -> float:
    """(-1)^n mu_n / n! at node j by adaptive quadrature of the jump density."""
    val, _ = integrate.quad(lambda s: s ** n * float(k.jump_density(s, j, cs)),
                            0.0, np.inf, epsabs=1e-14, epsrel=1e-12, limit=200)
    return (-1) ** n * val / math.factorial(n)
