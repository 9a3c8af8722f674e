"""Slow-manifold shape functions V_n(y) and macroscale coefficients A_n.

Two independent constructions:

* :func:`derive` solves the hierarchy  L0 V_n = g_n,
  g_n = sum_{m=1..n} (A_m V_{n-m} - L_m V_{n-m}), fixing A_n by the
  solvability condition mean(g_n) = 0 and normalising mean(V_n) = 0.
  Exact rational arithmetic whenever the kernel moments are polynomials.
* :func:`zero_eigenspace` works only from the assembled block operator
  (a dense matrix), finding its generalised zero eigenvectors by
  back-substitution with a left-null-vector solvability condition and a
  bordered linear solve.

The macroscale model is U_t = A1 U_x + A2 U_xx + ...
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import NumericalDegeneracy
from .kernel import JumpKernel, MomentOperator, apply, moment_exists, moment_operator
from .polynomial import YPolynomial
from .profile import CrossSection, VelocityProfile, build_cross_section, cross_mean, eval_profile

# Orders the theory backs with an error estimate; beyond this output is labelled "extension".
VALIDATED_ORDER = 2


@dataclass(frozen=True, eq=False)
class SlowManifold:
    order: int
    V: list
    A: list
    cs: CrossSection
    method: str = "hierarchy"
    exact: bool = False
    metadata: dict = field(default_factory=dict)

    def V_nodes(self, n: int) -> np.ndarray:
        f = self.V[n]
        if isinstance(f, YPolynomial):
            return f(self.cs.nodes)
        return np.asarray(f, dtype=float)

    def A_float(self) -> list[float]:
        return [float(a) for a in self.A]

    def hierarchy_residuals(self, kernel: JumpKernel) -> list:
        """max-norm of L0 V_n - sum_m (V_{n-m} A_m - L_m V_{n-m}) for n = 1..N.

        Exact Fractions on the rational path, floats otherwise.
        """
        ops = [moment_operator(m, kernel, self.cs) for m in range(self.order + 1)]
        out = []
        for n in range(1, self.order + 1):
            if self.exact:
                lhs = apply(ops[0], self.V[n])
                rhs = _forcing(n, self.V, self.A, ops)
                out.append(max(abs(c) for c in (lhs - rhs).coeffs))
            else:
                V = [self.V_nodes(j) for j in range(n + 1)]
                lhs = apply(ops[0], V[n])
                rhs = _forcing(n, V, self.A, ops)
                out.append(float(np.max(np.abs(lhs - rhs))))
        return out

    def to_json(self) -> dict:
        doc = {
            "order": self.order,
            "method": self.method,
            "exact": self.exact,
            "A": {f"A{n}": _rational_str(a) for n, a in enumerate(self.A, start=1)},
            "A_float": {f"A{n}": float(a) for n, a in enumerate(self.A, start=1)},
        }
        if self.exact:
            doc["V"] = {f"V{n}": v.to_strings() for n, v in enumerate(self.V)}
        else:
            doc["V_nodes"] = {f"V{n}": [float(x) for x in self.V_nodes(n)]
                              for n in range(self.order + 1)}
        doc.update(self.metadata)
        return doc


def _rational_str(a) -> str:
    return str(a) if isinstance(a, Fraction) else repr(float(a))


def _forcing(n: int, V: list, A: list, ops: list[MomentOperator]):
    """g_n = sum_{m=1..n} (V_{n-m} A_m - L_m V_{n-m})."""
    g = 0 * V[0]
    for m in range(1, n + 1):
        g = g + V[n - m] * A[m - 1] - apply(ops[m], V[n - m])
    return g


def _metadata(kernel: JumpKernel, order: int, cs: CrossSection) -> dict:
    higher = moment_exists(order + 1, kernel, cs)
    return {
        "status": "validated" if order <= VALIDATED_ORDER else "extension",
        "error_quantifiable": bool(higher.ok),
        "n_nodes": cs.n_nodes,
    }


def derive(kernel: JumpKernel, order: int = 2, cs: CrossSection | None = None) -> SlowManifold:
    """Solve the slow-manifold hierarchy to the given order."""
    if order < 1:
        raise ValueError("order must be >= 1")
    cs = cs or build_cross_section()
    if kernel.profile is not None:
        eval_profile(kernel.profile, cs)
    ops = [moment_operator(m, kernel, cs) for m in range(order + 1)]
    exact = kernel.exact

    V: list = [YPolynomial([1]) if exact else np.ones(cs.n_nodes)]
    A: list = []
    for n in range(1, order + 1):
        # with mean(V_j) = 0 for j >= 1 only the A_n V_0 term survives the mean of g_n
        coupling = 0 * V[0]
        for m in range(1, n + 1):
            coupling = coupling + apply(ops[m], V[n - m])
        a_n = cross_mean(coupling, cs)
        A.append(a_n if exact else float(a_n))
        g = _forcing(n, V, A, ops)
        # L0 w = mean(w) - w, so with mean(g) = 0 every solution is -g + const
        w = -g
        V.append(w - (YPolynomial([w.mean()]) if exact else cross_mean(w, cs)))

    return SlowManifold(order, V, A, cs, method="hierarchy", exact=exact,
                        metadata=_metadata(kernel, order, cs))


def closed_form_order2(profile: VelocityProfile, cs: CrossSection | None = None) -> SlowManifold:
    """Explicit order-2 formulas for exponential jumps with mean v(y)."""
    cs = cs or build_cross_section()
    values = eval_profile(profile, cs)
    if profile.is_polynomial:
        v = profile.poly
        vbar, v2bar = v.mean(), (v * v).mean()
        one = YPolynomial([1])
        V1 = vbar * one - v
        V2 = 2 * ((vbar * vbar - v2bar) * one - vbar * v + v * v)
        A2 = ((v - vbar) * (v - vbar)).mean() + v2bar
        return SlowManifold(2, [one, V1, V2], [-vbar, A2], cs, method="closed-form", exact=True)
    v = values
    vbar, v2bar = cross_mean(v, cs), cross_mean(v * v, cs)
    V1 = vbar - v
    V2 = 2 * (vbar ** 2 - v2bar - vbar * v + v * v)
    A2 = cross_mean((v - vbar) ** 2, cs) + v2bar
    return SlowManifold(2, [np.ones(cs.n_nodes), V1, V2], [-float(vbar), float(A2)], cs,
                        method="closed-form", exact=False)


@dataclass(frozen=True, eq=False)
class BlockOperator:
    """Sum_m L_m d^m/dzeta^m on degree-N polynomials in zeta, basis zeta^k/k!.

    Block (j, j+m) is L_m: upper block-triangular, block-Toeplitz.
    """

    order: int
    n_nodes: int
    matrix: np.ndarray

    def block(self, i: int, j: int) -> np.ndarray:
        n = self.n_nodes
        return self.matrix[i * n:(i + 1) * n, j * n:(j + 1) * n]


def block_operator(kernel: JumpKernel, order: int, cs: CrossSection) -> BlockOperator:
    n = cs.n_nodes
    blocks = [moment_operator(m, kernel, cs).matrix() for m in range(order + 1)]
    M = np.zeros(((order + 1) * n, (order + 1) * n))
    for i in range(order + 1):
        for m in range(order + 1 - i):
            j = i + m
            M[i * n:(i + 1) * n, j * n:(j + 1) * n] = blocks[m]
    return BlockOperator(order, n, M)


def zero_eigenspace(B: BlockOperator, cs: CrossSection, tol: float = 1e-10) -> SlowManifold:
    """Generalised zero eigenvectors of B from its matrix alone.

    Solves B Vcal = Vcal Acal with Vcal block upper-triangular Toeplitz with
    columns (V_n, ..., V_0, 0, ...) and Acal nilpotent Toeplitz with
    superdiagonals A_1..A_N.  Normalisation: mean(V_0) = 1, mean(V_n) = 0.
    """
    N, n = B.order, B.n_nodes
    if n != cs.n_nodes:
        raise ValueError("block operator and cross-section disagree on node count")
    for i in range(1, N + 1):
        for j in range(i, N + 1):
            if not np.array_equal(B.block(i, j), B.block(0, j - i)):
                raise NumericalDegeneracy("block operator is not block-Toeplitz")
    D = B.block(0, 0)
    U, s, Vt = np.linalg.svd(D)
    if s[-1] > tol * max(1.0, s[0]) or (n > 1 and s[-2] <= tol * max(1.0, s[0])):
        raise NumericalDegeneracy(f"diagonal block must have a simple zero singular value, got {s[-2:]}")
    right = Vt[-1]
    left = U[:, -1]

    mean_w = 0.5 * cs.weights
    v0 = right / np.dot(mean_w, right)
    zv0 = float(np.dot(left, v0))
    if abs(zv0) < tol:
        raise NumericalDegeneracy("solvability system is singular: left null vector orthogonal to V0")

    bordered = np.zeros((n + 1, n + 1))
    bordered[:n, :n] = D
    bordered[:n, n] = left
    bordered[n, :n] = mean_w

    V = [v0]
    A: list[float] = []
    for k in range(1, N + 1):
        s_k = sum(B.block(0, m) @ V[k - m] for m in range(1, k + 1))
        known = sum(A[m - 1] * np.dot(left, V[k - m]) for m in range(1, k))
        a_k = (float(np.dot(left, s_k)) - known) / zv0
        A.append(float(a_k))
        rhs = sum(V[k - m] * A[m - 1] for m in range(1, k + 1)) - s_k
        sol = np.linalg.solve(bordered, np.append(rhs, 0.0))
        if abs(sol[n]) > 1e-9 * max(1.0, np.max(np.abs(rhs))):
            raise NumericalDegeneracy("hierarchy right-hand side is not in the range of the diagonal block")
        V.append(sol[:n])

    return SlowManifold(N, V, A, cs, method="eigenspace", exact=False,
                        metadata={"status": "validated" if N <= VALIDATED_ORDER else "extension",
                                  "n_nodes": n})
