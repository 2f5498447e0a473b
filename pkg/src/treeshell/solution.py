"""The constant componentwise solution and its norms.

For the repeated-coefficients scheme the stationarity recursion has a
constant fixed point in the per-node log-increment variable,

    q = -(alpha + d)/3 - ell(3/2)/2,

and the solution coefficients are ``u_j = f * 2**(q(|j|+1)) * prod sqrt(d_k)``
over the ancestor chain.  All node values are handled in the log2 domain:
they span hundreds of orders of magnitude across generations.

For general bounded coefficients there is no closed form; the pull-back
construction seeds an arbitrary value at a deep generation and runs the
stationarity recursion backwards, one generation row at a time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coefficients import GeneralCoefficients, RcmModel
from .tree import TreeIndex

__all__ = [
    "ConstantSolution",
    "PullbackRun",
    "pullback",
    "DivergenceWitness",
    "divergence_witness",
    "ResourceLimitError",
]


class ResourceLimitError(RuntimeError):
    """An enumeration would exceed the configured memory budget."""


@dataclass(frozen=True)
class ConstantSolution:
    """The unique finite-energy constant solution of an RCM."""

    model: RcmModel
    q: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "q", fixed_point_q(self.model))

    # -- node values ---------------------------------------------------------

    def log2_u(self, j: TreeIndex) -> float:
        """log2 u_j; the product of sqrt coefficients runs over the full
        ancestor chain (the root contributes nothing)."""
        half_sum = 0.5 * sum(math.log2(self.model.coefficient_of(k))
                             for k in j.ancestors())
        return math.log2(self.model.forcing) + self.q * (j.generation + 1) + half_sum

    def u(self, j: TreeIndex) -> float:
        return 2.0 ** self.log2_u(j)

    def log2_u_row(self, generation: int, max_nodes: int = 2**26) -> np.ndarray:
        """log2 u over a whole generation, indexed by packed code."""
        rows = self.log2_u_rows(generation, max_nodes)
        return rows[generation]

    def log2_u_rows(self, depth: int, max_nodes: int = 2**26) -> list[np.ndarray]:
        """log2 u row arrays for generations 0..depth."""
        model = self.model
        if model.N**depth > max_nodes:
            raise ResourceLimitError(
                f"generation {depth} at N={model.N} exceeds {max_nodes} nodes")
        log2d = model.coeffs.log2_deltas
        rows = [np.array([math.log2(model.forcing) + self.q])]
        for _ in range(depth):
            prev = rows[-1]
            rows.append((prev[:, None] + self.q + 0.5 * log2d[None, :]).ravel())
        return rows

    # -- recursion residuals ---------------------------------------------------

    def recursion_residual(self) -> float:
        """Residual of the fixed-point equation at q (should vanish)."""
        m = self.model
        rhs = -0.5 * m.alpha - 0.5 * _log2_sum(1.5 * m.coeffs.log2_deltas + self.q)
        return abs(self.q - rhs)

    def stationarity_residual(self, j: TreeIndex) -> float:
        """Relative residual of d_j u_par^2 = 2^alpha sum_k d_k u_j u_k at j."""
        m = self.model
        parent = j.parent() if not j.is_root else None
        u_par = m.forcing if parent is None else self.u(parent)
        lhs = m.coefficient_of(j) * u_par**2
        uj = self.u(j)
        rhs = 2.0**m.alpha * sum(m.coefficient_of(k) * uj * self.u(k)
                                 for k in j.offspring())
        return abs(lhs - rhs) / lhs

    # -- regularity thresholds --------------------------------------------------

    def s0(self, p: float) -> float:
        """Critical regularity: the solution is in W^{s,p} iff s < s0(p)."""
        m = self.model
        return ((m.alpha - m.d / 2) / 3
                + 0.5 * (m.ell(1.5) - m.ell(p / 2)))

    def holder_exponent(self) -> float:
        """The critical Holder exponent h = lim_p s0(p)."""
        m = self.model
        return ((m.alpha - m.d / 2) / 3
                - 0.5 * (m.coeffs.ell_pos_inf() - m.ell(1.5)))

    def sobolev_norm(self, s: float, p: float) -> float:
        """The W^{s,p} norm, or math.inf when s >= s0(p).

        Evaluated from the closed-form geometric series over generations,
        never by node enumeration.
        """
        if p < 1:
            raise ValueError("p must be >= 1")
        m = self.model
        gap = s - self.s0(p)
        if gap >= 0:
            return math.inf
        # ||u||^p = f^p 2^{pq} sum_n 2^{p(s - s0) n}
        log2_norm_p = (p * math.log2(m.forcing) + p * self.q
                       - math.log2(1.0 - 2.0 ** (p * gap)))
        return 2.0 ** (log2_norm_p / p)

    def energy(self) -> float:
        """Total energy sum u_j^2 (square of the W^{0,2} norm)."""
        e = self.sobolev_norm(0.0, 2.0)
        return e * e if math.isfinite(e) else math.inf


def fixed_point_q(model: RcmModel) -> float:
    """The constant fixed point of the backward recursion."""
    return -(model.alpha + model.d) / 3.0 - 0.5 * model.ell(1.5)


def _log2_sum(log2_terms: np.ndarray) -> float:
    m = log2_terms.max()
    return float(m + np.log2(np.exp2(log2_terms - m).sum()))


# ---------------------------------------------------------------------------
# pull-back construction for general bounded coefficients
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PullbackRun:
    """Backward construction of the solution candidate from depth-n data.

    ``rows[g]`` holds the generation-g values, indexed by packed code; the
    boundary row ``rows[depth]`` is identically the seed.  The containment
    band [a, b] is the invariant interval of the backward map derived from
    the declared coefficient bounds.
    """

    coefficients: GeneralCoefficients
    alpha: float
    dim: int
    depth: int
    seed: float
    rows: list[np.ndarray]
    band: tuple[float, float]

    def in_band(self) -> bool:
        a, b = self.band
        return all(row.min() >= a - 1e-12 and row.max() <= b + 1e-12
                   for row in self.rows)

    def residual_max(self) -> float:
        """Max residual of the interior rows against the backward recursion."""
        worst = 0.0
        arity = self.coefficients.arity
        for g in range(self.depth):
            children = self.rows[g + 1]
            codes = np.arange(len(children))
            log2d = self.coefficients.row_log2(g + 1, codes)
            terms = (1.5 * log2d + children).reshape(-1, arity)
            m = terms.max(axis=1, keepdims=True)
            log2_sums = m[:, 0] + np.log2(np.exp2(terms - m).sum(axis=1))
            expected = -0.5 * self.alpha - 0.5 * log2_sums
            worst = max(worst, float(np.abs(self.rows[g] - expected).max()))
        return worst

    def summary(self) -> list[tuple[int, float, float, float]]:
        """(generation, min, max, mean) per row."""
        return [(g, float(r.min()), float(r.max()), float(r.mean()))
                for g, r in enumerate(self.rows)]


def pullback_band(coefficients: GeneralCoefficients, alpha: float,
                  dim: int) -> tuple[float, float]:
    """The invariant interval [a, b] of the backward recursion."""
    s, t = coefficients.log2_min, coefficients.log2_max
    base = -(alpha + dim) / 3.0
    return base - t + 0.5 * s, base - s + 0.5 * t


def pullback(coefficients: GeneralCoefficients, alpha: float, dim: int,
             depth: int, seed: float = 0.0,
             max_nodes: int = 2**24) -> PullbackRun:
    """Run the backward recursion from constant seed data at generation depth.

    Rows are produced children-first; each parent only reads its own N
    children, so generation g costs one pass over N**(g+1) values and the
    peak memory is the deepest row.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    arity = coefficients.arity
    if arity**depth > max_nodes:
        raise ResourceLimitError(
            f"depth {depth} at N={arity} exceeds the {max_nodes}-node budget")

    rows: list[np.ndarray] = [np.empty(0)] * (depth + 1)
    rows[depth] = np.full(arity**depth, float(seed))
    for g in range(depth - 1, -1, -1):
        children = rows[g + 1]
        codes = np.arange(len(children))
        log2d = coefficients.row_log2(g + 1, codes)
        terms = (1.5 * log2d + children).reshape(-1, arity)
        m = terms.max(axis=1, keepdims=True)
        log2_sums = m[:, 0] + np.log2(np.exp2(terms - m).sum(axis=1))
        rows[g] = -0.5 * alpha - 0.5 * log2_sums

    return PullbackRun(coefficients, alpha, dim, depth, float(seed), rows,
                       pullback_band(coefficients, alpha, dim))


# ---------------------------------------------------------------------------
# the uniqueness mechanism, made quantitative
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DivergenceWitness:
    """The alternating offspring perturbation chain of the uniqueness proof.

    Any second solution whose q-coordinates differ by eps0 at some node
    forces, along a chain of offspring, perturbations eps_n = (-2)**n eps0;
    partial sums along the chain then grow like 2**(n-1) eps0 at even n and
    the perturbed node values blow up double-exponentially, violating every
    H^s bound.  Everything is tracked in the log2 domain.
    """

    eps0: float
    eps: np.ndarray               # signed perturbations along the chain
    lower_bounds: np.ndarray      # 2**n eps0 at even n (0 elsewhere)
    partial_sums: np.ndarray
    log2_u_chain: np.ndarray      # log2 of the unperturbed chain values
    log2_u_perturbed: np.ndarray

    def even_growth_ok(self) -> bool:
        n = np.arange(len(self.eps))
        even = n % 2 == 0
        return bool(np.all(self.eps[even] >= self.lower_bounds[even] - 1e-9))

    def partial_sum_growth_ok(self) -> bool:
        n = np.arange(len(self.eps))
        even = n % 2 == 0
        bound = np.exp2(np.maximum(n - 1, 0).astype(float)) * self.eps0
        return bool(np.all(self.partial_sums[even] >= bound[even] - 1e-9))

    def violates_every_hs(self, growth_base: float = 1.5) -> bool:
        """Check u'_{j_n} >= 2**(lambda**n) numerically for even n.

        The double-exponential wins over the chain's linear decay once
        2**n * eps0 passes lambda**n; the crossover generation depends on
        eps0 and is computed here, so the chain must be long enough to
        reach it.  Growth of this kind escapes every H^s ball.
        """
        if self.eps0 == 0:
            return False
        if not 1.0 < growth_base < 2.0:
            raise ValueError("growth base must lie in (1, 2)")
        # 2**n eps0 >= lambda**n needs n (1 - log2 lambda) >= log2(1/eps0);
        # add slack for the linear-in-n terms of log2 u along the chain.
        n_cross = (math.log2(1.0 / self.eps0) + 16.0) / (1.0 - math.log2(growth_base))
        n = np.arange(len(self.eps))
        even = (n % 2 == 0) & (n >= n_cross)
        if not even.any():
            raise ValueError(
                f"chain too short: need at least {math.ceil(n_cross)} steps "
                f"for eps0={self.eps0}")
        lhs = self.log2_u_perturbed[even]
        rhs = growth_base ** n[even].astype(float)
        return bool(np.all(lhs >= rhs))


def divergence_witness(solution: ConstantSolution, eps0: float,
                       steps: int = 60) -> DivergenceWitness:
    """Construct the perturbation chain seeded with eps0 at the root.

    The chain realises the proof's bounds with equality: giving all N
    offspring of chain node n the same perturbation -2*eps_n keeps the
    perturbed family on the stationarity constraint exactly.  eps0 = 0
    returns the all-zero chain (the constant solution itself).
    """
    if eps0 < 0:
        raise ValueError("eps0 must be >= 0")
    if steps > 1000:
        raise ValueError("the chain overflows double precision long before "
                         "1000 steps; choose fewer")
    m = solution.model
    n = np.arange(steps + 1)
    eps = eps0 * np.power(-2.0, n.astype(float))
    lower = eps0 * np.exp2(n.astype(float))
    partial = np.cumsum(eps)

    # chain through child label 1 at every step
    log2_d1 = float(m.coeffs.log2_deltas[0])
    log2_u = (math.log2(m.forcing) + solution.q * (n + 1.0)
              + 0.5 * log2_d1 * n)
    return DivergenceWitness(eps0, eps, lower, partial, log2_u,
                             log2_u + partial)
