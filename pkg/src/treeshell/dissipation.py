"""Exact evaluation of the anomalous-dissipation fractions and their measure.

Every generation-n node carries a dissipation fraction

    log2 F_j = |j| (alpha + 3q) + (3/2) sum_{k <= j} log2 d_k,

and the fractions of a generation sum to one exactly.  The generation-n
measure mu_n puts mass F_j at the path mean sigma_j; grouping nodes by the
composition of distinct coefficient values along their path compresses the
2**(dn) nodes into a lattice of at most C(n + D - 1, D - 1) atoms with
multinomial multiplicities, evaluated through log-gamma.  All masses are
accumulated by max-shifted log-sum-exp: they span 2**(-O(n)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import gammaln

from .coefficients import RcmModel
from .solution import ResourceLimitError, fixed_point_q
from .spectra import dim_D, rate_R
from .tree import TreeIndex

__all__ = [
    "log2_F",
    "F_of",
    "sigma_of",
    "Composition",
    "DissipationMeasure",
    "measure",
    "measure_from_enumeration",
    "enumerate_log2_F",
    "ConcentrationCurve",
    "concentration_curve",
    "theoretical_tail_rate",
    "LlnReport",
    "lln_sample",
    "FluxReport",
    "flux_terms",
]

_LN2 = math.log(2.0)


def _cascade_rate(model: RcmModel) -> float:
    """alpha + 3q = -d - (3/2) ell(3/2), the per-generation log2 F drift."""
    return model.alpha + 3.0 * fixed_point_q(model)


def log2_F(model: RcmModel, j: TreeIndex) -> float:
    """log2 of the anomalous-dissipation fraction of the cube of j."""
    total = sum(math.log2(model.coefficient_of(k)) for k in j.ancestors())
    return j.generation * _cascade_rate(model) + 1.5 * total


def F_of(model: RcmModel, j: TreeIndex) -> float:
    return 2.0 ** log2_F(model, j)


def sigma_of(model: RcmModel, j: TreeIndex) -> float:
    """Path mean of log2 d over the ancestor chain; undefined at the root."""
    if j.is_root:
        raise ValueError("sigma is undefined at the root")
    total = sum(math.log2(model.coefficient_of(k)) for k in j.ancestors())
    return total / j.generation


def enumerate_log2_F(model: RcmModel, n: int,
                     max_nodes: int = 2**26) -> np.ndarray:
    """log2 F over all generation-n nodes, indexed by packed code."""
    if model.N**n > max_nodes:
        raise ResourceLimitError(f"{model.N}**{n} nodes exceed the budget")
    rate = _cascade_rate(model)
    log2d = model.coeffs.log2_deltas
    row = np.zeros(1)
    for _ in range(n):
        row = (row[:, None] + rate + 1.5 * log2d[None, :]).ravel()
    return row


# ---------------------------------------------------------------------------
# the composition lattice
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Composition:
    """A point of the 1/n-lattice in the simplex over distinct values.

    Integer counts are stored, never floats; counts[i] is how many ancestors
    carry the i-th distinct coefficient value.
    """

    counts: tuple[int, ...]
    n: int

    def __post_init__(self):
        if sum(self.counts) != self.n or any(c < 0 for c in self.counts):
            raise ValueError("counts must be non-negative and sum to n")

    @property
    def frequencies(self) -> tuple[float, ...]:
        return tuple(c / self.n for c in self.counts)


def _compositions_matrix(n: int, parts: int) -> np.ndarray:
    """All compositions of n into `parts` non-negative parts, as an int matrix."""
    if parts == 1:
        return np.array([[n]], dtype=np.int64)
    if parts == 2:
        k = np.arange(n + 1, dtype=np.int64)
        return np.column_stack([n - k, k])
    rows = []
    for cuts in combinations_with_replacement(range(n + 1), parts - 1):
        prev, row = 0, []
        for c in cuts:
            row.append(c - prev)
            prev = c
        row.append(n - prev)
        rows.append(row)
    return np.asarray(rows, dtype=np.int64)


def _log2_multinomial(n: int, counts: np.ndarray) -> np.ndarray:
    return (gammaln(n + 1) - gammaln(counts + 1).sum(axis=1)) / _LN2


def _lse2(log2_terms: np.ndarray) -> float:
    if len(log2_terms) == 0:
        return -math.inf
    m = log2_terms.max()
    if m == -math.inf:
        return -math.inf
    return float(m + np.log2(np.exp2(log2_terms - m).sum()))


@dataclass(frozen=True)
class DissipationMeasure:
    """The measure mu_n as composition-weighted atoms.

    ``log2_count`` is the exact number of generation-n nodes realising the
    atom's composition (multinomial times the product of value
    multiplicities); ``log2_node_F`` the common log2 F of those nodes;
    ``log2_mass = log2_count + log2_node_F``.
    """

    n: int
    values: np.ndarray        # distinct coefficient values, ascending
    multiplicities: np.ndarray
    counts: np.ndarray        # (atoms, len(values)) integer matrix
    sigma: np.ndarray
    log2_count: np.ndarray
    log2_node_F: np.ndarray
    log2_mass: np.ndarray

    @property
    def atoms(self) -> int:
        return len(self.sigma)

    def total_mass(self) -> float:
        return 2.0 ** _lse2(self.log2_mass)

    def mass_in(self, lo: float, hi: float) -> float:
        """mu_n of the open interval (lo, hi); boundary atoms excluded."""
        sel = (self.sigma > lo) & (self.sigma < hi)
        return 2.0 ** _lse2(self.log2_mass[sel])

    def tail_outside(self, lo: float, hi: float) -> float:
        """log2 mu_n of the complement of the open interval (lo, hi)."""
        sel = (self.sigma > lo) & (self.sigma < hi)
        return _lse2(self.log2_mass[~sel])

    def compositions(self) -> list[Composition]:
        return [Composition(tuple(int(c) for c in row), self.n)
                for row in self.counts]


def measure(model: RcmModel, n: int, max_atoms: int = 2**22) -> DissipationMeasure:
    """Exact mu_n on the distinct-value composition lattice."""
    if n < 1:
        raise ValueError("n must be >= 1")
    values, mults = model.coeffs.distinct()
    parts = len(values)
    n_atoms = math.comb(n + parts - 1, parts - 1)
    if n_atoms > max_atoms:
        raise ResourceLimitError(
            f"lattice with {n_atoms} atoms exceeds the {max_atoms} budget")
    counts = _compositions_matrix(n, parts)
    log2_vals = np.log2(values)
    sigma = (counts @ log2_vals) / n
    log2_count = _log2_multinomial(n, counts) + counts @ np.log2(mults)
    log2_node_f = n * _cascade_rate(model) + 1.5 * (counts @ log2_vals)
    return DissipationMeasure(n, values, mults, counts, sigma, log2_count,
                              log2_node_f, log2_count + log2_node_f)


def measure_from_enumeration(model: RcmModel, n: int,
                             max_nodes: int = 2**24) -> DissipationMeasure:
    """Brute-force mu_n by visiting every generation-n node.

    Oracle counterpart of :func:`measure`: same atom layout, but counts,
    sigmas and masses are accumulated node by node.
    """
    if model.N**n > max_nodes:
        raise ResourceLimitError(f"{model.N}**{n} nodes exceed the budget")
    values, mults = model.coeffs.distinct()
    parts = len(values)
    # which distinct value each child label carries
    label_value_idx = np.searchsorted(values, np.asarray(model.coeffs.deltas))

    counts = np.zeros((1, parts), dtype=np.int64)
    for _ in range(n):
        counts = np.repeat(counts, model.N, axis=0)
        idx = np.tile(label_value_idx, len(counts) // model.N)
        counts[np.arange(len(counts)), idx] += 1

    log2_f_nodes = enumerate_log2_F(model, n, max_nodes)
    # lay the atoms out exactly like measure() so the two agree entry-wise
    atom_counts = _compositions_matrix(n, parts)
    atom_index = {tuple(row): i for i, row in enumerate(atom_counts)}
    inverse = np.fromiter((atom_index[tuple(row)] for row in counts),
                          dtype=np.int64, count=len(counts))

    log2_vals = np.log2(values)
    sigma = (atom_counts @ log2_vals) / n
    n_atoms = len(atom_counts)
    log2_count = np.empty(n_atoms)
    log2_mass = np.empty(n_atoms)
    log2_node_f = np.empty(n_atoms)
    for i in range(n_atoms):
        sel = inverse == i
        log2_count[i] = math.log2(int(sel.sum()))
        log2_node_f[i] = log2_f_nodes[sel][0]
        log2_mass[i] = _lse2(log2_f_nodes[sel])
    return DissipationMeasure(n, values, mults, atom_counts, sigma,
                              log2_count, log2_node_f, log2_mass)


# ---------------------------------------------------------------------------
# concentration around phi(3/2)
# ---------------------------------------------------------------------------


def theoretical_tail_rate(model: RcmModel, lo: float, hi: float,
                          grid: int = 4001) -> float:
    """inf of R(a) - D(a) over the complement of (lo, hi) in the sigma range."""
    cs = model.coeffs
    a_min, a_max = cs.ell_neg_inf(), cs.ell_pos_inf()
    pad = (a_max - a_min) * 1e-9
    cands = []
    if lo > a_min:
        cands.append(np.linspace(a_min + pad, min(lo, a_max - pad), grid))
    if hi < a_max:
        cands.append(np.linspace(max(hi, a_min + pad), a_max - pad, grid))
    if not cands:
        raise ValueError("the interval covers the whole sigma range")
    a = np.concatenate(cands)
    vals = rate_R(model, a) - np.array([dim_D(model, float(x)) for x in a])
    return float(vals.min())


@dataclass(frozen=True)
class ConcentrationCurve:
    """mu_n(B) along a run of generations, with empirical decay rates.

    ``point_rate`` is -(1/n) log2(1 - mu_n(B)) at each n; ``slope_rate`` the
    two-point slope of log2 tail between consecutive listed n (NaN first).
    The point rate carries the polynomial prefactor of the tail,
    O(log n / n); the slope rate cancels most of it.
    """

    interval: tuple[float, float]
    n: np.ndarray
    mass_in: np.ndarray
    log2_tail: np.ndarray
    point_rate: np.ndarray
    slope_rate: np.ndarray
    theoretical_rate: float


def concentration_curve(model: RcmModel, interval: tuple[float, float],
                        n_list: Sequence[int],
                        max_atoms: int = 2**22) -> ConcentrationCurve:
    lo, hi = interval
    if not lo < hi:
        raise ValueError("empty interval")
    ns = np.asarray(sorted(n_list), dtype=int)
    masses, tails = [], []
    for n in ns:
        mu = measure(model, int(n), max_atoms)
        tails.append(mu.tail_outside(lo, hi))
        masses.append(mu.mass_in(lo, hi))
    tails_arr = np.asarray(tails)
    point = -tails_arr / ns
    slope = np.full(len(ns), np.nan)
    if len(ns) > 1:
        slope[1:] = -(tails_arr[1:] - tails_arr[:-1]) / (ns[1:] - ns[:-1])
    return ConcentrationCurve((lo, hi), ns, np.asarray(masses), tails_arr,
                              point, slope,
                              theoretical_tail_rate(model, lo, hi))


# ---------------------------------------------------------------------------
# law of large numbers along random paths
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LlnReport:
    n: int
    samples: int
    sigma_mean: float
    sigma_std: float
    standard_error: float
    ell_zero: float
    log_ratio_rate_mean: float   # mean of (1/n) log2( F / volume )
    log_ratio_rate_limit: float  # -(3/2)(ell(3/2) - ell(0))


def lln_sample(model: RcmModel, n: int, samples: int,
               seed: int | None = 0) -> LlnReport:
    """Sample sigma at generation n along uniformly random paths.

    A uniform point of the cube makes the coefficient labels i.i.d. uniform,
    so only the label counts matter; they are drawn directly from the
    multinomial law, never through float geometry.
    """
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(n, np.full(model.N, 1.0 / model.N), size=samples)
    sigma = counts @ model.coeffs.log2_deltas / n
    ell32 = model.ell(1.5)
    rates = 1.5 * (sigma - ell32)  # (1/n) log2 (F / vol) per path
    return LlnReport(
        n=n, samples=samples,
        sigma_mean=float(sigma.mean()),
        sigma_std=float(sigma.std(ddof=1)) if samples > 1 else 0.0,
        standard_error=float(model.coeffs.log2_deltas.std() / math.sqrt(n * samples)),
        ell_zero=model.coeffs.ell_zero(),
        log_ratio_rate_mean=float(rates.mean()),
        log_ratio_rate_limit=-1.5 * (ell32 - model.coeffs.ell_zero()),
    )


# ---------------------------------------------------------------------------
# energy flow through a finite subtree
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FluxReport:
    input_term: float
    boundary: list[tuple[TreeIndex, float]]

    @property
    def boundary_total(self) -> float:
        return sum(f for _, f in self.boundary)

    @property
    def boundary_fractions(self) -> list[tuple[TreeIndex, float]]:
        """Each boundary flux normalised by the input term."""
        return [(j, f / self.input_term) for j, f in self.boundary]


def flux_terms(model: RcmModel, subtree: Iterable[TreeIndex],
               value_of: Callable[[TreeIndex], float]) -> FluxReport:
    """Input and boundary fluxes of a finite rooted subtree.

    ``subtree`` must be prefix-closed and contain the root; the boundary is
    the set of nodes outside it whose father lies inside.  At the constant
    solution the input equals the boundary total, and each normalised
    boundary flux is the dissipation fraction of its cube.
    """
    nodes = set(subtree)
    if not nodes:
        raise ValueError("the subtree is empty")
    root = next(iter(nodes))
    root = TreeIndex.root(root.arity)
    if root not in nodes:
        raise ValueError("the subtree must contain the root")
    for j in nodes:
        if not j.is_root and j.parent() not in nodes:
            raise ValueError(f"subtree is not prefix-closed at {j}")

    f = model.forcing
    input_term = 2.0 * f * f * value_of(root)
    boundary = []
    for j in nodes:
        for k in j.offspring():
            if k not in nodes:
                c_k = model.coefficient_of(k) * 2.0 ** (model.alpha * k.generation)
                boundary.append((k, 2.0 * c_k * value_of(j) ** 2 * value_of(k)))
    return FluxReport(input_term, boundary)
