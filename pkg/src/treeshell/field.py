"""Wavelet recomposition on a dyadic grid and the empirical structure function.

The field u(x) = sum_{|j| < M} u_j psi_j(x) is sampled at the centers of the
2**(dM) level-M cells.  With the default Haar mother (+1 on the first half,
-1 on the second, per axis in product form) every wavelet is piecewise
constant on level-(|j|+1) cells, so the sampled grid represents the
synthesized field exactly and grid means are exact integrals.

A continuous triangular mother ("hat") is also available for scaling
studies; it keeps the supports and the common L2 norm but gives up
orthogonality and zero mean, so use it only where increments are involved.

The structure function S_p(r) at r = 2**(-m) averages |u(x) - u(y)|^p over
the two-point stencil y = x +- r (pairs leaving the cube are discarded); a
least-squares fit of log2 S_p against -m over the fit window estimates the
scaling exponent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .solution import ConstantSolution, ResourceLimitError

__all__ = [
    "WaveletField",
    "synthesize",
    "StructureFunctionEstimate",
    "structure_function",
    "xi",
    "xi_from_generation_sums",
    "besov_epsilon",
    "LocalHolder",
    "local_holder",
]

MOTHERS = ("haar", "hat")


@dataclass(frozen=True)
class WaveletField:
    """Grid samples of the recomposed constant solution."""

    solution: ConstantSolution
    dim: int
    depth: int                 # generations 0..depth-1 synthesized
    mother: str
    grid: np.ndarray           # shape (2**depth,) * dim, cell-center samples

    @property
    def cells(self) -> int:
        return self.grid.size

    def l2_norm(self) -> float:
        """Grid L2 norm; exact for the Haar mother."""
        return float(np.sqrt(np.mean(self.grid.astype(np.float64) ** 2)))

    def coefficient_l2(self) -> float:
        """sqrt(sum u_j^2) over the synthesized generations."""
        total = 0.0
        for row in self.solution.log2_u_rows(self.depth - 1):
            total += float(np.exp2(2.0 * row).sum())
        return math.sqrt(total)


def _mother_pattern(dim: int, block: int, mother: str) -> np.ndarray:
    """The mother wavelet sampled on a (block,)*dim sub-grid of one cube."""
    if mother == "haar":
        axis = np.where(np.arange(block) < block // 2, 1.0, -1.0)
    else:  # hat: sqrt(3) (1 - |2t - 1|) has unit L2 norm on [0,1)
        t = (np.arange(block) + 0.5) / block
        axis = math.sqrt(3.0) * (1.0 - np.abs(2.0 * t - 1.0))
    out = axis
    for _ in range(dim - 1):
        out = np.multiply.outer(out, axis)
    return out


def synthesize(solution: ConstantSolution, dim: int | None = None,
               depth: int = 16, mother: str = "haar",
               max_cells: int = 2**26) -> WaveletField:
    """Sample sum_{|j| < depth} u_j psi_j on the level-`depth` cell grid.

    The per-generation pass reshapes the grid so that axis 2a indexes the
    generation-g cubes along axis a and axis 2a+1 the cells inside; node
    values then broadcast against the mother pattern.  Work is
    O(depth * cells).
    """
    model = solution.model
    if dim is None:
        dim = model.d
    if dim != model.d:
        raise ValueError(f"model dimension is {model.d}, requested {dim}")
    if mother not in MOTHERS:
        raise ValueError(f"mother must be one of {MOTHERS}")
    cells = (2**depth) ** dim
    if cells > max_cells:
        raise ResourceLimitError(f"{cells} cells exceed the {max_cells} budget")

    side = 2**depth
    grid = np.zeros((side,) * dim)
    log2d = model.coeffs.log2_deltas
    q = solution.q
    # spatially-arranged node values, axis a of `vals` = cube index along axis a
    vals = np.full((1,) * dim, model.forcing * 2.0**q)
    # per-axis-bit multiplier applied from parent to child, shape (2,)*dim
    child_factor = np.empty((2,) * dim)
    for bits in range(model.N):
        idx = tuple((bits >> a) & 1 for a in range(dim))
        child_factor[idx] = 2.0**q * math.sqrt(model.coeffs.deltas[bits])

    for g in range(depth):
        block = side // 2**g
        pattern = _mother_pattern(dim, block, mother) * 2.0 ** (dim * g / 2.0)
        # interleave cube and in-cube axes: (n0, b0, n1, b1, ...)
        shape = ()
        for _ in range(dim):
            shape += (2**g, block)
        view = grid.reshape(shape)
        expand_vals = vals
        expand_pat = pattern
        for a in range(dim):
            expand_vals = np.expand_dims(expand_vals, 2 * a + 1)
            expand_pat = np.expand_dims(expand_pat, 2 * a)
        view += expand_vals * expand_pat
        # split every cube axis in two for the next generation
        vals_e = vals
        fact_e = child_factor
        for a in range(dim):
            vals_e = np.expand_dims(vals_e, 2 * a + 1)
            fact_e = np.expand_dims(fact_e, 2 * a)
        vals = (vals_e * fact_e).reshape((2 ** (g + 1),) * dim)
    return WaveletField(solution, dim, depth, mother, grid)


# ---------------------------------------------------------------------------
# structure function
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StructureFunctionEstimate:
    p: np.ndarray
    m: np.ndarray                  # scales r = 2**-m
    log2_S: np.ndarray             # (len(p), len(m)); -inf marks empty/zero
    zeta_hat: np.ndarray
    fit_window: tuple[int, int]
    fit_residual: np.ndarray       # rms residual of the linear fit
    degenerate: np.ndarray         # True where S vanished and no fit exists


def structure_function(field: WaveletField, p_grid,
                       m_range: tuple[int, int] | None = None,
                       pairs: int | None = None,
                       seed: int = 0) -> StructureFunctionEstimate:
    """S_p(2**-m) tables and fitted exponents for a one-dimensional field.

    The default fit window is m in [3, depth - 4]: the upper end avoids the
    synthesis cutoff, the lower end the O(1) outer scale.  `pairs` switches
    to a Monte Carlo subsample of that many increment pairs per scale
    (full-grid averages otherwise).
    """
    if field.dim != 1:
        raise ValueError("the two-point increment average is defined for d = 1")
    M = field.depth
    if m_range is None:
        m_range = (3, M - 4)
    m_lo, m_hi = m_range
    if not 1 <= m_lo <= m_hi <= M - 1:
        raise ValueError(f"fit window [{m_lo}, {m_hi}] empty or outside 1..{M - 1}")

    p_arr = np.atleast_1d(np.asarray(p_grid, dtype=float))
    ms = np.arange(m_lo, m_hi + 1)
    rng = np.random.default_rng(seed)
    grid = field.grid
    log2_S = np.full((len(p_arr), len(ms)), -np.inf)
    for k, m in enumerate(ms):
        off = 2 ** (M - int(m))
        diffs = np.abs(grid[off:] - grid[:-off])
        if pairs is not None and pairs < len(diffs):
            diffs = diffs[rng.integers(0, len(diffs), size=pairs)]
        for i, p in enumerate(p_arr):
            s = float(np.mean(diffs**p))
            log2_S[i, k] = math.log2(s) if s > 0 else -math.inf

    zeta_hat = np.full(len(p_arr), np.nan)
    resid = np.full(len(p_arr), np.nan)
    degenerate = np.zeros(len(p_arr), dtype=bool)
    x = ms.astype(float)
    for i in range(len(p_arr)):
        y = log2_S[i]
        if not np.all(np.isfinite(y)):
            degenerate[i] = True
            continue
        coeffs, res = np.polyfit(x, y, 1, full=True)[:2]
        zeta_hat[i] = -coeffs[0]
        resid[i] = math.sqrt(res[0] / len(x)) if len(res) else 0.0
    return StructureFunctionEstimate(p_arr, ms, log2_S, zeta_hat,
                                     (m_lo, m_hi), resid, degenerate)


# ---------------------------------------------------------------------------
# closed-form scaling quantities and their generation-sum cross-checks
# ---------------------------------------------------------------------------


def xi(solution: ConstantSolution, p) -> np.ndarray | float:
    """The Besov-side exponent; identically p * s0(p) for the RCM."""
    p_arr = np.atleast_1d(np.asarray(p, dtype=float))
    out = np.array([pi * solution.s0(pi) for pi in p_arr])
    return out if np.ndim(p) else float(out[0])


def xi_from_generation_sums(solution: ConstantSolution, p: float,
                            n_lo: int = 10, n_hi: int = 14) -> float:
    """xi estimated from node sums: d - pd/2 - slope of log2 sum |u_j|^p.

    The per-generation sums are evaluated by brute-force enumeration; their
    ratio is exactly geometric for the RCM, so consecutive generations give
    the slope to rounding accuracy.
    """
    m = solution.model
    log2_sums = []
    for n in (n_lo, n_hi):
        row = solution.log2_u_rows(n)[n]
        terms = p * row
        top = terms.max()
        log2_sums.append(top + math.log2(np.exp2(terms - top).sum()))
    slope = (log2_sums[1] - log2_sums[0]) / (n_hi - n_lo)
    return m.d - p * m.d / 2.0 - slope


def besov_epsilon(solution: ConstantSolution, s: float, p: float,
                  n_max: int) -> np.ndarray:
    """The Besov test sequence eps_n for generations 0..n_max, closed form.

    eps_n = 2**(ns) 2**(dn(1/2 - 1/p)) (sum_{|j|=n} |u_j|^p)**(1/p) collapses
    to f 2**q 2**((s - s0(p)) n); for p = inf the rate is s + d/2 + q +
    ell_inf/2, which is <= 0 exactly when s <= h.
    """
    m = solution.model
    n = np.arange(n_max + 1, dtype=float)
    if math.isinf(p):
        rate = s + m.d / 2.0 + solution.q + 0.5 * m.coeffs.ell_pos_inf()
    else:
        if p <= 0:
            raise ValueError("p must be positive or inf")
        rate = s - solution.s0(p)
    return m.forcing * 2.0**solution.q * np.exp2(rate * n)


@dataclass(frozen=True)
class LocalHolder:
    estimate: float       # -d/2 - (1/n) log2 u_{x_n} at n = n_max
    closed_form: float    # (alpha - d/2)/3 + (ell(3/2) - sigma)/2
    sigma: float
    dissipating: bool     # sigma >= ell(3/2), i.e. s(x) <= 1/3 at alpha = 1 + d/2


def local_holder(solution: ConstantSolution, point, n_max: int) -> LocalHolder:
    """Local regularity exponent of the recomposed field at a point.

    ``point`` may be a coordinate sequence in [0,1)**d or a ready-made
    :class:`TreeIndex` of generation >= 1 (useful for extreme paths).
    """
    from .dissipation import sigma_of
    from .tree import TreeIndex, path_of_point

    m = solution.model
    if isinstance(point, TreeIndex):
        node = point
        n = node.generation
        if n < 1:
            raise ValueError("need a node of generation >= 1")
    else:
        n = n_max
        node = path_of_point(point, n, m.d)
    sig = sigma_of(m, node)
    estimate = -m.d / 2.0 - solution.log2_u(node) / n
    closed = (m.alpha - m.d / 2.0) / 3.0 + 0.5 * (m.ell(1.5) - sig)
    return LocalHolder(estimate, closed, sig, sig >= m.ell(1.5) - 1e-12)
