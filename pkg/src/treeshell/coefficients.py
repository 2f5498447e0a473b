"""Coefficient schemes and the scalar spectrum functions built from them.

The repeated-coefficients scheme assigns the same multiset of N positive
weights to the offspring of every node; every closed-form spectrum quantity
of the model reduces to two scalar functions of that multiset:

- ``ell(s)``, the log2 of the s-power mean of the weights, and
- ``phi(gamma)``, the tilted mean of their log2, which is the derivative
  of ``s * ell(s)``.

Both are evaluated through a max-shifted log-sum-exp in base 2 so that
arguments up to a few hundred neither overflow nor lose the leading term.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .tree import TreeIndex

__all__ = [
    "ModelParams",
    "RepeatedCoefficients",
    "GeneralCoefficients",
    "RcmModel",
    "lambda_family",
    "model_from_dict",
]

# ell(s) switches to the exact s=0 formula below this threshold; the
# singularity at s=0 is removable.
_ELL_ZERO_SWITCH = 1e-8


def _log2_power_sum(log2_values: np.ndarray, s: float) -> float:
    """log2( sum_w 2**(s * log2_values_w) ), max-shifted for stability."""
    a = s * log2_values
    m = a.max()
    return float(m + np.log2(np.exp2(a - m).sum()))


@dataclass(frozen=True)
class ModelParams:
    """Global scalar parameters: dimension d, cascade exponent, forcing."""

    d: int
    alpha: float
    forcing: float = 1.0

    def __post_init__(self):
        if self.d < 1 or int(self.d) != self.d:
            raise ValueError("dimension d must be a positive integer")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.forcing > 0:
            raise ValueError("forcing must be positive")

    @property
    def N(self) -> int:
        return 2**self.d


@dataclass(frozen=True)
class RepeatedCoefficients:
    """The multiset {delta_w} of positive weights shared by every offspring set.

    The multiset may have any size >= 1; when used inside an
    :class:`RcmModel` its size must equal N = 2**d.  Weight number k is the
    one carried by child label k, which pins down the (otherwise free)
    labelling of the weights.
    """

    deltas: tuple[float, ...]
    log2_deltas: np.ndarray = field(init=False, repr=False, compare=False)

    def __init__(self, deltas: Sequence[float]):
        deltas = tuple(float(x) for x in deltas)
        if len(deltas) < 1:
            raise ValueError("need at least one coefficient")
        if any(not x > 0 for x in deltas):
            raise ValueError("all coefficients must be strictly positive")
        object.__setattr__(self, "deltas", deltas)
        object.__setattr__(self, "log2_deltas", np.log2(np.asarray(deltas)))

    @property
    def size(self) -> int:
        return len(self.deltas)

    @property
    def is_flat(self) -> bool:
        return min(self.deltas) == max(self.deltas)

    def distinct(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct values (ascending) and their multiplicities."""
        values, counts = np.unique(np.asarray(self.deltas), return_counts=True)
        return values, counts

    # -- the log-s-norm ell ------------------------------------------------

    def ell(self, s: float) -> float:
        """(1/s) log2( mean_w delta_w**s ); the mean of log2 delta at s=0."""
        if abs(s) < _ELL_ZERO_SWITCH:
            return self.ell_zero()
        if math.isinf(s):
            return self.ell_pos_inf() if s > 0 else self.ell_neg_inf()
        return (_log2_power_sum(self.log2_deltas, s) - math.log2(self.size)) / s

    def ell_zero(self) -> float:
        return float(self.log2_deltas.mean())

    def ell_neg_inf(self) -> float:
        """Limit of ell at -infinity: log2 of the smallest coefficient."""
        return float(self.log2_deltas.min())

    def ell_pos_inf(self) -> float:
        """Limit of ell at +infinity: log2 of the largest coefficient."""
        return float(self.log2_deltas.max())

    # -- the tilted mean phi -------------------------------------------------

    def _tilted_weights(self, gamma: float) -> np.ndarray:
        a = gamma * self.log2_deltas
        w = np.exp2(a - a.max())
        return w / w.sum()

    def phi(self, gamma: float) -> float:
        """Tilted mean of log2 delta; equals d/ds (s ell_s) at s=gamma."""
        return float(self._tilted_weights(gamma) @ self.log2_deltas)

    def phi_derivative(self, gamma: float) -> float:
        """Variance of log2 delta under the tilted weights; > 0 iff non-flat.

        The tilt is in base 2, so the actual slope of phi is ln(2) times
        this value; only positivity and vanishing matter downstream.
        """
        w = self._tilted_weights(gamma)
        m = w @ self.log2_deltas
        return float(w @ (self.log2_deltas - m) ** 2)

    def phi_inverse(self, a: float, tol: float = 1e-12) -> float:
        """The gamma with phi(gamma) = a, by bisection on a grown bracket.

        Requires a non-flat multiset and a strictly inside the open interval
        (log2 min delta, log2 max delta); phi is strictly increasing there.
        """
        if self.is_flat:
            raise ValueError("phi is constant for a flat model, not invertible")
        lo_lim, hi_lim = self.ell_neg_inf(), self.ell_pos_inf()
        if not lo_lim < a < hi_lim:
            raise ValueError(
                f"target {a} outside the open range ({lo_lim}, {hi_lim}) of phi")
        lo, hi = -1.0, 1.0
        while self.phi(lo) >= a:
            lo *= 2.0
        while self.phi(hi) <= a:
            hi *= 2.0
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if self.phi(mid) < a:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)


@dataclass(frozen=True)
class GeneralCoefficients:
    """A deterministic bounded coefficient map on the whole tree.

    ``d_of`` maps a :class:`TreeIndex` to its positive weight, with weight 1
    at the root.  The declared band [log2_min, log2_max] is checked on every
    access; the band width L is the constant entering the generic existence
    bound.  An optional vectorised hook serves whole generation rows during
    the pull-back construction.
    """

    arity: int
    d_of: Callable[[TreeIndex], float]
    log2_min: float
    log2_max: float
    row_log2_hook: Callable[[int, np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if not self.log2_min <= self.log2_max:
            raise ValueError("empty declared band")
        if not math.isfinite(self.log2_min) or not math.isfinite(self.log2_max):
            raise ValueError("declared band must be finite")

    @property
    def bound_L(self) -> float:
        return self.log2_max - self.log2_min

    def _check(self, log2_values: np.ndarray) -> np.ndarray:
        eps = 1e-12
        if np.any(log2_values < self.log2_min - eps) or np.any(
                log2_values > self.log2_max + eps):
            raise ValueError("coefficient outside its declared log2 band")
        return log2_values

    def value(self, j: TreeIndex) -> float:
        if j.is_root:
            return 1.0
        v = float(self.d_of(j))
        if not v > 0:
            raise ValueError("coefficients must be positive")
        self._check(np.array([math.log2(v)]))
        return v

    def row_log2(self, generation: int, codes: np.ndarray) -> np.ndarray:
        """log2 coefficients for the nodes with the given packed codes."""
        if generation == 0:
            return np.zeros(len(codes))
        if self.row_log2_hook is not None:
            return self._check(self.row_log2_hook(generation, codes))
        vals = np.empty(len(codes))
        for i, c in enumerate(codes):
            vals[i] = math.log2(
                float(self.d_of(TreeIndex(self.arity, generation, int(c)))))
        return self._check(vals)

    @classmethod
    def from_rcm(cls, model: "RcmModel") -> "GeneralCoefficients":
        """The RCM as a general map: the weight of a node is the delta of
        its last label."""
        log2d = model.coeffs.log2_deltas

        def d_of(j: TreeIndex) -> float:
            return model.coeffs.deltas[(j.code % model.N)]

        def row_hook(generation: int, codes: np.ndarray) -> np.ndarray:
            return log2d[codes % model.N]

        return cls(model.N, d_of, float(log2d.min()), float(log2d.max()),
                   row_log2_hook=row_hook)


@dataclass(frozen=True)
class RcmModel:
    """Dimension, exponent, forcing and the repeated coefficient multiset.

    The single source of truth for every spectrum formula.  The node
    coefficient of a non-root node is the delta of its last label, so the
    interaction coefficient is ``c_j = delta_last(j) * 2**(alpha |j|)``.
    """

    params: ModelParams
    coeffs: RepeatedCoefficients

    def __post_init__(self):
        if self.coeffs.size != self.params.N:
            raise ValueError(
                f"need N = {self.params.N} coefficients, got {self.coeffs.size}")

    @classmethod
    def create(cls, d: int, alpha: float, deltas: Sequence[float],
               forcing: float = 1.0) -> "RcmModel":
        return cls(ModelParams(d, alpha, forcing), RepeatedCoefficients(deltas))

    # convenience proxies used throughout the package
    @property
    def d(self) -> int:
        return self.params.d

    @property
    def N(self) -> int:
        return self.params.N

    @property
    def alpha(self) -> float:
        return self.params.alpha

    @property
    def forcing(self) -> float:
        return self.params.forcing

    @property
    def deltas(self) -> np.ndarray:
        return np.asarray(self.coeffs.deltas)

    @property
    def is_flat(self) -> bool:
        return self.coeffs.is_flat

    def ell(self, s: float) -> float:
        return self.coeffs.ell(s)

    def phi(self, gamma: float) -> float:
        return self.coeffs.phi(gamma)

    def coefficient_of(self, j: TreeIndex) -> float:
        """The weight d_j (1 at the root, delta of the last label otherwise)."""
        if j.is_root:
            return 1.0
        return self.coeffs.deltas[j.code % self.N]

    def to_dict(self) -> dict:
        return {"d": self.d, "alpha": self.alpha, "f": self.forcing,
                "deltas": list(self.coeffs.deltas)}

    def hash(self) -> str:
        """Short stable digest of the model configuration, for output headers."""
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


def lambda_family(lam: float, d: int = 3, alpha: float | None = None,
                  forcing: float = 1.0) -> RcmModel:
    """The one-parameter comparison family with log2 deltas = lam * i.

    With d=3 this is the family used for the spectrum comparison figures,
    i = 0..7; lam = 0 is the flat model.  alpha defaults to the physical
    value d/2 + 1.
    """
    if alpha is None:
        alpha = d / 2 + 1
    deltas = np.exp2(lam * np.arange(2**d))
    return RcmModel.create(d, alpha, deltas, forcing)


def model_from_dict(cfg: dict) -> RcmModel:
    """Build a model from a config mapping.

    Accepts either ``{"d", "alpha", "f", "deltas": [...]}`` or
    ``{"d", "alpha", "f", "lambda": x}`` for the lambda family.
    """
    d = int(cfg["d"])
    alpha = float(cfg["alpha"])
    forcing = float(cfg.get("f", 1.0))
    if "deltas" in cfg:
        return RcmModel.create(d, alpha, cfg["deltas"], forcing)
    if "lambda" in cfg:
        return lambda_family(float(cfg["lambda"]), d=d, alpha=alpha,
                             forcing=forcing)
    raise ValueError("config needs either 'deltas' or 'lambda'")
