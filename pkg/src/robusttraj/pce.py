"""Non-intrusive polynomial chaos expansion on uniform random inputs.

A quantity of interest ``f`` depending on a vector of uniform random
parameters ``xi`` is approximated as a linear combination of orthogonal
Legendre basis polynomials::

    f(xi) ~= sum_i  c_i * phi_i(x),     x = standardized xi in [-1, 1]^q

The coefficients are recovered by spectral projection: ``f`` is evaluated
at the nodes of a tensor-product Gauss-Legendre rule and the projection
integral is replaced by the quadrature sum.  The mean of ``f`` is then the
zeroth coefficient and the variance is a weighted sum of the squared
higher-order coefficients.

All weights here follow two conventions kept deliberately separate:

* raw quadrature weights sum to 2 per dimension (plain Legendre weight),
* scenario weights are rescaled by the uniform probability density so the
  weights of the full tensor grid sum to 1.

Only the uniform/Legendre pair is implemented.  Multi-dimensional basis
indices use a total-degree set in graded lexicographic order; for one
uncertain parameter this reduces to the natural degree order 0..p.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "UncertaintySpec",
    "QuadratureRule",
    "Scenario",
    "ScenarioSet",
    "PceCoefficients",
    "legendre_eval",
    "gauss_legendre_rule",
    "tensor_grid",
    "basis_norm",
    "project",
    "project_all",
    "moments",
]


@dataclass(frozen=True)
class UncertaintySpec:
    """Distributions of the stochastic parameters and their quadrature setup.

    Attributes:
        bounds: per-dimension physical interval ``(a_j, b_j)`` of the uniform
            parameter.  A degenerate interval ``a_j == b_j`` is allowed and
            collapses that dimension to a deterministic value.
        quad_points: number of Gauss-Legendre nodes per dimension (``l``).
        order: highest retained basis degree (``p``).
    """

    bounds: tuple[tuple[float, float], ...]
    quad_points: int = 6
    order: int = 4

    def __post_init__(self) -> None:
        if len(self.bounds) < 1:
            raise ValueError("at least one uncertain dimension is required")
        for a, b in self.bounds:
            if a > b:
                raise ValueError(f"invalid bounds ({a}, {b}): lower > upper")
        if self.quad_points < 1:
            raise ValueError("quad_points must be >= 1")
        if self.order < 0:
            raise ValueError("order must be >= 0")
        if self.order > 2 * self.quad_points - 1:
            raise ValueError(
                f"order {self.order} not integrable exactly by "
                f"{self.quad_points}-point quadrature (need order <= 2l-1)"
            )

    @property
    def dims(self) -> int:
        return len(self.bounds)

    @property
    def n_scenarios(self) -> int:
        """Tensor-grid size ``M = l^q``."""
        return self.quad_points ** self.dims


@dataclass(frozen=True)
class QuadratureRule:
    """One-dimensional Gauss-Legendre rule on [-1, 1].

    ``weights`` are raw Legendre weights (they sum to 2); density scaling
    happens when the rule is assembled into a scenario grid.
    """

    nodes: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return len(self.nodes)


class Scenario(tuple):
    """One quadrature realization: physical values, std nodes, scaled weight."""

    __slots__ = ()

    def __new__(cls, values, std_nodes, weight):
        return super().__new__(cls, (values, std_nodes, weight))

    @property
    def values(self) -> np.ndarray:
        return self[0]

    @property
    def std_nodes(self) -> np.ndarray:
        return self[1]

    @property
    def weight(self) -> float:
        return self[2]


@dataclass(frozen=True)
class ScenarioSet:
    """Full tensor grid of quadrature scenarios for an uncertainty spec.

    Attributes:
        spec: the generating :class:`UncertaintySpec`.
        std_nodes: ``(M, q)`` nodes in ``[-1, 1]^q``.
        values: ``(M, q)`` physical parameter values.
        raw_weights: ``(M,)`` tensor products of raw per-dimension weights.
        weights: ``(M,)`` density-scaled weights, summing to 1.
    """

    spec: UncertaintySpec
    std_nodes: np.ndarray
    values: np.ndarray
    raw_weights: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return self.std_nodes.shape[0]

    def __iter__(self):
        for k in range(len(self)):
            yield Scenario(self.values[k], self.std_nodes[k], float(self.weights[k]))


@dataclass(frozen=True)
class PceCoefficients:
    """Spectral coefficients of one or more quantities.

    ``coeffs`` has shape ``(n_basis,)`` for a scalar quantity or
    ``(n_basis, T)`` for a time series; row ``i`` belongs to basis index ``i``.
    ``norms`` holds the squared basis norms under the probability density,
    so ``norms[0] == 1``.
    """

    coeffs: np.ndarray
    norms: np.ndarray

    def __post_init__(self) -> None:
        if self.coeffs.shape[0] != self.norms.shape[0]:
            raise ValueError("coeffs and norms disagree on basis size")


def legendre_eval(order: int, x):
    """Evaluate the Legendre polynomial ``P_order`` via the three-term recurrence.

    ``x`` may be a scalar or array; values are clamped to [-1, 1].
    """
    if order < 0:
        raise ValueError("order must be >= 0")
    x = np.clip(np.asarray(x, dtype=float), -1.0, 1.0)
    prev = np.ones_like(x)
    if order == 0:
        return prev if prev.ndim else float(prev)
    cur = x.copy()
    for i in range(1, order):
        prev, cur = cur, ((2 * i + 1) * x * cur - i * prev) / (i + 1)
    return cur if cur.ndim else float(cur)


def _legendre_table(max_order: int, x: np.ndarray) -> np.ndarray:
    """All of P_0..P_max_order at the points ``x``, shape (max_order+1, len(x))."""
    x = np.asarray(x, dtype=float)
    table = np.zeros((max_order + 1, x.size))
    table[0] = 1.0
    if max_order >= 1:
        table[1] = x
    for i in range(1, max_order):
        table[i + 1] = ((2 * i + 1) * x * table[i] - i * table[i - 1]) / (i + 1)
    return table


def gauss_legendre_rule(l: int) -> QuadratureRule:
    """Build the ``l``-point Gauss-Legendre rule on [-1, 1].

    Nodes are the roots of ``P_l`` found by Newton iteration from Chebyshev
    initial guesses (tolerance 1e-14); weights are ``2 / ((1-x^2) P_l'(x)^2)``.
    The rule integrates polynomials up to degree ``2l - 1`` exactly.
    """
    if l < 1:
        raise ValueError("node count must be >= 1")
    if l == 1:
        return QuadratureRule(np.array([0.0]), np.array([2.0]))

    k = np.arange(1, l + 1)
    x = np.cos(math.pi * (k - 0.25) / (l + 0.5))
    for _ in range(100):
        table = _legendre_table(l, x)
        p = table[l]
        dp = l * (x * table[l] - table[l - 1]) / (x * x - 1.0)
        dx = p / dp
        x -= dx
        if np.max(np.abs(dx)) < 1e-14:
            break
    table = _legendre_table(l, x)
    dp = l * (x * table[l] - table[l - 1]) / (x * x - 1.0)
    w = 2.0 / ((1.0 - x * x) * dp * dp)

    # enforce exact symmetry about 0, then ascending order
    order = np.argsort(x)
    x, w = x[order], w[order]
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    if l % 2 == 1:
        x[l // 2] = 0.0
    return QuadratureRule(x, w)


def tensor_grid(spec: UncertaintySpec) -> ScenarioSet:
    """Expand an uncertainty spec into its ``M = l^q`` scenario grid.

    Physical values map affinely from the standard nodes,
    ``xi_j = a_j + (b_j - a_j) (x_j + 1) / 2``; scenario weights are the raw
    tensor-product weights divided by ``2^q`` (the uniform density absorbed),
    which makes them sum to 1.
    """
    rule = gauss_legendre_rule(spec.quad_points)
    grids = np.meshgrid(*([rule.nodes] * spec.dims), indexing="ij")
    std_nodes = np.stack([g.ravel() for g in grids], axis=1)
    wgrids = np.meshgrid(*([rule.weights] * spec.dims), indexing="ij")
    raw = np.ones(std_nodes.shape[0])
    for wg in wgrids:
        raw = raw * wg.ravel()
    lo = np.array([a for a, _ in spec.bounds])
    hi = np.array([b for _, b in spec.bounds])
    values = lo + (hi - lo) * (std_nodes + 1.0) / 2.0
    weights = raw / (2.0 ** spec.dims)
    return ScenarioSet(spec, std_nodes, values, raw, weights)


def multi_indices(dims: int, order: int) -> list[tuple[int, ...]]:
    """Total-degree basis index set in graded lexicographic order."""
    out = []
    for total in range(order + 1):
        for combo in itertools.product(range(total + 1), repeat=dims):
            if sum(combo) == total:
                out.append(combo)
    return out


def basis_norm(index) -> float:
    """Squared norm of the basis polynomial under the uniform density.

    For the 1-D Legendre basis under ``rho = 1/2`` on [-1, 1] this is
    ``1 / (2i + 1)``; multi-dimensional norms are the per-dimension product.
    """
    if np.isscalar(index):
        index = (int(index),)
    norm = 1.0
    for i in index:
        if i < 0:
            raise ValueError("basis degree must be >= 0")
        norm *= 1.0 / (2 * i + 1)
    return norm


def _basis_at_nodes(indices: list[tuple[int, ...]], std_nodes: np.ndarray) -> np.ndarray:
    """Evaluate every basis polynomial at every node, shape (n_basis, M)."""
    max_deg = max((max(ix) for ix in indices), default=0)
    per_dim = [_legendre_table(max_deg, std_nodes[:, d]) for d in range(std_nodes.shape[1])]
    out = np.ones((len(indices), std_nodes.shape[0]))
    for row, ix in enumerate(indices):
        for d, deg in enumerate(ix):
            if deg:
                out[row] *= per_dim[d][deg]
    return out


def project(samples: np.ndarray, index, scenarios: ScenarioSet) -> np.ndarray | float:
    """Project quadrature samples onto one basis polynomial.

    ``samples`` holds the quantity evaluated at every scenario, shape ``(M,)``
    or ``(M, T)`` for a time series.  Returns the spectral coefficient

        c = sum_k samples_k * phi(node_k) * weight_k / <phi^2>

    A constant sample vector projects to exactly 0 for every index of
    degree >= 1 (the floating-point quadrature residual is suppressed so
    degenerate ensembles have precisely zero spread).
    """
    samples = np.asarray(samples, dtype=float)
    if samples.shape[0] != len(scenarios):
        raise ValueError(
            f"samples count {samples.shape[0]} != scenario count {len(scenarios)}"
        )
    if np.isscalar(index):
        index = (int(index),)
    phi = _basis_at_nodes([tuple(index)], scenarios.std_nodes)[0]
    coeff = (samples.T @ (phi * scenarios.weights)).T / basis_norm(index)
    if sum(index) >= 1:
        constant = np.ptp(samples, axis=0) == 0.0
        if samples.ndim == 1:
            if constant:
                coeff = 0.0
        else:
            coeff = np.where(constant, 0.0, coeff)
    return float(coeff) if np.ndim(coeff) == 0 else coeff


def project_all(samples: np.ndarray, scenarios: ScenarioSet,
                order: int | None = None) -> PceCoefficients:
    """Project samples onto the full total-degree basis set."""
    spec = scenarios.spec
    p = spec.order if order is None else order
    indices = multi_indices(spec.dims, p)
    samples = np.asarray(samples, dtype=float)
    if samples.shape[0] != len(scenarios):
        raise ValueError(
            f"samples count {samples.shape[0]} != scenario count {len(scenarios)}"
        )
    phi = _basis_at_nodes(indices, scenarios.std_nodes)
    norms = np.array([basis_norm(ix) for ix in indices])
    coeffs = (phi * scenarios.weights) @ samples / norms[:, None] if samples.ndim == 2 \
        else (phi * scenarios.weights) @ samples / norms
    constant = np.ptp(samples, axis=0) == 0.0
    if samples.ndim == 1:
        if constant:
            coeffs[1:] = 0.0
    else:
        coeffs[1:, constant] = 0.0
    return PceCoefficients(coeffs, norms)


def moments(coeffs: PceCoefficients) -> tuple:
    """Mean and standard deviation implied by spectral coefficients.

    mean = c_0;  std = sqrt( sum_{i>=1} <phi_i^2> c_i^2 )
    """
    mean = coeffs.coeffs[0]
    var = np.tensordot(coeffs.norms[1:], coeffs.coeffs[1:] ** 2, axes=(0, 0))
    if np.any(var < 0):
        raise AssertionError("negative variance cannot occur by construction")
    std = np.sqrt(var)
    if np.ndim(mean) == 0:
        return float(mean), float(std)
    return mean, std
