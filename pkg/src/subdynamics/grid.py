"""Frequency grids, form factors and model configuration for the Friedrichs model."""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "QuadratureRule",
    "FrequencyGrid",
    "FormFactorFamily",
    "FormFactor",
    "ModelConfig",
    "RegimeWarning",
]


class RegimeWarning(UserWarning):
    """Parameters fall outside the weak-coupling / intermediate-time regime."""


class QuadratureRule(str, enum.Enum):
    MIDPOINT = "midpoint"
    GAUSS_LEGENDRE = "gauss-legendre"


@dataclass(frozen=True, eq=False)
class FrequencyGrid:
    """Quadrature discretisation of the continuum ``(0, cutoff)``.

    Use :meth:`midpoint` or :meth:`gauss_legendre` to build a grid that has a
    prescribed anchor energy (the resonance ``m``) as one of its nodes.

    Parameters
    ----------
    nodes : (N,) ndarray
        Strictly increasing frequencies inside ``(0, cutoff)``.
    weights : (N,) ndarray
        Positive quadrature weights summing to ``cutoff``.
    cutoff : float
        Upper end of the continuum.
    rule : QuadratureRule
        Rule used to build the grid.
    stencil : int
        Odd number of nodes around the anchor used for local differentiation
        (3 for midpoint grids, the panel order for Gauss-Legendre grids).
    """

    nodes: np.ndarray
    weights: np.ndarray
    cutoff: float
    rule: QuadratureRule = QuadratureRule.MIDPOINT
    stencil: int = 3

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "rule", QuadratureRule(self.rule))
        if nodes.ndim != 1 or nodes.shape != weights.shape:
            raise ValueError("nodes and weights must be 1-d arrays of equal length")
        if self.cutoff <= 0:
            raise ValueError("cutoff must be positive")
        if nodes.size < 3:
            raise ValueError("a grid needs at least 3 nodes")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("grid nodes must be strictly increasing")
        if nodes[0] <= 0 or nodes[-1] >= self.cutoff:
            raise ValueError("grid nodes must lie in the open interval (0, cutoff)")
        if np.any(weights <= 0):
            raise ValueError("quadrature weights must be positive")
        if abs(weights.sum() - self.cutoff) > 1e-12 * self.cutoff:
            raise ValueError("quadrature weights must sum to the cutoff")
        if self.stencil < 3 or self.stencil % 2 == 0:
            raise ValueError("stencil must be an odd integer >= 3")

    @property
    def size(self) -> int:
        return self.nodes.size

    def __len__(self):
        return self.nodes.size

    def index_of(self, omega: float) -> int:
        """Index of the node exactly equal to `omega` (KeyError if none)."""
        hits = np.flatnonzero(self.nodes == omega)
        if hits.size != 1:
            raise KeyError(f"{omega!r} is not a grid node")
        return int(hits[0])

    def delta(self, k: int) -> np.ndarray:
        """Grid representation of ``delta(omega - omega_k)``: ``1/w_k`` at node k."""
        out = np.zeros(self.size)
        out[k] = 1.0 / self.weights[k]
        return out

    def integrate(self, values: np.ndarray) -> complex:
        return np.dot(self.weights, values)

    def same_as(self, other: "FrequencyGrid") -> bool:
        return self is other or (
            self.size == other.size
            and self.cutoff == other.cutoff
            and np.array_equal(self.nodes, other.nodes)
            and np.array_equal(self.weights, other.weights)
        )

    def derivative_weights(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Finite-difference weights for ``f'(omega_k)`` from nearby nodes.

        Returns ``(indices, weights)`` such that
        ``f'(omega_k) ~ sum(weights * f[indices])``; exact for polynomials of
        degree below the stencil size.
        """
        half = self.stencil // 2
        lo = max(0, min(k - half, self.size - self.stencil))
        idx = np.arange(lo, lo + self.stencil)
        x = self.nodes[idx]
        x0 = self.nodes[k]
        j0 = int(np.flatnonzero(idx == k)[0])
        d = np.empty(idx.size)
        # derivative of the Lagrange basis at a node of the stencil
        for j in range(idx.size):
            if j == j0:
                d[j] = sum(1.0 / (x0 - x[i]) for i in range(idx.size) if i != j0)
            else:
                others = [i for i in range(idx.size) if i not in (j, j0)]
                num = np.prod([x0 - x[i] for i in others])
                den = np.prod([x[j] - x[i] for i in range(idx.size) if i != j])
                d[j] = num / den
        return idx, d

    @classmethod
    def midpoint(cls, n: int, cutoff: float, anchor: float) -> "FrequencyGrid":
        """Midpoint-rule grid with a cell centred exactly on `anchor`.

        The anchor cell has width ``cutoff/n``; the intervals on either side
        are split into equal cells whose widths differ from ``cutoff/n`` by
        less than one part in the number of cells.
        """
        if not 0 < anchor < cutoff:
            raise ValueError("anchor must lie in (0, cutoff)")
        h = cutoff / n
        left, right = anchor - h / 2, anchor + h / 2
        n_left = int(round(left / h))
        n_right = n - 1 - n_left
        if n_left < 1 or n_right < 1:
            raise ValueError("anchor too close to the ends of the interval for this n")
        h_left = left / n_left
        h_right = (cutoff - right) / n_right
        nodes = np.concatenate(
            [
                (np.arange(n_left) + 0.5) * h_left,
                [anchor],
                right + (np.arange(n_right) + 0.5) * h_right,
            ]
        )
        weights = np.concatenate([np.full(n_left, h_left), [h], np.full(n_right, h_right)])
        # keep the sum exact to rounding
        weights *= cutoff / weights.sum()
        return cls(nodes, weights, cutoff, QuadratureRule.MIDPOINT, 3)

    @classmethod
    def gauss_legendre(
        cls, n: int, cutoff: float, anchor: float, order: int = 5
    ) -> "FrequencyGrid":
        """Composite Gauss-Legendre grid whose central panel is centred on `anchor`.

        `order` must be odd so the central panel has a node at its midpoint;
        `n` must be a multiple of `order`.
        """
        if order % 2 == 0 or order < 3:
            raise ValueError("panel order must be odd and >= 3")
        if n % order:
            raise ValueError("n must be a multiple of the panel order")
        if not 0 < anchor < cutoff:
            raise ValueError("anchor must lie in (0, cutoff)")
        panels = n // order
        half = cutoff / (2 * panels)
        left, right = anchor - half, anchor + half
        p_left = int(round(left / (2 * half)))
        p_right = panels - 1 - p_left
        if p_left < 1 or p_right < 1 or left <= 0 or right >= cutoff:
            raise ValueError("anchor too close to the ends of the interval for this n")
        x, wq = np.polynomial.legendre.leggauss(order)
        edges = np.concatenate(
            [np.linspace(0.0, left, p_left + 1), np.linspace(right, cutoff, p_right + 1)]
        )
        bounds = [(edges[i], edges[i + 1]) for i in range(p_left)]
        bounds.append((left, right))
        bounds += [(edges[p_left + 1 + i], edges[p_left + 2 + i]) for i in range(p_right)]
        nodes, weights = [], []
        for a, b in bounds:
            c, r = (a + b) / 2, (b - a) / 2
            pts = c + r * x
            if a == left:
                pts[order // 2] = anchor
            nodes.append(pts)
            weights.append(r * wq)
        nodes = np.concatenate(nodes)
        weights = np.concatenate(weights)
        weights *= cutoff / weights.sum()
        return cls(nodes, weights, cutoff, QuadratureRule.GAUSS_LEGENDRE, order)

    @classmethod
    def build(cls, n: int, cutoff: float, anchor: float, rule="midpoint", order: int = 5):
        rule = QuadratureRule(rule)
        if rule is QuadratureRule.MIDPOINT:
            return cls.midpoint(n, cutoff, anchor)
        return cls.gauss_legendre(n, cutoff, anchor, order)


class FormFactorFamily(str, enum.Enum):
    FLAT_CUTOFF = "flat-cutoff"
    GAUSSIAN_BUMP = "gaussian-bump"
    LORENTZIAN = "lorentzian"
    POWER_EXPONENTIAL = "power-exponential"


_DEFAULT_PARAMS = {
    FormFactorFamily.FLAT_CUTOFF: {"amplitude": 1.0},
    FormFactorFamily.GAUSSIAN_BUMP: {"amplitude": 1.0, "center": 1.0, "width": 0.5},
    FormFactorFamily.LORENTZIAN: {"amplitude": 1.0, "center": 1.0, "width": 0.5},
    FormFactorFamily.POWER_EXPONENTIAL: {"amplitude": 1.0, "width": 1.0, "exponent": 1.0},
}


@dataclass(frozen=True)
class FormFactor:
    """Real coupling function ``V(omega)``.

    ========================  ==============================================
    family                    V(omega)
    ========================  ==============================================
    ``flat-cutoff``           ``amplitude``
    ``gaussian-bump``         ``amplitude * exp(-(omega-center)**2 / (2 width**2))``
    ``lorentzian``            ``amplitude / (1 + ((omega-center)/width)**2)``
    ``power-exponential``     ``amplitude * (omega/width)**exponent * exp(-omega/width)``
    ========================  ==============================================

    The cutoff itself is a property of the grid, not of the form factor.
    """

    family: FormFactorFamily = FormFactorFamily.FLAT_CUTOFF
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        family = FormFactorFamily(self.family)
        object.__setattr__(self, "family", family)
        known = _DEFAULT_PARAMS[family]
        unknown = set(self.params) - set(known)
        if unknown:
            raise ValueError(f"unknown parameters for {family.value}: {sorted(unknown)}")
        merged = {**known, **{k: float(v) for k, v in self.params.items()}}
        if "width" in merged and merged["width"] <= 0:
            raise ValueError("width must be positive")
        if merged.get("exponent", 0.0) < 0:
            raise ValueError("exponent must be non-negative")
        object.__setattr__(self, "params", merged)

    def __hash__(self):
        return hash((self.family, tuple(sorted(self.params.items()))))

    def __call__(self, omega):
        w = np.asarray(omega, dtype=float)
        p = self.params
        f = self.family
        if f is FormFactorFamily.FLAT_CUTOFF:
            out = np.full_like(w, p["amplitude"])
        elif f is FormFactorFamily.GAUSSIAN_BUMP:
            out = p["amplitude"] * np.exp(-((w - p["center"]) ** 2) / (2 * p["width"] ** 2))
        elif f is FormFactorFamily.LORENTZIAN:
            out = p["amplitude"] / (1.0 + ((w - p["center"]) / p["width"]) ** 2)
        else:
            x = w / p["width"]
            out = p["amplitude"] * x ** p["exponent"] * np.exp(-x)
        return out if out.ndim else float(out)


@dataclass(frozen=True, eq=False)
class ModelConfig:
    """Friedrichs model: resonance `m` coupled with strength `lam` to a continuum grid."""

    m: float
    lam: float
    form_factor: FormFactor
    grid: FrequencyGrid

    def __post_init__(self):
        if not 0 < self.m < self.grid.cutoff:
            raise ValueError("resonance energy m must lie in (0, cutoff)")
        if self.lam < 0:
            raise ValueError("coupling lambda must be non-negative")
        try:
            self.grid.index_of(self.m)
        except KeyError:
            raise ValueError("resonance energy m must coincide with a grid node") from None
        if self.lam >= 0.3:
            warnings.warn(
                f"lambda={self.lam} is not small; the lambda^2 t truncation is unreliable",
                RegimeWarning,
                stacklevel=2,
            )

    @classmethod
    def build(
        cls,
        m: float = 1.0,
        lam: float = 0.1,
        form_factor: FormFactor | None = None,
        n: int = 2000,
        cutoff: float = 2.0,
        rule: str = "midpoint",
        order: int = 5,
    ) -> "ModelConfig":
        grid = FrequencyGrid.build(n, cutoff, m, rule, order)
        return cls(m, lam, form_factor or FormFactor(), grid)

    def with_lambda(self, lam: float) -> "ModelConfig":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RegimeWarning)
            return ModelConfig(self.m, lam, self.form_factor, self.grid)

    @property
    def k_m(self) -> int:
        return self.grid.index_of(self.m)

    @property
    def coupling(self) -> np.ndarray:
        """``lam * V(omega_k)`` on the grid nodes."""
        return self.lam * self.form_factor(self.grid.nodes)

    @property
    def v_m(self) -> float:
        """``lam * V(m)``."""
        return self.lam * float(self.form_factor(self.m))

    @property
    def gamma(self) -> float:
        """Golden-rule decay rate ``2 pi lam^2 V(m)^2``."""
        return 2 * np.pi * self.v_m**2
