"""Regularised resolvents ``1/(x +- i0)`` on a grid, and the self-energy beta."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .grid import FrequencyGrid, ModelConfig

__all__ = [
    "ResolventKernel",
    "SelfEnergyBeta",
    "compute_beta",
    "beta_on_grid",
    "branch",
    "gap_density",
]


def branch(n_alpha: int, n_beta: int, kind: str = "C") -> int:
    """Sign of ``i0`` in ``1/(w_beta - w_alpha +- i0)`` for creation/destruction elements.

    Increasing correlations (``n_beta > n_alpha``) take ``+i0``; decreasing take
    ``-i0``.  The table is the same for ``kind="C"`` and ``kind="D"``: the
    destruction equation reads the same once both are written for adjoint
    operators acting on observables.
    """
    if kind not in ("C", "D"):
        raise ValueError(f"kind must be 'C' or 'D', got {kind!r}")
    if n_alpha == n_beta:
        raise ValueError("no time-ordering branch within a single degree of correlation")
    return 1 if n_beta > n_alpha else -1


@dataclass(frozen=True, eq=False)
class ResolventKernel:
    """``1/(omega - center + sign*i0) = PV 1/(omega - center) - sign*i*pi*delta(omega - center)``.

    The principal value is a subtraction rule: the value at the singular node
    is removed, the regular remainder is integrated with the grid weights (its
    value at the singular node from a local derivative stencil) and the
    analytic ``log((cutoff - c)/c)`` is added back.

    Attributes
    ----------
    pv_weights : (N,) ndarray
        ``sum(pv_weights * f)`` approximates ``PV int f(w)/(w - c) dw``.
    delta_index : int
        Node carrying the delta function.
    delta_coefficient : complex
        Value of ``-sign*i*pi*delta`` at that node (``-sign*i*pi/w_k``).
    """

    sign: int
    center: float
    grid: FrequencyGrid
    pv_weights: np.ndarray
    delta_index: int
    delta_coefficient: complex

    @classmethod
    def build(cls, grid: FrequencyGrid, center: float, sign: int) -> "ResolventKernel":
        if sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        km = grid.index_of(center)
        x = grid.nodes - center
        w = grid.weights
        off = np.arange(grid.size) != km
        pv = np.zeros(grid.size)
        pv[off] = w[off] / x[off]
        pv[km] = np.log((grid.cutoff - center) / center) - pv[off].sum()
        idx, d = grid.derivative_weights(km)
        pv[idx] += w[km] * d
        pv.setflags(write=False)
        return cls(sign, center, grid, pv, km, -sign * 1j * np.pi / w[km])

    @property
    def density(self) -> np.ndarray:
        """Pointwise grid distribution (to be integrated with the grid weights)."""
        d = self.pv_weights / self.grid.weights + 0j
        d[self.delta_index] += self.delta_coefficient
        return d

    @property
    def weights(self) -> np.ndarray:
        return self.grid.weights * self.density

    def apply(self, f) -> complex:
        """``int f(w) / (w - center + sign*i0) dw`` on the grid."""
        return complex(np.dot(self.weights, f))


def gap_density(cfg: ModelConfig, orientation: int, sign: int) -> np.ndarray:
    """Grid distribution of ``1/(orientation*(omega - m) + sign*i0)``.

    ``orientation=+1`` gives ``1/(w - m +- i0)``, ``-1`` gives ``1/(m - w +- i0)``.
    """
    if orientation not in (1, -1):
        raise ValueError("orientation must be +1 or -1")
    return orientation * _kernel(cfg, orientation * sign).density


_KERNEL_CACHE: dict = {}


def _kernel(cfg: ModelConfig, sign: int) -> ResolventKernel:
    key = (id(cfg.grid), cfg.m, sign)
    hit = _KERNEL_CACHE.get(key)
    if hit is None or hit.grid is not cfg.grid:
        hit = ResolventKernel.build(cfg.grid, cfg.m, sign)
        if len(_KERNEL_CACHE) > 64:
            _KERNEL_CACHE.clear()
        _KERNEL_CACHE[key] = hit
    return hit


@dataclass(frozen=True)
class SelfEnergyBeta:
    """``beta = int lam^2 V^2 / (w - m + i0) dw``."""

    re_part: float
    im_part: float

    @property
    def value(self) -> complex:
        return complex(self.re_part, self.im_part)


def compute_beta(cfg: ModelConfig, epsrel: float = 1e-12) -> SelfEnergyBeta:
    """Self-energy from the continuous form factor (independent of the grid nodes).

    ``Re beta`` uses the subtraction ``int (f(w) - f(m))/(w - m) + f(m) log((L - m)/m)``
    with adaptive quadrature; ``Im beta = -pi lam^2 V(m)^2``.
    """
    m, cutoff = cfg.m, cfg.grid.cutoff
    if not 0 < m < cutoff:
        raise ValueError("resonance energy m must lie in (0, cutoff)")
    lam2 = cfg.lam**2
    ff = cfg.form_factor
    f_m = lam2 * float(ff(m)) ** 2
    if lam2 == 0.0:
        return SelfEnergyBeta(0.0, -0.0)

    def regular(w):
        if w == m:
            return 0.0
        return (lam2 * float(ff(w)) ** 2 - f_m) / (w - m)

    remainder, _ = integrate.quad(
        regular, 0.0, cutoff, points=[m], epsabs=1e-15, epsrel=epsrel, limit=1000
    )
    re_part = remainder + f_m * np.log((cutoff - m) / m)
    return SelfEnergyBeta(float(re_part), -np.pi * f_m)


def beta_on_grid(cfg: ModelConfig) -> complex:
    """The same integral evaluated with the grid resolvent kernel."""
    v = cfg.coupling
    return _kernel(cfg, 1).apply(v * v)
