"""Observables and state functionals with a diagonal singularity.

Both objects carry five components over a :class:`FrequencyGrid`:

======  =============  ================================
key     shape          basis element
======  =============  ================================
``1``   scalar         ``|1><1|``
``w``   (N,)           ``|w><w|`` (singular diagonal)
``1w``  (N,)           ``|1><w|``
``w1``  (N,)           ``|w><1|``
``ww``  (N, N)         ``|w><w'|`` (regular kernel)
======  =============  ================================

Continuum components use delta normalisation, so every sum over nodes carries
the quadrature weights explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import FrequencyGrid

__all__ = [
    "COMPONENTS",
    "DEGREE",
    "Observable",
    "StateFunctional",
    "pair",
    "trace",
    "project",
    "identity_observable",
    "basis_observable",
    "pure_discrete_state",
    "GridMismatchError",
]

COMPONENTS = ("1", "w", "1w", "w1", "ww")
DEGREE = {"1": 0, "w": 0, "1w": 1, "w1": 1, "ww": 2}


class GridMismatchError(ValueError):
    """Operands live on different frequency grids."""


def _check_grid(a: FrequencyGrid, b: FrequencyGrid):
    if not a.same_as(b):
        raise GridMismatchError("operands are defined on different frequency grids")


def _shape(key: str, n: int) -> tuple:
    return {"1": (), "w": (n,), "1w": (n,), "w1": (n,), "ww": (n, n)}[key]


class _FiveComponent:
    """Vector-space plumbing shared by observables and states."""

    grid: FrequencyGrid

    def components(self) -> tuple:
        raise NotImplementedError

    @classmethod
    def from_components(cls, comps, grid):
        n = grid.size
        arrays = []
        for key, c in zip(COMPONENTS, comps):
            a = np.asarray(c, dtype=complex)
            if a.shape != _shape(key, n):
                raise ValueError(f"component {key!r} has shape {a.shape}, expected {_shape(key, n)}")
            arrays.append(a if a.ndim else complex(a))
        return cls(*arrays, grid=grid)

    @classmethod
    def zeros(cls, grid: FrequencyGrid):
        return cls.from_components([np.zeros(_shape(k, grid.size)) for k in COMPONENTS], grid)

    def as_dict(self) -> dict:
        return dict(zip(COMPONENTS, self.components()))

    def _binary(self, other, op):
        if type(other) is not type(self):
            return NotImplemented
        _check_grid(self.grid, other.grid)
        return self.from_components(
            [op(a, b) for a, b in zip(self.components(), other.components())], self.grid
        )

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return self.from_components([scalar * c for c in self.components()], self.grid)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1

    def conj(self):
        return self.from_components([np.conj(c) for c in self.components()], self.grid)

    def flatten(self) -> np.ndarray:
        """Coordinates as one complex vector of length ``1 + 3N + N**2``."""
        return np.concatenate([np.ravel(c) for c in self.components()])

    @classmethod
    def unflatten(cls, vec: np.ndarray, grid: FrequencyGrid):
        n = grid.size
        vec = np.asarray(vec, dtype=complex)
        if vec.shape != (1 + 3 * n + n * n,):
            raise ValueError("coordinate vector has the wrong length")
        return cls.from_components(
            [vec[0], vec[1 : n + 1], vec[n + 1 : 2 * n + 1], vec[2 * n + 1 : 3 * n + 1],
             vec[3 * n + 1 :].reshape(n, n)],
            grid,
        )

    def norm(self) -> float:
        """Weighted L2 norm (the pairing norm)."""
        w = self.grid.weights
        c1, cw, c1w, cw1, ck = self.components()
        total = (
            abs(c1) ** 2
            + np.dot(w, abs(cw) ** 2)
            + np.dot(w, abs(c1w) ** 2)
            + np.dot(w, abs(cw1) ** 2)
            + w @ (abs(ck) ** 2) @ w
        )
        return float(np.sqrt(total))

    def allclose(self, other, atol=1e-12, rtol=0.0) -> bool:
        return all(
            np.allclose(a, b, atol=atol, rtol=rtol)
            for a, b in zip(self.components(), other.components())
        )

    def max_abs_diff(self, other) -> float:
        return max(
            float(np.max(np.abs(np.asarray(a) - np.asarray(b))))
            for a, b in zip(self.components(), other.components())
        )


@dataclass(frozen=True, eq=False)
class Observable(_FiveComponent):
    """Observable ``O = O_1|1) + int O_w|w) + int O_1w|1w) + int O_w1|w1) + int int O_ww'|ww')``."""

    o1: complex
    o_omega: np.ndarray
    o_1omega: np.ndarray
    o_omega1: np.ndarray
    o_kernel: np.ndarray
    grid: FrequencyGrid

    def components(self):
        return (self.o1, self.o_omega, self.o_1omega, self.o_omega1, self.o_kernel)

    def is_self_adjoint(self, atol: float = 1e-12) -> bool:
        return (
            abs(np.imag(self.o1)) <= atol
            and np.all(np.abs(np.imag(self.o_omega)) <= atol)
            and np.allclose(self.o_1omega, np.conj(self.o_omega1), atol=atol, rtol=0)
            and np.allclose(self.o_kernel, self.o_kernel.conj().T, atol=atol, rtol=0)
        )


@dataclass(frozen=True, eq=False)
class StateFunctional(_FiveComponent):
    """State ``(rho| = rho_1^* (1| + int rho_w^* (w| + ...``.

    The un-conjugated coefficients are stored; :func:`pair` applies the
    conjugation, so a physical state's arrays are its density-matrix values.
    """

    rho1: complex
    rho_omega: np.ndarray
    rho_1omega: np.ndarray
    rho_omega1: np.ndarray
    rho_kernel: np.ndarray
    grid: FrequencyGrid

    def components(self):
        return (self.rho1, self.rho_omega, self.rho_1omega, self.rho_omega1, self.rho_kernel)

    def is_physical(self, atol: float = 1e-12) -> bool:
        """Positivity conditions: real diagonal parts, Hermitian off-diagonal parts."""
        return (
            abs(np.imag(self.rho1)) <= atol
            and np.all(np.abs(np.imag(self.rho_omega)) <= atol)
            and np.allclose(self.rho_1omega, np.conj(self.rho_omega1), atol=atol, rtol=0)
            and np.allclose(self.rho_kernel, self.rho_kernel.conj().T, atol=atol, rtol=0)
        )


def pair(rho: StateFunctional, obs: Observable) -> complex:
    """Value ``(rho|O)`` of the state on the observable.

    Antilinear in `rho`, linear in `obs`.
    """
    _check_grid(rho.grid, obs.grid)
    w = rho.grid.weights
    return complex(
        np.conj(rho.rho1) * obs.o1
        + np.dot(w, np.conj(rho.rho_omega) * obs.o_omega)
        + np.dot(w, np.conj(rho.rho_1omega) * obs.o_1omega)
        + np.dot(w, np.conj(rho.rho_omega1) * obs.o_omega1)
        + w @ (np.conj(rho.rho_kernel) * obs.o_kernel) @ w
    )


def identity_observable(grid: FrequencyGrid) -> Observable:
    """``|I) = |1) + int |w)``."""
    obs = Observable.zeros(grid)
    return Observable.from_components(
        [1.0, np.ones(grid.size), obs.o_1omega, obs.o_omega1, obs.o_kernel], grid
    )


def trace(rho: StateFunctional) -> complex:
    """Generalised trace ``(rho|I)``."""
    return pair(rho, identity_observable(rho.grid))


def project(obs, degree: int):
    """Keep only the components of the given degree of correlation (0, 1 or 2)."""
    if degree not in (0, 1, 2):
        raise ValueError(f"degree of correlation must be 0, 1 or 2, got {degree!r}")
    comps = [
        c if DEGREE[key] == degree else np.zeros_like(c)
        for key, c in zip(COMPONENTS, obs.components())
    ]
    return type(obs).from_components(comps, obs.grid)


def basis_observable(grid: FrequencyGrid, key: str, k: int | None = None, l: int | None = None,
                     *, delta: bool = True) -> Observable:
    """Basis element ``|1)``, ``|w_k)``, ``|1 w_k)``, ``|w_k 1)`` or ``|w_k w_l)``.

    With ``delta=True`` continuum labels are delta-normalised (value ``1/w_k``
    at the node); otherwise the coordinate is set to one.
    """
    comps = {c: np.zeros(_shape(c, grid.size), dtype=complex) for c in COMPONENTS}
    w = grid.weights
    if key == "1":
        comps["1"] = np.array(1.0 + 0j)
    elif key in ("w", "1w", "w1"):
        comps[key][k] = 1.0 / w[k] if delta else 1.0
    elif key == "ww":
        comps[key][k, l] = 1.0 / (w[k] * w[l]) if delta else 1.0
    else:
        raise ValueError(f"unknown component {key!r}")
    return Observable.from_components([comps[c] for c in COMPONENTS], grid)


def pure_discrete_state(grid: FrequencyGrid) -> StateFunctional:
    """The state ``(1|`` with all population in the discrete level."""
    st = StateFunctional.zeros(grid)
    return StateFunctional.from_components(
        [1.0, st.rho_omega, st.rho_1omega, st.rho_omega1, st.rho_kernel], grid
    )
