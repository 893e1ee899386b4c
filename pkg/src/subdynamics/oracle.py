"""Exact reference dynamics of the discretised Friedrichs Hamiltonian.

The continuum is replaced by the grid nodes with basis states normalised by
``sqrt(w_k)``, so that ``H[0, k] = lam V(omega_k) sqrt(w_k)``.  Density
matrices are propagated exactly through one eigendecomposition of ``H``.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .functional import Observable, StateFunctional, trace
from .grid import FrequencyGrid, ModelConfig, RegimeWarning

__all__ = [
    "DiscreteHamiltonian",
    "DensityMatrix",
    "DecayFitError",
    "build_hamiltonian",
    "exact_evolve",
    "matrix_to_functional",
    "functional_to_matrix",
    "observable_to_matrix",
    "matrix_to_observable",
    "fit_decay_rate",
    "ExactPropagator",
    "ComparisonReport",
    "compare_evolutions",
]


class DecayFitError(ValueError):
    """Survival data unusable for a log-linear fit."""


@dataclass(frozen=True, eq=False)
class DiscreteHamiltonian:
    matrix: np.ndarray
    grid: FrequencyGrid

    def __post_init__(self):
        h = self.matrix
        if h.shape != (self.grid.size + 1,) * 2:
            raise ValueError("Hamiltonian size does not match the grid")
        if np.max(np.abs(h - h.conj().T)) > 1e-14 * max(1.0, np.max(np.abs(h))):
            raise ValueError("Hamiltonian is not Hermitian")

    @cached_property
    def eigh(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigenvalues and eigenvectors, computed once."""
        return np.linalg.eigh(self.matrix)


def build_hamiltonian(cfg: ModelConfig) -> DiscreteHamiltonian:
    """Arrowhead matrix: ``diag(m, omega_1..N)`` plus the coupling row/column."""
    g = cfg.grid
    n = g.size
    h = np.zeros((n + 1, n + 1))
    h[0, 0] = cfg.m
    h[np.arange(1, n + 1), np.arange(1, n + 1)] = g.nodes
    row = cfg.coupling * np.sqrt(g.weights)
    h[0, 1:] = row
    h[1:, 0] = row
    return DiscreteHamiltonian(h, g)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace matrix on ``span(|1>, |k>)``.

    ``factors`` optionally holds ``(p, vectors)`` with ``rho = sum p_i v_i v_i^H``.
    """

    matrix: np.ndarray
    factors: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        r = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", r)
        if r.ndim != 2 or r.shape[0] != r.shape[1]:
            raise ValueError("density matrix must be square")
        if np.max(np.abs(r - r.conj().T)) > 1e-12:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(r) - 1.0) > 1e-12:
            raise ValueError("density matrix must have unit trace")

    @classmethod
    def pure(cls, psi) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()), (np.ones(1), psi[:, None]))

    @classmethod
    def discrete(cls, n: int) -> "DensityMatrix":
        """All population on ``|1>`` for a grid of `n` nodes."""
        psi = np.zeros(n + 1)
        psi[0] = 1.0
        return cls.pure(psi)

    def decompose(self, tol: float = 1e-14) -> tuple[np.ndarray, np.ndarray]:
        """``(p, V)`` with ``rho = V diag(p) V^H`` keeping ``p > tol``."""
        if self.factors is not None:
            return self.factors
        p, v = np.linalg.eigh(self.matrix)
        keep = p > tol
        return p[keep], v[:, keep]

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix)[0])


class ExactPropagator:
    """Exact evolution ``rho_t = exp(-iHt) rho exp(iHt)`` via the eigenbasis of ``H``."""

    def __init__(self, hamiltonian: DiscreteHamiltonian):
        self.hamiltonian = hamiltonian
        self.energies, self.vectors = hamiltonian.eigh

    def evolve_vectors(self, vectors: np.ndarray, times) -> np.ndarray:
        """``psi(t)`` for each column of `vectors`; shape ``(len(times), dim, ncols)``."""
        u = self.vectors
        c = u.conj().T @ vectors
        times = np.atleast_1d(np.asarray(times, dtype=float))
        out = np.empty((times.size, u.shape[0], vectors.shape[1]), dtype=complex)
        for i, t in enumerate(times):
            out[i] = u @ (np.exp(-1j * self.energies * t)[:, None] * c)
        return out

    def evolve(self, rho: DensityMatrix, t: float) -> DensityMatrix:
        u = self.vectors
        phase = np.exp(-1j * self.energies * t)
        inner = u.conj().T @ rho.matrix @ u
        r = u @ (phase[:, None] * inner * phase.conj()[None, :]) @ u.conj().T
        r = 0.5 * (r + r.conj().T)
        return DensityMatrix(r)


def exact_evolve(rho: DensityMatrix, H: DiscreteHamiltonian, t: float) -> DensityMatrix:
    if rho.matrix.shape != H.matrix.shape:
        raise ValueError("density matrix and Hamiltonian dimensions differ")
    return ExactPropagator(H).evolve(rho, t)


def matrix_to_functional(rho, grid: FrequencyGrid) -> StateFunctional:
    """Map a density matrix to functional components (matrix diagonal -> singular part)."""
    r = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    n = grid.size
    if r.shape != (n + 1, n + 1):
        raise ValueError("density matrix size does not match the grid")
    w = grid.weights
    sw = np.sqrt(w)
    block = r[1:, 1:]
    kernel = block / np.outer(sw, sw)
    np.fill_diagonal(kernel, 0.0)
    return StateFunctional.from_components(
        [r[0, 0], np.diag(block) / w, r[0, 1:] / sw, r[1:, 0] / sw, kernel], grid
    )


def functional_to_matrix(state: StateFunctional) -> np.ndarray:
    """Inverse of :func:`matrix_to_functional` (the kernel diagonal is added to the singular part)."""
    g = state.grid
    w = g.weights
    sw = np.sqrt(w)
    n = g.size
    r = np.zeros((n + 1, n + 1), dtype=complex)
    r[0, 0] = state.rho1
    r[0, 1:] = state.rho_1omega * sw
    r[1:, 0] = state.rho_omega1 * sw
    r[1:, 1:] = state.rho_kernel * np.outer(sw, sw)
    r[np.arange(1, n + 1), np.arange(1, n + 1)] += state.rho_omega * w
    return r


def observable_to_matrix(obs: Observable) -> np.ndarray:
    """Matrix of an observable in the ``sqrt(w)``-normalised basis.

    ``O[k, k] = O_w[k] + w_k O_ww[k, k]``: the singular part is order one on
    the diagonal, the regular kernel contributes with its weight.
    """
    g = obs.grid
    w = g.weights
    sw = np.sqrt(w)
    n = g.size
    o = np.zeros((n + 1, n + 1), dtype=complex)
    o[0, 0] = obs.o1
    o[0, 1:] = obs.o_1omega * sw
    o[1:, 0] = obs.o_omega1 * sw
    o[1:, 1:] = obs.o_kernel * np.outer(sw, sw)
    o[np.arange(1, n + 1), np.arange(1, n + 1)] += obs.o_omega
    return o


def matrix_to_observable(mat: np.ndarray, grid: FrequencyGrid) -> Observable:
    """Observable whose matrix is `mat`, with the whole diagonal in the singular part."""
    sw = np.sqrt(grid.weights)
    block = mat[1:, 1:]
    kernel = block / np.outer(sw, sw)
    np.fill_diagonal(kernel, 0.0)
    return Observable.from_components(
        [mat[0, 0], np.diag(block).copy(), mat[0, 1:] / sw, mat[1:, 0] / sw, kernel], grid
    )


def fit_decay_rate(samples, gamma_guess: float | None = None) -> float:
    """Least-squares rate from ``ln(survival)`` over ``t in [0.1, 1]/gamma_guess``.

    The window skips the quadratic onset at small t.  With no guess (or a zero
    guess) every sample with ``t > 0`` is used.
    """
    data = np.asarray(samples, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2 or data.shape[0] < 10:
        raise DecayFitError("need at least 10 (t, survival) samples")
    t, s = data[:, 0], data[:, 1]
    if gamma_guess:
        sel = (t >= 0.1 / gamma_guess) & (t <= 1.0 / gamma_guess)
    else:
        sel = t > 0
    if sel.sum() < 3:
        raise DecayFitError("fewer than 3 samples inside the fit window")
    if np.any(s[sel] <= 0):
        raise DecayFitError("non-positive survival inside the fit window")
    slope, _ = np.polyfit(t[sel], np.log(s[sel]), 1)
    return float(-slope)


@dataclass
class ComparisonReport:
    """Engine against oracle on a shared time grid.

    Deviations are sup over the time grid of: absolute difference for ``rho1``;
    cumulative-distribution distance for ``rho_omega`` (the engine puts the
    decayed population into a grid delta, the oracle into a narrow line);
    weighted L2 norms for the coherences and the kernel.
    """

    times: np.ndarray
    deviations: dict
    gamma_fit: float
    gamma_theory: float
    coherence_rate_error: float | None
    trace_drift_engine: float
    trace_drift_oracle: float
    within_window: bool
    runtime: dict

    @property
    def gamma_relative_error(self) -> float:
        if self.gamma_theory == 0:
            return abs(self.gamma_fit)
        return abs(self.gamma_fit - self.gamma_theory) / self.gamma_theory

    def summary(self) -> dict:
        out = {f"sup_dev_{k}": v for k, v in self.deviations.items()}
        out.update(
            gamma_fit=self.gamma_fit,
            gamma_theory=self.gamma_theory,
            gamma_relative_error=self.gamma_relative_error,
            coherence_rate_error=self.coherence_rate_error,
            trace_drift_engine=self.trace_drift_engine,
            trace_drift_oracle=self.trace_drift_oracle,
            within_window=self.within_window,
        )
        out.update({f"runtime_{k}": v for k, v in self.runtime.items()})
        return out


DEVIATION_COMPONENTS = ("rho1", "rho_omega", "rho_1omega", "rho_omega1", "rho_kernel")


def _oracle_parts(psi: np.ndarray, p: np.ndarray, grid: FrequencyGrid, kernel: bool) -> dict:
    """Functional components of ``sum_i p_i psi_i psi_i^H`` without forming the matrix."""
    w = grid.weights
    sw = np.sqrt(w)
    top, rest = psi[0], psi[1:]
    row = rest.conj() @ (p * top)
    parts = {
        "rho1": complex(np.sum(p * np.abs(top) ** 2)),
        "rho_omega": (np.abs(rest) ** 2 @ p) / w,
        "rho_1omega": row / sw,
        "rho_omega1": row.conj() / sw,
    }
    if kernel:
        k = (rest * p[None, :]) @ rest.conj().T / np.outer(sw, sw)
        np.fill_diagonal(k, 0.0)
        parts["rho_kernel"] = k
    return parts


def _component_deviation(e: StateFunctional, o: dict, components) -> dict:
    w = e.grid.weights
    out = {}
    for name in components:
        d = getattr(e, name) - o[name]
        if name == "rho1":
            out[name] = abs(d)
        elif name == "rho_omega":
            out[name] = float(np.max(np.abs(np.cumsum(w * d))))
        elif name == "rho_kernel":
            out[name] = float(np.sqrt(np.sum(np.outer(w, w) * np.abs(d) ** 2)))
        else:
            out[name] = float(np.sqrt(np.sum(w * np.abs(d) ** 2)))
    return out


def compare_evolutions(cfg: ModelConfig, rho0: DensityMatrix, times,
                       propagator: ExactPropagator | None = None,
                       components=DEVIATION_COMPONENTS) -> ComparisonReport:
    """Run both evolutions from `rho0` and summarise their disagreement.

    The decay rate is fitted to ``rho1(t) / rho1(0)`` of the oracle.  The
    coherence check follows ``|rho_1w|`` at the resonant node against
    ``exp(-Gamma t / 2)`` for ``t <= lam^-2 / 2``; it is ``None`` when that
    coherence starts at zero.  Leaving ``"rho_kernel"`` out of `components`
    skips all N x N work on the oracle side.
    """
    unknown = set(components) - set(DEVIATION_COMPONENTS)
    if unknown:
        raise ValueError(f"unknown components: {sorted(unknown)}")
    from .evolution import evolve_lambda2t
    from .intermediate import spectral_modes

    g = cfg.grid
    times = np.asarray(times, dtype=float)
    t0 = time.perf_counter()
    prop = propagator or ExactPropagator(build_hamiltonian(cfg))
    p, vecs = rho0.decompose()
    t_setup = time.perf_counter() - t0

    state0 = matrix_to_functional(rho0, g)
    sd = spectral_modes(cfg)
    tr0 = trace(state0).real
    km = cfg.k_m
    t_oracle = t_engine = 0.0
    devs: dict = {}
    rho1_or, coh_or, drift_e, drift_o = [], [], 0.0, 0.0
    from .evolution import regime_warning

    regime_warning(cfg, times)
    # one time at a time: each functional holds an N x N kernel
    for t in times:
        t0 = time.perf_counter()
        psi = prop.evolve_vectors(vecs, [t])[0]
        o = _oracle_parts(psi, p, g, "rho_kernel" in components)
        t1 = time.perf_counter()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RegimeWarning)
            e = evolve_lambda2t(state0, t, cfg, sd, check=False)
        t_engine += time.perf_counter() - t1
        t_oracle += t1 - t0
        for k, v in _component_deviation(e, o, components).items():
            devs[k] = max(devs.get(k, 0.0), v)
        rho1_or.append(o["rho1"].real)
        coh_or.append(abs(o["rho_1omega"][km]))
        drift_e = max(drift_e, abs(trace(e) - tr0))
        drift_o = max(drift_o, abs(o["rho1"] + g.integrate(o["rho_omega"]) - tr0))

    gamma = cfg.gamma
    s0 = state0.rho1.real
    surv = np.column_stack([times, np.array(rho1_or) / s0]) if s0 > 0 else None
    gamma_fit = float("nan")
    if surv is not None:
        try:
            gamma_fit = fit_decay_rate(surv, gamma)
        except DecayFitError:
            # e.g. the fit window holds too few samples at large coupling
            pass

    c0 = abs(state0.rho_1omega[km])
    coh = None
    if c0 > 1e-12:
        limit = 0.5 / cfg.lam**2 if cfg.lam > 0 else np.inf
        sel = times <= limit
        ratio = np.array(coh_or) / (c0 * np.exp(-0.5 * gamma * times))
        coh = float(np.max(np.abs(ratio[sel] - 1.0)))

    window = cfg.lam == 0 or float(times.max()) <= cfg.lam**-2 * (1 + 1e-12)
    return ComparisonReport(
        times=times,
        deviations=devs,
        gamma_fit=gamma_fit,
        gamma_theory=gamma,
        coherence_rate_error=coh,
        trace_drift_engine=float(drift_e),
        trace_drift_oracle=float(drift_o),
        within_window=window,
        runtime={"oracle_setup": t_setup, "oracle": t_oracle, "engine": t_engine},
    )
