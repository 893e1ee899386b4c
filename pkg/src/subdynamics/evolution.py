"""State evolution in the lambda^2 t approximation."""

from __future__ import annotations

import warnings

import numpy as np

from .functional import StateFunctional
from .grid import ModelConfig, RegimeWarning
from .intermediate import SpectralDecomposition, spectral_modes

__all__ = ["evolve_lambda2t", "evolve_closed_form", "regime_flags", "regime_warning"]


def regime_flags(cfg: ModelConfig, t: float) -> dict:
    """Which validity conditions of the truncation hold at time `t`."""
    lam = cfg.lam
    return {
        "weak_coupling": lam < 0.3,
        "time_window": lam == 0.0 or t <= lam**-2 * (1 + 1e-12),
        "forward_time": t >= 0,
    }


def _warn_regime(cfg, t, stacklevel=3):
    flags = regime_flags(cfg, t)
    if not flags["weak_coupling"]:
        warnings.warn(f"lambda={cfg.lam} >= 0.3: outside the weak-coupling regime",
                      RegimeWarning, stacklevel=stacklevel)
    if not flags["time_window"]:
        warnings.warn(f"t={t} exceeds lambda^-2={cfg.lam ** -2:g}", RegimeWarning, stacklevel=stacklevel)
    if not flags["forward_time"]:
        warnings.warn("t < 0: formal backward evolution of a forward-oriented semigroup",
                      RegimeWarning, stacklevel=stacklevel)


def regime_warning(cfg: ModelConfig, times) -> None:
    """Warn once for a whole time grid (checks its extremes)."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    with warnings.catch_warnings():
        warnings.simplefilter("always", RegimeWarning)
        _warn_regime(cfg, float(times.max()), stacklevel=4)
        if times.min() < 0:
            _warn_regime(cfg, float(times.min()), stacklevel=4)


def evolve_lambda2t(rho0: StateFunctional, t: float, cfg: ModelConfig,
                    spectrum: SpectralDecomposition | None = None,
                    check: bool = True) -> StateFunctional:
    """Evolve a state with second-order eigenvalues and zeroth-order eigenvectors.

    ``(rho_t| = sum_a exp(i z_a t) (rho_0|u~_a)(u_a|``, summed family by family.
    With ``check=True`` the result is compared against the closed-form
    component equations and a ``RuntimeError`` is raised on disagreement.
    """
    _warn_regime(cfg, t)
    sd = spectrum or spectral_modes(cfg)
    if t == 0:
        return rho0
    g = cfg.grid
    km = cfg.k_m
    c = sd.coefficients(rho0)
    z = sd.eigenvalues
    # stored components are conj((rho_t|basis)), hence the conjugated phases
    ph = {f: np.conj(np.exp(1j * z[f] * t) * c[f]) for f in z if f != "omegaomega"}
    # z = w - w' factorises, which avoids an N x N exponential
    cw = c["omegaomega"]
    if np.any(cw):
        e = np.exp(1j * g.nodes * t)
        ph["omegaomega"] = np.conj(np.outer(e, e.conj()) * cw)
    else:
        ph["omegaomega"] = np.zeros_like(cw)
    rho1 = ph["1"]
    # (u_1| carries -delta(w - m); (u_omega| = (omega|
    rho_omega = ph["omega"] + 0j
    rho_omega[km] -= rho1 / g.weights[km]
    out = StateFunctional.from_components(
        [rho1, rho_omega, ph["1omega"], ph["omega1"], ph["omegaomega"]], g
    )
    if check:
        ref = evolve_closed_form(rho0, t, cfg, sd.beta.value)
        scale = max(1.0, max(float(np.max(np.abs(a))) for a in map(np.atleast_1d, ref.components())))
        err = out.max_abs_diff(ref)
        if err > 1e-10 * scale:
            raise RuntimeError(f"mode sum disagrees with the closed form by {err:.3g}")
    return out


def evolve_closed_form(rho0: StateFunctional, t: float, cfg: ModelConfig,
                       beta: complex) -> StateFunctional:
    """Component-wise closed form of the truncated evolution.

    ``rho1 -> exp(-Gamma t) rho1``; ``rho_w`` gains ``(1 - exp(-Gamma t)) rho1
    delta(w - m)``; ``rho_1w -> exp(-i(m - w - beta^*) t) rho_1w``;
    ``rho_w1 -> exp(-i(w - m + beta) t) rho_w1``; ``rho_ww' -> exp(-i(w - w') t) rho_ww'``.
    """
    g = cfg.grid
    x = g.nodes
    decay = np.exp(-cfg.gamma * t)
    rho_omega = np.asarray(rho0.rho_omega, dtype=complex) + 0j
    rho_omega = rho_omega + (1.0 - decay) * rho0.rho1 * g.delta(cfg.k_m)
    return StateFunctional.from_components(
        [
            decay * rho0.rho1,
            rho_omega,
            np.exp(-1j * (cfg.m - x - np.conj(beta)) * t) * rho0.rho_1omega,
            np.exp(-1j * (x - cfg.m + beta) * t) * rho0.rho_omega1,
            np.outer(np.exp(-1j * x * t), np.exp(1j * x * t)) * rho0.rho_kernel,
        ],
        g,
    )
