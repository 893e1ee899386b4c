"""Intermediate operator, similarity transformation and the complex spectral table."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .creation import build_C1, build_D1
from .functional import COMPONENTS, Observable, StateFunctional, pair
from .grid import ModelConfig
from .resolvent import SelfEnergyBeta, compute_beta
from .superop import SuperOperator, liouville, liouville_interaction, projector

__all__ = [
    "build_theta2",
    "build_omega1",
    "isospectral_residual",
    "transport_left",
    "theta1_printed_difference",
    "Mode",
    "SpectralDecomposition",
    "spectral_modes",
    "FAMILIES",
]


def build_theta2(n: int, cfg: ModelConfig) -> SuperOperator:
    """Second-order intermediate operator ``P_n L P_n + P_n C_n(1) L1 P_n``."""
    P = projector(cfg.grid, n)
    return P @ liouville(cfg) @ P + P @ build_C1(n, cfg) @ liouville_interaction(cfg) @ P


def build_omega1(cfg: ModelConfig) -> tuple[SuperOperator, SuperOperator]:
    """First-order ``Omega^dagger`` and its inverse: ``sum_n P_n + C_n(1)`` and ``sum_n P_n + D_n(1)``."""
    eye = SuperOperator.identity(cfg.grid)
    omega = eye
    omega_inv = eye
    for n in (0, 1, 2):
        omega = omega + build_C1(n, cfg)
        omega_inv = omega_inv + build_D1(n, cfg)
    return omega, omega_inv


def isospectral_residual(cfg: ModelConfig, observables, order: str = "adjoint") -> float:
    """Largest ``||S O - Theta O|| / ||O||`` over `observables`.

    ``L^dagger = (Omega^dagger)^-1 Theta^dagger Omega^dagger`` means that
    ``Theta`` is recovered as ``S = Omega L Omega^-1`` when the operators act
    on observables (``order="adjoint"``).  ``order="literal"`` evaluates the
    other product ``Omega^-1 L Omega``, which differs at first order and is
    kept only as a diagnostic.
    """
    omega, omega_inv = build_omega1(cfg)
    if order == "literal":
        omega, omega_inv = omega_inv, omega
    elif order != "adjoint":
        raise ValueError(f"order must be 'adjoint' or 'literal', got {order!r}")
    L = liouville(cfg)
    theta = build_theta2(0, cfg) + build_theta2(1, cfg) + build_theta2(2, cfg)
    worst = 0.0
    for obs in observables:
        lhs = omega.apply(L.apply(omega_inv.apply(obs)))
        worst = max(worst, (lhs - theta.apply(obs)).norm() / obs.norm())
    return worst


def transport_left(state: StateFunctional, op: SuperOperator) -> StateFunctional:
    """The functional ``O -> (state|op O)``, i.e. ``(state| op`` (dense; small grids)."""
    g = state.grid
    row = _pairing_row(state).conj() @ op.to_dense()
    # invert the pairing row: divide out the weights, conjugate back
    w = g.weights
    n = g.size
    parts = [row[:1], row[1:1 + n] / w, row[1 + n:1 + 2 * n] / w, row[1 + 2 * n:1 + 3 * n] / w,
             (row[1 + 3 * n:] / np.outer(w, w).ravel()).reshape(n, n)]
    return StateFunctional.from_components([np.conj(parts[0][0])] + [np.conj(p) for p in parts[1:]], g)


def theta1_printed_difference(cfg: ModelConfig) -> dict:
    """Off-diagonal gap between the printed degree-1 coupling kernels and the composed ``Theta_1``.

    The printed kernels place some resolvent denominators on the incoming
    frequency where composing ``C_1 L1`` puts them on the outgoing one.  Returns
    the max relative difference per block ``(target, source)``; dense, small
    grids only.
    """
    from .resolvent import gap_density

    g = cfg.grid
    n = g.size
    w = g.weights
    v = cfg.coupling
    r_mw = {s: gap_density(cfg, -1, s) for s in (1, -1)}   # 1/(m - w + s i0)
    r_wm = {s: gap_density(cfg, 1, s) for s in (1, -1)}    # 1/(w - m + s i0)
    vv = np.outer(v, v) * w[None, :]  # [out, in]
    printed = {
        ("1w", "1w"): vv * r_mw[1][None, :],
        ("w1", "w1"): vv * (r_mw[1][None, :] + r_wm[1][:, None]),
        ("w1", "1w"): vv * r_mw[-1][:, None],
        ("1w", "w1"): vv * (r_wm[1][None, :] + r_wm[-1][:, None]),
    }
    dense = build_theta2(1, cfg).to_dense()
    sl = {"1w": slice(1 + n, 1 + 2 * n), "w1": slice(1 + 2 * n, 1 + 3 * n)}
    off = ~np.eye(n, dtype=bool)
    out = {}
    for (tgt, src), kern in printed.items():
        comp = dense[sl[tgt], sl[src]]
        scale = max(np.max(np.abs(comp[off])), 1e-300)
        out[(tgt, src)] = float(np.max(np.abs(comp[off] - kern[off])) / scale)
    return out


# -- complex spectral decomposition ---------------------------------------

FAMILIES = ("omega", "1", "1omega", "omega1", "omegaomega")
_FAMILY_DEGREE = {"omega": 0, "1": 0, "1omega": 1, "omega1": 1, "omegaomega": 2}


@dataclass(frozen=True)
class Mode:
    degree: int
    family: str
    label: tuple
    eigenvalue: complex
    right: Observable
    left: StateFunctional


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Generalised eigenvalues (second order) and eigenvectors (zeroth order) of Theta.

    Modes are stored per family as label and eigenvalue arrays; the right and
    left vectors are generated on demand by :meth:`right` / :meth:`left`.
    Continuum labels carry grid-delta normalisation, so biorthogonality reads
    ``(u_a|u~_b) = delta_grid(a, b)`` and completeness sums continuum labels
    with the quadrature weights.
    """

    cfg: ModelConfig
    beta: SelfEnergyBeta
    eigenvalues: dict = field(repr=False)

    @property
    def grid(self):
        return self.cfg.grid

    def labels(self, family: str) -> list:
        n = self.grid.size
        if family == "1":
            return [()]
        if family == "omegaomega":
            return [(k, l) for k in range(n) for l in range(n)]
        return [(k,) for k in range(n)]

    def measure(self, family: str, label: tuple) -> float:
        """Weight of a mode in completeness sums (1 for the discrete mode)."""
        w = self.grid.weights
        return float(np.prod([w[k] for k in label])) if label else 1.0

    def eigenvalue(self, family: str, label: tuple = ()) -> complex:
        z = self.eigenvalues[family]
        return complex(z[label] if label else z)

    def right(self, family: str, label: tuple = ()) -> Observable:
        g = self.grid
        comps = dict(zip(COMPONENTS, Observable.zeros(g).components()))
        comps = {k: np.array(v) for k, v in comps.items()}
        km = self.cfg.k_m
        if family == "1":
            comps["1"] = np.array(1.0 + 0j)
        elif family == "omega":
            (k,) = label
            comps["1"] = np.array(1.0 / g.weights[km] if k == km else 0.0, dtype=complex)
            comps["w"] = g.delta(k) + 0j
        elif family == "1omega":
            comps["1w"] = g.delta(label[0]) + 0j
        elif family == "omega1":
            comps["w1"] = g.delta(label[0]) + 0j
        elif family == "omegaomega":
            k, l = label
            comps["ww"] = np.outer(g.delta(k), g.delta(l)) + 0j
        else:
            raise KeyError(family)
        return Observable.from_components([comps[c] for c in COMPONENTS], g)

    def left(self, family: str, label: tuple = ()) -> StateFunctional:
        g = self.grid
        if family == "1":
            st = StateFunctional.zeros(g)
            return StateFunctional.from_components(
                [1.0, -g.delta(self.cfg.k_m), st.rho_1omega, st.rho_omega1, st.rho_kernel], g
            )
        obs = self.right(family, label)
        if family == "omega":
            obs = Observable.from_components([0.0, *obs.components()[1:]], g)
        return StateFunctional.from_components(obs.components(), g)

    def modes(self, degree: int | None = None):
        """Iterate over all modes (use small grids: there are ``N**2`` kernel modes)."""
        for family in FAMILIES:
            if degree is not None and _FAMILY_DEGREE[family] != degree:
                continue
            for label in self.labels(family):
                yield Mode(
                    _FAMILY_DEGREE[family], family, label, self.eigenvalue(family, label),
                    self.right(family, label), self.left(family, label),
                )

    def coefficients(self, rho: StateFunctional) -> dict:
        """``(rho|u~_a)`` for every mode, vectorised per family."""
        g = self.grid
        km = self.cfg.k_m
        return {
            "1": np.conj(rho.rho1),
            "omega": np.conj(rho.rho_omega) + np.where(np.arange(g.size) == km,
                                                       np.conj(rho.rho1) / g.weights[km], 0.0),
            "1omega": np.conj(rho.rho_1omega),
            "omega1": np.conj(rho.rho_omega1),
            "omegaomega": np.conj(rho.rho_kernel),
        }

    def resolve(self, obs: Observable, degree: int) -> Observable:
        """``sum_a |u~_a)(u_a|O`` over the modes of one degree (vectorised)."""
        g = self.grid
        zero = Observable.zeros(g)
        if degree == 0:
            # mode "1" gives O_1 - O_w(m); the omega modes give back O_w(m)
            return Observable.from_components([obs.o1, obs.o_omega, zero.o_1omega,
                                               zero.o_omega1, zero.o_kernel], g)
        if degree == 1:
            return Observable.from_components([0.0, zero.o_omega, obs.o_1omega,
                                               obs.o_omega1, zero.o_kernel], g)
        if degree == 2:
            return Observable.from_components([0.0, zero.o_omega, zero.o_1omega,
                                               zero.o_omega1, obs.o_kernel], g)
        raise ValueError(f"degree of correlation must be 0, 1 or 2, got {degree!r}")

    def mode_matrices(self, degree: int | None = None):
        """Sparse ``(rows, rights, measures)`` for all modes of a degree.

        Row ``a`` of `rows` is the pairing row of ``(u_a|`` and row ``a`` of
        `rights` the flattened ``|u~_a)``, both over the ``1 + 3N + N**2``
        coordinates.  Every mode has at most two nonzeros, so this scales to
        the full grid.
        """
        g = self.grid
        n = g.size
        w = g.weights
        km = self.cfg.k_m
        k = np.arange(n)
        rows, rights, meas = [], [], []
        dim = 1 + 3 * n + n * n

        def block(r_idx, r_val, u_idx, u_val, count):
            rows.append((r_idx, r_val, count))
            rights.append((u_idx, u_val, count))

        for family in FAMILIES:
            if degree is not None and _FAMILY_DEGREE[family] != degree:
                continue
            if family == "1":
                block([(0, 0), (0, 1 + km)], [1.0, -1.0], [(0, 0)], [1.0], 1)
                meas.append(np.ones(1))
            elif family == "omega":
                block([(k, 1 + k)], [np.ones(n)],
                      [(k, 1 + k), (np.array([km]), np.array([0]))], [1.0 / w, np.array([1.0 / w[km]])], n)
                meas.append(w)
            elif family in ("1omega", "omega1"):
                off = 1 + n if family == "1omega" else 1 + 2 * n
                block([(k, off + k)], [np.ones(n)], [(k, off + k)], [1.0 / w], n)
                meas.append(w)
            else:
                kk = np.arange(n * n)
                ww = np.outer(w, w).ravel()
                block([(kk, 1 + 3 * n + kk)], [np.ones(n * n)], [(kk, 1 + 3 * n + kk)], [1.0 / ww], n * n)
                meas.append(ww)

        def assemble(parts):
            mats = []
            for idx, vals, count in parts:
                i = np.concatenate([np.atleast_1d(a) for a, _ in idx])
                j = np.concatenate([np.atleast_1d(b) for _, b in idx])
                v = np.concatenate([np.broadcast_to(np.asarray(x, dtype=complex), np.atleast_1d(a).shape)
                                    for (a, _), x in zip(idx, vals)])
                mats.append(sparse.csr_matrix((v, (i, j)), shape=(count, dim)))
            return sparse.vstack(mats).tocsr()

        return assemble(rows), assemble(rights), np.concatenate(meas)

    def biorthogonality_residual_sparse(self) -> float:
        """Same quantity as :meth:`biorthogonality_residual`, from sparse mode matrices."""
        rows, rights, meas = self.mode_matrices()
        gram = (rows.conj() @ rights.T).tocoo()
        dev = gram - sparse.diags(1.0 / meas)
        return float(abs(dev).max() / np.max(1.0 / meas))

    def completeness_residual_sparse(self, degree: int) -> float:
        """Max entry of ``sum_a measure_a |u~_a)(u_a| - P_n`` as a coordinate matrix."""
        g = self.grid
        n = g.size
        rows, rights, meas = self.mode_matrices(degree)
        op = rights.T @ sparse.diags(meas) @ rows.conj()
        lo, hi = {0: (0, 1 + n), 1: (1 + n, 1 + 3 * n), 2: (1 + 3 * n, 1 + 3 * n + n * n)}[degree]
        target = np.zeros(op.shape[0])
        target[lo:hi] = 1.0
        dev = op - sparse.diags(target)
        return float(abs(dev).max()) if dev.nnz else 0.0

    def biorthogonality_residual(self) -> float:
        """Max deviation of ``(u_a|u~_b)`` from ``delta_grid(a, b)`` over all mode pairs.

        Builds dense mode matrices; small grids only.
        """
        lefts, rights, diag = [], [], []
        for mode in self.modes():
            lefts.append(_pairing_row(mode.left))
            rights.append(mode.right.flatten())
            diag.append(1.0 / self.measure(mode.family, mode.label))
        gram = np.conj(np.array(lefts)) @ np.array(rights).T
        return float(np.max(np.abs(gram - np.diag(diag))) / max(diag))

    def completeness_residual(self, observables, degree: int) -> float:
        """Brute-force ``sum_a measure_a |u~_a)(u_a|O`` against ``project(O, n)``."""
        from .functional import project

        worst = 0.0
        modes = list(self.modes(degree))
        for obs in observables:
            acc = Observable.zeros(self.grid)
            for mode in modes:
                c = self.measure(mode.family, mode.label) * pair(mode.left, obs)
                acc = acc + mode.right * c
            target = project(obs, degree)
            worst = max(worst, (acc - target).norm() / max(obs.norm(), 1e-300))
        return worst


def _pairing_row(state: StateFunctional) -> np.ndarray:
    """Row vector r with ``pair(state, O) = conj(r) . O.flatten()``."""
    w = state.grid.weights
    s = state.components()
    return np.concatenate([
        np.atleast_1d(s[0]), w * s[1], w * s[2], w * s[3], np.ravel(np.outer(w, w) * s[4]),
    ])


def spectral_modes(cfg: ModelConfig, beta: SelfEnergyBeta | None = None) -> SpectralDecomposition:
    """Eigenvalue table of the second-order intermediate operator."""
    beta = beta or compute_beta(cfg)
    x = cfg.grid.nodes
    b = beta.value
    z = {
        "omega": np.zeros(x.size, dtype=complex),
        "1": complex(0.0, cfg.gamma),
        "1omega": cfg.m - x - b,
        # diagonal of Theta_1 on |w 1): w - m + beta^*, i.e. -conj(z_1w)
        "omega1": x - cfg.m + np.conj(b),
        "omegaomega": (x[:, None] - x[None, :]) + 0j,
    }
    return SpectralDecomposition(cfg, beta, z)
