import numpy as np
import pytest

from conftest import random_observable
from subdynamics import (
    FormFactor,
    ModelConfig,
    SuperOperator,
    build_C1,
    build_omega1,
    build_theta2,
    compute_beta,
    isospectral_residual,
    liouville_free,
    project,
    projector,
    spectral_modes,
)
from subdynamics.functional import basis_observable, pair
from subdynamics.intermediate import theta1_printed_difference, transport_left
from subdynamics.resolvent import beta_on_grid, gap_density


@pytest.fixture
def gcfg():
    return ModelConfig.build(n=16, lam=0.1, form_factor=FormFactor("gaussian-bump"))


def _slices(n):
    return slice(1 + n, 1 + 2 * n), slice(1 + 2 * n, 1 + 3 * n)


@pytest.mark.parametrize("n", [0, 1, 2])
def test_zero_coupling_theta_is_free(n):
    cfg = ModelConfig.build(n=8, lam=0.0)
    P = projector(cfg.grid, n)
    expected = (P @ liouville_free(cfg) @ P).to_dense()
    assert np.array_equal(build_theta2(n, cfg).to_dense(), expected)


def test_theta_block_diagonal(gcfg):
    for n in (0, 1, 2):
        T = build_theta2(n, gcfg).to_dense()
        for m in (0, 1, 2):
            Pm = projector(gcfg.grid, m).to_dense()
            Pn = projector(gcfg.grid, n).to_dense()
            if m != n:
                assert not np.any(Pm @ T @ Pm)
        assert np.array_equal(Pn @ T @ Pn, T)


def test_theta0_rank_one_form(gcfg, rng):
    T0 = build_theta2(0, gcfg)
    z1 = 1j * gcfg.gamma
    e1 = basis_observable(gcfg.grid, "1")
    assert (T0.apply(e1) - e1 * z1).norm() <= 1e-8 * e1.norm()
    for _ in range(5):
        obs = random_observable(gcfg.grid, rng)
        out = T0.apply(obs)
        assert abs(out.o1 - z1 * (obs.o1 - obs.o_omega[gcfg.k_m])) < 1e-12
        assert out.norm() == pytest.approx(abs(out.o1), rel=1e-14)


def test_theta1_diagonal_parts(gcfg):
    g = gcfg.grid
    n, w, v, x = g.size, g.weights, gcfg.coupling, g.nodes
    b = beta_on_grid(gcfg)
    M = build_theta2(1, gcfg).to_dense()
    s1w, sw1 = _slices(n)
    kern_1w = np.outer(v, v) * w[None, :] * gap_density(gcfg, -1, 1)[:, None]
    kern_w1 = np.outer(v, v) * w[None, :] * gap_density(gcfg, 1, 1)[:, None]
    assert np.max(np.abs(M[s1w, s1w] - np.diag(gcfg.m - x - b) - kern_1w)) < 1e-12
    # the conjugate partner carries +beta^*, keeping Theta_1 consistent with hermiticity
    assert np.max(np.abs(M[sw1, sw1] - np.diag(x - gcfg.m + np.conj(b)) - kern_w1)) < 1e-12


def test_grid_beta_converges_to_compute_beta():
    cfg = ModelConfig.build(n=2000, lam=0.1, cutoff=4.0, form_factor=FormFactor("gaussian-bump"))
    assert abs(beta_on_grid(cfg) - compute_beta(cfg).value) < 1e-8


def test_printed_coupling_kernels_diagnostic(gcfg):
    diff = theta1_printed_difference(gcfg)
    assert diff[("1w", "w1")] < 1e-12
    # the remaining printed blocks are not what composing C_1 L1 produces
    assert diff[("1w", "1w")] > 0.1


def _iso(n, lam, order="adjoint"):
    cfg = ModelConfig.build(n=n, lam=lam, form_factor=FormFactor("gaussian-bump"))
    obs_rng = np.random.default_rng(7)
    obs = [random_observable(cfg.grid, obs_rng) for _ in range(3)]
    return isospectral_residual(cfg, obs, order=order)


def test_isospectral_adjoint_second_order():
    # second order dominates once lam is large against the stencil term below
    assert _iso(24, 0.1) / _iso(24, 0.05) == pytest.approx(4.0, rel=0.1)


def test_isospectral_literal_first_order():
    assert _iso(24, 0.01, "literal") / _iso(24, 0.005, "literal") == pytest.approx(2.0, rel=0.05)
    with pytest.raises(ValueError):
        _iso(10, 0.01, "sideways")


def test_isospectral_stencil_term_shrinks_with_grid():
    # the O(lam) remainder lives on the stencil neighbours of the anchor node
    coarse = _iso(10, 1e-4) / 1e-4
    fine = _iso(60, 1e-4) / 1e-4
    assert fine < coarse / 2


def test_left_transport_by_omega(gcfg):
    sd = spectral_modes(gcfg)
    omega, _ = build_omega1(gcfg)
    eye = SuperOperator.identity(gcfg.grid)
    for fam, label, deg in [("1", (), 0), ("omega", (3,), 0), ("1omega", (4,), 1),
                            ("omega1", (gcfg.k_m,), 1), ("omegaomega", (2, 5), 2)]:
        u = sd.left(fam, label)
        f = transport_left(u, omega)
        assert f.max_abs_diff(transport_left(u, eye + build_C1(deg, gcfg))) < 1e-12
        assert transport_left(u, eye).max_abs_diff(u) < 1e-12


# -- spectral decomposition ---------------------------------------------------

def test_eigenvalue_table(gcfg):
    sd = spectral_modes(gcfg)
    beta = compute_beta(gcfg).value
    x = gcfg.grid.nodes
    assert sd.eigenvalue("1") == pytest.approx(2j * np.pi * gcfg.lam**2 * gcfg.form_factor(gcfg.m) ** 2,
                                               abs=1e-15)
    assert np.all(sd.eigenvalues["omega"] == 0)
    assert np.max(np.abs(sd.eigenvalues["1omega"] - (gcfg.m - x - beta))) < 1e-10
    assert np.max(np.abs(sd.eigenvalues["omega1"] - (x - gcfg.m + np.conj(beta)))) < 1e-10
    assert np.max(np.abs(sd.eigenvalues["omegaomega"] - np.subtract.outer(x, x))) < 1e-10
    assert np.all(sd.eigenvalues["omegaomega"].imag == 0)
    # degree-1 eigenvalues come in conjugate-negated pairs
    assert np.allclose(sd.eigenvalues["omega1"], -np.conj(sd.eigenvalues["1omega"]), atol=1e-15)


def test_flat_decay_eigenvalue():
    sd = spectral_modes(ModelConfig.build(n=40, lam=0.1))
    assert sd.eigenvalue("1") == pytest.approx(0.0628318530718j, abs=1e-12)


def test_biorthogonality(gcfg):
    sd = spectral_modes(gcfg)
    assert sd.biorthogonality_residual() <= 1e-8
    assert sd.biorthogonality_residual_sparse() <= 1e-8
    u1 = sd.left("1")
    for k in range(gcfg.grid.size):
        assert abs(pair(u1, sd.right("omega", (k,)))) < 1e-12


@pytest.mark.parametrize("degree", [0, 1, 2])
def test_completeness(gcfg, rng, degree):
    sd = spectral_modes(gcfg)
    obs = [random_observable(gcfg.grid, rng) for _ in range(20)]
    assert sd.completeness_residual(obs, degree) <= 1e-8
    assert sd.completeness_residual_sparse(degree) <= 1e-8
    for o in obs[:3]:
        assert sd.resolve(o, degree).max_abs_diff(project(o, degree)) < 1e-12


def test_discrete_mode_residual(gcfg):
    sd = spectral_modes(gcfg)
    u = sd.right("1")
    out = build_theta2(0, gcfg).apply(u) - u * sd.eigenvalue("1")
    assert out.norm() <= 1e-8 * u.norm()
    # the omega modes are annihilated by Theta_0
    for k in (0, gcfg.k_m, 9):
        assert build_theta2(0, gcfg).apply(sd.right("omega", (k,))).norm() < 1e-12


def test_mode_iteration_counts(gcfg):
    sd = spectral_modes(gcfg)
    n = gcfg.grid.size
    assert len(list(sd.modes(0))) == n + 1
    assert len(list(sd.modes(1))) == 2 * n
    assert sum(1 for _ in sd.modes(2)) == n * n
