import numpy as np
import pytest

from conftest import random_observable
from subdynamics import (
    Observable,
    SuperOperator,
    apply_L0_dagger,
    apply_L1_dagger,
    build_hamiltonian,
    identity_observable,
    liouville,
    liouville_free,
    liouville_interaction,
    project,
    projector,
)
from subdynamics.functional import basis_observable
from subdynamics.oracle import observable_to_matrix


def _split_hamiltonian(cfg):
    h = build_hamiltonian(cfg).matrix
    h0 = np.diag(np.diag(h))
    return h0, h - h0


@pytest.mark.parametrize("fixture", ["small_cfg", "gauss_cfg", "gl_cfg"])
def test_L0_and_L1_match_matrix_commutators(fixture, request, rng):
    cfg = request.getfixturevalue(fixture)
    h0, h1 = _split_hamiltonian(cfg)
    for _ in range(20):
        obs = random_observable(cfg.grid, rng)
        om = observable_to_matrix(obs)
        got0 = observable_to_matrix(apply_L0_dagger(obs, cfg))
        got1 = observable_to_matrix(apply_L1_dagger(obs, cfg))
        assert np.max(np.abs(got0 - (h0 @ om - om @ h0))) < 1e-12
        assert np.max(np.abs(got1 - (h1 @ om - om @ h1))) < 1e-12


def test_L0_examples(small_cfg):
    g = small_cfg.grid
    assert apply_L0_dagger(identity_observable(g), small_cfg).norm() == 0.0
    k = 5
    e = basis_observable(g, "1w", k)
    out = apply_L0_dagger(e, small_cfg)
    assert out.max_abs_diff(e * (small_cfg.m - g.nodes[k])) < 1e-12


def test_L1_examples(small_cfg, rng):
    g = small_cfg.grid
    zero = small_cfg.with_lambda(0.0)
    assert apply_L1_dagger(random_observable(g, rng), zero).norm() == 0.0
    out = apply_L1_dagger(basis_observable(g, "1"), small_cfg)
    v = small_cfg.coupling
    assert np.allclose(out.o_omega1, v, atol=1e-15, rtol=0)
    assert np.allclose(out.o_1omega, -v, atol=1e-15, rtol=0)
    assert out.o1 == 0 and not np.any(out.o_omega) and not np.any(out.o_kernel)


def test_correlation_degree_table(small_cfg, rng):
    g = small_cfg.grid
    P = {n: projector(g, n) for n in (0, 1, 2)}
    L1 = liouville_interaction(small_cfg)
    for _ in range(100):
        obs = random_observable(g, rng)
        assert (P[0] @ L1 @ P[1]).apply(obs).norm() > 1e-6
        assert (P[0] @ L1 @ P[2]).apply(obs).norm() == 0.0
        assert (P[0] @ L1 @ L1 @ P[2]).apply(obs).norm() > 1e-6


def test_projector_commutes_with_L0(small_cfg, rng):
    L0 = liouville_free(small_cfg)
    for _ in range(5):
        obs = random_observable(small_cfg.grid, rng)
        for n in (0, 1, 2):
            assert project(L0.apply(obs), n).max_abs_diff(L0.apply(project(obs, n))) == 0.0


def test_liouvillian_maps_self_adjoint_to_anti_self_adjoint(small_cfg, rng):
    g = small_cfg.grid
    o = random_observable(g, rng)
    herm = Observable.from_components(
        [o.o1.real, o.o_omega.real, o.o_1omega, o.o_1omega.conj(),
         0.5 * (o.o_kernel + o.o_kernel.conj().T)], g)
    out = liouville(small_cfg).apply(herm) * 1j
    assert out.is_self_adjoint(atol=1e-12)


def test_superoperator_algebra_matches_dense(small_cfg, rng):
    cfg = small_cfg.with_lambda(0.2)
    A = liouville(cfg)
    B = projector(cfg.grid, 1) + liouville_interaction(cfg) * 0.5
    dA, dB = A.to_dense(), B.to_dense()
    assert np.allclose((A @ B).to_dense(), dA @ dB, atol=1e-13)
    assert np.allclose((A + B).to_dense(), dA + dB, atol=1e-15)
    assert np.allclose((A - B * 2.0).to_dense(), dA - 2 * dB, atol=1e-15)
    obs = random_observable(cfg.grid, rng)
    assert np.allclose(A.apply(obs).flatten(), dA @ obs.flatten(), atol=1e-12)
    back = SuperOperator.from_dense(dA, cfg.grid)
    assert np.allclose(back.to_dense(), dA, atol=0)
    assert SuperOperator.identity(cfg.grid).apply(obs).max_abs_diff(obs) == 0.0


def test_support_and_restrict(small_cfg):
    L1 = liouville_interaction(small_cfg)
    assert ("1", "1") not in L1.support()
    r = L1.restrict({"1"}, {"1w", "w1"})
    assert r.support() <= {("1", "1w"), ("1", "w1")}
    assert r.support()
