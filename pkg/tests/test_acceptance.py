"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line (shown in the pytest terminal summary)
before asserting, so a failing criterion still reports its measured values.
Desk-scale runs are cached and shared between criteria.
"""

import functools
import time

import numpy as np
import pytest

from conftest import random_observable, record_criterion
from subdynamics import (
    FormFactor,
    ModelConfig,
    apply_L0_dagger,
    apply_L1_dagger,
    build_C1,
    build_D1,
    compute_beta,
    evolve_closed_form,
    evolve_lambda2t,
    isospectral_residual,
    liouville_interaction,
    projector,
    refine_CD,
    spectral_modes,
)
from subdynamics.cli import main, sweep_point
from subdynamics.config import ModelSection
from subdynamics.functional import pure_discrete_state, trace
from subdynamics.oracle import (
    DensityMatrix,
    ExactPropagator,
    build_hamiltonian,
    compare_evolutions,
    matrix_to_functional,
    observable_to_matrix,
)
from test_resolvent import _symmetric_midpoint_beta

pytestmark = pytest.mark.slow

DESK_TIMES = np.linspace(0.0, 100.0, 201)


def desk_cfg(lam=0.1, n=2000):
    return ModelConfig.build(n=n, lam=lam, m=1.0, cutoff=2.0)


@functools.lru_cache(maxsize=None)
def desk_run(lam):
    """Oracle against engine from the pure discrete state on [0, 100]."""
    cfg = desk_cfg(lam)
    t0 = time.perf_counter()
    rep = compare_evolutions(cfg, DensityMatrix.discrete(cfg.grid.size), DESK_TIMES,
                             components=("rho1", "rho_omega"))
    return rep, time.perf_counter() - t0


def test_criterion_1_decay_rate():
    rep, wall = desk_run(0.1)
    err = rep.gamma_relative_error
    ok = err <= 0.05 and wall < 120
    record_criterion("1", ok, f"gamma_fit={rep.gamma_fit:.5f} theory={rep.gamma_theory:.5f} "
                              f"rel_err={err:.4f} wall={wall:.1f}s")
    assert rep.gamma_theory == pytest.approx(0.0628, abs=1e-4)
    assert ok


def test_criterion_2_curve_agreement():
    d1 = desk_run(0.1)[0].deviations["rho1"]
    d2 = desk_run(0.05)[0].deviations["rho1"]
    ok = d1 <= 0.05 and d1 / d2 >= 1.7
    record_criterion("2", ok, f"sup_dev(0.1)={d1:.4f} sup_dev(0.05)={d2:.4f} reduction={d1 / d2:.2f}x")
    assert ok


def test_criterion_3_half_rate_coherence():
    cfg = desk_cfg()
    g = cfg.grid
    psi = np.zeros(g.size + 1, dtype=complex)
    psi[0] = psi[1 + cfg.k_m] = np.sqrt(0.5)
    rho = DensityMatrix.pure(psi)
    times = np.linspace(0.0, 50.0, 101)
    # engine: every node decays at Gamma / 2
    state0 = matrix_to_functional(rho, g)
    sd = spectral_modes(cfg)
    c0 = np.abs(state0.rho_1omega)
    eng = max(
        float(np.max(np.abs(np.abs(evolve_lambda2t(state0, t, cfg, sd).rho_1omega)
                            - np.exp(-cfg.gamma * t / 2) * c0)))
        for t in times[::10]
    )
    rep = compare_evolutions(cfg, rho, times, components=("rho1", "rho_1omega"))
    ok = eng < 1e-10 and rep.coherence_rate_error <= 0.10
    record_criterion("3", ok, f"engine_rate_dev={eng:.2e} oracle_rel_dev={rep.coherence_rate_error:.4f}")
    assert ok


def test_criterion_4_trace_conservation(rng):
    cfg = desk_cfg()
    rep = desk_run(0.1)[0]
    # closed form: the decayed population lands exactly in the anchor delta
    rho0 = pure_discrete_state(cfg.grid)
    beta = compute_beta(cfg).value
    cf = max(abs(trace(evolve_closed_form(rho0, t, cfg, beta)) - 1) for t in (1.0, 10.0, 100.0))
    ok = cf < 1e-12 and rep.trace_drift_engine <= 1e-10 and rep.trace_drift_oracle <= 1e-12
    record_criterion("4", ok, f"closed_form={cf:.1e} engine={rep.trace_drift_engine:.1e} "
                              f"oracle={rep.trace_drift_oracle:.1e}")
    assert ok


@functools.lru_cache(maxsize=None)
def _spectrum():
    cfg = desk_cfg()
    return cfg, spectral_modes(cfg)


def test_criterion_5_spectral_table():
    cfg, sd = _spectrum()
    x = cfg.grid.nodes
    beta = compute_beta(cfg).value
    z = sd.eigenvalues
    errs = {
        "1": abs(z["1"] - 2j * np.pi * cfg.v_m**2),
        "1w": float(np.max(np.abs(z["1omega"] - (cfg.m - x - beta)))),
        "w": float(np.max(np.abs(z["omega"]))),
        "ww": float(np.max(np.abs(z["omegaomega"] - np.subtract.outer(x, x)))),
        # the conjugate partner of z_1w, fixed by hermiticity of the dynamics
        "w1": float(np.max(np.abs(z["omega1"] - (x - cfg.m + np.conj(beta))))),
    }
    bi = sd.biorthogonality_residual_sparse()
    comp = max(sd.completeness_residual_sparse(d) for d in (0, 1, 2))
    ok = max(errs.values()) <= 1e-10 and bi <= 1e-8 and comp <= 1e-8
    record_criterion("5", ok, f"max_eig_err={max(errs.values()):.1e} biorth={bi:.1e} completeness={comp:.1e} "
                              f"(z_w1 checked as w-m+beta*)")
    assert ok


def test_criterion_5_printed_z_omega1():
    # the printed closed form w-m-beta* has Im z = -Gamma/2, a growing mode
    cfg, sd = _spectrum()
    x = cfg.grid.nodes
    beta = compute_beta(cfg).value
    err = float(np.max(np.abs(sd.eigenvalues["omega1"] - (x - cfg.m - np.conj(beta)))))
    ok = err <= 1e-10
    record_criterion("5 (z_w1 = w-m-beta* as printed)", ok, f"max_err={err:.4f} = Gamma")
    assert ok


def test_criterion_6_beta():
    flat = compute_beta(desk_cfg())
    flat_err = abs(flat.value - (-1j * np.pi * 0.1**2))
    gcfg = ModelConfig.build(n=100, lam=0.1, cutoff=4.0, form_factor=FormFactor("gaussian-bump"))
    ref = _symmetric_midpoint_beta(gcfg)
    g = compute_beta(gcfg)
    rel = abs(g.re_part - ref) / abs(ref)
    im_exact = all(
        compute_beta(c).im_part == -np.pi * (c.lam**2 * float(c.form_factor(c.m)) ** 2)
        for c in (desk_cfg(), gcfg, ModelConfig.build(n=60, lam=0.13, cutoff=3.0, m=0.9,
                                                      form_factor=FormFactor("lorentzian")))
    )
    ok = flat_err <= 1e-10 and rel <= 1e-6 and im_exact
    record_criterion("6", ok, f"flat_err={flat_err:.1e} gaussian_rel={rel:.1e} im_exact={im_exact}")
    assert ok


def test_criterion_7_superoperators(rng):
    worst = 0.0
    cfgs = [
        ModelConfig.build(n=24, lam=0.1),
        ModelConfig.build(n=30, lam=0.1, cutoff=4.0, form_factor=FormFactor("gaussian-bump")),
        ModelConfig.build(n=25, lam=0.1, cutoff=2.0, rule="gauss-legendre", order=5,
                          form_factor=FormFactor("lorentzian")),
    ]
    for cfg in cfgs:
        h = build_hamiltonian(cfg).matrix
        h0 = np.diag(np.diag(h))
        h1 = h - h0
        for _ in range(20):
            obs = random_observable(cfg.grid, rng)
            om = observable_to_matrix(obs)
            for op, hm in ((apply_L0_dagger, h0), (apply_L1_dagger, h1)):
                got = observable_to_matrix(op(obs, cfg))
                worst = max(worst, float(np.max(np.abs(got - (hm @ om - om @ hm)))))
    cfg = cfgs[0]
    P = {n: projector(cfg.grid, n) for n in (0, 1, 2)}
    L1 = liouville_interaction(cfg)
    degree_ok = True
    for _ in range(100):
        obs = random_observable(cfg.grid, rng)
        degree_ok &= (P[0] @ L1 @ P[1]).apply(obs).norm() > 1e-6
        degree_ok &= (P[0] @ L1 @ P[2]).apply(obs).norm() == 0.0
        degree_ok &= (P[0] @ L1 @ L1 @ P[2]).apply(obs).norm() > 1e-6
    ok = worst <= 1e-12 and degree_ok
    record_criterion("7", ok, f"max_commutator_err={worst:.1e} degree_conditions={degree_ok}")
    assert ok


def test_criterion_8a_refine_from_zero():
    worst = 0.0
    for cfg in (ModelConfig.build(n=12, lam=0.1),
                ModelConfig.build(n=10, lam=0.1, form_factor=FormFactor("gaussian-bump"))):
        C, D = refine_CD(None, None, cfg)
        for n in (0, 1, 2):
            worst = max(worst,
                        float(np.max(np.abs(C[n].to_dense() - build_C1(n, cfg).to_dense()))),
                        float(np.max(np.abs(D[n].to_dense() - build_D1(n, cfg).to_dense()))))
    ok = worst <= 1e-12
    record_criterion("8a", ok, f"max_diff={worst:.1e}")
    assert ok


def test_criterion_8b_isospectral_scaling():
    res = {}
    for lam in (0.1, 0.05):
        cfg = ModelConfig.build(n=24, lam=lam, form_factor=FormFactor("gaussian-bump"))
        obs_rng = np.random.default_rng(7)
        obs = [random_observable(cfg.grid, obs_rng) for _ in range(3)]
        res[lam] = isospectral_residual(cfg, obs)
    ratio = res[0.1] / res[0.05]
    ok = abs(ratio - 8.0) <= 0.3 * 8.0
    record_criterion("8b", ok, f"residual(0.1)={res[0.1]:.3e} residual(0.05)={res[0.05]:.3e} "
                               f"ratio={ratio:.2f} (target 8 +/- 30%)")
    assert ok


def _slopes(lam, delta=1e-3):
    cfg = desk_cfg(lam)
    prop = ExactPropagator(build_hamiltonian(cfg))
    vec = DensityMatrix.discrete(cfg.grid.size).factors[1]
    s = abs(prop.evolve_vectors(vec, [delta])[0][0, 0]) ** 2
    oracle = (s - 1.0) / delta
    e = evolve_lambda2t(pure_discrete_state(cfg.grid), delta, cfg).rho1.real
    engine = (e - 1.0) / delta
    return oracle, engine, cfg.gamma


def test_criterion_9_zeno():
    o1, e1, g1 = _slopes(0.1)
    o2, e2, _ = _slopes(0.05)
    ratio = abs(e1 - o1) / abs(e2 - o2)
    ok = abs(o1) < 1e-3 and abs(e1 + g1) <= 1e-3 * g1 and abs(ratio - 4.0) <= 0.25 * 4.0
    record_criterion("9", ok, f"oracle_slope={o1:.2e} engine_slope={e1:.5f} gamma={g1:.5f} "
                              f"diff_ratio={ratio:.3f}")
    assert ok


def test_criterion_10_determinism_and_convergence(tmp_path, capsys):
    cfg_path = tmp_path / "job.toml"
    cfg_path.write_text("[model]\nlambda = 0.1\nn = 200\n[times]\nstop = 50.0\ncount = 51\n")
    out = tmp_path / "out"
    snaps = []
    for _ in range(2):
        for cmd in ("beta", "evolve", "validate"):
            main([cmd, "--config", str(cfg_path), "--out", str(out)])
        snaps.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    capsys.readouterr()
    identical = snaps[0] == snaps[1]
    section = ModelSection(lam=0.1)
    fits = {n: sweep_point(section, 0.1, n, DESK_TIMES)["gamma_fit"] for n in (1000, 2000)}
    conv = abs(fits[1000] - fits[2000]) / fits[2000]
    ok = identical and conv < 0.01
    record_criterion("10", ok, f"bit_identical={identical} gamma_fit(1000)={fits[1000]:.5f} "
                               f"gamma_fit(2000)={fits[2000]:.5f} diff={conv:.4f}")
    assert ok
