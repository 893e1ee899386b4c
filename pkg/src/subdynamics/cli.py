"""Command-line front end: ``subdynamics {beta,spectrum,evolve,validate,sweep}``.

Exit codes: 0 success, 1 validation failure, 2 configuration error,
3 numeric error.
"""

from __future__ import annotations

import argparse
import itertools
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .config import ConfigError, JobConfig, load_config
from .evolution import evolve_lambda2t, regime_warning
from .functional import trace
from .grid import RegimeWarning
from .intermediate import FAMILIES, spectral_modes
from .io import FORMATS, format_value, read_functional, write_table
from .oracle import (
    DecayFitError,
    DensityMatrix,
    ExactPropagator,
    build_hamiltonian,
    compare_evolutions,
    fit_decay_rate,
    functional_to_matrix,
    matrix_to_functional,
)
from .resolvent import compute_beta

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

# full kernel dumps and degree-2 mode rows are capped to keep files usable
MAX_KERNEL_ROWS = 250_000
_EXT = {"csv": ".csv", "structured-text": ".txt"}
_FAMILY_TAG = {"1": "1", "omega": "w", "1omega": "1w", "omega1": "w1", "omegaomega": "ww"}
_FAMILY_DEGREE = {"omega": 0, "1": 0, "1omega": 1, "omega1": 1, "omegaomega": 2}


class _Job:
    def __init__(self, args):
        self.args = args
        self.config: JobConfig = load_config(args.config)
        self.fmt = args.format or self.config.outputs.format
        self.out = self.config.out_dir(args.out)
        self.header = self.config.to_dict()
        self.header["outputs"]["directory"] = str(self.out)
        self.header["outputs"]["format"] = self.fmt
        # fail on an unwritable directory before any computation
        self.out.mkdir(parents=True, exist_ok=True)

    def model(self):
        return self.config.model_config()

    def write(self, stem: str, columns: dict, extra: dict | None = None):
        path = self.out / f"{stem}{_EXT[self.fmt]}"
        return write_table(path, columns, self.header, self.fmt, extra)

    def initial_density(self, n: int) -> DensityMatrix:
        init = self.config.initial_state
        if init.kind == "pure-discrete":
            return DensityMatrix.discrete(n)
        try:
            if str(init.path).endswith(".npy"):
                mat = np.load(init.path)
            else:
                # functional text dump on the job's grid
                mat = functional_to_matrix(read_functional(init.path, self.model().grid))
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"initial_state.path: cannot load {init.path}: {exc}") from None
        if mat.shape != (n + 1, n + 1):
            raise ConfigError(f"initial_state.path: expected a {(n + 1, n + 1)} matrix, got {mat.shape}")
        try:
            rho = DensityMatrix(mat)
        except ValueError as exc:
            raise ConfigError(f"initial_state.path: {exc}") from None
        if rho.min_eigenvalue() < -1e-10:
            raise ConfigError("initial_state.path: density matrix is not positive semidefinite")
        return rho


# -- commands ------------------------------------------------------------

def cmd_beta(job: _Job) -> int:
    cfg = job.model()
    beta = compute_beta(cfg)
    analytic = -np.pi * cfg.v_m**2
    print(f"Re={beta.re_part + 0.0:.6f} Im={beta.im_part + 0.0:.6f}")
    print(f"Im check: -pi lambda^2 V(m)^2 = {analytic + 0.0:.6f}")
    job.write("beta", {"re": [beta.re_part], "im": [beta.im_part], "im_analytic": [analytic]})
    return EXIT_OK


def _spectrum_rows(sd, cap: int):
    g = sd.grid
    n = g.size
    stride = 1
    while (-(-n // stride)) ** 2 > cap:
        stride += 1
    degree, label, re, im = [], [], [], []
    order = sorted(FAMILIES, key=lambda f: (_FAMILY_DEGREE[f], f != "1", f))
    for fam in order:
        z = np.asarray(sd.eigenvalues[fam])
        tag = _FAMILY_TAG[fam]
        if fam == "1":
            labels, vals = ["1"], [complex(z)]
        elif fam == "omegaomega":
            idx = np.arange(0, n, stride)
            labels = [f"{tag}:{k}:{l}" for k in idx for l in idx]
            vals = z[np.ix_(idx, idx)].ravel()
        else:
            labels = [f"{tag}:{k}" for k in range(n)]
            vals = z
        degree += [_FAMILY_DEGREE[fam]] * len(labels)
        label += labels
        vals = np.asarray(vals, dtype=complex)
        re.append(vals.real)
        im.append(vals.imag)
    return degree, label, np.concatenate(re), np.concatenate(im), stride


def cmd_spectrum(job: _Job) -> int:
    cfg = job.model()
    sd = spectral_modes(cfg)
    g = cfg.grid
    degree, label, re, im, stride = _spectrum_rows(sd, job.args.max_kernel_rows)
    cols = {"degree": np.array(degree), "label": np.array(label), "Re": re, "Im": im}
    bi = sd.biorthogonality_residual_sparse()
    comp = [sd.completeness_residual_sparse(d) for d in (0, 1, 2)]
    summary = {
        "modes_total": 1 + 3 * g.size + g.size**2,
        "modes_written": len(label),
        "degree2_stride": stride,
        "biorthogonality_residual": bi,
        "completeness_residual_0": comp[0],
        "completeness_residual_1": comp[1],
        "completeness_residual_2": comp[2],
        "beta_re": sd.beta.re_part,
        "beta_im": sd.beta.im_part,
    }
    job.write("spectrum", cols, extra={"mode labels": "1 | w:k | 1w:k | w1:k | ww:k:l (k indexes grid)"})
    job.write("grid", {"k": np.arange(g.size), "omega": g.nodes, "weight": g.weights})
    job.write("spectrum_summary", {k: [v] for k, v in summary.items()})
    # the discrete mode is row 0
    print(f"degree={degree[0]} label={label[0]} Re={format_value(re[0], False)} "
          f"Im={format_value(im[0], False)}")
    print(f"modes={summary['modes_total']} written={summary['modes_written']} "
          f"biorthogonality_residual={bi:.3e} completeness_residual={max(comp):.3e}")
    return EXIT_OK


def cmd_evolve(job: _Job) -> int:
    cfg = job.model()
    g = cfg.grid
    times = job.config.times.grid()
    rho0 = matrix_to_functional(job.initial_density(g.size), g)
    sd = spectral_modes(cfg)
    series = {"rho1": [], "rho_omega": [], "rho_1omega": [], "rho_omega1": [], "kernel": []}
    traces = []
    dump_kernel = g.size**2 * len(times) <= job.args.max_kernel_rows
    w = g.weights
    regime_warning(cfg, times)
    for t in times:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RegimeWarning)
            st = evolve_lambda2t(rho0, float(t), cfg, sd)
        series["rho1"].append(st.rho1)
        series["rho_omega"].append(st.rho_omega)
        series["rho_1omega"].append(st.rho_1omega)
        series["rho_omega1"].append(st.rho_omega1)
        series["kernel"].append(st.rho_kernel if dump_kernel
                                else np.sqrt(np.sum(np.outer(w, w) * np.abs(st.rho_kernel) ** 2)))
        traces.append(trace(st))
    rho1 = np.array(series["rho1"], dtype=complex)
    job.write("rho1", {"t": times, "value": rho1})
    job.write("survival", {"t": times, "survival": rho1.real})
    job.write("trace", {"t": times, "trace": np.array(traces)})
    nt, n = len(times), g.size
    for name in ("rho_omega", "rho_1omega", "rho_omega1"):
        vals = np.array(series[name], dtype=complex)
        job.write(name, {"t": np.repeat(times, n), "omega": np.tile(g.nodes, nt), "value": vals.ravel()})
    if dump_kernel:
        vals = np.array(series["kernel"], dtype=complex)
        job.write("rho_kernel", {
            "t": np.repeat(times, n * n),
            "omega": np.tile(np.repeat(g.nodes, n), nt),
            "omega_prime": np.tile(g.nodes, n * nt),
            "value": vals.ravel(),
        })
    else:
        job.write("rho_kernel_norm", {"t": times, "weighted_norm": np.array(series["kernel"])})
    print(f"wrote {nt} time samples to {job.out}")
    return EXIT_OK


def _threshold_failures(report, thr) -> list[str]:
    fails = []
    checks = [
        ("rho1_sup_deviation", report.deviations.get("rho1", 0.0), thr.rho1_sup_deviation),
        ("gamma_relative_error", report.gamma_relative_error, thr.gamma_relative_error),
        ("trace_drift", max(report.trace_drift_engine, report.trace_drift_oracle), thr.trace_drift),
        ("coherence_rate_error", report.coherence_rate_error, thr.coherence_rate_error),
    ]
    for name, value, limit in checks:
        if limit is None or value is None:
            continue
        if not np.isfinite(value) or value > limit:
            fails.append(f"{name}: {value:.6g} exceeds {limit:.6g}")
    if thr.require_time_window and not report.within_window:
        fails.append("time_window: times extend beyond lambda^-2")
    return fails


def cmd_validate(job: _Job) -> int:
    cfg = job.model()
    rho0 = job.initial_density(cfg.grid.size)
    report = compare_evolutions(cfg, rho0, job.config.times.grid())
    fails = _threshold_failures(report, job.config.thresholds)
    summary = {k: v for k, v in report.summary().items() if not k.startswith("runtime_")}
    summary = {k: ("none" if v is None else v) for k, v in summary.items()}
    summary["passed"] = not fails
    # runtimes vary between runs, so they go to stderr rather than the report
    job.write("report", {k: [v] for k, v in summary.items()})
    for k, v in report.runtime.items():
        print(f"runtime {k}: {v:.2f} s", file=sys.stderr)
    for line in fails:
        print(f"FAIL {line}", file=sys.stderr)
    print("validation passed" if not fails else f"validation failed ({len(fails)} criteria)")
    return EXIT_OK if not fails else EXIT_VALIDATION


def sweep_point(model_section, lam: float, n: int, times) -> dict:
    """Oracle decay rate at one ``(lambda, N)`` point (top level so it pickles)."""
    import dataclasses

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cfg = dataclasses.replace(model_section, lam=lam, n=n).build()
    prop = ExactPropagator(build_hamiltonian(cfg))
    psi0 = np.zeros((n + 1, 1))
    psi0[0, 0] = 1.0
    surv = np.array([abs(p[0, 0]) ** 2 for p in prop.evolve_vectors(psi0, times)])
    fit = fit_decay_rate(np.column_stack([times, surv]), cfg.gamma)
    theory = cfg.gamma
    err = abs(fit - theory) / theory if theory else abs(fit)
    return {"lambda": lam, "n": n, "gamma_theory": theory, "gamma_fit": fit, "rate_error": err}


def cmd_sweep(job: _Job) -> int:
    sw = job.config.sweep
    if not sw.lam and not sw.n:
        raise ConfigError("sweep: empty range (give sweep.lambda and/or sweep.n)")
    lams = sorted(set(sw.lam)) or [job.config.model.lam]
    ns = sorted(set(sw.n)) or [job.config.model.n]
    points = list(itertools.product(lams, ns))
    times = job.config.times.grid()
    workers = max(1, min(job.args.workers, len(points)))
    args = [(job.config.model, lam, n, times) for lam, n in points]
    if workers == 1:
        rows = [sweep_point(*a) for a in args]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(sweep_point, *zip(*args)))
    cols = {k: np.array([r[k] for r in rows]) for k in rows[0]}
    job.write("sweep", cols)
    for r in rows:
        print(f"lambda={r['lambda']:g} n={r['n']} gamma_theory={r['gamma_theory']:.6f} "
              f"gamma_fit={r['gamma_fit']:.6f} rate_error={r['rate_error']:.4f}")
    return EXIT_OK


COMMANDS = {
    "beta": (cmd_beta, "self-energy beta and the analytic imaginary-part check"),
    "spectrum": (cmd_spectrum, "mode table of the second-order intermediate operator"),
    "evolve": (cmd_evolve, "lambda^2 t evolution time series"),
    "validate": (cmd_validate, "engine against exact oracle, thresholded"),
    "sweep": (cmd_sweep, "oracle decay rate over lambda and/or N"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML job file (default: built-in desk-scale profile)")
    common.add_argument("--out", help="output directory (overrides config and environment)")
    common.add_argument("--workers", type=int, default=min(4, os.cpu_count() or 1),
                        help="worker processes for sweep")
    common.add_argument("--format", choices=FORMATS, help="output format (overrides config)")
    common.add_argument("--max-kernel-rows", type=int, default=MAX_KERNEL_ROWS,
                        help="cap on rows for kernel dumps and degree-2 mode tables")
    parser = argparse.ArgumentParser(prog="subdynamics", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_)
    return parser


def _show_warning(message, category, *args, **kwargs):
    print(f"warning: {message}", file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if args.workers < 1:
        print("error: --workers must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        with warnings.catch_warnings():
            warnings.showwarning = _show_warning
            job = _Job(args)
            return COMMANDS[args.command][0](job)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DecayFitError, RuntimeError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
