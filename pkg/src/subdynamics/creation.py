"""First-order creation/destruction superoperators and their fixed-point refinement."""

from __future__ import annotations

import numpy as np

from .functional import COMPONENTS, DEGREE
from .grid import ModelConfig
from .resolvent import _kernel, branch, gap_density
from .superop import Diagonal, Map, Outer, SuperOperator, _slices, liouville_interaction

__all__ = [
    "build_C1",
    "build_D1",
    "refine_CD",
    "dense_basis",
    "resolvent_matrix",
    "check_support",
]


def _pieces(cfg: ModelConfig):
    v = cfg.coupling
    w = cfg.grid.weights
    r = {
        # 1/(w - m +- i0) and 1/(m - w +- i0)
        ("wm", 1): gap_density(cfg, 1, 1),
        ("wm", -1): gap_density(cfg, 1, -1),
        ("mw", 1): gap_density(cfg, -1, 1),
        ("mw", -1): gap_density(cfg, -1, -1),
    }
    return v, w, r


def build_C1(n: int, cfg: ModelConfig) -> SuperOperator:
    """First-order creation-of-correlations operator ``C_n^dagger(1)``."""
    v, w, r = _pieces(cfg)
    one = np.array(1.0)
    grid = cfg.grid
    if n == 0:
        return SuperOperator(grid, {
            ("1", "1w"): Outer(one, w * v * r["mw", 1]),
            ("1", "w1"): Outer(one, -w * v * r["wm", 1]),
        })
    if n == 1:
        a = v * r["wm", 1]
        b = v * r["mw", 1]
        wb = w * b
        wa = w * a
        return SuperOperator(grid, {
            ("w1", "1"): Outer(a, one),
            ("w1", "w"): Diagonal(-a),
            ("1w", "1"): Outer(-b, one),
            ("1w", "w"): Diagonal(b),
            ("w1", "ww"): Map(lambda k: k @ wb, "int V_w' K[w, w'] / (m - w' + i0)"),
            ("1w", "ww"): Map(lambda k: -(wa @ k), "-int V_w K[w, w'] / (w - m + i0)"),
        })
    if n == 2:
        a = v * r["wm", 1]
        c = v * r["wm", -1]
        return SuperOperator(grid, {
            ("ww", "1w"): Map(lambda x: np.outer(a, x), "V_w' |w' w)(1 w| / (w' - m + i0)"),
            ("ww", "w1"): Map(lambda x: np.outer(x, c), "V_w' |w w')(w 1| / (w' - m - i0)"),
        })
    raise ValueError(f"degree of correlation must be 0, 1 or 2, got {n!r}")


def build_D1(n: int, cfg: ModelConfig) -> SuperOperator:
    """First-order destruction-of-correlations operator ``D_n^dagger(1)``."""
    v, w, r = _pieces(cfg)
    one = np.array(1.0)
    grid = cfg.grid
    if n == 0:
        p = v * r["mw", 1]
        q = v * r["mw", -1]
        return SuperOperator(grid, {
            ("1w", "1"): Outer(p, one),
            ("w1", "1"): Outer(q, one),
            ("1w", "w"): Diagonal(-p),
            ("w1", "w"): Diagonal(-q),
        })
    if n == 1:
        a = v * r["wm", 1]
        b = v * r["mw", 1]
        return SuperOperator(grid, {
            ("1", "w1"): Outer(one, w * a),
            ("1", "1w"): Outer(one, -w * b),
            ("ww", "w1"): Map(lambda x: np.outer(x, b), "V_w' |w w')(w 1| / (m - w' + i0)"),
            ("ww", "1w"): Map(lambda x: -np.outer(a, x), "-V_w' |w' w)(1 w| / (w' - m + i0)"),
        })
    if n == 2:
        wa = w * v * r["wm", 1]
        wb = w * v * r["mw", 1]
        # denominator sits on the integrated label w', as the general matrix-element
        # formula requires
        return SuperOperator(grid, {
            ("1w", "ww"): Map(lambda k: wa @ k, "int V_w K[w, w'] / (w - m + i0)"),
            ("w1", "ww"): Map(lambda k: -(k @ wb), "-int V_w' K[w, w'] / (m - w' + i0)"),
        })
    raise ValueError(f"degree of correlation must be 0, 1 or 2, got {n!r}")


def check_support(op: SuperOperator, n: int, kind: str) -> bool:
    """``C_n = P_n C_n Q_n`` (kind ``"C"``) or ``D_n = Q_n D_n P_n`` (kind ``"D"``)."""
    for tgt, src in op.support():
        if kind == "C" and not (DEGREE[tgt] == n and DEGREE[src] != n):
            return False
        if kind == "D" and not (DEGREE[tgt] != n and DEGREE[src] == n):
            return False
    return True


# -- dense representation -------------------------------------------------

def dense_basis(cfg: ModelConfig):
    """Per-coordinate degree and free-Liouvillian eigenvalue form.

    Returns ``(degree, m_coef, nodes, coefs)`` where the eigenvalue of coordinate
    ``a`` is ``m_coef[a]*m + sum(coefs[a] * omega[nodes[a]])`` (unused slots
    have coefficient 0).
    """
    n = cfg.grid.size
    dim = 1 + 3 * n + n * n
    degree = np.empty(dim, dtype=int)
    m_coef = np.zeros(dim, dtype=int)
    nodes = np.zeros((dim, 2), dtype=int)
    coefs = np.zeros((dim, 2), dtype=int)
    sl = _slices(n)
    for key in COMPONENTS:
        degree[sl[key]] = DEGREE[key]
    k = np.arange(n)
    nodes[sl["1w"], 0] = k
    coefs[sl["1w"], 0] = -1
    m_coef[sl["1w"]] = 1
    nodes[sl["w1"], 0] = k
    coefs[sl["w1"], 0] = 1
    m_coef[sl["w1"]] = -1
    kk, ll = np.meshgrid(k, k, indexing="ij")
    nodes[sl["ww"], 0] = kk.ravel()
    nodes[sl["ww"], 1] = ll.ravel()
    diag = kk.ravel() != ll.ravel()
    coefs[sl["ww"], 0] = np.where(diag, 1, 0)
    coefs[sl["ww"], 1] = np.where(diag, -1, 0)
    return degree, m_coef, nodes, coefs


def resolvent_matrix(cfg: ModelConfig, sign_of) -> np.ndarray:
    """Elementwise ``1/(w_b - w_a +- i0)`` over pairs of dense coordinates.

    `sign_of(n_a, n_b)` picks the branch (return 0 to skip the pair).  A gap of
    the form ``+-(omega_k - m)`` uses the subtraction kernel centred on ``m``;
    any other gap uses ``1/x`` with a zero principal part and a grid delta on
    the first node of the column label when the gap vanishes.
    """
    degree, m_coef, nodes, coefs = dense_basis(cfg)
    omega = cfg.grid.nodes
    w = cfg.grid.weights
    dim = degree.size
    dens = {s: _kernel(cfg, s).density for s in (1, -1)}
    out = np.zeros((dim, dim), dtype=complex)
    for a in range(dim):
        for b in range(dim):
            s = sign_of(degree[a], degree[b])
            if s == 0:
                continue
            terms = {}
            for node, c in zip(nodes[b], coefs[b]):
                if c:
                    terms[node] = terms.get(node, 0) + c
            for node, c in zip(nodes[a], coefs[a]):
                if c:
                    terms[node] = terms.get(node, 0) - c
            terms = {k: c for k, c in terms.items() if c}
            mc = m_coef[b] - m_coef[a]
            if mc in (1, -1) and len(terms) == 1:
                (k, c), = terms.items()
                if c == -mc:
                    # gap = c*(omega_k - m)
                    out[a, b] = c * dens[c * s][k]
                    continue
            x = mc * cfg.m + sum(c * omega[k] for k, c in terms.items())
            if x != 0.0:
                out[a, b] = 1.0 / x
            else:
                lead = nodes[b][0] if any(coefs[b]) or degree[b] == 2 else nodes[a][0]
                out[a, b] = -s * 1j * np.pi / w[lead]
    return out


def _projector_dense(degree, n):
    return np.diag((degree == n).astype(float))


def refine_CD(C_prev, D_prev, cfg: ModelConfig):
    """One fixed-point iteration for all creation/destruction operators.

    ``(a|C_n|b) = [1/(w_b - w_a +- i0)] (a|(P_n + C_n) L1 (C_n - Q_n)|b)`` and
    ``(a|D_n|b) = [1/(w_b - w_a +- i0)] (a|(Q_n - D_n) L1 (P_n + D_n)|b)``,
    evaluated on dense coordinate matrices.  `C_prev` / `D_prev` map degree to
    :class:`SuperOperator` (``None`` means zero).  Small grids only.
    """
    grid = cfg.grid
    degree = dense_basis(cfg)[0]
    dim = degree.size
    L1 = liouville_interaction(cfg).to_dense()
    R = resolvent_matrix(cfg, lambda na, nb: 0 if na == nb else branch(na, nb))
    eye = np.eye(dim)
    C_next, D_next = {}, {}
    for n in (0, 1, 2):
        P = _projector_dense(degree, n)
        Q = eye - P
        C = _as_dense(C_prev, n, dim)
        D = _as_dense(D_prev, n, dim)
        yc = (P + C) @ L1 @ (C - Q)
        yd = (Q - D) @ L1 @ (P + D)
        mask_c = np.outer(degree == n, degree != n)
        mask_d = np.outer(degree != n, degree == n)
        C_next[n] = SuperOperator.from_dense(np.where(mask_c, R * yc, 0), grid)
        D_next[n] = SuperOperator.from_dense(np.where(mask_d, R * yd, 0), grid)
    return C_next, D_next


def _as_dense(ops, n, dim):
    if ops is None or ops.get(n) is None:
        return np.zeros((dim, dim), dtype=complex)
    op = ops[n]
    return op if isinstance(op, np.ndarray) else op.to_dense()
