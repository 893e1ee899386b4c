"""Block-structured superoperators and the Friedrichs Liouvillian.

A :class:`SuperOperator` is a 5x5 table of linear maps between the component
spaces of an :class:`~subdynamics.functional.Observable`.  Each block maps the
array of a source component to an array of the target component; absent
blocks are zero.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .functional import COMPONENTS, DEGREE, Observable, _check_grid
from .grid import FrequencyGrid, ModelConfig

__all__ = [
    "Block",
    "Diagonal",
    "Outer",
    "Map",
    "SuperOperator",
    "liouville_free",
    "liouville_interaction",
    "liouville",
    "projector",
    "apply_L0_dagger",
    "apply_L1_dagger",
]


class Block:
    """Linear map from one component array to another."""

    def __call__(self, x):
        raise NotImplementedError

    def __add__(self, other):
        return _Sum(self, other)

    def scaled(self, c):
        return _Scaled(self, c)


class Diagonal(Block):
    """Elementwise multiplier (source and target share a shape)."""

    def __init__(self, values):
        self.values = np.asarray(values)

    def __call__(self, x):
        return self.values * x


class Outer(Block):
    """Rank-one map ``x -> col * sum(row * x)``."""

    def __init__(self, col, row):
        self.col = np.asarray(col)
        self.row = np.asarray(row)

    def __call__(self, x):
        return self.col * np.sum(self.row * x)


class Dense(Block):
    """Dense matrix acting on flattened arrays."""

    def __init__(self, matrix, out_shape):
        self.matrix = np.asarray(matrix)
        self.out_shape = out_shape

    def __call__(self, x):
        return (self.matrix @ np.ravel(x)).reshape(self.out_shape)


class Map(Block):
    """Structured map given by a callable (kernel contractions, outer products)."""

    def __init__(self, fn: Callable, label: str = ""):
        self.fn = fn
        self.label = label

    def __call__(self, x):
        return self.fn(x)


class _Sum(Block):
    def __init__(self, a, b):
        self.a, self.b = a, b

    def __call__(self, x):
        return self.a(x) + self.b(x)


class _Scaled(Block):
    def __init__(self, block, c):
        self.block, self.c = block, c

    def __call__(self, x):
        return self.c * self.block(x)


class _Chain(Block):
    def __init__(self, outer, inner):
        self.outer, self.inner = outer, inner

    def __call__(self, x):
        return self.outer(self.inner(x))


class SuperOperator:
    """Linear map on observables stored as ``{(target, source): Block}``."""

    def __init__(self, grid: FrequencyGrid, blocks: dict | None = None):
        self.grid = grid
        self.blocks = {}
        for (tgt, src), block in (blocks or {}).items():
            if tgt not in COMPONENTS or src not in COMPONENTS:
                raise KeyError(f"unknown block ({tgt!r}, {src!r})")
            self.blocks[(tgt, src)] = block

    # construction ---------------------------------------------------------
    @classmethod
    def zero(cls, grid):
        return cls(grid)

    @classmethod
    def identity(cls, grid):
        return cls(grid, {(c, c): _Identity() for c in COMPONENTS})

    @classmethod
    def from_dense(cls, matrix: np.ndarray, grid: FrequencyGrid, tol: float = 0.0):
        """Wrap a coordinate matrix (see :meth:`to_dense`) as block-structured operator."""
        sl = _slices(grid.size)
        n = grid.size
        blocks = {}
        for tgt in COMPONENTS:
            for src in COMPONENTS:
                sub = matrix[sl[tgt], sl[src]]
                if np.any(np.abs(sub) > tol):
                    blocks[(tgt, src)] = Dense(sub, _shape(tgt, n))
        return cls(grid, blocks)

    # algebra --------------------------------------------------------------
    def __call__(self, obs: Observable) -> Observable:
        return self.apply(obs)

    def apply(self, obs: Observable) -> Observable:
        _check_grid(self.grid, obs.grid)
        src = obs.as_dict()
        out = {c: np.zeros(_shape(c, self.grid.size), dtype=complex) for c in COMPONENTS}
        for (tgt, s), block in self.blocks.items():
            out[tgt] = out[tgt] + block(src[s])
        return Observable.from_components([out[c] for c in COMPONENTS], self.grid)

    def __add__(self, other):
        if not isinstance(other, SuperOperator):
            return NotImplemented
        _check_grid(self.grid, other.grid)
        blocks = dict(self.blocks)
        for key, b in other.blocks.items():
            blocks[key] = blocks[key] + b if key in blocks else b
        return SuperOperator(self.grid, blocks)

    def __mul__(self, c):
        if not np.isscalar(c):
            return NotImplemented
        return SuperOperator(self.grid, {k: b.scaled(c) for k, b in self.blocks.items()})

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1

    def __sub__(self, other):
        return self + (-other)

    def __matmul__(self, other):
        """Composition: ``(A @ B)(O) = A(B(O))``."""
        if not isinstance(other, SuperOperator):
            return NotImplemented
        _check_grid(self.grid, other.grid)
        blocks = {}
        for (tgt, mid), outer in self.blocks.items():
            for (mid2, src), inner in other.blocks.items():
                if mid != mid2:
                    continue
                if isinstance(outer, _Identity):
                    chained = inner
                elif isinstance(inner, _Identity):
                    chained = outer
                else:
                    chained = _Chain(outer, inner)
                key = (tgt, src)
                blocks[key] = blocks[key] + chained if key in blocks else chained
        return SuperOperator(self.grid, blocks)

    # inspection -----------------------------------------------------------
    def support(self) -> set:
        return set(self.blocks)

    def restrict(self, targets, sources) -> "SuperOperator":
        return SuperOperator(
            self.grid,
            {k: b for k, b in self.blocks.items() if k[0] in targets and k[1] in sources},
        )

    def to_dense(self) -> np.ndarray:
        """Coordinate matrix ``M[a, b]``: coordinate `a` of the image of unit coordinate `b`.

        Size ``(1 + 3N + N**2)**2``; intended for small grids.
        """
        n = self.grid.size
        dim = 1 + 3 * n + n * n
        sl = _slices(n)
        out = np.zeros((dim, dim), dtype=complex)
        for (tgt, src), block in self.blocks.items():
            shape = _shape(src, n)
            size = int(np.prod(shape)) if shape else 1
            for j in range(size):
                e = np.zeros(size, dtype=complex)
                e[j] = 1.0
                x = e.reshape(shape) if shape else complex(e[0])
                out[sl[tgt], sl[src].start + j] += np.ravel(block(x))
        return out

    def __repr__(self):
        keys = ", ".join(f"{t}<-{s}" for t, s in sorted(self.blocks))
        return f"SuperOperator(N={self.grid.size}, blocks=[{keys}])"


class _Identity(Block):
    def __call__(self, x):
        return x


def _shape(key, n):
    return {"1": (), "w": (n,), "1w": (n,), "w1": (n,), "ww": (n, n)}[key]


def _slices(n):
    return {
        "1": slice(0, 1),
        "w": slice(1, n + 1),
        "1w": slice(n + 1, 2 * n + 1),
        "w1": slice(2 * n + 1, 3 * n + 1),
        "ww": slice(3 * n + 1, 3 * n + 1 + n * n),
    }


def projector(grid: FrequencyGrid, degree: int) -> SuperOperator:
    """Projector onto the components of one degree of correlation."""
    if degree not in (0, 1, 2):
        raise ValueError(f"degree of correlation must be 0, 1 or 2, got {degree!r}")
    return SuperOperator(grid, {(c, c): _Identity() for c in COMPONENTS if DEGREE[c] == degree})


def liouville_free(cfg: ModelConfig) -> SuperOperator:
    """``L0^dagger O = [H0, O]``."""
    x = cfg.grid.nodes
    m = cfg.m
    gap = x[:, None] - x[None, :]
    return SuperOperator(
        cfg.grid,
        {
            ("1w", "1w"): Diagonal(m - x),
            ("w1", "w1"): Diagonal(x - m),
            ("ww", "ww"): Diagonal(gap),
        },
    )


def liouville_interaction(cfg: ModelConfig) -> SuperOperator:
    """``L1^dagger O = [lam V, O]`` with integrals replaced by weighted sums."""
    v = cfg.coupling
    wv = cfg.grid.weights * v
    one = np.array(1.0)
    return SuperOperator(
        cfg.grid,
        {
            ("1", "1w"): Outer(one, -wv),
            ("1", "w1"): Outer(one, wv),
            ("1w", "1"): Outer(-v, one),
            ("w1", "1"): Outer(v, one),
            ("1w", "w"): Diagonal(v),
            ("w1", "w"): Diagonal(-v),
            ("1w", "ww"): Map(lambda k: wv @ k, "sum_w V_w K[w, :]"),
            ("w1", "ww"): Map(lambda k: -(k @ wv), "-sum_w' K[:, w'] V_w'"),
            ("ww", "1w"): Map(lambda x: np.outer(v, x), "V_w O_1w'"),
            ("ww", "w1"): Map(lambda x: -np.outer(x, v), "-O_w1 V_w'"),
        },
    )


def liouville(cfg: ModelConfig) -> SuperOperator:
    return liouville_free(cfg) + liouville_interaction(cfg)


def apply_L0_dagger(obs: Observable, cfg: ModelConfig) -> Observable:
    return liouville_free(cfg).apply(obs)


def apply_L1_dagger(obs: Observable, cfg: ModelConfig) -> Observable:
    return liouville_interaction(cfg).apply(obs)
