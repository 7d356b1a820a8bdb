"""Feature permutations, grid reshaping, and padding for embedding pairs.

A reshaping arranges the ``2d`` components of a (subject, relation)
embedding pair on a ``(2*d_w) x d_h`` grid, where ``d = d_w * d_h``.
Three layouts are supported:

* ``stack``     -- all subject rows on top, all relation rows below.
* ``alternate`` -- blocks of ``tau`` subject rows and ``tau`` relation
                   rows, interleaved, starting with the subject.
* ``chequer``   -- cell ``(i, j)`` holds a subject component exactly when
                   ``i + j`` is even, so no two 4-adjacent cells come from
                   the same vector.

Within the cells assigned to one source, components are placed in
row-major scan order.  Every operation keeps exact bookkeeping of which
cell holds which component (:class:`CellProvenance`), so grids can be
inverted and kernel-window combinatorics can be counted exactly.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

KINDS = ("stack", "alternate", "chequer")

SOURCE_SUBJECT = 0
SOURCE_RELATION = 1
SOURCE_BLANK = -1

PAD_ZERO = "zero"
PAD_CIRCULAR = "circular"


@dataclass(frozen=True)
class CellProvenance:
    """Per-cell origin of a reshaped grid.

    ``source`` is 0 for subject components, 1 for relation components and
    -1 for blank padding cells.  ``index`` is the position of the component
    in its (permuted) source vector, -1 for blanks.  Both arrays have the
    grid's shape.
    """

    source: np.ndarray
    index: np.ndarray

    @property
    def shape(self):
        return self.source.shape


def _layout_arrays(kind: str, d_w: int, d_h: int, tau: int):
    if kind not in KINDS:
        raise ValueError(f"unknown reshaping kind {kind!r}, expected one of {KINDS}")
    if d_w < 1 or d_h < 1:
        raise ValueError("grid dimensions must be positive")
    d = d_w * d_h
    rows = 2 * d_w
    source = np.empty((rows, d_h), dtype=np.int8)
    index = np.empty((rows, d_h), dtype=np.int64)
    if kind == "stack":
        half = np.arange(d, dtype=np.int64).reshape(d_w, d_h)
        source[:d_w] = SOURCE_SUBJECT
        source[d_w:] = SOURCE_RELATION
        index[:d_w] = half
        index[d_w:] = half
    elif kind == "alternate":
        if tau < 1:
            raise ValueError("tau must be >= 1")
        if d_w % tau != 0:
            raise ValueError(f"alternate({tau}) needs tau to divide d_w={d_w}")
        for r in range(rows):
            block, offset = divmod(r, tau)
            source[r] = block % 2
            source_row = (block // 2) * tau + offset
            index[r] = np.arange(source_row * d_h, (source_row + 1) * d_h)
    else:
        parity = (np.add.outer(np.arange(rows), np.arange(d_h)) % 2).astype(np.int8)
        source[:] = parity
        flat = parity.ravel()
        idx_flat = np.empty(rows * d_h, dtype=np.int64)
        # boolean assignment runs in row-major scan order per source
        idx_flat[flat == 0] = np.arange(d, dtype=np.int64)
        idx_flat[flat == 1] = np.arange(d, dtype=np.int64)
        index[:] = idx_flat.reshape(rows, d_h)
    return source, index


@lru_cache(maxsize=128)
def _layout_cached(kind, d_w, d_h, tau):
    source, index = _layout_arrays(kind, d_w, d_h, tau)
    source.setflags(write=False)
    index.setflags(write=False)
    return CellProvenance(source=source, index=index)


def layout(kind: str, d_w: int, d_h: int, tau: int = 1) -> CellProvenance:
    """Structural provenance of a layout, independent of embedding values."""
    return _layout_cached(kind, int(d_w), int(d_h), int(tau))


@dataclass(frozen=True)
class ReshapePlan:
    """A layout plus ``t`` deterministic component permutations.

    ``perms[i, 0]`` permutes the subject vector and ``perms[i, 1]`` the
    relation vector for channel ``i``.  Channel 0 is always the identity,
    so ``t = 1`` reproduces the unpermuted layout.  Permutation pair ``i``
    is drawn from ``np.random.default_rng((seed, i))``.
    """

    kind: str
    tau: int
    d_w: int
    d_h: int
    t: int
    seed: int
    perms: np.ndarray

    @property
    def d(self) -> int:
        return self.d_w * self.d_h

    @property
    def grid_shape(self):
        return (2 * self.d_w, self.d_h)


def make_plan(kind: str, d_w: int, d_h: int, t: int, seed: int, tau: int = 1) -> ReshapePlan:
    """Build a reshaping plan with ``t`` permutation channels."""
    if t < 1:
        raise ValueError("t must be >= 1")
    layout(kind, d_w, d_h, tau)  # validates kind / tau / dims
    d = d_w * d_h
    perms = np.empty((t, 2, d), dtype=np.int64)
    perms[0, 0] = np.arange(d)
    perms[0, 1] = np.arange(d)
    for i in range(1, t):
        rng = np.random.default_rng((seed, i))
        perms[i, 0] = rng.permutation(d)
        perms[i, 1] = rng.permutation(d)
    return ReshapePlan(kind=kind, tau=int(tau), d_w=int(d_w), d_h=int(d_h),
                       t=int(t), seed=int(seed), perms=perms)


def reshape(plan: ReshapePlan, perm_index: int, e_s: np.ndarray, e_r: np.ndarray):
    """Arrange one embedding pair on the grid for channel ``perm_index``.

    Returns ``(grid, provenance)`` where ``provenance.index`` refers to
    positions in the permuted vectors, so ``invert`` recovers exactly the
    permuted ``e_s`` and ``e_r``.
    """
    if not 0 <= perm_index < plan.t:
        raise ValueError(f"perm_index {perm_index} out of range for t={plan.t}")
    e_s = np.asarray(e_s)
    e_r = np.asarray(e_r)
    if e_s.shape != (plan.d,) or e_r.shape != (plan.d,):
        raise ValueError(f"embedding pair must both have shape ({plan.d},)")
    prov = layout(plan.kind, plan.d_w, plan.d_h, plan.tau)
    es_p = e_s[plan.perms[perm_index, 0]]
    er_p = e_r[plan.perms[perm_index, 1]]
    grid = np.where(prov.source == SOURCE_SUBJECT, es_p[prov.index], er_p[prov.index])
    return grid, prov


def invert(grid: np.ndarray, prov: CellProvenance):
    """Recover the (permuted) subject and relation vectors from a grid."""
    subj_mask = prov.source == SOURCE_SUBJECT
    rel_mask = prov.source == SOURCE_RELATION
    d = int(subj_mask.sum())
    if int(rel_mask.sum()) != d:
        raise ValueError("grid does not hold an equal split of both sources")
    e_s = np.empty(d, dtype=grid.dtype)
    e_r = np.empty(d, dtype=grid.dtype)
    e_s[prov.index[subj_mask]] = grid[subj_mask]
    e_r[prov.index[rel_mask]] = grid[rel_mask]
    return e_s, e_r


def pad(grid: np.ndarray, p: int, mode: str) -> np.ndarray:
    """Pad a grid by ``p`` cells on every side.

    ``zero`` fills the border with zeros; ``circular`` copies wrapped rows
    and columns.  ``p = 0`` returns the grid unchanged.
    """
    if p < 0:
        raise ValueError("padding width must be >= 0")
    if p == 0:
        return grid
    if mode == PAD_ZERO:
        return np.pad(grid, p, mode="constant")
    if mode == PAD_CIRCULAR:
        return np.pad(grid, p, mode="wrap")
    raise ValueError(f"unknown pad mode {mode!r}")


def pad_provenance(prov: CellProvenance, p: int, mode: str) -> CellProvenance:
    """Pad provenance alongside :func:`pad`.

    Zero-mode border cells carry no provenance (source and index -1);
    circular-mode border cells keep the provenance of the cells they copy.
    """
    if p < 0:
        raise ValueError("padding width must be >= 0")
    if p == 0:
        return prov
    if mode == PAD_ZERO:
        source = np.pad(prov.source, p, mode="constant", constant_values=SOURCE_BLANK)
        index = np.pad(prov.index, p, mode="constant", constant_values=-1)
    elif mode == PAD_CIRCULAR:
        source = np.pad(prov.source, p, mode="wrap")
        index = np.pad(prov.index, p, mode="wrap")
    else:
        raise ValueError(f"unknown pad mode {mode!r}")
    return CellProvenance(source=source, index=index)
