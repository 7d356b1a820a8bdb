"""Tests for grid layouts, permutation plans, reshaping, and padding."""

import numpy as np
import numpy.testing as npt
import pytest

from interacte.reshape import (
    KINDS,
    PAD_CIRCULAR,
    PAD_ZERO,
    SOURCE_BLANK,
    SOURCE_RELATION,
    SOURCE_SUBJECT,
    invert,
    layout,
    make_plan,
    pad,
    pad_provenance,
    reshape,
)


# ---------------------------------------------------------------------------
# layout structure


def test_stack_layout_halves():
    prov = layout("stack", 2, 4)
    assert prov.shape == (4, 4)
    npt.assert_array_equal(prov.source[:2], SOURCE_SUBJECT)
    npt.assert_array_equal(prov.source[2:], SOURCE_RELATION)
    # row-major component order within each half
    npt.assert_array_equal(prov.index[:2].ravel(), np.arange(8))
    npt.assert_array_equal(prov.index[2:].ravel(), np.arange(8))


def test_alternate_tau1_rows_interleave():
    prov = layout("alternate", 3, 4, tau=1)
    npt.assert_array_equal(prov.source[:, 0], [0, 1, 0, 1, 0, 1])
    # each source's rows enumerate its components in order
    subj_rows = prov.index[prov.source == SOURCE_SUBJECT]
    rel_rows = prov.index[prov.source == SOURCE_RELATION]
    npt.assert_array_equal(subj_rows, np.arange(12))
    npt.assert_array_equal(rel_rows, np.arange(12))


def test_alternate_tau2_blocks():
    prov = layout("alternate", 4, 2, tau=2)
    npt.assert_array_equal(prov.source[:, 0], [0, 0, 1, 1, 0, 0, 1, 1])


def test_chequer_parity_rule():
    prov = layout("chequer", 3, 6)
    rows, cols = np.indices(prov.shape)
    npt.assert_array_equal(prov.source, (rows + cols) % 2)


def test_chequer_no_same_source_neighbours():
    prov = layout("chequer", 4, 8)
    src = prov.source
    assert not np.any(src[:, 1:] == src[:, :-1])
    assert not np.any(src[1:, :] == src[:-1, :])


@pytest.mark.parametrize("kind", KINDS)
def test_layout_is_a_bijection(kind):
    d_w, d_h = 4, 6
    prov = layout(kind, d_w, d_h, tau=2 if kind == "alternate" else 1)
    d = d_w * d_h
    for source in (SOURCE_SUBJECT, SOURCE_RELATION):
        idx = np.sort(prov.index[prov.source == source])
        npt.assert_array_equal(idx, np.arange(d))


def test_layout_validation_errors():
    with pytest.raises(ValueError):
        layout("diagonal", 2, 2)
    with pytest.raises(ValueError):
        layout("alternate", 3, 4, tau=2)  # tau must divide d_w
    with pytest.raises(ValueError):
        layout("alternate", 2, 2, tau=0)
    with pytest.raises(ValueError):
        layout("stack", 0, 4)


# ---------------------------------------------------------------------------
# permutation plans


def test_plan_channel0_is_identity():
    plan = make_plan("chequer", 4, 8, t=3, seed=11)
    npt.assert_array_equal(plan.perms[0, 0], np.arange(32))
    npt.assert_array_equal(plan.perms[0, 1], np.arange(32))


def test_plan_permutations_deterministic_and_split_by_channel():
    a = make_plan("stack", 5, 4, t=4, seed=3)
    b = make_plan("stack", 5, 4, t=4, seed=3)
    npt.assert_array_equal(a.perms, b.perms)
    # channel i is drawn from rng((seed, i)), independent of t
    wider = make_plan("stack", 5, 4, t=6, seed=3)
    npt.assert_array_equal(wider.perms[:4], a.perms)
    for i in (1, 2, 3):
        rng = np.random.default_rng((3, i))
        npt.assert_array_equal(a.perms[i, 0], rng.permutation(20))
        npt.assert_array_equal(a.perms[i, 1], rng.permutation(20))


def test_plan_seeds_differ():
    a = make_plan("stack", 4, 4, t=2, seed=0)
    b = make_plan("stack", 4, 4, t=2, seed=1)
    assert not np.array_equal(a.perms[1], b.perms[1])


def test_plan_rejects_bad_t():
    with pytest.raises(ValueError):
        make_plan("stack", 2, 2, t=0, seed=0)


# ---------------------------------------------------------------------------
# reshape values


def test_reshape_tiny_frozen_grids():
    e_s = np.array([10.0, 11.0])
    e_r = np.array([20.0, 21.0])
    stack = make_plan("stack", 1, 2, t=1, seed=0)
    grid, _ = reshape(stack, 0, e_s, e_r)
    npt.assert_array_equal(grid, [[10.0, 11.0], [20.0, 21.0]])
    cheq = make_plan("chequer", 1, 2, t=1, seed=0)
    grid, _ = reshape(cheq, 0, e_s, e_r)
    npt.assert_array_equal(grid, [[10.0, 20.0], [21.0, 11.0]])


def test_reshape_respects_channel_permutation():
    d_w, d_h = 3, 4
    plan = make_plan("stack", d_w, d_h, t=2, seed=5)
    rng = np.random.default_rng(0)
    e_s = rng.normal(size=12)
    e_r = rng.normal(size=12)
    grid, _ = reshape(plan, 1, e_s, e_r)
    top = grid[:d_w].ravel()
    bottom = grid[d_w:].ravel()
    npt.assert_array_equal(top, e_s[plan.perms[1, 0]])
    npt.assert_array_equal(bottom, e_r[plan.perms[1, 1]])


@pytest.mark.parametrize("kind,tau", [("stack", 1), ("alternate", 1),
                                      ("alternate", 2), ("chequer", 1)])
def test_reshape_invert_roundtrip(kind, tau):
    plan = make_plan(kind, 4, 6, t=3, seed=9, tau=tau)
    rng = np.random.default_rng(42)
    for i in range(plan.t):
        e_s = rng.normal(size=plan.d)
        e_r = rng.normal(size=plan.d)
        grid, prov = reshape(plan, i, e_s, e_r)
        back_s, back_r = invert(grid, prov)
        npt.assert_array_equal(back_s, e_s[plan.perms[i, 0]])
        npt.assert_array_equal(back_r, e_r[plan.perms[i, 1]])


def test_reshape_argument_errors():
    plan = make_plan("chequer", 2, 2, t=1, seed=0)
    with pytest.raises(ValueError):
        reshape(plan, 1, np.zeros(4), np.zeros(4))
    with pytest.raises(ValueError):
        reshape(plan, 0, np.zeros(3), np.zeros(4))


# ---------------------------------------------------------------------------
# padding


def test_pad_zero_border():
    grid = np.arange(1.0, 5.0).reshape(2, 2)
    out = pad(grid, 1, PAD_ZERO)
    assert out.shape == (4, 4)
    npt.assert_array_equal(out[0], 0.0)
    npt.assert_array_equal(out[:, 0], 0.0)
    npt.assert_array_equal(out[1:3, 1:3], grid)


def test_pad_circular_wraps():
    rng = np.random.default_rng(1)
    grid = rng.normal(size=(4, 6))
    p = 2
    out = pad(grid, p, PAD_CIRCULAR)
    h, w = grid.shape
    for i in range(out.shape[0]):
        for j in range(out.shape[1]):
            assert out[i, j] == grid[(i - p) % h, (j - p) % w]


def test_pad_zero_width_is_identity():
    grid = np.ones((2, 2))
    assert pad(grid, 0, PAD_ZERO) is grid


def test_pad_provenance_matches_pad():
    prov = layout("chequer", 2, 4)
    zp = pad_provenance(prov, 1, PAD_ZERO)
    assert zp.shape == (6, 6)
    npt.assert_array_equal(zp.source[0], SOURCE_BLANK)
    npt.assert_array_equal(zp.index[:, 0], -1)
    npt.assert_array_equal(zp.source[1:-1, 1:-1], prov.source)
    cp = pad_provenance(prov, 1, PAD_CIRCULAR)
    npt.assert_array_equal(cp.source[0, 1:-1], prov.source[-1])
    npt.assert_array_equal(cp.index[1:-1, 0], prov.index[:, -1])


def test_pad_mode_errors():
    with pytest.raises(ValueError):
        pad(np.ones((2, 2)), 1, "reflect")
    with pytest.raises(ValueError):
        pad(np.ones((2, 2)), -1, PAD_ZERO)
