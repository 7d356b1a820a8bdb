"""Walk through the three ways of arranging two embeddings on a grid.

Run with:  python3 demos/01_grid_layouts.py

A subject embedding and a relation embedding, d components each, are
arranged into a (2*d_w) x d_h grid before convolution.  The layout
decides which components can meet inside a kernel window:

* stack      -- subject on the top half, relation on the bottom,
* alternate  -- bands of tau rows from each source, interleaved,
* chequer    -- strict chessboard, no two neighbours share a source.
"""

import numpy as np

from interacte.reshape import invert, layout, make_plan, reshape


def show(name, prov):
    letters = np.where(prov.source == 0, "S", "R")
    print(f"{name:>12}:")
    for row in range(letters.shape[0]):
        cells = [f"{letters[row, col]}{prov.index[row, col]:<2}"
                 for col in range(letters.shape[1])]
        print("              " + " ".join(cells))


def main():
    d_w, d_h = 3, 4          # grid is (2*3) x 4 = 24 cells = 2 embeddings of d=12
    print(f"grid shape ({2 * d_w} x {d_h}), d = {d_w * d_h}\n")
    for kind, tau in (("stack", 1), ("alternate", 1), ("alternate", 3),
                      ("chequer", 1)):
        name = f"{kind}(tau={tau})" if kind == "alternate" else kind
        show(name, layout(kind, d_w, d_h, tau=tau))
        print()

    # a reshape plan bundles t component permutations; channel 0 is the
    # identity so the plain layout is always among the views
    d = d_w * d_h
    plan = make_plan("chequer", d_w, d_h, t=3, seed=0)
    print("plan permutations, subject side:")
    print(plan.perms[:, 0])

    rng = np.random.default_rng(1)
    e_s, e_r = rng.standard_normal((2, d))
    grids = np.stack([reshape(plan, i, e_s, e_r)[0] for i in range(plan.t)])
    print(f"\nreshaped embedding pair: {grids.shape}  (t, rows, cols)")

    # channel 0 carries the identity permutation, so inverting its grid
    # against the layout provenance recovers the embeddings exactly
    back_s, back_r = invert(grids[0], layout("chequer", d_w, d_h))
    print("invert recovers the embeddings exactly:",
          bool(np.array_equal(back_s, e_s) and np.array_equal(back_r, e_r)))


if __name__ == "__main__":
    main()
