"""See what wrap-around padding does to a depth-wise convolution.

Run with:  python3 demos/03_circular_convolution.py

With circular indexing every output position sees a full kernel
support, so border cells interact with the opposite edge instead of
with synthetic zeros.
"""

import numpy as np

from interacte.convcore import conv2d


def main():
    x = np.zeros((1, 5, 5))
    x[0, 0, 0] = 1.0                      # a single unit in the corner
    box = np.ones((1, 3, 3))

    print("input (impulse in the corner):")
    print(x[0].astype(int))
    print("\n3x3 box filter, zero padding -- the response clips at the edge:")
    print(conv2d(x, box, "zero")[0].astype(int))
    print("\nsame filter, circular padding -- the response wraps around:")
    print(conv2d(x, box, "circular")[0].astype(int))

    # the delta kernel reproduces the input exactly under circular padding
    delta = np.zeros((1, 3, 3))
    delta[0, 1, 1] = 1.0
    rng = np.random.default_rng(0)
    y = rng.standard_normal((1, 6, 6))
    print("\ndelta kernel is the identity:",
          bool(np.allclose(conv2d(y, delta, "circular"), y, atol=1e-12)))

    # and circular convolution commutes with any cyclic shift
    w = rng.standard_normal((1, 3, 3))
    shifted = np.roll(y, (2, 3), axis=(1, 2))
    lhs = conv2d(shifted, w, "circular")
    rhs = np.roll(conv2d(y, w, "circular"), (2, 3), axis=(1, 2))
    print("shift equivariance holds to 1e-12:",
          bool(np.allclose(lhs, rhs, atol=1e-12)))

    # depth-wise with F filters: channel c convolved with filter f lands
    # in output channel c * F + f, no cross-channel mixing
    x2 = rng.standard_normal((2, 5, 5))
    w2 = rng.standard_normal((3, 3, 3))
    out = conv2d(x2, w2, "circular")
    print(f"\ndepth-wise layout: {x2.shape[0]} channels x {w2.shape[0]} filters "
          f"-> output shape {out.shape}")
    alone = conv2d(x2[1:2], w2[2:3], "circular")
    print("output channel 1*3+2 equals the lone (channel 1, filter 2) pass:",
          bool(np.array_equal(out[1 * 3 + 2], alone[0])))


if __name__ == "__main__":
    main()
