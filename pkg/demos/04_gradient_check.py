"""Verify the hand-written backward pass with finite differences.

Run with:  python3 demos/04_gradient_check.py

Every gradient in this package is derived and coded by hand, so the
check below compares each one against a central finite difference on a
small 64-bit model.  Relative errors around 1e-7 are pure floating
point noise; anything above 1e-4 would mean a wrong derivative.
"""

import warnings

import numpy as np

from interacte.convcore import gradcheck
from interacte.model import ConfigWarning, ModelConfig, ModelParams, \
    forward_backward, init_params


def main():
    # the demo model is deliberately tiny, which the config validator
    # flags as off the supported sweep grid; that soft warning is expected
    warnings.simplefilter("ignore", ConfigWarning)
    config = ModelConfig(d_w=2, d_h=4, t=2, k=3, n_filters=2,
                         reshaping="chequer", conv_mode="circular",
                         input_dropout=0.0, feature_dropout=0.0,
                         hidden_dropout=0.0, label_smoothing=0.1,
                         dtype="float64")
    params = init_params(config, n_entities=5, n_relations=2, seed=3)
    pairs = np.array([[0, 0], [2, 1], [4, 3]])    # row 3 = inverse of relation 1
    targets = [{1}, {0, 3}, {4}]

    def fn(tensors):
        trial = ModelParams(entity=tensors["entity"],
                            relation=tensors["relation"],
                            filters=tensors["filters"],
                            proj=tensors["proj"],
                            entity_bias=tensors.get("entity_bias"),
                            perms=params.perms)
        loss, grads, _ = forward_backward(trial, config, pairs, targets,
                                          training=False)
        return loss, grads.named()

    result = gradcheck(fn, params.learnable(), eps=1e-5,
                       max_coords_per_tensor=128, seed=0)
    print(f"status: {result.status}")
    print(f"coordinates probed: {result.n_coords}")
    for name, report in sorted(result.per_tensor.items()):
        print(f"  {name:>12}: max rel error {report['max_rel_error']:.3e} "
              f"over {report['n_coords']} coords")
    print(f"overall: {result.max_rel_error:.3e}  "
          f"({'PASS' if result.max_rel_error < 1e-4 else 'FAIL'} at 1e-4)")


if __name__ == "__main__":
    main()
