"""Verify the analytic backward pass against central finite differences.

The oracle perturbs one weight at a time by +/- epsilon and differences the
loss; the analytic pass must match every coordinate to a relative error of
1e-4 (it lands around 1e-6 in double precision).

Run: python demos/gradient_checking.py
"""

import numpy as np

from blindcnn import (
    ConvMode,
    GRADCHECK_TOLERANCE,
    RngStream,
    backward,
    finite_difference_gradient,
    forward_with_cache,
    gradient_relative_error,
    run_gradient_check,
    tiny_model,
)


def main():
    # One model, inspected by hand: tiny 10x10 input, 2 filters per layer.
    model = tiny_model(ConvMode.STANDARD, seed=0)
    data = RngStream(0).split("demo-batch")
    x = data.random((2, 1, 10, 10))
    labels = (data.random(2) * 10).astype(np.int64)

    loss, cache = forward_with_cache(model, x, labels)
    analytic = backward(model, cache, labels)
    oracle = finite_difference_gradient(model, x, labels)
    error = gradient_relative_error(analytic, oracle)
    print(f"loss {loss:.6f}, {model.num_weights} weights")
    print(f"max relative error analytic vs oracle: {error:.3e}")
    print(f"largest gradient magnitudes: {np.sort(np.abs(analytic))[-3:]}")

    # The standard sweep: 20 seeds per convolution mode.
    print("\n20-seed sweep, both convolution modes:")
    for row in run_gradient_check(range(20)):
        marker = "ok" if row["error"] <= GRADCHECK_TOLERANCE else "FAIL"
        if row["seed"] in (0, 19):  # first and last of each mode
            print(f"  {row['mode'].value:12s} seed {row['seed']:2d} "
                  f"error {row['error']:.3e} {marker}")
    rows = run_gradient_check(range(20))
    print(f"  worst of {len(rows)}: {max(r['error'] for r in rows):.3e} "
          f"(tolerance {GRADCHECK_TOLERANCE:g})")

    # Negative control: corrupt the analytic gradient and watch it fail.
    corrupted = run_gradient_check([0], modes=(ConvMode.STANDARD,), corrupt=1.0)
    print(f"\ncorrupted-gradient control error: {corrupted[0]['error']:.3f} "
          f"(far above tolerance, as it should be)")


if __name__ == "__main__":
    main()
