"""Walk the forward-pass kernels on arrays small enough to check by eye.

Run: python demos/tensor_kernels.py
"""

import numpy as np

from blindcnn import (
    ConvMode,
    KernelBank,
    build_three_layer_cnn,
    conv2d,
    maxpool2,
    softmax_cross_entropy,
    softmax_preprocess,
)


def main():
    # A 5x5 single-channel image with an obvious vertical edge; the 2x2
    # filter below leaves a 4x4 map, which 2x2 pooling halves cleanly.
    x = np.zeros((1, 1, 5, 5))
    x[0, 0, :, 3:] = 1.0
    print("input:\n", x[0, 0])

    # One 2x2 edge detector. Standard mode banks are (filters, in_ch, kh, kw).
    edge = np.array([[[[-1.0, 1.0], [-1.0, 1.0]]]])
    bank = KernelBank(ConvMode.STANDARD, edge)
    feature = conv2d(x, bank)
    print("\nvalid correlation with a vertical-edge filter:\n", feature[0, 0])

    # 2x2 max pooling halves each spatial axis, keeping the strongest response.
    print("\nmax-pooled:\n", maxpool2(feature)[0, 0])

    # Channel-sum mode collapses input channels first, so its banks are
    # (filters, kh, kw) with no input-channel axis. On a single-channel
    # input both modes agree exactly.
    cs_bank = KernelBank(ConvMode.CHANNEL_SUM, edge[:, 0])
    print("\nchannel-sum equals standard on one channel:",
          np.array_equal(conv2d(x, cs_bank), feature))

    # Two channels: channel-sum adds them, then correlates once.
    x2 = np.concatenate([x, 2 * x], axis=1)
    print("channel-sum of a doubled image triples the response:",
          np.array_equal(conv2d(x2, cs_bank), 3 * feature))

    # The loss head divides each row by its std, subtracts the row max
    # (making the max exactly 0), and applies softmax cross-entropy.
    logits = np.array([[2.0, 1.0, 0.0], [0.0, 0.0, 0.0]])
    shifted = softmax_preprocess(logits)
    print("\npreprocessed logits (row max pinned at 0):\n", shifted)
    print("loss for labels [0, 1]:",
          softmax_cross_entropy(logits, np.array([0, 1])))

    # The full pipeline picks kernel sizes so each pooled extent stays even:
    # 28 -> (5,5,4), 32 -> (5,5,5), and the head ends at 1x1 per class.
    for side in (28, 32):
        model = build_three_layer_cnn((1, side, side), 10, ConvMode.STANDARD)
        sizes = [(s.kh, s.kw) for s in model.conv_specs]
        print(f"\n{side}x{side} input -> kernel schedule {sizes}, "
              f"{model.num_weights} weights")
        out = model.forward(np.zeros((2, 1, side, side)))
        print("head output shape per example:", out.shape)


if __name__ == "__main__":
    main()
