"""Tour of the tensor engine: build an expression, differentiate it,
check the gradients against finite differences, then train a two-layer
conv net on a toy regression for a few steps.

Run:  python3 demos/autodiff_engine_tour.py
"""

import numpy as np

from picnn.gradcheck import gradcheck
from picnn.optim import AdamState, adam_step, clear_grads
from picnn.tensor import Tensor, conv2d, group_norm


def expression_demo():
    print("== a scalar expression and its gradient ==")
    x = Tensor(np.array([0.5, -1.2, 2.0]), requires_grad=True)
    y = Tensor(np.array([1.0, 0.3, -0.7]), requires_grad=True)
    loss = ((x * y).tanh() + x.square()).sum()
    loss.backward()
    print(f"loss          {loss.item():.6f}")
    print(f"dloss/dx      {np.array2string(x.grad, precision=6)}")
    print(f"dloss/dy      {np.array2string(y.grad, precision=6)}")

    err = gradcheck(lambda a, b: ((a * b).tanh() + a.square()).sum(), [x, y])
    print(f"worst relative error vs central differences: {err:.2e}")


def conv_demo():
    print("\n== gradcheck on a conv/norm block ==")
    rng = np.random.default_rng(3)
    x = Tensor(rng.normal(size=(2, 2, 6, 6)))
    w = Tensor(rng.normal(size=(4, 2, 3, 3)) * 0.4)
    gamma = Tensor(np.ones(4))
    beta = Tensor(np.zeros(4))

    def block(x_, w_, g_, b_):
        return group_norm(conv2d(x_, w_, padding="same"), 2, g_, b_).square().mean()

    err = gradcheck(block, [x, w, gamma, beta])
    print(f"worst relative error: {err:.2e}")


def training_demo():
    print("\n== 60 Adam steps on a toy deconvolution ==")
    rng = np.random.default_rng(7)
    truth = rng.normal(size=(1, 1, 8, 8))
    blur = np.full((1, 1, 3, 3), 1.0 / 9.0)
    target = conv2d(Tensor(truth), Tensor(blur), padding="same").data

    w1 = Tensor(rng.normal(size=(4, 1, 3, 3)) * 0.3, requires_grad=True)
    w2 = Tensor(rng.normal(size=(1, 4, 3, 3)) * 0.3, requires_grad=True)
    params = [w1, w2]
    state = AdamState(params, lr=3e-2)

    x = Tensor(target)
    for step in range(60):
        h = conv2d(x, w1, padding="same").relu()
        out = conv2d(h, w2, padding="same")
        loss = (out - Tensor(truth)).square().mean()
        clear_grads(params)
        loss.backward()
        adam_step(params, state)
        if step % 15 == 0 or step == 59:
            print(f"step {step:3d}  loss {loss.item():.6f}")


def main():
    expression_demo()
    conv_demo()
    training_demo()


if __name__ == "__main__":
    main()
