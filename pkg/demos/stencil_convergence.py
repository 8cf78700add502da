"""Finite-difference stencils as convolutions: polynomial exactness and
order of accuracy.

Each kernel family is applied to a smooth trig field at a ladder of
resolutions; the error table shows the expected 4x (second order) or
16x (fourth order) decay per h-halving, and the polynomial rows confirm
exactness at rounding level.

Run:  python3 demos/stencil_convergence.py
"""

import numpy as np

from picnn.stencils import (
    KERNEL_FAMILIES, first_derivative, second_derivative, stencil_reach,
    valid_mask,
)
from picnn.tensor import Tensor


def grid(n):
    y = np.linspace(0.0, 1.0, n)
    Y, X = np.meshgrid(y, y, indexing="ij")
    return X, Y


def masked_err(got, exact, n, reach):
    return float(np.max(np.abs(got - exact) * valid_mask(n, n, reach)))


def polynomial_exactness():
    print("== polynomial exactness (64x64, max abs interior error) ==")
    n = 64
    h = 1.0 / (n - 1)
    X, Y = grid(n)
    rows = [
        ("central2 d2/dx2 on x^2+xy+y^2", "central2", 2,
         X**2 + X * Y + Y**2, np.full((n, n), 2.0)),
        ("central4 d2/dx2 on x^4+x^2y^2", "central4", 2,
         X**4 + X**2 * Y**2, 12.0 * X**2 + 2.0 * Y**2),
        ("sobel3   d/dx  on 2x-3y", "sobel3", 1,
         2.0 * X - 3.0 * Y, np.full((n, n), 2.0)),
        ("sobel5   d/dx  on 2x-3y", "sobel5", 1,
         2.0 * X - 3.0 * Y, np.full((n, n), 2.0)),
    ]
    for label, family, order, f, exact in rows:
        fn = first_derivative if order == 1 else second_derivative
        got = fn(Tensor(f[None, None]), 1, h, family).data[0, 0]
        err = masked_err(got, exact, n, stencil_reach(family, order))
        print(f"  {label:34s} {err:.2e}")


def convergence_table():
    print("\n== error vs resolution on sin(2 pi x) cos(2 pi y) ==")
    sizes = (17, 33, 65, 129)
    print(f"  {'family':9s} {'order':5s} " +
          " ".join(f"n={n:<8d}" for n in sizes) + "ratios")
    for family in KERNEL_FAMILIES:
        for order in (1, 2):
            errs = []
            for n in sizes:
                h = 1.0 / (n - 1)
                X, Y = grid(n)
                f = np.sin(2 * np.pi * X) * np.cos(2 * np.pi * Y)
                if order == 1:
                    got = first_derivative(Tensor(f[None, None]), 1, h, family)
                    exact = 2 * np.pi * np.cos(2 * np.pi * X) * np.cos(2 * np.pi * Y)
                else:
                    got = second_derivative(Tensor(f[None, None]), 1, h, family)
                    exact = -(2 * np.pi) ** 2 * f
                errs.append(masked_err(got.data[0, 0], exact, n,
                                       stencil_reach(family, order)))
            ratios = "/".join(f"{a / b:.1f}" for a, b in zip(errs, errs[1:]))
            cells = " ".join(f"{e:.2e} " for e in errs)
            print(f"  {family:9s} {order:<5d} {cells}{ratios}")


def main():
    polynomial_exactness()
    convergence_table()


if __name__ == "__main__":
    main()
