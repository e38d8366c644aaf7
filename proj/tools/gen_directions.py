#!/usr/bin/env python3
"""Generate antipodally-symmetric electrostatic-repulsion direction sets.

Writes core/src/direction_tables.inc. Run from the repository root:

    python3 tools/gen_directions.py > core/src/direction_tables.inc
"""
import numpy as np


def repel(n, seed=1234, iters=4000, step=0.05):
    rng = np.random.default_rng(seed)
    p = rng.normal(size=(n, 3))
    p /= np.linalg.norm(p, axis=1, keepdims=True)
    for it in range(iters):
        force = np.zeros_like(p)
        for sign in (1.0, -1.0):
            d = p[:, None, :] - sign * p[None, :, :]
            r = np.linalg.norm(d, axis=2)
            if sign > 0:
                np.fill_diagonal(r, np.inf)
            force += (d / r[:, :, None] ** 3).sum(axis=1)
        # keep only the tangential part
        force -= (force * p).sum(axis=1, keepdims=True) * p
        lr = step * (1.0 - it / iters) / n
        p += lr * force
        p /= np.linalg.norm(p, axis=1, keepdims=True)
    # canonical hemisphere z >= 0
    p[p[:, 2] < 0] *= -1.0
    return p


def main():
    print("// Generated by tools/gen_directions.py. Do not edit.")
    for n in (30, 60, 90):
        p = repel(n)
        print(f"constexpr std::array<std::array<double, 3>, {n}> kDirections{n} = {{{{")
        for x, y, z in p:
            print(f"    {{{x:.17g}, {y:.17g}, {z:.17g}}},")
        print("}};")
        print()


if __name__ == "__main__":
    main()
