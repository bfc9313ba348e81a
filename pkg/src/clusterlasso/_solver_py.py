"""Pure-NumPy inner loop of the accelerated proximal-gradient solver.

Mirrors the compiled kernel in ``_solver_kernel.pyx`` step for step: a block
of monotone FISTA iterations with backtracking on the Lipschitz estimate and
gradient-scheme restarts. State arrays are mutated in place; scalar state is
threaded through the return value.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND_NAME = "pure"


def run_block(X, y, lam, steps, x, xp, yv, z, grad, rn, un, dbuf, t, fx, lip, hist, hist_pos):
    """Advance ``steps`` iterations; returns updated (t, fx, lip, hist_pos)."""
    for _ in range(steps):
        np.matmul(X, yv, out=rn)
        rn -= y
        fy = 0.5 * float(rn @ rn)
        np.matmul(X.T, rn, out=grad)
        while True:
            np.multiply(grad, -1.0 / lip, out=z)
            z += yv
            _soft_threshold(z, lam / lip)
            np.matmul(X, z, out=un)
            un -= y
            fz = 0.5 * float(un @ un)
            np.subtract(z, yv, out=dbuf)
            bound = fy + float(grad @ dbuf) + 0.5 * lip * float(dbuf @ dbuf)
            if fz <= bound + 1e-12 * abs(fy):
                break
            lip *= 2.0
        fz_total = fz + lam * float(np.abs(z).sum())

        np.subtract(yv, z, out=dbuf)
        np.subtract(z, xp, out=grad)  # grad is free scratch here
        restart = float(dbuf @ grad) > 0.0
        if restart:
            t = 1.0
        tn = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        a = t / tn
        b = (t - 1.0) / tn
        if fz_total <= fx:
            # accepted point is z: yv = z + b (z - xp)
            np.subtract(z, xp, out=dbuf)
            dbuf *= b
            np.add(z, dbuf, out=yv)
            xp[:] = z
            x[:] = z
            fx = fz_total
        else:
            # accepted point stays x: yv = x + a (z - x) + b (x - xp)
            np.subtract(z, x, out=dbuf)
            dbuf *= a
            np.add(x, dbuf, out=yv)
            np.subtract(x, xp, out=dbuf)
            dbuf *= b
            yv += dbuf
            xp[:] = x
        t = tn
        if hist is not None:
            hist[hist_pos] = fx
            hist_pos += 1
    return t, fx, lip, hist_pos


def _soft_threshold(v, thresh):
    signs = np.sign(v)
    np.abs(v, out=v)
    v -= thresh
    np.clip(v, 0.0, None, out=v)
    v *= signs
