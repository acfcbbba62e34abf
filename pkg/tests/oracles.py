"""Independent reference computations used by the tests.

Nothing here calls the finite-difference machinery of the package.
"""
import numpy as np
import sympy as sp
from scipy.integrate import solve_ivp


def homogeneous_t2(a2, k, phi, rho, p, t, lam, tau_end):
    """Spatially homogeneous T^2 data ``h = a2 delta, K = k delta, psi = p dx^dy, theta = t dx^dy``.

    The reduced system collapses to ODEs in ``(a2, k, phi, rho, p, t)``, integrated
    with DOP853 at ``rtol = atol = 1e-12``; returns the dense-output solution.
    """
    def rhs(_, y):
        A, kk, ph, r, pp, _t = y
        e, ep = np.exp(-4.0 * ph), np.exp(2.0 * ph)
        return [kk,
                e * pp ** 2 / A + 2.0 * lam * ep * A,
                r,
                -r * kk / A - e * pp ** 2 / A ** 2 - lam * ep,
                (kk / A + 4.0 * r) * pp,
                pp]

    sol = solve_ivp(rhs, (0.0, tau_end), [a2, k, phi, rho, p, t], method="DOP853",
                    rtol=1e-12, atol=1e-12, dense_output=True)
    assert sol.success
    return sol


def symbolic_ricci(entries, coords):
    """Ricci tensor of a symbolic metric from exact first and second derivatives.

    Derivatives of the entries are taken by sympy; the Christoffel and Ricci
    contractions are then done pointwise. Returns ``f(*arrays) -> (d, d, ...)``.
    """
    d = len(coords)
    g = [[sp.sympify(e) for e in row] for row in entries]
    dg = [[[sp.diff(g[i][j], coords[l]) for j in range(d)] for i in range(d)] for l in range(d)]
    ddg = [[[[sp.diff(dg[l][i][j], coords[m]) for j in range(d)] for i in range(d)] for l in range(d)]
           for m in range(d)]
    f_g, f_dg, f_ddg = (sp.lambdify(coords, t, "numpy") for t in (g, dg, ddg))

    def evaluate(*xs):
        shape = np.broadcast(*xs).shape

        def arr(t):
            obj = np.array(t, dtype=object)
            vals = [np.broadcast_to(np.asarray(v, dtype=float), shape) for v in obj.ravel()]
            return np.array(vals).reshape(obj.shape + shape)

        G, dG, ddG = arr(f_g(*xs)), arr(f_dg(*xs)), arr(f_ddg(*xs))
        ginv = np.moveaxis(np.linalg.inv(np.moveaxis(G, (0, 1), (-2, -1))), (-2, -1), (0, 1))
        # lowered symbols L[l,i,j] = 1/2 (d_i g_jl + d_j g_il - d_l g_ij) and their derivatives
        low = 0.5 * (np.einsum("ijl...->lij...", dG) + np.einsum("jil...->lij...", dG) - dG)
        dlow = 0.5 * (np.einsum("mijl...->mlij...", ddG) + np.einsum("mjil...->mlij...", ddG) - ddG)
        gam = np.einsum("kl...,lij...->kij...", ginv, low)
        dginv = -np.einsum("ka...,mab...,bl...->mkl...", ginv, dG, ginv)
        dgam = (np.einsum("mkl...,lij...->mkij...", dginv, low)
                + np.einsum("kl...,mlij...->mkij...", ginv, dlow))
        ric = (np.einsum("kkij...->ij...", dgam) - np.einsum("ikkj...->ij...", dgam)
               + np.einsum("kkl...,lij...->ij...", gam, gam) - np.einsum("kil...,lkj...->ij...", gam, gam))
        return ric

    return evaluate


def conformal_scalar_curvature_2d(u, lap_u):
    """``s = -2 exp(-2u) (u_xx + u_yy)`` for ``h = exp(2u) delta`` in two dimensions."""
    return -2.0 * np.exp(-2.0 * u) * lap_u


def observed_order(coarse, fine, factor=2.0):
    return float(np.log(coarse / fine) / np.log(factor))
