"""Riemannian tensor calculus on a lattice.

Conventions used throughout the package:

* codifferential ``(delta a)_J = -h^{ab} (nabla_a a)_{bJ}``; on flat metrics
  ``delta d f = -sum_a f_aa`` (the positive Laplacian);
* determinant inner product on k-forms carries a ``1/k!`` weight, so
  orthonormal wedge monomials have unit norm;
* ``(a o b)_ij = 1/(k-1)! a_{iA} b_{jB} h^{AB}`` for k-forms;
* ``(psi _| H)_J = 1/p! psi^I H_{IJ}`` for a p-form ``psi``;
* ``K Delta1 a = sum_{ab} h^{ab} K(d_a) ^ i_{d_b} a``.

Metric-dependent operations take a :class:`Metric`, which caches its
pointwise inverse.
"""
from __future__ import annotations

import itertools
import math
import string

import numpy as np

from .grid import (Field, GridError, OneForm, ScalarField, SymTensor2, VectorField, _parity,
                   alt, form_class)

__all__ = [
    "DegenerateMetricError",
    "Metric",
    "Christoffel",
    "inverse_metric",
    "christoffel",
    "ricci",
    "scalar_curvature",
    "hessian",
    "codifferential",
    "div_symtensor",
    "det_inner",
    "norm2",
    "circ_form",
    "circ_sym",
    "delta1",
    "form_contract",
    "sharp",
    "flat",
    "trace",
    "sym_norm2",
    "covariant_derivative_oneform",
    "lie_derivative_metric",
    "wedge",
    "interior",
    "volume_form",
]


class DegenerateMetricError(ValueError):
    """Metric is not positive definite or too badly conditioned somewhere."""


class Metric(SymTensor2):
    """Pointwise symmetric positive definite 2-tensor."""

    __slots__ = ("_inv", "_christoffel")

    def _project(self, data):
        data = super()._project(data)
        if _quick_spd(data):
            return data
        mats = np.moveaxis(data, (0, 1), (-2, -1))
        eig = np.linalg.eigvalsh(mats)
        lo = eig[..., 0]
        if np.min(lo) <= 1e-10:
            idx = np.unravel_index(int(np.argmin(lo)), lo.shape)
            raise DegenerateMetricError(
                f"metric is not positive definite at grid index {tuple(int(i) for i in idx)} "
                f"(smallest eigenvalue {float(lo[idx]):.3e})")
        cond = eig[..., -1] / lo
        if np.max(cond) > 1e10:
            idx = np.unravel_index(int(np.argmax(cond)), cond.shape)
            raise DegenerateMetricError(
                f"metric condition number {float(cond[idx]):.3e} exceeds 1e10 at grid index "
                f"{tuple(int(i) for i in idx)}")
        return data

    def __init__(self, grid, data):
        super().__init__(grid, data)
        self._inv = None
        self._christoffel = None

    @classmethod
    def from_tensor(cls, t: SymTensor2) -> "Metric":
        return cls(t.grid, t.data)

    @classmethod
    def euclidean(cls, grid, scale=1.0):
        eye = np.eye(grid.dim).reshape((grid.dim, grid.dim) + (1,) * len(grid.shape))
        return cls(grid, scale * np.broadcast_to(eye, (grid.dim, grid.dim) + grid.shape))

    def like(self, data):
        # arithmetic on metrics need not stay positive definite
        return SymTensor2(self.grid, data)

    @property
    def inv(self):
        """Dense inverse components ``h^{ij}`` (read-only array)."""
        if self._inv is None:
            inv = _inverse(self.data)
            inv = 0.5 * (inv + np.swapaxes(inv, 0, 1))
            inv.flags.writeable = False
            self._inv = inv
        return self._inv

    @property
    def sqrt_det(self):
        return np.sqrt(_det(self.data))


def _det(m):
    """Pointwise determinant of ``m[i, j, ...]``; cofactor formulas up to 3x3."""
    d = m.shape[0]
    if d == 1:
        return m[0, 0].copy()
    if d == 2:
        return m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    if d == 3:
        return (m[0, 0] * (m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1])
                - m[0, 1] * (m[1, 0] * m[2, 2] - m[1, 2] * m[2, 0])
                + m[0, 2] * (m[1, 0] * m[2, 1] - m[1, 1] * m[2, 0]))
    return np.linalg.det(np.moveaxis(m, (0, 1), (-2, -1)))


def _inverse(m):
    d = m.shape[0]
    if d > 3:
        return np.moveaxis(np.linalg.inv(np.moveaxis(m, (0, 1), (-2, -1))), (-2, -1), (0, 1))
    det = _det(m)
    if d == 1:
        return (1.0 / det)[None, None]
    out = np.empty_like(m)
    if d == 2:
        out[0, 0], out[1, 1] = m[1, 1], m[0, 0]
        out[0, 1], out[1, 0] = -m[0, 1], -m[1, 0]
    else:
        for i in range(3):
            for j in range(3):
                r = [a for a in range(3) if a != j]
                c = [b for b in range(3) if b != i]
                minor = m[r[0], c[0]] * m[r[1], c[1]] - m[r[0], c[1]] * m[r[1], c[0]]
                out[i, j] = minor if (i + j) % 2 == 0 else -minor
    return out / det


def _quick_spd(m):
    """Cheap sufficient test for ``lambda_min > 1e-10`` and condition number ``<= 1e10``.

    Uses Sylvester's criterion with ``lambda_max <= tr`` and
    ``lambda_min >= det / tr^(d-1)``; inconclusive cases fall back to eigenvalues.
    """
    d = m.shape[0]
    if d > 3:
        return False
    for k in range(1, d + 1):
        if np.min(_det(m[:k, :k])) <= 0:
            return False
    tr = sum(m[i, i] for i in range(d))
    det = _det(m)
    lo = det / tr ** (d - 1)
    return bool(np.min(lo) > 1e-10 and np.max(tr / lo) <= 1e10)


class Christoffel:
    """Levi-Civita symbols ``data[k, i, j] = Gamma^k_{ij}``, symmetric in ``i, j``."""

    __slots__ = ("grid", "data")

    def __init__(self, grid, data):
        data = np.asarray(data, dtype=float)
        data = 0.5 * (data + np.swapaxes(data, 1, 2))
        data.flags.writeable = False
        self.grid = grid
        self.data = data

    def contracted(self, h: Metric):
        """``h^{ij} Gamma^k_{ij}``."""
        return np.einsum("ij...,kij...->k...", h.inv, self.data)


# ---------------------------------------------------------------------------
# index helpers


def _raise(t, hinv, slots):
    """Raise the listed leading slots of a dense tensor with ``h^{-1}``."""
    r = t.ndim - hinv.ndim + 2
    letters = string.ascii_letters[:r]
    for s in slots:
        new = "Z"
        src = letters
        dst = letters[:s] + new + letters[s + 1:]
        t = np.einsum(f"{new}{letters[s]}...,{src}...->{dst}...", hinv, t)
    return t


def _metric_check(h, *fields):
    if not isinstance(h, Metric):
        raise TypeError("expected a Metric")
    for f in fields:
        if f.grid != h.grid:
            raise GridError("field and metric live on different grids")


# ---------------------------------------------------------------------------
# curvature


def inverse_metric(h: Metric) -> SymTensor2:
    _metric_check(h)
    return SymTensor2(h.grid, h.inv)


def christoffel(h: Metric) -> Christoffel:
    """``Gamma^k_ij = 1/2 h^kl (d_i h_jl + d_j h_il - d_l h_ij)``."""
    _metric_check(h)
    if h._christoffel is None:
        dh = h.grid.grad(h.data)  # dh[l, i, j] = d_l h_ij
        # lowered symbol T[l, i, j]
        low = 0.5 * (np.einsum("ijl...->lij...", dh) + np.einsum("jil...->lij...", dh) - dh)
        h._christoffel = Christoffel(h.grid, np.einsum("kl...,lij...->kij...", h.inv, low))
    return h._christoffel


def _ricci_array(h: Metric):
    grid = h.grid
    gam = christoffel(h).data
    # d_k Gamma^k_ij - d_i Gamma^k_kj, without forming the full derivative array
    ric = sum(grid.diff(gam[k], k) for k in range(grid.dim))
    trace_gam = np.einsum("kkj...->j...", gam)
    ric -= np.stack([grid.diff(trace_gam, i) for i in range(grid.dim)])
    ric += np.einsum("kkl...,lij...->ij...", gam, gam)
    ric -= np.einsum("kil...,lkj...->ij...", gam, gam)
    return 0.5 * (ric + np.swapaxes(ric, 0, 1))


def ricci(h: Metric) -> SymTensor2:
    """Ricci tensor assembled from Christoffel derivatives."""
    _metric_check(h)
    return SymTensor2(h.grid, _ricci_array(h))


def scalar_curvature(h: Metric) -> ScalarField:
    _metric_check(h)
    return ScalarField(h.grid, np.einsum("ij...,ij...->...", h.inv, _ricci_array(h)))


def hessian(h: Metric, f: ScalarField) -> SymTensor2:
    """``(nabla d f)_ij = d_i d_j f - Gamma^k_ij d_k f``."""
    _metric_check(h, f)
    df = h.grid.grad(f.data)
    ddf = h.grid.grad(df)
    ddf = 0.5 * (ddf + np.swapaxes(ddf, 0, 1))
    ddf -= np.einsum("kij...,k...->ij...", christoffel(h).data, df)
    return SymTensor2(h.grid, ddf)


def _divergence(h: Metric, t):
    """``h^{ab} (nabla_a t)_{bJ}`` for a dense covariant tensor of rank >= 1."""
    grid = h.grid
    rank = t.ndim - len(grid.shape)
    hinv = h.inv
    gam = christoffel(h).data
    letters = "bcde"[:rank]  # slot letters of t; b is the contracted slot
    rest = letters[1:]
    out = np.zeros(t.shape[1:])
    for a in range(grid.dim):
        out += np.einsum(f"b...,{letters}...->{rest}...", hinv[a], grid.diff(t, a))
    out -= np.einsum(f"m...,m{rest}...->{rest}...", christoffel(h).contracted(h), t)
    if rank > 1:
        mix = np.einsum("ab...,maj...->bmj...", hinv, gam)  # h^{ab} Gamma^m_{aj}
        for s, js in enumerate(rest):
            inner = rest[:s] + "m" + rest[s + 1:]
            out -= np.einsum(f"bm{js}...,b{inner}...->{rest}...", mix, t)
    return out


def codifferential(h: Metric, alpha: Field) -> Field:
    """``delta alpha = -h^{ab} (nabla_a alpha)_{b...}`` for a k-form, k >= 1."""
    _metric_check(h, alpha)
    k = alpha.rank
    if k == 0 or alpha.symmetry == "sym":
        raise GridError("codifferential needs a form of degree >= 1")
    if k > h.grid.dim:
        raise GridError(f"degree {k} exceeds the dimension")
    out = -_divergence(h, alpha.data)
    if k > 2:
        out = alt(out, k - 1)
    return form_class(k - 1)(h.grid, out)


def div_symtensor(h: Metric, t: SymTensor2) -> OneForm:
    """``(delta T)_j = -h^{ab} (nabla_a T)_{bj}``."""
    _metric_check(h, t)
    return OneForm(h.grid, -_divergence(h, t.data))


def covariant_derivative_oneform(h: Metric, w: OneForm):
    """Dense ``(nabla w)[i, j] = d_i w_j - Gamma^k_ij w_k``."""
    _metric_check(h, w)
    return h.grid.grad(w.data) - np.einsum("kij...,k...->ij...", christoffel(h).data, w.data)


def lie_derivative_metric(h: Metric, v: VectorField) -> SymTensor2:
    """``L_v h = nabla_i v_j + nabla_j v_i`` with ``v_j = h_jk v^k``."""
    nab = covariant_derivative_oneform(h, flat(h, v))
    return SymTensor2(h.grid, nab + np.swapaxes(nab, 0, 1))


# ---------------------------------------------------------------------------
# algebra


def sharp(h: Metric, alpha: OneForm) -> VectorField:
    _metric_check(h, alpha)
    return VectorField(h.grid, np.einsum("ij...,j...->i...", h.inv, alpha.data))


def flat(h: Metric, v: VectorField) -> OneForm:
    _metric_check(h, v)
    return OneForm(h.grid, np.einsum("ij...,j...->i...", h.data, v.data))


def trace(h: Metric, t: SymTensor2) -> ScalarField:
    _metric_check(h, t)
    return ScalarField(h.grid, np.einsum("ij...,ij...->...", h.inv, t.data))


def sym_norm2(h: Metric, t: SymTensor2) -> ScalarField:
    """Tensor norm ``T_ij T^ij`` of a symmetric 2-tensor."""
    _metric_check(h, t)
    up = _raise(t.data, h.inv, (0, 1))
    return ScalarField(h.grid, np.einsum("ij...,ij...->...", up, t.data))


def _check_forms(alpha, beta):
    if alpha.rank != beta.rank:
        raise GridError(f"rank mismatch: {alpha.rank} vs {beta.rank}")
    if alpha.symmetry == "sym" or beta.symmetry == "sym":
        raise GridError("expected differential forms")


def det_inner(h: Metric, alpha: Field, beta: Field) -> ScalarField:
    """Determinant inner product ``1/k! alpha_I beta^I``."""
    _metric_check(h, alpha, beta)
    _check_forms(alpha, beta)
    k = alpha.rank
    if k == 0:
        return ScalarField(h.grid, alpha.data * beta.data)
    up = _raise(beta.data, h.inv, range(k))
    tot = np.einsum("i...,i...->...", up.reshape((-1,) + h.grid.shape),
                    alpha.data.reshape((-1,) + h.grid.shape))
    return ScalarField(h.grid, tot / math.factorial(k))


def norm2(h: Metric, alpha: Field) -> ScalarField:
    """Determinant norm squared ``|alpha|^2_h``."""
    return det_inner(h, alpha, alpha)


def circ_form(h: Metric, alpha: Field, beta: Field) -> SymTensor2:
    """``(alpha o beta)(v, w) = <i_v alpha, i_w beta>`` for k-forms, k >= 1."""
    _metric_check(h, alpha, beta)
    _check_forms(alpha, beta)
    k = alpha.rank
    if k < 1:
        raise GridError("circ_form needs forms of degree >= 1")
    d = h.grid.dim
    up = _raise(beta.data, h.inv, range(1, k))
    a = alpha.data.reshape((d, -1) + h.grid.shape)
    b = up.reshape((d, -1) + h.grid.shape)
    out = np.einsum("iA...,jA...->ij...", a, b) / math.factorial(k - 1)
    return SymTensor2(h.grid, 0.5 * (out + np.swapaxes(out, 0, 1)))


def circ_sym(h: Metric, a: SymTensor2, b: SymTensor2) -> SymTensor2:
    """``(A o B)_ij = A_ik h^kl B_lj``, symmetrized."""
    _metric_check(h, a, b)
    out = np.einsum("ik...,kl...,lj...->ij...", a.data, h.inv, b.data)
    return SymTensor2(h.grid, 0.5 * (out + np.swapaxes(out, 0, 1)))


def delta1(h: Metric, kt: SymTensor2, alpha: Field) -> Field:
    """``K Delta1 alpha = sum_ab h^ab K(d_a) ^ i_{d_b} alpha``.

    In components this is ``k Alt(K^b_{i1} alpha_{b i2 ... ik})``.
    """
    _metric_check(h, kt, alpha)
    k = alpha.rank
    if k < 1 or alpha.symmetry == "sym":
        raise GridError("delta1 needs a form of degree >= 1")
    mixed = np.einsum("ab...,ai...->bi...", h.inv, kt.data)  # K^b_i
    d = h.grid.dim
    a = alpha.data.reshape((d, -1) + h.grid.shape)
    out = np.einsum("bi...,bA...->iA...", mixed, a).reshape(alpha.data.shape)
    return alpha.like(k * alt(out, k))


def form_contract(h: Metric, psi: Field, big: Field) -> Field:
    """``(psi _| H)_J = 1/p! psi^I H_{IJ}``."""
    _metric_check(h, psi, big)
    p, q = psi.rank, big.rank
    if p > q:
        raise GridError(f"cannot contract a {p}-form into a {q}-form")
    d = h.grid.dim
    up = _raise(psi.data, h.inv, range(p)).reshape((-1,) + h.grid.shape)
    hb = big.data.reshape((d ** p, -1) + h.grid.shape)
    out = np.einsum("I...,IJ...->J...", up, hb) / math.factorial(p)
    out = out.reshape((d,) * (q - p) + h.grid.shape)
    return form_class(q - p)(h.grid, out)


def wedge(alpha: Field, beta: Field) -> Field:
    """``alpha ^ beta = (p+q)!/(p! q!) Alt(alpha (x) beta)``."""
    if alpha.grid != beta.grid:
        raise GridError("fields live on different grids")
    p, q = alpha.rank, beta.rank
    grid = alpha.grid
    if p + q > grid.dim:
        return None
    d = grid.dim
    a = alpha.data.reshape((-1,) + grid.shape)
    b = beta.data.reshape((-1,) + grid.shape)
    prod = np.einsum("I...,J...->IJ...", a, b).reshape((d,) * (p + q) + grid.shape)
    coef = math.factorial(p + q) / (math.factorial(p) * math.factorial(q))
    return form_class(p + q)(grid, coef * alt(prod, p + q))


def interior(v: VectorField, alpha: Field) -> Field:
    """``i_v alpha``, contracting ``v`` into the first slot."""
    if alpha.rank < 1:
        raise GridError("interior product needs a form of degree >= 1")
    if v.grid != alpha.grid:
        raise GridError("fields live on different grids")
    d = alpha.grid.dim
    a = alpha.data.reshape((d, -1) + alpha.grid.shape)
    out = np.einsum("i...,iA...->A...", v.data, a).reshape(alpha.data.shape[1:])
    return form_class(alpha.rank - 1)(alpha.grid, out)


def volume_form(h: Metric) -> Field:
    """Riemannian volume form ``sqrt(det h) dx^1 ^ ... ^ dx^n``."""
    d = h.grid.dim
    eps = np.zeros((d,) * d)
    for perm in itertools.permutations(range(d)):
        eps[perm] = _parity(perm)
    data = eps.reshape(eps.shape + (1,) * len(h.grid.shape)) * h.sqrt_det
    return form_class(d)(h.grid, data)
