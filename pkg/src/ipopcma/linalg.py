"""Dense matrix kernels for the optimizer: product, rank-one update,
symmetric eigendecomposition.

Matrices are plain 2-D C-contiguous float64 numpy arrays, vectors 1-D
float64 arrays; there is no wrapper class. Exported operations validate
shapes and reject non-finite entries so numerical failures surface at the
call site instead of corrupting optimizer state downstream.

The eigensolver is written here (Householder tridiagonalization followed
by implicit-shift QL) rather than bound to a vendor kernel library; only
the product and the rank-one update lean on the numpy backing store's
arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, NumericError, ShapeError

__all__ = [
    "EigenPair",
    "as_matrix",
    "as_vector",
    "gemm",
    "syr1",
    "eig_symmetric",
]

# Relative floor applied to round-off-negative eigenvalues: square roots of
# the values are taken downstream, so the spectrum must stay non-negative.
_EIG_CLAMP_REL = 1e-20
# Absolute symmetry tolerance accepted by the eigensolver.
_SYM_TOL = 1e-12


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate and canonicalize a 2-D float64 C-contiguous matrix."""
    out = np.ascontiguousarray(np.asarray(a, dtype=np.float64))
    if out.ndim != 2:
        raise ShapeError(f"{name}: expected 2-D array, got ndim={out.ndim}")
    if not np.all(np.isfinite(out)):
        raise NumericError(f"{name}: non-finite entries")
    return out


def as_vector(v, name: str = "vector") -> np.ndarray:
    """Validate and canonicalize a 1-D float64 vector."""
    out = np.ascontiguousarray(np.asarray(v, dtype=np.float64))
    if out.ndim != 1:
        raise ShapeError(f"{name}: expected 1-D array, got ndim={out.ndim}")
    if not np.all(np.isfinite(out)):
        raise NumericError(f"{name}: non-finite entries")
    return out


def gemm(alpha: float, a, b, beta: float = 0.0, cin=None) -> np.ndarray:
    """General matrix-matrix product: alpha*A@B + beta*Cin.

    Cin is treated as an input value and never modified. Omitting it is
    the beta=0 case.
    """
    am = as_matrix(a, "A")
    bm = as_matrix(b, "B")
    if am.shape[1] != bm.shape[0]:
        raise ShapeError(f"gemm: inner dimensions {am.shape} x {bm.shape}")
    out = alpha * (am @ bm)
    if cin is not None:
        cm = as_matrix(cin, "Cin")
        if cm.shape != out.shape:
            raise ShapeError(f"gemm: Cin shape {cm.shape}, product {out.shape}")
        out = out + beta * cm
    if not np.all(np.isfinite(out)):
        raise NumericError("gemm: non-finite result")
    return out


def syr1(c, v, alpha: float = 1.0) -> np.ndarray:
    """Symmetric rank-one update: C + alpha*v*v^T.

    The outer product is bitwise symmetric, so the result is exactly
    symmetric whenever C is.
    """
    cm = as_matrix(c, "C")
    vv = as_vector(v, "v")
    n = cm.shape[0]
    if cm.shape[1] != n:
        raise ShapeError(f"syr1: C must be square, got {cm.shape}")
    if vv.shape[0] != n:
        raise ShapeError(f"syr1: v length {vv.shape[0]} vs C side {n}")
    out = cm + alpha * np.outer(vv, vv)
    if not np.all(np.isfinite(out)):
        raise NumericError("syr1: non-finite result")
    return out


@dataclass(frozen=True)
class EigenPair:
    """Orthonormal eigenvectors (columns) and ascending non-negative values."""

    vectors: np.ndarray
    values: np.ndarray


def eig_symmetric(c) -> EigenPair:
    """Eigendecomposition of a symmetric PSD-like matrix.

    Householder reflections reduce the input to tridiagonal form, then an
    implicit-shift QL iteration diagonalizes it while plane rotations
    accumulate the eigenvector basis. The rotation budget of 100*n^2 turns
    a non-converging input into an explicit error instead of a silent bad
    basis.

    Eigenvalues that come out slightly negative from round-off are clamped
    to a tiny positive fraction of the largest value; callers take square
    roots of the spectrum. Genuinely indefinite inputs are outside this
    routine's intended domain.
    """
    a = as_matrix(c, "C")
    n = a.shape[0]
    if a.shape[1] != n:
        raise ShapeError(f"eig_symmetric: square matrix required, got {a.shape}")
    if n == 0:
        raise ShapeError("eig_symmetric: empty matrix")
    if np.max(np.abs(a - a.T)) > _SYM_TOL:
        raise ContractError("eig_symmetric: input not symmetric within 1e-12")

    a = 0.5 * (a + a.T)  # exact symmetry for the reduction arithmetic
    if n == 1:
        return _finish_eig(np.eye(1), np.array([a[0, 0]]))

    d, e, v = _tridiagonalize(a)
    _ql_implicit_shift(d, e, v)
    return _finish_eig(v, d)


def _tridiagonalize(a: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Reduce symmetric a to tridiagonal form by Householder reflections.

    Returns (d, e, v): diagonal, subdiagonal (e[i] couples d[i] and d[i+1],
    e[n-1] unused), and the accumulated orthogonal transformation whose
    columns the QL stage turns into eigenvectors.
    """
    n = a.shape[0]
    reflectors: list[tuple[int, np.ndarray]] = []
    for k in range(n - 2):
        x = a[k + 1:, k]
        nrm = float(np.linalg.norm(x))
        if nrm == 0.0:
            continue
        alpha = -math.copysign(nrm, x[0])
        u = x.copy()
        u[0] -= alpha
        unorm = float(np.linalg.norm(u))
        if unorm == 0.0:
            continue
        w = u / unorm  # unit reflector: H = I - 2 w w^T maps x to alpha*e1
        sub = a[k + 1:, k + 1:]
        p = 2.0 * (sub @ w)
        q = p - (w @ p) * w
        sub -= np.outer(w, q) + np.outer(q, w)
        a[k + 1, k] = alpha
        a[k, k + 1] = alpha
        reflectors.append((k + 1, w))

    v = np.eye(n)
    for off, w in reversed(reflectors):
        block = v[off:, :]
        block -= np.outer(2.0 * w, w @ block)

    d = np.diag(a).copy()
    e = np.zeros(n)
    e[: n - 1] = np.diag(a, -1)
    return d, e, v


def _ql_implicit_shift(d: np.ndarray, e: np.ndarray, v: np.ndarray) -> None:
    """Diagonalize a tridiagonal matrix in place (implicit-shift QL).

    d and e are overwritten with eigenvalues and zeros; plane rotations are
    applied to the columns of v as they occur, so v's columns end as the
    eigenvectors in d's final order.
    """
    n = d.shape[0]
    eps = float(np.finfo(np.float64).eps)
    max_rotations = 100 * n * n
    rotations = 0
    # The shift recurrence is pure scalar arithmetic; plain Python floats
    # run it an order of magnitude faster than element-indexed ndarrays.
    dl = d.tolist()
    el = e.tolist()
    for l in range(n):
        iters = 0
        while True:
            # Find the first negligible coupling at or after l; the block
            # [l, m] is what this shift iteration works on.
            for m in range(l, n - 1):
                dd = abs(dl[m]) + abs(dl[m + 1])
                if abs(el[m]) <= eps * dd:
                    break
            else:
                m = n - 1
            if m == l:
                break
            iters += 1
            if iters > 50:
                raise NumericError("eig_symmetric: QL iteration did not converge")

            g = (dl[l + 1] - dl[l]) / (2.0 * el[l])
            r = math.hypot(g, 1.0)
            g = dl[m] - dl[l] + el[l] / (g + math.copysign(r, g))
            s = 1.0
            cth = 1.0
            p = 0.0
            underflow = False
            for i in range(m - 1, l - 1, -1):
                f = s * el[i]
                b = cth * el[i]
                r = math.hypot(f, g)
                el[i + 1] = r
                if r == 0.0:
                    # Rotation underflowed: deflate here and restart the
                    # search for this eigenvalue.
                    dl[i + 1] -= p
                    el[m] = 0.0
                    underflow = True
                    break
                s = f / r
                cth = g / r
                g = dl[i + 1] - p
                r = (dl[i] - g) * s + 2.0 * cth * b
                p = s * r
                dl[i + 1] = g + p
                g = cth * r - b

                new_i = cth * v[:, i] - s * v[:, i + 1]
                v[:, i + 1] = s * v[:, i] + cth * v[:, i + 1]
                v[:, i] = new_i

                rotations += 1
                if rotations > max_rotations:
                    raise NumericError(
                        f"eig_symmetric: rotation budget {max_rotations} exceeded"
                    )
            if underflow:
                continue
            dl[l] -= p
            el[l] = g
            el[m] = 0.0
    d[:] = dl
    e[:] = el


def _finish_eig(v: np.ndarray, values: np.ndarray) -> EigenPair:
    """Clamp round-off negatives, sort ascending, reorder the basis."""
    floor = _EIG_CLAMP_REL * max(float(values.max()), 0.0)
    values = np.where(values < 0.0, floor, values)
    order = np.argsort(values, kind="stable")
    values = values[order]
    v = v[:, order]
    if not (np.all(np.isfinite(values)) and np.all(np.isfinite(v))):
        raise NumericError("eig_symmetric: non-finite decomposition")
    return EigenPair(vectors=np.ascontiguousarray(v), values=values)
