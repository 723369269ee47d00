"""Dense complex linear algebra and integer normal forms.

Everything here operates on plain numpy arrays (complex128) except for the
Smith normal form, which uses exact Python integers throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tolerances as tol


# ---------------------------------------------------------------------------
# labeled tensors and contraction


@dataclass(frozen=True)
class LabeledTensor:
    """Dense tensor with unique string labels on its axes."""

    data: np.ndarray
    labels: tuple[str, ...]

    def __post_init__(self):
        if self.data.ndim != len(self.labels):
            raise ValueError(
                f"{self.data.ndim} axes but {len(self.labels)} labels"
            )
        if len(set(self.labels)) != len(self.labels):
            raise ValueError(f"duplicate axis labels: {self.labels}")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def axis(self, label: str) -> int:
        return self.labels.index(label)

    def relabel(self, mapping: dict[str, str]) -> "LabeledTensor":
        return LabeledTensor(
            self.data, tuple(mapping.get(l, l) for l in self.labels)
        )


def contract(
    a: LabeledTensor, b: LabeledTensor, pairs: list[tuple[str, str]]
) -> LabeledTensor:
    """Contract paired axes of two labeled tensors.

    Result axes are the unpaired axes of `a` followed by those of `b`, in
    their original order.  Implemented as reshape-to-matrix-multiply.
    """
    ax_a = [a.axis(la) for la, _ in pairs]
    ax_b = [b.axis(lb) for _, lb in pairs]
    for (la, lb), ia, ib in zip(pairs, ax_a, ax_b):
        if a.shape[ia] != b.shape[ib]:
            raise ValueError(
                f"extent mismatch on ({la},{lb}): {a.shape[ia]} vs {b.shape[ib]}"
            )
    keep_a = [i for i in range(a.data.ndim) if i not in ax_a]
    keep_b = [i for i in range(b.data.ndim) if i not in ax_b]
    out_labels = tuple(a.labels[i] for i in keep_a) + tuple(
        b.labels[i] for i in keep_b
    )
    if len(set(out_labels)) != len(out_labels):
        raise ValueError(f"duplicate axis label in result: {out_labels}")
    out = np.tensordot(a.data, b.data, axes=(ax_a, ax_b))
    return LabeledTensor(out, out_labels)


# ---------------------------------------------------------------------------
# spectral decompositions


@dataclass
class EigenDecomposition:
    """Eigenvalues sorted by descending modulus, with right/left eigenvectors.

    Left eigenvectors satisfy ``l† M = lam l†`` and are biorthogonal to the
    right ones (``l_i† v_j = delta_ij``) whenever the matrix is diagonalizable.
    For defective matrices the eigenvalues are still reported but the
    eigenvector pairing is not faithful and `defective` is set.
    """

    eigenvalues: np.ndarray
    right: np.ndarray  # columns
    left: np.ndarray  # columns
    defective: bool = False


def _sort_order(w: np.ndarray) -> np.ndarray:
    # descending modulus; ties broken by angle then real part for determinism
    return np.lexsort((w.real, np.angle(w), -np.abs(w)))


def eig_general(m: np.ndarray) -> EigenDecomposition:
    """Full eigendecomposition of a general complex square matrix."""
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix must be square, got {m.shape}")
    w, v = np.linalg.eig(m)
    order = _sort_order(w)
    w, v = w[order], v[:, order]
    n = m.shape[0]
    sv = np.linalg.svd(v, compute_uv=False)
    defective = sv[-1] < 1e-12 * max(sv[0], 1.0)
    if defective:
        # eigenvector matrix numerically singular: no faithful left set
        wl, vl = np.linalg.eig(m.conj().T)
        order_l = _sort_order(wl.conj())
        left = vl[:, order_l]
    else:
        left = np.linalg.inv(v).conj().T
    return EigenDecomposition(w, v, left, defective=defective)


def svd(m: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Singular value decomposition m = U @ diag(s) @ Vh, s descending."""
    m = np.asarray(m, dtype=complex)
    try:
        return np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError:
        # rare non-convergence of the divide-and-conquer driver
        from scipy.linalg import svd as _svd

        return _svd(m, full_matrices=False, lapack_driver="gesvd")


def matrix_rank(m: np.ndarray) -> int:
    """Rank at the relative EPS_RANK singular-value cut."""
    s = np.linalg.svd(np.asarray(m, dtype=complex), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.count_nonzero(s > tol.EPS_RANK * s[0]))


def polar_decompose(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Polar decomposition m = W @ P with W an isometry and P hermitian PSD.

    Requires rows >= cols so that W can carry a full set of orthonormal
    columns (W† W = identity) even when m is rank deficient.
    """
    m = np.asarray(m, dtype=complex)
    if m.shape[0] < m.shape[1]:
        raise ValueError(f"need rows >= cols, got {m.shape}")
    u, s, vh = svd(m)
    w = u @ vh
    p = vh.conj().T @ np.diag(s) @ vh
    p = (p + p.conj().T) / 2
    return w, p


# ---------------------------------------------------------------------------
# Smith normal form over exact integers


def _identity(n: int) -> list[list[int]]:
    return [[1 if i == j else 0 for j in range(n)] for i in range(n)]


def _to_int_rows(m) -> list[list[int]]:
    rows = []
    for row in np.atleast_2d(np.asarray(m, dtype=object)):
        rows.append([int(x) for x in row])
    return rows


@dataclass
class SmithNormalForm:
    """U @ m @ V = S with U, V unimodular and S diagonal, d1 | d2 | ..."""

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray
    u_inv: np.ndarray = field(repr=False, default=None)
    v_inv: np.ndarray = field(repr=False, default=None)

    @property
    def divisors(self) -> list[int]:
        k = min(self.s.shape)
        return [int(self.s[i, i]) for i in range(k)]

    @property
    def rank(self) -> int:
        return sum(1 for d in self.divisors if d != 0)


def smith_normal_form(m) -> SmithNormalForm:
    """Smith normal form over arbitrary-precision integers.

    Pivots on the smallest nonzero entry of the remaining block, which keeps
    coefficient growth moderate on the sparse boundary matrices this package
    feeds it.
    """
    a = _to_int_rows(m)
    rows, cols = len(a), len(a[0]) if a else 0
    u, ui = _identity(rows), _identity(rows)
    v, vi = _identity(cols), _identity(cols)

    def swap_rows(i, j):
        a[i], a[j] = a[j], a[i]
        u[i], u[j] = u[j], u[i]
        for r in ui:
            r[i], r[j] = r[j], r[i]

    def swap_cols(i, j):
        for r in a:
            r[i], r[j] = r[j], r[i]
        for r in v:
            r[i], r[j] = r[j], r[i]
        vi[i], vi[j] = vi[j], vi[i]

    def add_row(src, dst, q):
        # row dst += q * row src
        a[dst] = [x + q * y for x, y in zip(a[dst], a[src])]
        u[dst] = [x + q * y for x, y in zip(u[dst], u[src])]
        for r in ui:
            r[src] -= q * r[dst]

    def add_col(src, dst, q):
        for r in a:
            r[dst] += q * r[src]
        for r in v:
            r[dst] += q * r[src]
        vi[src] = [x - q * y for x, y in zip(vi[src], vi[dst])]

    def negate_row(i):
        a[i] = [-x for x in a[i]]
        u[i] = [-x for x in u[i]]
        for r in ui:
            r[i] = -r[i]

    t = 0
    while True:
        pivot = None
        best = None
        for i in range(t, rows):
            for j in range(t, cols):
                x = abs(a[i][j])
                if x != 0 and (best is None or x < best):
                    best, pivot = x, (i, j)
        if pivot is None:
            break
        swap_rows(t, pivot[0])
        swap_cols(t, pivot[1])
        while True:
            # clear column t
            dirty = False
            for i in range(t + 1, rows):
                if a[i][t] != 0:
                    q = a[i][t] // a[t][t]
                    add_row(t, i, -q)
                    if a[i][t] != 0:  # remainder smaller than pivot
                        swap_rows(t, i)
                        dirty = True
            for j in range(t + 1, cols):
                if a[t][j] != 0:
                    q = a[t][j] // a[t][t]
                    add_col(t, j, -q)
                    if a[t][j] != 0:
                        swap_cols(t, j)
                        dirty = True
            if not dirty:
                break
        if a[t][t] < 0:
            negate_row(t)
        t += 1
        if t >= min(rows, cols):
            break

    # enforce the divisibility chain d_k | d_{k+1}
    k = min(rows, cols)
    changed = True
    while changed:
        changed = False
        for i in range(k - 1):
            d1, d2 = a[i][i], a[i + 1][i + 1]
            if d1 != 0 and d2 % d1 != 0:
                # fold gcd(d1, d2) into position i, lcm into position i+1
                add_col(i + 1, i, 1)  # now a[i+1][i] = d2
                while a[i + 1][i] != 0:
                    q = a[i][i] // a[i + 1][i]
                    add_row(i + 1, i, -q)
                    swap_rows(i, i + 1)
                # clear fill-in at (i, i+1); divisible by the new gcd pivot
                if a[i][i + 1] != 0:
                    q = a[i][i + 1] // a[i][i]
                    add_col(i, i + 1, -q)
                if a[i][i] < 0:
                    negate_row(i)
                if a[i + 1][i + 1] < 0:
                    negate_row(i + 1)
                changed = True

    def arr(x):
        out = np.empty((len(x), len(x[0]) if x else 0), dtype=object)
        for i, row in enumerate(x):
            out[i, :] = row
        return out

    return SmithNormalForm(arr(u), arr(a), arr(v), arr(ui), arr(vi))


def integer_det_parity_check(snf: SmithNormalForm) -> bool:
    """|det U| = |det V| = 1, verified exactly via the tracked inverses."""
    u, ui = snf.u, snf.u_inv
    v, vi = snf.v, snf.v_inv
    return _is_identity(u @ ui) and _is_identity(v @ vi)


def _is_identity(m: np.ndarray) -> bool:
    rows, cols = m.shape
    if rows != cols:
        return False
    for i in range(rows):
        for j in range(cols):
            if m[i, j] != (1 if i == j else 0):
                return False
    return True


def solve_integer(basis: np.ndarray, target: np.ndarray):
    """Solve basis @ x = target over the integers, or return None.

    `basis` is an integer matrix whose columns span a lattice; `target` is a
    vector.  Uses the Smith normal form of the basis.
    """
    basis = np.asarray(basis, dtype=object)
    target = [int(x) for x in np.asarray(target, dtype=object).ravel()]
    snf = smith_normal_form(basis)
    rows, cols = basis.shape
    y = snf.u @ np.array(target, dtype=object).reshape(-1, 1)
    x = [0] * cols
    k = min(rows, cols)
    for i in range(rows):
        yi = int(y[i, 0])
        if i < k and snf.s[i, i] != 0:
            d = int(snf.s[i, i])
            if yi % d != 0:
                return None
            x[i] = yi // d
        elif yi != 0:
            return None
    sol = snf.v @ np.array(x, dtype=object).reshape(-1, 1)
    return np.array([int(t) for t in sol.ravel()], dtype=object)


def lattice_contains(basis: np.ndarray, target) -> bool:
    """Is `target` in the integer column lattice of `basis`?"""
    return solve_integer(basis, target) is not None
