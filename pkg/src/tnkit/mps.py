"""Uniform matrix product states and transfer-operator analysis.

Site tensors carry axes (physical, left, right).  The transfer operator is
the D^2 x D^2 matrix E = sum_i A^i (x) conj(A^i) with row index (alpha,
alpha') and column index (beta, beta'); acting on a vectorized D x D matrix
rho it implements the completely positive map rho -> sum_i A^i rho A^i+.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from . import tolerances as tol
from .linalg import LabeledTensor, eig_general


class NonNormalError(ValueError):
    """Raised when an operation requires a normal (primitive) tensor."""


class DefectiveTransferError(ValueError):
    """Nontrivial Jordan structure at the leading transfer eigenvalue."""


@dataclass(frozen=True)
class MpsTensor:
    """Site tensor A^i_{alpha beta} with axes (physical, left, right)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=complex)
        if arr.ndim != 3:
            raise ValueError(f"expected 3 axes (physical,left,right), got {arr.ndim}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("tensor entries must be finite")
        object.__setattr__(self, "data", arr)

    @property
    def d(self) -> int:
        return self.data.shape[0]

    @property
    def Dl(self) -> int:
        return self.data.shape[1]

    @property
    def Dr(self) -> int:
        return self.data.shape[2]

    def labeled(self) -> LabeledTensor:
        return LabeledTensor(self.data, ("physical", "left", "right"))

    def matrices(self) -> np.ndarray:
        """The d matrices A^i, shape (d, D, D)."""
        return self.data


@dataclass(frozen=True)
class OpenBoundary:
    left: np.ndarray
    right: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "left", np.asarray(self.left, dtype=complex).ravel())
        object.__setattr__(self, "right", np.asarray(self.right, dtype=complex).ravel())


@dataclass(frozen=True)
class UniformMps:
    """Translationally invariant MPS; boundary None means periodic (trace)."""

    tensor: MpsTensor
    boundary: OpenBoundary | None = None

    def __post_init__(self):
        if self.tensor.Dl != self.tensor.Dr:
            raise ValueError("uniform MPS needs equal left/right bond dimensions")
        if self.boundary is not None:
            if self.boundary.left.size != self.D or self.boundary.right.size != self.D:
                raise ValueError("boundary vectors must have length D")

    @property
    def d(self) -> int:
        return self.tensor.d

    @property
    def D(self) -> int:
        return self.tensor.Dl

    @property
    def periodic(self) -> bool:
        return self.boundary is None

    def rescaled(self, factor: complex) -> "UniformMps":
        return UniformMps(MpsTensor(self.tensor.data * factor), self.boundary)

    def gauged(self, x: np.ndarray) -> "UniformMps":
        """Similarity transform A^i -> X A^i X^{-1} (periodic amplitudes unchanged)."""
        xi = np.linalg.inv(x)
        data = np.einsum("ab,ibc,cd->iad", x, self.tensor.data, xi)
        bnd = self.boundary
        if bnd is not None:
            bnd = OpenBoundary(xi.T @ bnd.left, x @ bnd.right)
        return UniformMps(MpsTensor(data), bnd)


def from_matrices(mats, boundary=None) -> UniformMps:
    """Build a UniformMps from a list of D x D matrices A^i."""
    return UniformMps(MpsTensor(np.array(mats, dtype=complex)), boundary)


def product_state(vec) -> UniformMps:
    """D = 1 MPS for a single-site state repeated on every site."""
    v = np.asarray(vec, dtype=complex).ravel()
    return UniformMps(MpsTensor(v.reshape(-1, 1, 1)))


# ---------------------------------------------------------------------------
# amplitudes and dense states


def amplitude(mps: UniformMps, config) -> complex:
    """Exact amplitude of one computational-basis configuration."""
    config = list(config)
    if not config:
        raise ValueError("configuration must have at least one site")
    a = mps.tensor.data
    for i in config:
        if not 0 <= i < mps.d:
            raise ValueError(f"physical index {i} out of range")
    m = reduce(np.matmul, (a[i] for i in config))
    if mps.periodic:
        return complex(np.trace(m))
    return complex(mps.boundary.left @ m @ mps.boundary.right)


def dense_state(mps: UniformMps, n: int) -> np.ndarray:
    """Full d^n state vector on n sites (exact)."""
    a = mps.tensor.data
    d, D = mps.d, mps.D
    acc = a.copy()  # shape (d^k, D, D)
    for _ in range(n - 1):
        acc = np.einsum("xab,ibc->xiac", acc, a).reshape(-1, D, D)
    if mps.periodic:
        return np.einsum("xaa->x", acc)
    return np.einsum("a,xab,b->x", mps.boundary.left, acc, mps.boundary.right)


def block_sites(mps: UniformMps, k: int, cap: int = 2**20) -> UniformMps:
    """Blocked MPS with physical dimension d^k generating the same states."""
    if k < 1:
        raise ValueError("blocking factor must be >= 1")
    if mps.d**k > cap:
        raise ValueError(f"blocked physical dimension {mps.d**k} exceeds cap {cap}")
    if k == 1:
        return mps
    a = mps.tensor.data
    D = mps.D
    acc = a
    for _ in range(k - 1):
        acc = np.einsum("xab,ibc->xiac", acc, a).reshape(-1, D, D)
    return UniformMps(MpsTensor(acc), mps.boundary)


def mps_kron(a: UniformMps, b: UniformMps) -> UniformMps:
    """Site-wise tensor product of two uniform MPS (stacked chains)."""
    ta, tb = a.tensor.data, b.tensor.data
    data = np.einsum("iab,jcd->ijacbd", ta, tb).reshape(
        ta.shape[0] * tb.shape[0],
        ta.shape[1] * tb.shape[1],
        ta.shape[2] * tb.shape[2],
    )
    return UniformMps(MpsTensor(data))


# ---------------------------------------------------------------------------
# transfer operator


def transfer_matrix(mps: UniformMps) -> np.ndarray:
    a = mps.tensor.data
    D = mps.D
    return np.einsum("iab,icd->acbd", a, a.conj()).reshape(D * D, D * D)


def dressed_transfer(mps: UniformMps, op: np.ndarray) -> np.ndarray:
    """Transfer matrix with a single-site operator inserted on the ket layer."""
    a = mps.tensor.data
    D = mps.D
    op = np.asarray(op, dtype=complex)
    ket = np.einsum("ij,jab->iab", op, a)
    return np.einsum("iab,icd->acbd", ket, a.conj()).reshape(D * D, D * D)


@dataclass
class TransferOperator:
    matrix: np.ndarray
    lambda1: complex
    rhoL: np.ndarray
    rhoR: np.ndarray
    peripheral: np.ndarray  # eigenvalues of modulus |lambda1|, divided by lambda1
    eigenvalues: np.ndarray  # all eigenvalues, descending modulus

    @property
    def normalized_eigenvalues(self) -> np.ndarray:
        return self.eigenvalues / self.lambda1


def _leading_projector_image(m: np.ndarray, lam: complex, dim: int) -> np.ndarray:
    """Apply the spectral projector of eigenvalue `lam` of `m` to vec(identity).

    Built from an ordered Schur form: with the `lam` cluster sorted first,
    T = [[T11, T12], [0, T22]], the projector is Z [[I, X], [0, 0]] Z+ where
    X solves the Sylvester equation T11 X - X T22 = T12.  This stays
    accurate for degenerate clusters of non-normal matrices, where
    individual eigenvectors are ill-conditioned.  A cluster that is itself
    defective (nontrivial Jordan structure at `lam`) is rejected.
    """
    from scipy.linalg import schur, solve_sylvester

    scale = max(abs(lam), 1e-300)
    t, z, sdim = schur(
        m.astype(complex),
        output="complex",
        sort=lambda x: abs(x - lam) <= tol.EPS_RANK * scale,
    )
    if sdim == 0:
        raise DefectiveTransferError("no eigenvalue at the requested position")
    k = int(sdim)
    t11 = t[:k, :k]
    defect = np.linalg.norm(t11 - np.diag(np.diag(t11)))
    if defect > 1e-6 * scale:
        raise DefectiveTransferError(
            "Jordan structure at the leading transfer eigenvalue"
        )
    target = z.conj().T @ np.eye(dim, dtype=complex).reshape(-1)
    if k == t.shape[0]:
        coeff = target
    else:
        x = solve_sylvester(t11, -t[k:, k:], t[:k, k:])
        coeff = target[:k] + x @ target[k:]
    return (z[:, :k] @ coeff).reshape(dim, dim)


def _fix_psd_phase(rho: np.ndarray) -> np.ndarray:
    """Hermitize and scale so the matrix is PSD with positive trace."""
    rho = (rho + rho.conj().T) / 2
    tr = np.trace(rho).real
    if tr < 0:
        rho = -rho
    return rho


def transfer_operator(mps: UniformMps) -> TransferOperator:
    """Spectral data of the transfer operator, with PSD Perron fixed points.

    The fixed points are computed by applying the spectral projector at the
    leading eigenvalue to the identity, which lands on a positive
    semidefinite fixed point even when the leading eigenvalue is degenerate.
    They are scaled so that tr(rhoR) = 1 and tr(rhoL rhoR) = 1.
    """
    e = transfer_matrix(mps)
    D = mps.D
    dec = eig_general(e)
    lam1_mod = np.abs(dec.eigenvalues[0])
    if lam1_mod == 0:
        raise ValueError("transfer operator is nilpotent (all amplitudes vanish)")
    # Perron-Frobenius eigenvalue: the positive real one at maximal modulus
    peripheral_mask = np.abs(dec.eigenvalues) >= (1 - tol.EPS_RANK) * lam1_mod
    peripheral = dec.eigenvalues[peripheral_mask]
    candidates = peripheral[np.abs(peripheral.imag) <= tol.EPS_RANK * lam1_mod]
    candidates = candidates[candidates.real > 0]
    if candidates.size == 0:
        raise DefectiveTransferError(
            "no positive leading eigenvalue; transfer operator is not a "
            "rescaled CP map fixed-point problem"
        )
    lam1 = float(np.max(candidates.real))
    # defective leading eigenvalue is rejected inside the projector routine
    rho_r = _fix_psd_phase(_leading_projector_image(e, lam1, D))
    rho_l = _fix_psd_phase(_leading_projector_image(e.conj().T, lam1, D))
    tr_r = np.trace(rho_r).real
    if tr_r <= tol.EPS_EQ:
        raise DefectiveTransferError("leading fixed point has vanishing trace")
    rho_r = rho_r / tr_r
    overlap = np.trace(rho_l @ rho_r).real
    if abs(overlap) <= tol.EPS_EQ:
        raise DefectiveTransferError("left/right fixed points are orthogonal")
    rho_l = rho_l / overlap
    return TransferOperator(
        matrix=e,
        lambda1=lam1,
        rhoL=rho_l,
        rhoR=rho_r,
        peripheral=peripheral / lam1,
        eigenvalues=dec.eigenvalues,
    )


def normalized(mps: UniformMps) -> UniformMps:
    """Rescale the tensor so the leading transfer eigenvalue equals 1."""
    top = transfer_operator(mps)
    return mps.rescaled(1 / np.sqrt(top.lambda1))


def is_normal(mps: UniformMps) -> tuple[bool, dict]:
    """Primitivity of the transfer channel, with diagnostics.

    Normal means: unique eigenvalue of maximal modulus, nondegenerate, and
    full-rank positive semidefinite fixed points on both sides.
    """
    try:
        top = transfer_operator(mps)
    except DefectiveTransferError as exc:
        return False, {"error": str(exc)}
    n_peripheral = int(top.peripheral.size)
    ev_l = np.linalg.eigvalsh(top.rhoL)
    ev_r = np.linalg.eigvalsh(top.rhoR)
    scale_l = max(np.max(np.abs(ev_l)), tol.EPS_EQ)
    scale_r = max(np.max(np.abs(ev_r)), tol.EPS_EQ)
    rank_l = int(np.sum(ev_l > tol.EPS_RANK * scale_l))
    rank_r = int(np.sum(ev_r > tol.EPS_RANK * scale_r))
    diags = {
        "peripheral_count": n_peripheral,
        "rank_rhoL": rank_l,
        "rank_rhoR": rank_r,
        "lambda1": top.lambda1,
    }
    ok = n_peripheral == 1 and rank_l == mps.D and rank_r == mps.D
    return ok, diags


# ---------------------------------------------------------------------------
# correlation length, entanglement, marginals


@dataclass
class EntanglementData:
    schmidt_squares: np.ndarray | None = None
    renyi: dict | None = None
    correlation_length: float | None = None
    infinite_correlation_length: bool = False


def correlation_length(mps: UniformMps) -> EntanglementData:
    """xi = -1 / log|lambda2| with lambda1 normalized to 1 (normal MPS only)."""
    ok, diags = is_normal(mps)
    if not ok:
        raise NonNormalError(f"correlation length needs a normal MPS: {diags}")
    top = transfer_operator(mps)
    lams = np.abs(top.normalized_eigenvalues)
    if lams.size < 2 or lams[1] <= tol.EPS_EQ:
        return EntanglementData(correlation_length=0.0)
    lam2 = lams[1]
    if lam2 >= 1 - tol.EPS_RANK:
        return EntanglementData(
            correlation_length=np.inf, infinite_correlation_length=True
        )
    return EntanglementData(correlation_length=-1.0 / np.log(lam2))


def renyi_entropies(p: np.ndarray, alphas) -> dict:
    """Renyi table from a normalized probability vector."""
    p = np.asarray(p, dtype=float)
    p = p[p > 0]
    out = {}
    for alpha in alphas:
        if alpha == 1:
            out[1.0] = float(-np.sum(p * np.log(p)))
        elif alpha == 0:
            out[0.0] = float(np.log(p.size))
        elif alpha == np.inf:
            out[float("inf")] = float(-np.log(np.max(p)))
        else:
            out[float(alpha)] = float(np.log(np.sum(p**alpha)) / (1 - alpha))
    return out


def entanglement_spectrum(
    mps: UniformMps, alphas=(0.5, 1, 2, np.inf)
) -> EntanglementData:
    """Half-infinite-cut Schmidt spectrum: eigenvalues of rhoL rhoR, sum 1."""
    ok, diags = is_normal(mps)
    if not ok:
        raise NonNormalError(f"entanglement spectrum needs a normal MPS: {diags}")
    top = transfer_operator(mps)
    prod = top.rhoL @ top.rhoR
    # similar to a PSD matrix, so the spectrum is real and nonnegative
    vals = np.linalg.eigvals(prod).real
    vals = np.sort(np.clip(vals, 0, None))[::-1]
    vals = vals / np.sum(vals)
    xi = correlation_length(mps)
    return EntanglementData(
        schmidt_squares=vals,
        renyi=renyi_entropies(vals, alphas),
        correlation_length=xi.correlation_length,
        infinite_correlation_length=xi.infinite_correlation_length,
    )


def _open_physical_chain(mps: UniformMps, n: int) -> np.ndarray:
    """Chain of n site tensors with physical legs open.

    Returns shape (d^n, d^n, D^2, D^2): ket config, bra config, left double
    bond (alpha alpha'), right double bond (beta beta').
    """
    a = mps.tensor.data
    D = mps.D
    w = np.einsum("iab,jcd->ijacbd", a, a.conj())  # i j (aa') (bb')
    w = w.reshape(mps.d, mps.d, D * D, D * D)
    acc = w
    dk = mps.d
    for _ in range(n - 1):
        acc = np.einsum("ijxy,klyz->ikjlxz", acc, w).reshape(
            dk * mps.d, dk * mps.d, D * D, D * D
        )
        dk *= mps.d
    return acc


def reduced_density_matrix(mps: UniformMps, n: int, total=None, cap: int = 2**12):
    """Reduced density matrix of n consecutive sites, trace-normalized.

    `total` is the chain length N (periodic closure) or None for the
    thermodynamic limit, where the environment is the spectral projector
    |rhoR)(rhoL| of the transfer operator.
    """
    if mps.d**n > cap:
        raise ValueError(f"d^n = {mps.d**n} exceeds cap {cap}")
    D = mps.D
    chain = _open_physical_chain(mps, n)
    if total is None:
        ok, diags = is_normal(mps)
        if not ok:
            raise NonNormalError(f"infinite-N marginal needs a normal MPS: {diags}")
        top = transfer_operator(mps)
        chain = chain / top.lambda1**n
        env = np.outer(top.rhoR.reshape(-1), top.rhoL.conj().reshape(-1))
    else:
        if total < n:
            raise ValueError("total chain length shorter than the region")
        if not mps.periodic:
            raise ValueError("finite-N marginal implemented for periodic boundary")
        e = transfer_matrix(mps)
        env = np.linalg.matrix_power(e, total - n)
    rho = np.einsum("ijxy,yx->ij", chain, env)
    rho = (rho + rho.conj().T) / 2
    return rho / np.trace(rho).real


def correlation_function(
    mps: UniformMps,
    x_op: np.ndarray,
    y_op: np.ndarray,
    separation: int,
    total: int | None = None,
) -> complex:
    """Connected two-point correlator <X_0 Y_n> - <X><Y>.

    `total` closes a periodic ring of that length; None takes the
    thermodynamic limit through the leading spectral projector.
    """
    if separation < 1:
        raise ValueError("separation must be >= 1")
    ok, diags = is_normal(mps)
    if not ok:
        raise NonNormalError(f"correlator needs a normal MPS: {diags}")
    top = transfer_operator(mps)
    e = top.matrix / top.lambda1
    ex = dressed_transfer(mps, x_op) / top.lambda1
    ey = dressed_transfer(mps, y_op) / top.lambda1
    inner = np.linalg.matrix_power(e, separation - 1)
    if total is None:
        l_row = top.rhoL.reshape(-1).conj()
        r_col = top.rhoR.reshape(-1)
        xy = l_row @ ex @ inner @ ey @ r_col
        x_mean = l_row @ ex @ r_col
        y_mean = l_row @ ey @ r_col
        return complex(xy - x_mean * y_mean)
    if total < separation + 1:
        raise ValueError("ring too short for the requested separation")
    norm = np.trace(np.linalg.matrix_power(e, total))
    closure = np.linalg.matrix_power(e, total - separation - 1)
    xy = np.trace(ex @ inner @ ey @ closure) / norm
    single = np.linalg.matrix_power(e, total - 1)
    x_mean = np.trace(ex @ single) / norm
    y_mean = np.trace(ey @ single) / norm
    return complex(xy - x_mean * y_mean)
