"""Canonical form, normality, and the same-state decision procedure.

The canonical form splits a periodic uniform MPS tensor into a direct sum
of weighted normal blocks generating the same state family.  Invariant
subspaces are found from the supports of the leading fixed points of the
transfer channel; leftover degeneracy at the leading eigenvalue is resolved
inside the fixed-point algebra.  Peripheral eigenvalues e^{2 pi i q/p} are
removed by blocking p sites.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import gcd, lcm

import numpy as np

from . import tolerances as tol
from .mps import (
    MpsTensor,
    UniformMps,
    block_sites,
    is_normal,
    transfer_matrix,
    transfer_operator,
)


@dataclass
class CanonicalForm:
    """Block decomposition A = gauge . (direct sum of mu_k A_k) . gauge^{-1}."""

    blocking_p: int
    blocks: list[tuple[float, MpsTensor]]
    gauge: np.ndarray
    notes: list[str] = field(default_factory=list)

    @property
    def weights(self) -> list[float]:
        return [w for w, _ in self.blocks]

    def assemble(self) -> UniformMps:
        """Rebuild the (blocked) tensor from blocks and gauge."""
        dims = [t.Dl for _, t in self.blocks]
        total = sum(dims)
        d = self.blocks[0][1].d
        data = np.zeros((d, total, total), dtype=complex)
        off = 0
        for w, t in self.blocks:
            data[:, off : off + t.Dl, off : off + t.Dl] = w * t.data
            off += t.Dl
        ginv = np.linalg.inv(self.gauge)
        data = np.einsum("ab,ibc,cd->iad", self.gauge, data, ginv)
        return UniformMps(MpsTensor(data))


@dataclass
class BasisOfNormalTensors:
    members: list[MpsTensor]
    # per member: list of (mu, X, phi) for every canonical block equivalent
    # to that member, such that block = e^{i phi} X member X^{-1}
    multiplicities: list[list[tuple[float, np.ndarray, float]]]


@dataclass
class GaugeRelation:
    verdict: str  # "equal" | "proportional" | "different"
    gauge: np.ndarray | None = None
    phase: float | None = None
    scale: complex | None = None
    blocking: int = 1
    notes: list[str] = field(default_factory=list)


# ---------------------------------------------------------------------------
# invariant-subspace machinery


def _channel_apply(mats: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return sum(a @ rho @ a.conj().T for a in mats)


def _support_basis(rho: np.ndarray) -> np.ndarray:
    """Orthonormal basis (columns) of the support of a hermitian PSD matrix."""
    vals, vecs = np.linalg.eigh(rho)
    scale = max(np.max(np.abs(vals)), tol.EPS_EQ)
    keep = vals > tol.EPS_RANK * scale
    return vecs[:, keep]


_KERNEL_CUT = 1e-6  # relative singular-value cut for eigenspace extraction


def _transfer_of(mats: np.ndarray, adjoint: bool = False) -> np.ndarray:
    d_bond = mats.shape[1]
    e = np.einsum("iab,icd->acbd", mats, mats.conj()).reshape(d_bond**2, d_bond**2)
    return e.conj().T if adjoint else e


def _eigenspace_at_radius(e: np.ndarray) -> np.ndarray:
    """Orthonormal basis (columns) of the eigenspace at the spectral radius.

    Works for CP-map transfer matrices where the leading eigenvalue equals
    the spectral radius and is real positive; robust against Jordan
    structure, since it uses the singular value decomposition of E - r.
    """
    w = np.linalg.eigvals(e)
    radius = np.max(np.abs(w))
    if radius <= tol.EPS_EQ:
        return np.zeros((e.shape[0], 0), dtype=complex)
    near_real = w.real[np.abs(w.imag) <= 1e-6 * radius]
    r = np.max(near_real) if near_real.size else radius
    u, s, vh = np.linalg.svd(e - r * np.eye(e.shape[0]))
    keep = s <= _KERNEL_CUT * max(s[0], 1.0)
    return vh[keep].conj().T


def _psd_fixed_point(mats: np.ndarray, adjoint: bool) -> np.ndarray | None:
    """Nonzero PSD fixed point at the spectral radius, or None.

    Perron-Frobenius theory guarantees one exists for a completely positive
    map even when the leading eigenvalue is defective (as happens for
    block-triangular tensors with off-diagonal junk).  Found by alternating
    projections between the eigenspace and the PSD cone.
    """
    d_bond = mats.shape[1]
    e = _transfer_of(mats, adjoint)
    basis = _eigenspace_at_radius(e)
    if basis.shape[1] == 0:
        return None

    def project_span(mat):
        coeff = basis.conj().T @ mat.reshape(-1)
        return (basis @ coeff).reshape(d_bond, d_bond)

    def project_psd(mat):
        mat = (mat + mat.conj().T) / 2
        vals, vecs = np.linalg.eigh(mat)
        return (vecs * np.clip(vals, 0, None)) @ vecs.conj().T

    starts = [np.eye(d_bond, dtype=complex)]
    if basis.shape[1] == 1:
        # single eigenvector: a global phase makes it hermitian
        v = basis[:, 0].reshape(d_bond, d_bond)
        tr2 = np.trace(v @ v)
        if abs(tr2) > 1e-14:
            v = v * np.exp(-0.5j * np.angle(tr2))
        starts.insert(0, v + v.conj().T)
    rng = np.random.default_rng(7)
    for extra in range(2):
        coeff = rng.standard_normal(basis.shape[1])
        starts.append(project_span(np.eye(d_bond)) + (basis @ coeff).reshape(d_bond, d_bond))
    for start in starts:
        m_cur = project_span(start)
        for _ in range(2000):
            psd = project_psd(m_cur)
            norm = np.linalg.norm(psd)
            if norm < 1e-13:
                break
            psd = psd / norm
            m_next = project_span(psd)
            if np.linalg.norm(m_next - psd) <= 1e-13:
                m_cur = m_next
                break
            m_cur = m_next
        m_cur = (m_cur + m_cur.conj().T) / 2
        norm = np.linalg.norm(m_cur)
        if norm < 1e-10:
            continue
        m_cur = m_cur / norm
        eigs = np.linalg.eigvalsh(m_cur)
        in_span = np.linalg.norm(project_span(m_cur) - m_cur)
        if eigs.min() >= -1e-9 and in_span <= 1e-9:
            if np.trace(m_cur).real < 0:
                m_cur = -m_cur
            return m_cur
    return None


def _split_once(mats: np.ndarray):
    """One reduction step.

    Returns None if the block is irreducible, otherwise a pair of column
    isometries (v1, v2) with v1 spanning an invariant subspace of the A^i
    and v2 its orthogonal complement.
    """
    d_bond = mats.shape[1]
    if d_bond == 1:
        return None
    rho_r = _psd_fixed_point(mats, adjoint=False)
    if rho_r is None:
        return None  # nilpotent channel, handled by the caller
    supp = _support_basis(rho_r)
    if supp.shape[1] < d_bond:
        return supp, _orthogonal_complement(supp)
    rho_l = _psd_fixed_point(mats, adjoint=True)
    if rho_l is None:
        return None
    supp_l = _support_basis(rho_l)
    if supp_l.shape[1] < d_bond:
        # complement of the left support is invariant under the A^i
        comp = _orthogonal_complement(supp_l)
        return comp, supp_l
    # Both fixed points full rank.  Conjugating by rho_r^{1/2} makes the
    # channel unital, where the fixed-point set is a *-algebra; spectral
    # projectors of its hermitian elements are then invariant subspaces.
    vals_r, vecs_r = np.linalg.eigh(rho_r)
    w_half = (vecs_r * np.sqrt(np.clip(vals_r, 0, None))) @ vecs_r.conj().T
    w_inv = (vecs_r * (1 / np.sqrt(np.clip(vals_r, 1e-300, None)))) @ vecs_r.conj().T
    mats_t = np.einsum("ab,ibc,cd->iad", w_inv, mats, w_half)
    best = None
    for h in _hermitian_fixed_points(mats_t):
        vals, vecs = np.linalg.eigh(h)
        gaps = np.diff(vals)
        if gaps.size == 0:
            continue
        cut = int(np.argmax(gaps)) + 1
        gap = gaps[cut - 1] / max(np.max(np.abs(vals)), 1e-30)
        if best is None or gap > best[0]:
            best = (gap, vecs[:, cut:], vecs[:, :cut])
    if best is None or best[0] <= 1e-6:
        return None
    q1 = np.linalg.qr(w_half @ best[1])[0]
    q2 = np.linalg.qr(w_half @ best[2])[0]
    return q1, q2


def _orthogonal_complement(isometry: np.ndarray) -> np.ndarray:
    d_bond = isometry.shape[0]
    proj = np.eye(d_bond) - isometry @ isometry.conj().T
    vals, vecs = np.linalg.eigh(proj)
    return vecs[:, vals > 0.5]


def _hermitian_fixed_points(mats: np.ndarray) -> list[np.ndarray]:
    """Orthonormal hermitian basis of the fixed-point space at the radius.

    Meaningful when full-rank PSD fixed points exist on both sides, in
    which case the eigenspace at the spectral radius is closed under
    hermitian conjugation and spans a *-algebra.
    """
    d_bond = mats.shape[1]
    e = _transfer_of(mats)
    basis = _eigenspace_at_radius(e)
    if basis.shape[1] < 2:
        return []
    radius = np.max(np.abs(np.linalg.eigvals(e)))
    cands = []
    for col in basis.T:
        m_col = col.reshape(d_bond, d_bond)
        for cand in (m_col + m_col.conj().T, 1j * (m_col - m_col.conj().T)):
            for prev in cands:
                cand = cand - np.trace(prev.conj().T @ cand) * prev
            norm = np.linalg.norm(cand)
            if norm > 1e-7:
                cand = cand / norm
                resid = np.linalg.norm(_channel_apply(mats, cand) - radius * cand)
                if resid <= 1e-7 * max(radius, 1.0):
                    cands.append(cand)
    return cands


def _irreducible_blocks(mats: np.ndarray, isometry: np.ndarray, out: list, notes: list):
    """Recursively split `mats` (already restricted via `isometry`)."""
    radius_sq = np.max(
        np.abs(
            np.linalg.eigvals(
                np.einsum(
                    "iab,icd->acbd", mats, mats.conj()
                ).reshape(mats.shape[1] ** 2, mats.shape[1] ** 2)
            )
        )
    )
    if radius_sq <= tol.EPS_EQ:
        notes.append(
            f"dropped a nilpotent block of dimension {mats.shape[1]} "
            "(generates vanishing amplitudes)"
        )
        return
    split = _split_once(mats)
    if split is None:
        out.append((mats, isometry))
        return
    v1, v2 = split
    for sub in (v1, v2):
        sub_mats = np.einsum("ab,ibc,cd->iad", sub.conj().T, mats, sub)
        _irreducible_blocks(sub_mats, isometry @ sub, out, notes)


def canonical_form(mps: UniformMps) -> CanonicalForm:
    """Canonical block decomposition of a periodic uniform MPS.

    Detects invariant subspaces until every block has an irreducible
    transfer channel, then removes residual periodicity p (peripheral
    eigenvalues e^{2 pi i q / p}) by blocking p sites and splitting again.
    Block weights mu_k normalize each block channel to spectral radius 1.
    """
    if not mps.periodic:
        raise ValueError("canonical form is defined for periodic boundary")
    current = mps
    blocking_p = 1
    notes: list[str] = []
    for _ in range(2):  # second pass only after blocking
        pieces: list = []
        _irreducible_blocks(
            current.tensor.data, np.eye(current.D, dtype=complex), pieces, notes
        )
        if not pieces:
            raise ValueError("tensor generates identically vanishing states")
        periods = []
        for mats, _ in pieces:
            top = transfer_operator(UniformMps(MpsTensor(mats)))
            periods.append(top.peripheral.size)
        p = lcm(*periods) if periods else 1
        if p == 1:
            break
        if p > current.D**2:
            raise ValueError(
                f"detected periodicity {p} exceeds the D^2 bound; "
                "numerical rank ambiguity likely"
            )
        blocking_p = p
        notes.append(f"blocked {p} sites to remove peripheral spectrum")
        current = block_sites(mps, p)
    else:
        raise ValueError("periodicity removal did not terminate")

    blocks = []
    isometries = []
    for mats, iso in pieces:
        lam = transfer_operator(UniformMps(MpsTensor(mats))).lambda1
        mu = float(np.sqrt(lam))
        blocks.append((mu, MpsTensor(mats / mu)))
        isometries.append(iso)
    gauge = np.concatenate(isometries, axis=1)
    return CanonicalForm(blocking_p=blocking_p, blocks=blocks, gauge=gauge, notes=notes)


# ---------------------------------------------------------------------------
# injectivity


def injectivity_bound(d_bond: int) -> int:
    """Blocking bound: a normal tensor is injective within 2 D^2 (6 + log2 D)."""
    return int(np.ceil(2 * d_bond**2 * (6 + np.log2(d_bond))))


def injectivity_length(mps: UniformMps) -> int:
    """Smallest L with span{A^{i1} ... A^{iL}} equal to all D x D matrices."""
    ok, diags = is_normal(mps)
    if not ok:
        raise ValueError(f"injectivity length needs a normal tensor: {diags}")
    d_bond = mps.D
    bound = injectivity_bound(d_bond)
    mats = mps.tensor.data
    # orthonormal basis of the span of length-L products, grown iteratively
    basis = _orthonormal_rows(mats.reshape(mps.d, -1))
    length = 1
    while True:
        if basis.shape[0] == d_bond * d_bond:
            return length
        if length > bound:
            raise ValueError(
                f"injectivity not reached within the theoretical bound {bound}; "
                "numerical issue suspected"
            )
        prev = basis.reshape(-1, d_bond, d_bond)
        grown = np.einsum("iab,xbc->ixac", mats, prev).reshape(-1, d_bond * d_bond)
        basis = _orthonormal_rows(grown)
        length += 1


def _orthonormal_rows(rows: np.ndarray) -> np.ndarray:
    u, s, vh = np.linalg.svd(rows, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros((0, rows.shape[1]), dtype=complex)
    return vh[s > tol.EPS_RANK * s[0]]


# ---------------------------------------------------------------------------
# basis of normal tensors and gauge extraction


def mixed_transfer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Mixed transfer matrix F(M) = sum_i A^i M B^i+ as a matrix on vec(M)."""
    da, db = a.shape[1], b.shape[1]
    return np.einsum("iab,icd->acbd", a, b.conj()).reshape(da * db, da * db)


def extract_gauge(a: MpsTensor, b: MpsTensor):
    """Find (phi, X) with B^i = e^{i phi} X A^i X^{-1}, or None.

    Both tensors must be normal with spectral radius 1.  Follows the mixed
    transfer operator: its leading eigenvalue has modulus 1 exactly when the
    tensors are gauge plus phase related, and the eigenvector is rho_A X+
    for the right fixed point rho_A of A's own channel.
    """
    if a.d != b.d or a.Dl != b.Dl:
        return None
    f_ab = mixed_transfer(a.data, b.data)
    w, v = np.linalg.eig(f_ab)
    idx = int(np.argmax(np.abs(w)))
    lam = w[idx]
    if abs(abs(lam) - 1.0) > tol.EPS_RANK * 100:
        return None
    m = v[:, idx].reshape(a.Dl, b.Dl)
    rho_a = transfer_operator(UniformMps(a)).rhoR
    x_dag = np.linalg.solve(rho_a, m)
    x = x_dag.conj().T
    # normalize deterministically: largest-modulus entry positive real
    flat = np.abs(x.ravel())
    pivot = x.ravel()[int(np.argmax(flat))]
    x = x * (abs(pivot) / pivot)
    x = x / np.linalg.norm(x) * np.sqrt(x.shape[0])
    phi = float(-np.angle(lam))
    # verify
    xi = np.linalg.inv(x)
    recon = np.exp(1j * phi) * np.einsum("ab,ibc,cd->iad", x, a.data, xi)
    err = np.linalg.norm(recon - b.data) / max(np.linalg.norm(b.data), tol.EPS_EQ)
    if err > 1e-6:
        return None
    return phi, x


def basis_of_normal_tensors(cf: CanonicalForm) -> BasisOfNormalTensors:
    """Group canonical blocks into pairwise-inequivalent representatives."""
    members: list[MpsTensor] = []
    mults: list[list[tuple[float, np.ndarray, float]]] = []
    for mu, blk in cf.blocks:
        placed = False
        for j, rep in enumerate(members):
            if blk.Dl != rep.Dl or blk.d != rep.d:
                continue
            got = extract_gauge(rep, blk)
            if got is not None:
                phi, x = got
                mults[j].append((mu, x, phi))
                placed = True
                break
        if not placed:
            members.append(blk)
            mults.append([(mu, np.eye(blk.Dl, dtype=complex), 0.0)])
    # sanity: distinct members must have mixed-transfer modulus below one
    for i in range(len(members)):
        for j in range(i + 1, len(members)):
            if members[i].Dl == members[j].Dl and members[i].d == members[j].d:
                f = mixed_transfer(members[i].data, members[j].data)
                lam = np.max(np.abs(np.linalg.eigvals(f)))
                if abs(lam - 1) <= tol.EPS_RANK:
                    raise ValueError(
                        "ambiguous block equivalence near the unit circle"
                    )
    return BasisOfNormalTensors(members=members, multiplicities=mults)


# ---------------------------------------------------------------------------
# same-state decision


def _classify_blocks(cf: CanonicalForm, members: list[MpsTensor]):
    """Assign each canonical block a member index and its complex weight.

    Returns a list of (member_index, zeta, block_tensor, gauge_to_member)
    with block = e^{i arg(zeta)} X member X^{-1} and |zeta| the block weight,
    or None for a block matching no member.
    """
    out = []
    for mu, blk in cf.blocks:
        hit = None
        for j, rep in enumerate(members):
            if blk.Dl != rep.Dl or blk.d != rep.d:
                continue
            got = extract_gauge(rep, blk)
            if got is not None:
                phi, x = got
                hit = (j, mu * np.exp(1j * phi), blk, x)
                break
        if hit is None:
            return None
        out.append(hit)
    return out


def compare_states(a: UniformMps, b: UniformMps) -> GaugeRelation:
    """Decide whether two periodic uniform MPS generate equal or
    proportional state families, recovering gauges and phases.

    Canonicalizes both tensors (at a common blocking level when periodicity
    removal differs), matches bases of normal tensors through the mixed
    transfer test, and compares the per-member multisets of complex block
    weights mu e^{i phi}; they must agree up to one common scalar.
    """
    if not (a.periodic and b.periodic):
        raise ValueError("state comparison is defined for periodic boundary")
    cf_a = canonical_form(a)
    cf_b = canonical_form(b)
    blocking = lcm(cf_a.blocking_p, cf_b.blocking_p)
    if blocking != cf_a.blocking_p or blocking != cf_b.blocking_p:
        cf_a = canonical_form(block_sites(a, blocking))
        cf_b = canonical_form(block_sites(b, blocking))
        cf_a.blocking_p = cf_b.blocking_p = blocking
    notes = list(dict.fromkeys(cf_a.notes + cf_b.notes))
    if blocking > 1:
        notes.append(
            f"compared after blocking {blocking} sites; equality holds up to "
            "per-length root-of-unity block phases on the unit cell"
        )
    if sorted(t.Dl for _, t in cf_a.blocks) != sorted(t.Dl for _, t in cf_b.blocks):
        notes.append("bond dimensions differ after canonicalization")
        return GaugeRelation("different", blocking=blocking, notes=notes)

    bnt = basis_of_normal_tensors(cf_a)
    cls_a = _classify_blocks(cf_a, bnt.members)
    cls_b = _classify_blocks(cf_b, bnt.members)
    if cls_b is None:
        return GaugeRelation("different", blocking=blocking, notes=notes)
    n_members = len(bnt.members)
    zetas_a = [[z for j, z, _, _ in cls_a if j == k] for k in range(n_members)]
    zetas_b = [[z for j, z, _, _ in cls_b if j == k] for k in range(n_members)]
    if any(len(za) != len(zb) for za, zb in zip(zetas_a, zetas_b)):
        return GaugeRelation("different", blocking=blocking, notes=notes)

    scale_ref = max(abs(z) for za in zetas_a for z in za)

    def multisets_match(lam):
        for za, zb in zip(zetas_a, zetas_b):
            pool = list(zb)
            for z in za:
                best = min(range(len(pool)), key=lambda i: abs(pool[i] - lam * z))
                if abs(pool[best] - lam * z) > 1e-8 * scale_ref * max(abs(lam), 1):
                    return False
                pool.pop(best)
        return True

    candidates = [zetas_b[0][0] / z for z in zetas_a[0]]
    candidates.sort(key=lambda lam: abs(lam - 1))
    lam = next((c for c in candidates if multisets_match(c)), None)
    if lam is None:
        return GaugeRelation("different", blocking=blocking, notes=notes)
    if abs(lam - 1) <= 1e-8:
        lam = 1.0 + 0j

    # pair blocks of b with blocks of a (same member, zeta_b = lam zeta_a)
    remaining = list(range(len(cls_a)))
    pairing = []
    for pos_b, (j_b, z_b, blk_b, _) in enumerate(cls_b):
        best = min(
            (k for k in remaining if cls_a[k][0] == j_b),
            key=lambda k: abs(z_b - lam * cls_a[k][1]),
        )
        remaining.remove(best)
        pairing.append((best, pos_b))

    # assemble the global gauge in the blocked bases and verify
    size = sum(t.Dl for _, t in cf_a.blocks)
    inner = np.zeros((size, size), dtype=complex)
    offsets_a = np.cumsum([0] + [t.Dl for _, t in cf_a.blocks])
    offsets_b = np.cumsum([0] + [t.Dl for _, t in cf_b.blocks])
    ok = True
    for k_a, pos_b in pairing:
        got = extract_gauge(cls_a[k_a][2], cls_b[pos_b][2])
        if got is None:
            ok = False
            break
        _, x_pair = got
        ra, rb = offsets_a[k_a], offsets_b[pos_b]
        dloc = cf_a.blocks[k_a][1].Dl
        inner[rb : rb + dloc, ra : ra + dloc] = x_pair
    if not ok:
        return GaugeRelation("different", blocking=blocking, notes=notes)
    gauge = cf_b.gauge @ inner @ np.linalg.inv(cf_a.gauge)

    verdict = "equal" if lam == 1 else "proportional"
    return GaugeRelation(
        verdict,
        gauge=gauge,
        phase=float(np.angle(lam)),
        scale=complex(lam),
        blocking=blocking,
        notes=notes,
    )
