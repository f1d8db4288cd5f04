"""Orthocomplement bases, test projections, determinant walks.

The linearized matrix L^z, viewed inside-out as an N x N array of
(r+1) x (r+1) blocks, reduces invertibility questions to a small test
projection: project one block column onto the orthocomplement of the
span of the others. That orthocomplement is spanned by the columns of a
basis matrix U, partitioned into N square blocks U_i, and the projected
column is the matrix random walk sum_i U_i^* L_i.

Anti-concentration of det(walk) is governed by the determinant
coefficients Delta built from the rows of the blocks, by the structured
sets they define, and by the walk matrix Phi whose Gram matrix is the
covariance of the vectorized walk. This module makes each of those
objects samplable so the theory's inequalities can be checked on draws.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .pseudospec import TailEstimate
from .rmtcore import STREAM_HAAR, STREAM_WALK, haar_unitary, stream

__all__ = [
    "WalkBasis",
    "DeltaReport",
    "WalkMatrix",
    "DegenerateDrawError",
    "orthocomplement_basis",
    "block_column",
    "test_projection",
    "delta_report",
    "walk_matrix",
    "select_rows",
    "det_tail_experiment",
]

ORTHO_TOL = 1e-10       # orthonormality of basis columns, checked on every draw
NULLSPACE_RTOL = 1e-12  # relative cutoff for reading off the null space


class DegenerateDrawError(RuntimeError):
    """Retained columns were rank deficient; no clean orthocomplement."""


@dataclass(frozen=True)
class WalkBasis:
    """(r+1)N x (r+1) matrix with orthonormal columns, in N square blocks.

    Block U_i collects row i of each of the r+1 tall blocks of U; its
    k-th row is (v_i^k)^*.
    """

    N: int
    r: int
    U: np.ndarray

    def __post_init__(self):
        d = self.r + 1
        if self.U.shape != (d * self.N, d):
            raise ValueError("U must be (r+1)N x (r+1)")
        gram = self.U.conj().T @ self.U
        if np.abs(gram - np.eye(d)).max() > ORTHO_TOL:
            raise ValueError("columns of U are not orthonormal to 1e-10")

    @property
    def blocks(self):
        """Array of shape (N, r+1, r+1); blocks[i] is U_i."""
        d = self.r + 1
        return self.U.reshape(d, self.N, d).transpose(1, 0, 2)

    def tall_block(self, k):
        """U^k, the k-th N x (r+1) slab of U."""
        return self.U[k * self.N:(k + 1) * self.N, :]

    def v_rows(self, k):
        """v_i^k vectors as rows of an N x (r+1) array (conjugated rows)."""
        return np.conj(self.tall_block(k))

    def save(self, bin_path, header_path):
        """Column-major complex-pair dump plus a JSON header {N, r}."""
        flat = self.U.flatten(order="F")
        out = np.empty(2 * flat.size)
        out[0::2] = flat.real
        out[1::2] = flat.imag
        out.tofile(bin_path)
        with open(header_path, "w", encoding="utf-8") as fh:
            json.dump({"N": self.N, "r": self.r}, fh)

    @staticmethod
    def load(bin_path, header_path):
        with open(header_path, encoding="utf-8") as fh:
            head = json.load(fh)
        N, r = int(head["N"]), int(head["r"])
        raw = np.fromfile(bin_path)
        flat = raw[0::2] + 1j * raw[1::2]
        U = flat.reshape(((r + 1) * N, r + 1), order="F")
        return WalkBasis(N=N, r=r, U=U)


def block_column(Lz, j, r):
    """The j-th block column of L^z as an (r+1)N x (r+1) matrix."""
    d = r + 1
    if Lz.shape[0] % d:
        raise ValueError("matrix size is not a multiple of r+1")
    N = Lz.shape[0] // d
    cols = [k * N + j for k in range(d)]
    return Lz[:, cols]


def orthocomplement_basis(Lz, j, seed, r):
    """Orthonormal basis of the orthocomplement of all block columns but j,
    right-twisted by a Haar unitary drawn from (seed, j).

    Raises DegenerateDrawError when the retained columns are rank
    deficient (relative smin below 1e-12), since then the complement has
    excess dimension and the draw is ill-posed.
    """
    d = r + 1
    N = Lz.shape[0] // d
    if Lz.shape != (d * N, d * N):
        raise ValueError("Lz must be square with (r+1)N rows")
    if not 0 <= j < N:
        raise ValueError(f"block column index {j} outside [0, {N})")
    keep = [k * N + jj for k in range(d) for jj in range(N) if jj != j]
    H = haar_unitary(d, stream(seed, STREAM_HAAR, j))
    if not keep:
        return WalkBasis(N=N, r=r, U=H)
    M = Lz[:, keep]
    Ufull, sv, _ = np.linalg.svd(M)
    if sv[-1] <= NULLSPACE_RTOL * sv[0]:
        raise DegenerateDrawError(
            f"retained columns rank deficient: smin/smax = {sv[-1] / sv[0]:.2e}"
        )
    null_basis = Ufull[:, M.shape[1]:]
    return WalkBasis(N=N, r=r, U=null_basis @ H)


def test_projection(U, col):
    """Project a block column onto the basis: sum_i U_i^* (column block i)."""
    if col.shape[0] != U.U.shape[0]:
        raise ValueError("column height does not match the basis")
    return U.U.conj().T @ col


# keep pytest from collecting the imported name as a test case
test_projection.__test__ = False


@dataclass(frozen=True)
class DeltaReport:
    """Maxima of the two Delta determinant families with witnesses.

    Witnesses are (variable index l, index tuple (i_0..i_r)); both maxima
    strictly below the threshold marks the basis as structured. exact is
    False when an early-exit scan stopped after both maxima cleared the
    threshold.
    """

    delta_threshold: float
    max_abs_delta1: float
    witness1: tuple | None
    max_abs_delta2: float
    witness2: tuple | None
    structured: bool
    exact: bool = True

    def to_json(self):
        def wit(w):
            if w is None:
                return None
            return {"l": w[0], "indices": list(w[1])}

        return json.dumps(
            {
                "delta_threshold": self.delta_threshold,
                "max_abs_delta1": self.max_abs_delta1,
                "witness1": wit(self.witness1),
                "max_abs_delta2": self.max_abs_delta2,
                "witness2": wit(self.witness2),
                "structured": self.structured,
                "exact": self.exact,
            },
            indent=1,
        )


def _delta_single(U, s_mat, l, indices):
    """One Delta determinant, recomputed directly from its definition."""
    v0 = U.v_rows(0)
    w = np.zeros(U.r + 1, dtype=complex)
    for k in range(U.r + 1):
        w += np.conj(s_mat[k, l - 1]) * U.v_rows(k)[indices[0]]
    cols = [w] + [v0[i] for i in indices[1:]]
    return np.linalg.det(np.stack(cols, axis=1))


def _index_chunks(dims, chunk=200_000):
    total = int(np.prod(dims))
    for start in range(0, total, chunk):
        flat = np.arange(start, min(start + chunk, total))
        yield np.unravel_index(flat, dims)


def delta_report(U, s_vectors, threshold, structured_only=False):
    """Exact maxima of |Delta| over both structured index families.

    Family 1 ranges over l in [r+1, n] and all (r+1)-tuples; family 2
    over l in [r] and tuples with i_0 = i_l. Tuples stream through in
    chunks so the full tensor is never materialized. Family 2 goes
    first (the smaller family); with structured_only the scan stops once
    both families have a witness at or above the threshold.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    s_mat = np.atleast_2d(np.asarray(s_vectors, dtype=complex))
    r, N = U.r, U.N
    n = s_mat.shape[1]
    if s_mat.shape[0] != r + 1:
        raise ValueError("need r+1 s-vectors")
    v0 = U.v_rows(0)                                    # (N, r+1)
    vk = np.stack([U.v_rows(k) for k in range(r + 1)])  # (r+1, N, r+1)
    W = np.einsum("kl,kim->lim", np.conj(s_mat), vk)    # (n, N, r+1)

    best = {1: [0.0, None], 2: [0.0, None]}

    def scan(family, l):
        hi, wit = best[family]
        if family == 1:
            for tup in _index_chunks((N,) * (r + 1)):
                i0, tail = tup[0], tup[1:]
                cols = [W[l - 1, i0]] + [v0[tail[m]] for m in range(r)]
                dets = np.abs(np.linalg.det(np.stack(cols, axis=2)))
                k = int(np.argmax(dets))
                if dets[k] > hi:
                    hi = float(dets[k])
                    wit = (l, tuple(int(t[k]) for t in tup))
        else:
            for tail in _index_chunks((N,) * r):
                i0 = tail[l - 1]
                cols = [W[l - 1, i0]] + [v0[tail[m]] for m in range(r)]
                dets = np.abs(np.linalg.det(np.stack(cols, axis=2)))
                k = int(np.argmax(dets))
                if dets[k] > hi:
                    hi = float(dets[k])
                    wit = (l, (int(i0[k]),) + tuple(int(t[k]) for t in tail))
        best[family] = [hi, wit]

    def settled():
        done1 = n == r or best[1][0] >= threshold
        return structured_only and done1 and best[2][0] >= threshold

    plan = [(2, l) for l in range(1, r + 1)] + [(1, l) for l in range(r + 1, n + 1)]
    exact = True
    for step, fam_l in enumerate(plan):
        scan(*fam_l)
        if settled() and step < len(plan) - 1:
            exact = False
            break

    max1, wit1 = best[1]
    max2, wit2 = best[2]
    for fam_wit, fam_max in ((wit1, max1), (wit2, max2)):
        if fam_wit is not None:
            check = abs(_delta_single(U, s_mat, fam_wit[0], fam_wit[1]))
            if not np.isclose(check, fam_max, rtol=1e-9, atol=1e-12):
                raise AssertionError("witness failed to reproduce its maximum")
    structured = max1 < threshold and max2 < threshold
    return DeltaReport(
        delta_threshold=float(threshold),
        max_abs_delta1=max1,
        witness1=wit1,
        max_abs_delta2=max2,
        witness2=wit2,
        structured=structured,
        exact=exact,
    )


@dataclass(frozen=True)
class WalkMatrix:
    """Phi = (Q R): covariance square root of the vectorized walk.

    The first r+1 columns stack Q^l = sum_k s_k[l] U^k over l in [n]; the
    remaining r(r+1) columns repeat U^0 down the block diagonal of the
    first r row blocks.
    """

    flat: np.ndarray
    q_block: np.ndarray
    r_block: np.ndarray


def walk_matrix(U, s_vectors):
    s_mat = np.atleast_2d(np.asarray(s_vectors, dtype=complex))
    r, N = U.r, U.N
    d = r + 1
    n = s_mat.shape[1]
    slabs = np.stack([U.tall_block(k) for k in range(d)])  # (r+1, N, r+1)
    Q = np.einsum("kl,kim->lim", s_mat, slabs)             # (n, N, r+1)
    flat = np.zeros((n * N, d * d), dtype=complex)
    for l in range(1, n + 1):
        flat[(l - 1) * N:l * N, 0:d] = Q[l - 1]
    for l in range(1, r + 1):
        flat[(l - 1) * N:l * N, l * d:(l + 1) * d] = slabs[0]
    return WalkMatrix(flat=flat, q_block=Q, r_block=flat[:, d:])


def wedge_norm(rows):
    """Norm of the wedge product of vectors, via the Gram determinant."""
    M = np.atleast_2d(rows)
    g = np.linalg.det(M @ M.conj().T).real
    return float(np.sqrt(max(g, 0.0)))


def select_rows(U0, alpha):
    """Greedy well-conditioned row selection from an N x (r+1) slab.

    The first pick maximizes the row norm, each later pick maximizes the
    distance to the span of the chosen rows; the wedge-norm guarantee
    (alpha/sqrt(N))^(k+1) is asserted on output for every prefix.
    """
    U0 = np.asarray(U0)
    N, d = U0.shape
    smin = np.linalg.svd(U0, compute_uv=False)[-1]
    if smin < alpha:
        raise ValueError(f"smin(U0)={smin:.3e} below alpha={alpha:.3e}")
    chosen = []
    basis = np.zeros((0, d), dtype=complex)
    for _ in range(d):
        coeff = U0 @ basis.conj().T if len(basis) else np.zeros((N, 0))
        dist2 = np.sum(np.abs(U0) ** 2, axis=1) - np.sum(np.abs(coeff) ** 2, axis=1)
        dist2[chosen] = -np.inf
        i = int(np.argmax(dist2))
        chosen.append(i)
        resid = U0[i] - coeff[i] @ basis if len(basis) else U0[i]
        norm = np.linalg.norm(resid)
        if norm > 0:
            basis = np.vstack([basis, resid / norm])
    for k in range(d):
        bound = (alpha / np.sqrt(N)) ** (k + 1)
        got = wedge_norm(U0[chosen[: k + 1]])
        if got < bound * (1 - 1e-9):
            raise AssertionError(
                f"wedge bound failed at k={k}: {got:.3e} < {bound:.3e}"
            )
    return chosen


def det_tail_experiment(U, s_vectors, shift, eps_ladder, trials, seed):
    """Small-ball ladder for |det(shift + sum_i U_i^* L_i)|.

    Fresh complex Gaussians with the (2N)^{-1/2}(g + i h) normalization
    per trial; the walk is realized through vec(W) = Phi^* xi / sqrt(N),
    so one matrix product covers all trials.
    """
    if trials < 100:
        raise ValueError("det tail experiments need trials >= 100")
    r, N = U.r, U.N
    d = r + 1
    shift = np.zeros((d, d)) if np.isscalar(shift) and shift == 0 else np.asarray(shift)
    if shift.shape != (d, d):
        raise ValueError("shift must be (r+1) x (r+1)")
    phi = walk_matrix(U, s_vectors).flat
    rng = stream(seed, STREAM_WALK)
    g = rng.standard_normal((phi.shape[0], trials))
    h = rng.standard_normal((phi.shape[0], trials))
    xi = (g + 1j * h) / np.sqrt(2.0 * N)
    vecs = phi.conj().T @ xi                      # ((r+1)^2, trials)
    W = vecs.T.reshape(trials, d, d).transpose(0, 2, 1) + shift[None, :, :]
    dets = np.abs(np.linalg.det(W))
    return TailEstimate.from_samples(dets, eps_ladder, z=None, N=N)
