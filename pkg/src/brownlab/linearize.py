"""SVD-based linearization of a degree-2 polynomial and its block matrix.

A degree-2 polynomial p with quadratic coefficient matrix A of rank r is
realized as the (0,0) resolvent block of an (r+1)N x (r+1)N matrix L^z
whose entries are degree-1 in the inputs: write A = U S V*, put
s_0 = conj(b), s_k = sigma_k v_k, and r_k = conj(u_k). Rotating the
Gaussian inputs by the unitary R (rows r_k, completed to a basis) turns
the top row into the rotated inputs themselves, which is the block form
assembled here. The Schur complement of the lower-right -Id block then
gives (p - z)^{-1} = ((L^z)^{-1})_{0,0} exactly.

The SVD gauge (phases, ordering of degenerate singular directions) is not
fixed; every downstream contract in this package is gauge invariant.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .ncpoly import NcPoly, evaluate, quadratic_data

__all__ = [
    "Linearization",
    "BlockShift",
    "SingularFactorError",
    "build_linearization",
    "assemble_Lz",
    "verify_schur",
    "SchurMismatchError",
]


class SingularFactorError(RuntimeError):
    """L^z or P - z was numerically singular; `which` names the culprit."""

    def __init__(self, which, smin):
        super().__init__(f"{which} is numerically singular (smin={smin:.3e})")
        self.which = which
        self.smin = smin


class SchurMismatchError(RuntimeError):
    """Resolvent identity residual exceeded the requested tolerance."""


@dataclass(frozen=True)
class Linearization:
    """Vectors and rotation realizing the degree-2 linearization.

    s holds s_0..s_r from the SVD route (s_1..s_r nonzero and mutually
    orthogonal); rotation is the n x n unitary whose first r rows turn the
    quadratic left factors into coordinate projections.
    """

    rank: int
    s: tuple
    rotation: np.ndarray
    gamma: complex
    source: NcPoly

    @property
    def num_vars(self):
        return self.rotation.shape[0]

    @property
    def dim(self):
        return self.rank + 1

    def rotated_s(self):
        """s-vectors in the rotated frame (the frame of assemble_Lz)."""
        return [self.rotation @ sk for sk in self.s]

    def s_matrix(self, rotated=True):
        """Stack of the s-vectors as an (r+1) x n array."""
        vecs = self.rotated_s() if rotated else self.s
        return np.stack(vecs)

    def to_json(self):
        return json.dumps(
            {
                "rank": self.rank,
                "s": [_cvec(v) for v in self.s],
                "rotation": _cvec(self.rotation.ravel()),
                "gamma": [self.gamma.real, self.gamma.imag],
            }
        )

    @staticmethod
    def from_json(text, source=None):
        data = json.loads(text)
        s = tuple(_uncvec(v) for v in data["s"])
        n = len(s[0])
        rot = _uncvec(data["rotation"]).reshape(n, n)
        gamma = complex(data["gamma"][0], data["gamma"][1])
        if source is None:
            source = NcPoly.zero(n)
        return Linearization(
            rank=int(data["rank"]), s=s, rotation=rot, gamma=gamma, source=source
        )


def _cvec(v):
    return [[z.real, z.imag] for z in np.asarray(v).ravel()]


def _uncvec(pairs):
    return np.array([complex(a, b) for a, b in pairs])


@dataclass(frozen=True)
class BlockShift:
    """The z-dependent constant block K^z = diag(gamma - z, -Id_r)."""

    z: complex
    gamma: complex
    dim: int

    @property
    def matrix(self):
        K = -np.eye(self.dim, dtype=complex)
        K[0, 0] = self.gamma - self.z
        return K


def build_linearization(p, rank_tol=1e-10):
    """Construct the linearization of a polynomial of degree exactly 2."""
    if p.degree != 2:
        raise ValueError(f"linearization needs degree 2, got degree {p.degree}")
    qd = quadratic_data(p, rank_tol=rank_tol)
    if qd.rank == 0:
        raise ValueError("quadratic part has numerical rank 0")
    n = p.num_vars
    r = qd.rank
    U, sigma, Vh = np.linalg.svd(qd.A)
    s = [np.conj(qd.b)]
    for k in range(r):
        s.append(sigma[k] * np.conj(Vh[k]))

    # Rows k of the rotation are the unconjugated SVD left columns, so that
    # (R x)_k recovers the k-th left linear factor of the quadratic part.
    # The remaining rows are any orthonormal completion.
    rows = U[:, :r].T
    if r < n:
        comp = scipy.linalg.null_space(np.conj(U[:, :r]).T)
        rows = np.vstack([rows, comp.T])
    return Linearization(rank=r, s=tuple(s), rotation=rows, gamma=qd.gamma, source=p)


def assemble_Lz(lin, X, z):
    """Assemble L^z from raw inputs; the rotation is applied internally.

    Block layout: row 0 is (Y_0 + (gamma - z) Id, Xr_1, ..., Xr_r) with
    Xr_k the rotated inputs, column 0 is (., Y_1, ..., Y_r) with
    Y_k = sum_l conj(s_k[l]) X_l, and -Id on the remaining diagonal.
    """
    X = [np.asarray(M) for M in X]
    n = lin.num_vars
    if len(X) < n:
        raise ValueError(f"need {n} matrices, got {len(X)}")
    N = X[0].shape[0]
    for M in X[:n]:
        if M.shape != (N, N):
            raise ValueError("all matrices must be square of equal size")
    r = lin.rank
    R = lin.rotation
    d = r + 1

    L = np.zeros((d * N, d * N), dtype=complex)
    Y0 = sum(np.conj(lin.s[0][l]) * X[l] for l in range(n))
    L[0:N, 0:N] = Y0 + (lin.gamma - z) * np.eye(N)
    for k in range(1, d):
        Xrot = sum(R[k - 1, l] * X[l] for l in range(n))
        Yk = sum(np.conj(lin.s[k][l]) * X[l] for l in range(n))
        L[0:N, k * N:(k + 1) * N] = Xrot
        L[k * N:(k + 1) * N, 0:N] = Yk
        L[k * N:(k + 1) * N, k * N:(k + 1) * N] = -np.eye(N)
    return L


# Invertibility guard for both factors entering the resolvent identity.
SMIN_GUARD = 1e-10


def verify_schur(lin, X, z, tol=None):
    """Residual of the resolvent identity between L^z and P - z.

    Inverts both sides densely and returns
    || (L^z)^{-1}[0:N,0:N] - (P-z)^{-1} ||_HS / || (P-z)^{-1} ||_HS.
    Raises SingularFactorError if either factor has smin below 1e-10, and
    SchurMismatchError if tol is given and the residual exceeds it. The
    weaker operator-norm domination ||(P-z)^{-1}|| <= ||(L^z)^{-1}|| is
    checked on every call since it must hold identically.
    """
    X = [np.asarray(M) for M in X]
    N = X[0].shape[0]
    P = evaluate(lin.source, X)
    Lz = assemble_Lz(lin, X, z)
    Pz = P - z * np.eye(N)

    smin_L = np.linalg.svd(Lz, compute_uv=False)[-1]
    if smin_L < SMIN_GUARD:
        raise SingularFactorError("linearization L^z", smin_L)
    smin_P = np.linalg.svd(Pz, compute_uv=False)[-1]
    if smin_P < SMIN_GUARD:
        raise SingularFactorError("shifted polynomial P - z", smin_P)

    inv_L = np.linalg.inv(Lz)
    inv_P = np.linalg.inv(Pz)
    residual = np.linalg.norm(inv_L[0:N, 0:N] - inv_P) / np.linalg.norm(inv_P)

    op_P = np.linalg.norm(inv_P, ord=2)
    op_L = np.linalg.norm(inv_L, ord=2)
    if op_P > op_L * (1 + 1e-9):
        raise SchurMismatchError(
            f"operator-norm domination violated: {op_P:.6e} > {op_L:.6e}"
        )
    if tol is not None and residual > tol:
        raise SchurMismatchError(f"residual {residual:.3e} exceeds tol {tol:.3e}")
    return float(residual)
