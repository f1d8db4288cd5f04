"""Pseudospectrum experiments: smin grid maps, small-ball tails, areas.

The epsilon-pseudospectrum of a matrix is the sublevel set of
z -> smin(A - z). Everything here samples that statistic for P = p(X) over
fresh Ginibre tuples: grid maps take the median over trials at each node,
tail estimates count the empirical small-ball probabilities over an
epsilon ladder together with Wilson intervals and a fitted log-log slope,
and the area estimator integrates the indicator over a rectangle.

One sample is drawn per trial and swept across all grid nodes, matching
the fixed-matrix varying-z viewpoint and saving a factor nx*ny in
sampling cost.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._pool import parallel_map
from .ncpoly import evaluate
from .rmtcore import STREAM_GINIBRE, ginibre_matrix, ginibre_tuple, smin_stack, stream

__all__ = [
    "GridSpec",
    "GridField",
    "TailEstimate",
    "smin_map",
    "smin_map_full",
    "tail_estimate",
    "smin_shifted_tail",
    "pseudospectrum_area",
    "wilson_interval",
    "fit_tail_slope",
]

# Rungs with fewer hits than this are dropped from the slope regression;
# their Wilson intervals are too wide to constrain a fit.
MIN_HITS_FOR_SLOPE = 5

_SMIN_CHUNK = 64  # grid nodes per batched SVD call


@dataclass(frozen=True)
class GridSpec:
    """Rectangle in the complex plane sampled on an nx x ny lattice.

    Node (i, j) sits at re_min + i*dx + 1j*(im_min + j*dy) with
    dx = (re_max - re_min)/(nx - 1); a single row or column collapses
    onto the lower edge.
    """

    re_min: float
    re_max: float
    im_min: float
    im_max: float
    nx: int
    ny: int

    def __post_init__(self):
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise ValueError("grid rectangle must have positive area")
        if self.nx < 1 or self.ny < 1:
            raise ValueError("nx and ny must be positive")

    @property
    def dx(self):
        return (self.re_max - self.re_min) / (self.nx - 1) if self.nx > 1 else 0.0

    @property
    def dy(self):
        return (self.im_max - self.im_min) / (self.ny - 1) if self.ny > 1 else 0.0

    @property
    def area(self):
        return (self.re_max - self.re_min) * (self.im_max - self.im_min)

    def nodes(self):
        """Complex node array of shape (nx, ny)."""
        re = self.re_min + self.dx * np.arange(self.nx)
        im = self.im_min + self.dy * np.arange(self.ny)
        return re[:, None] + 1j * im[None, :]

    def to_dict(self):
        return {
            "re_min": self.re_min,
            "re_max": self.re_max,
            "im_min": self.im_min,
            "im_max": self.im_max,
            "nx": self.nx,
            "ny": self.ny,
        }


@dataclass(frozen=True)
class GridField:
    """One scalar per grid node."""

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.spec.nx, self.spec.ny):
            raise ValueError("values shape must match the grid")

    def to_csv(self, path_or_file, extras=None):
        """CSV rows 're,im,value' in row-major node order.

        extras maps column name to an (nx, ny) array appended per row.
        """
        extras = extras or {}
        nodes = self.spec.nodes()
        buf = io.StringIO()
        buf.write("re,im,value" + "".join(f",{k}" for k in extras) + "\n")
        for i in range(self.spec.nx):
            for j in range(self.spec.ny):
                z = nodes[i, j]
                row = f"{z.real:.17g},{z.imag:.17g},{self.values[i, j]:.17g}"
                for arr in extras.values():
                    row += f",{arr[i, j]:.17g}"
                buf.write(row + "\n")
        text = buf.getvalue()
        if hasattr(path_or_file, "write"):
            path_or_file.write(text)
        else:
            with open(path_or_file, "w", encoding="utf-8") as fh:
                fh.write(text)


def wilson_interval(hits, trials, z_score=1.959963984540054):
    """Wilson 95% interval for a binomial rate."""
    if trials == 0:
        return (0.0, 1.0)
    phat = hits / trials
    z2 = z_score * z_score
    denom = 1 + z2 / trials
    center = (phat + z2 / (2 * trials)) / denom
    half = z_score / denom * math.sqrt(phat * (1 - phat) / trials + z2 / (4 * trials**2))
    return (max(0.0, center - half), min(1.0, center + half))


def fit_tail_slope(eps_ladder, hits, trials, min_hits=MIN_HITS_FOR_SLOPE):
    """Least-squares slope of log(hit rate) against log(eps).

    Rungs with fewer than min_hits hits are dropped. Returns None when
    fewer than two rungs remain (e.g. every rung empty).
    """
    eps_ladder = np.asarray(eps_ladder, dtype=float)
    hits = np.asarray(hits)
    use = hits >= min_hits
    if use.sum() < 2:
        return None
    x = np.log(eps_ladder[use])
    y = np.log(hits[use] / trials)
    A = np.vstack([x, np.ones(len(x))]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(coef[0])


@dataclass(frozen=True)
class TailEstimate:
    """Empirical small-ball ladder P{stat <= eps} with CIs and slope."""

    z: complex
    N: int
    eps_ladder: np.ndarray
    hits: np.ndarray
    trials: int
    slope: float | None
    ci: tuple = field(default=())

    @property
    def rates(self):
        return self.hits / self.trials

    @staticmethod
    def from_samples(samples, eps_ladder, z, N):
        samples = np.sort(np.asarray(samples, dtype=float))
        eps_ladder = np.asarray(eps_ladder, dtype=float)
        if eps_ladder.ndim != 1 or len(eps_ladder) < 1:
            raise ValueError("eps ladder must be a nonempty 1-d sequence")
        if np.any(np.diff(eps_ladder) <= 0) or np.any(eps_ladder <= 0):
            raise ValueError("eps ladder must be positive and strictly increasing")
        trials = len(samples)
        hits = np.searchsorted(samples, eps_ladder, side="right")
        slope = fit_tail_slope(eps_ladder, hits, trials)
        ci = tuple(wilson_interval(int(h), trials) for h in hits)
        return TailEstimate(
            z=z, N=N, eps_ladder=eps_ladder, hits=hits, trials=trials, slope=slope, ci=ci
        )

    def to_json(self):
        ladder = []
        for k, eps in enumerate(self.eps_ladder):
            lo, hi = self.ci[k] if self.ci else (None, None)
            ladder.append(
                {
                    "eps": float(eps),
                    "hits": int(self.hits[k]),
                    "rate": float(self.hits[k] / self.trials),
                    "ci_lo": lo,
                    "ci_hi": hi,
                }
            )
        z = None if self.z is None else [self.z.real, self.z.imag]
        return json.dumps(
            {
                "z": z,
                "N": self.N,
                "trials": self.trials,
                "ladder": ladder,
                "slope": self.slope,
            },
            indent=1,
        )


def _smin_nodes(P, nodes_flat):
    """smin(P - z) for each z, batched; NaN rows where the backend fails."""
    N = P.shape[0]
    out = np.empty(len(nodes_flat))
    eye = np.eye(N)
    for start in range(0, len(nodes_flat), _SMIN_CHUNK):
        zs = nodes_flat[start : start + _SMIN_CHUNK]
        shifted = P[None, :, :] - zs[:, None, None] * eye[None, :, :]
        out[start : start + len(zs)] = smin_stack(shifted)
    return out


def _per_trial_smin_field(p, N, grid, seed, trial):
    rng = stream(seed, STREAM_GINIBRE, trial)
    X = ginibre_tuple(p.num_vars, N, rng)
    P = evaluate(p, X)
    return _smin_nodes(P, grid.nodes().ravel())


def smin_map_full(p, N, grid, trials, seed, threads=None):
    """Median/mean/min smin(P - z) per node plus the backend failure count."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    fields = parallel_map(
        lambda t: _per_trial_smin_field(p, N, grid, seed, t), range(trials), threads
    )
    data = np.stack(fields)  # (trials, nodes)
    failures = int(np.isnan(data).sum())
    with np.errstate(all="ignore"):
        med = np.nanmedian(data, axis=0)
        mean = np.nanmean(data, axis=0)
        mn = np.nanmin(data, axis=0) if trials > 1 else data[0]
    shape = (grid.nx, grid.ny)
    return (
        GridField(grid, med.reshape(shape)),
        GridField(grid, mean.reshape(shape)),
        GridField(grid, np.asarray(mn).reshape(shape)),
        failures,
    )


def smin_map(p, N, grid, trials, seed, threads=None):
    """Grid map of the median over trials of smin(P - z)."""
    return smin_map_full(p, N, grid, trials, seed, threads)[0]


def _tail_from_trials(sample_fn, trials, eps_ladder, z, N, threads):
    if trials < 100:
        raise ValueError("tail estimates need trials >= 100")
    samples = parallel_map(sample_fn, range(trials), threads)
    return TailEstimate.from_samples(np.array(samples), eps_ladder, z, N)


def tail_estimate(p, N, z, eps_ladder, trials, seed, threads=None):
    """Small-ball ladder for smin(P - z) at a fixed z, fresh P per trial."""

    def one(trial):
        rng = stream(seed, STREAM_GINIBRE, trial)
        X = ginibre_tuple(p.num_vars, N, rng)
        P = evaluate(p, X)
        return np.linalg.svd(P - z * np.eye(N), compute_uv=False)[-1]

    return _tail_from_trials(one, trials, eps_ladder, z, N, threads)


def smin_shifted_tail(N, shift, eps_ladder, trials, seed, threads=None):
    """Small-ball ladder for smin(X + M), X Ginibre, M a fixed shift."""
    M = np.zeros((N, N)) if np.isscalar(shift) and shift == 0 else np.asarray(shift)
    if M.shape != (N, N):
        raise ValueError("shift must be N x N")

    def one(trial):
        X = ginibre_matrix(N, stream(seed, STREAM_GINIBRE, trial))
        return np.linalg.svd(X + M, compute_uv=False)[-1]

    return _tail_from_trials(one, trials, eps_ladder, None, N, threads)


def pseudospectrum_area(p, N, eps, omega, trials, seed, threads=None):
    """Monte Carlo estimate of the expected pseudospectrum area in omega.

    Fraction of grid nodes with smin(P - z) <= eps, averaged over trials,
    times the area of the rectangle.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    fields = parallel_map(
        lambda t: _per_trial_smin_field(p, N, omega, seed, t), range(trials), threads
    )
    fractions = [np.mean(f[np.isfinite(f)] <= eps) if np.isfinite(f).any() else np.nan
                 for f in fields]
    return float(np.nanmean(fractions) * omega.area)
