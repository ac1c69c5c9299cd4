"""Lattice reduction, Gram-Schmidt, Babai, and discrete Gaussian sampling.

Bases are matrices whose COLUMNS span the lattice.  Two arithmetic
backends share the same algorithms: hardware float64 (numpy, used for
all sampling) and software floats at a configurable mantissa (numpy
object arrays of mpmath mpf, used for high-precision geometry checks).

The lattice sampler is the randomized nearest-plane algorithm run over
the LLL-reduced basis: at level i it draws an integer Gaussian with
parameter sigma / ||b~_i|| centered at the projection of the remaining
target.  For sigma below the smoothing regime this only approximates the
lattice Gaussian; that approximation, not an exact sampler, is the
distribution the attacks consume, and tests characterize it empirically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import mpmath as mp
import numpy as np

from .errors import PrecisionLoss
from .rng import Stream, as_stream, for_blocks

TAIL_CUT = 10.0  # integer Gaussian is truncated at |z - c| > TAIL_CUT * sigma


def _is_object(a: np.ndarray) -> bool:
    return a.dtype == object


def _to_object(A, bits: int) -> np.ndarray:
    if isinstance(A, mp.matrix):
        with mp.workprec(bits):
            return np.array([[A[i, j] for j in range(A.cols)] for i in range(A.rows)],
                            dtype=object)
    out = np.empty(A.shape, dtype=object)
    with mp.workprec(bits):
        for i in range(A.shape[0]):
            for j in range(A.shape[1]):
                out[i, j] = mp.mpf(A[i, j]) if not isinstance(A[i, j], mp.mpf) else A[i, j]
    return out


def _as_float(A: np.ndarray) -> np.ndarray:
    if _is_object(A):
        return np.array([[float(x) for x in row] for row in A], dtype=float)
    return np.asarray(A, dtype=float)


def _gso_coeffs(B: np.ndarray):
    """Classical Gram-Schmidt. Returns (G, mu, c) with c[i] = ||b~_i||^2."""
    n = B.shape[1]
    if _is_object(B):
        G = np.empty_like(B)
        mu = np.zeros((n, n), dtype=object)
        c = [None] * n
        for i in range(n):
            v = B[:, i].copy()
            for j in range(i):
                m_ij = (B[:, i] * G[:, j]).sum() / c[j]
                mu[i, j] = m_ij
                v = v - m_ij * G[:, j]
            G[:, i] = v
            c[i] = (v * v).sum()
        return G, mu, c
    G = np.empty_like(B)
    mu = np.zeros((n, n))
    c = np.zeros(n)
    for i in range(n):
        v = B[:, i].copy()
        if i:
            proj = (G[:, :i].T @ B[:, i]) / c[:i]
            mu[i, :i] = proj
            v = v - G[:, :i] @ proj
        G[:, i] = v
        c[i] = float(v @ v)
    return G, mu, list(c)


def gram_schmidt(B, precision_bits: int = 53) -> Tuple[np.ndarray, list]:
    """Column Gram-Schmidt; raises PrecisionLoss on numeric rank loss."""
    work = _prepare(B, precision_bits)

    def run():
        G, _, c = _gso_coeffs(work)
        norms = [mp.sqrt(x) if isinstance(x, mp.mpf) else math.sqrt(x) for x in c]
        top = max(norms)
        if top == 0 or min(norms) < top * 2.0 ** (-precision_bits):
            raise PrecisionLoss("Gram-Schmidt norm underflow; basis numerically singular")
        return G, norms

    if precision_bits > 53:
        with mp.workprec(precision_bits):
            return run()
    return run()


def _prepare(B, precision_bits: int) -> np.ndarray:
    if precision_bits > 53:
        return _to_object(B, precision_bits)
    if isinstance(B, mp.matrix) or (isinstance(B, np.ndarray) and _is_object(B)):
        return _as_float(_to_object(B, 53) if isinstance(B, mp.matrix) else B)
    return np.array(B, dtype=float)


def lll_reduce(A, delta: float = 0.99, precision_bits: int = 53):
    """Floating LLL on column vectors. Returns (U, B) with B = A U."""
    if not 0.25 < delta < 1.0:
        raise ValueError("delta must lie in (0.25, 1)")
    work = _prepare(A, precision_bits)
    n = work.shape[1]
    if work.shape[0] != n:
        raise ValueError("basis matrix must be square")
    U = np.eye(n, dtype=np.int64)
    if n == 1:
        return U, work

    def run():
        B = work.copy()
        _, mu, c = _gso_coeffs(B)
        if min(float(x) for x in c) <= 0.0:
            raise PrecisionLoss("input basis is numerically singular")
        cap = 10 * n * n
        swaps = 0
        k = 1
        while k < n:
            for j in range(k - 1, -1, -1):
                r = _nearest_int(mu[k, j])
                if r != 0:
                    B[:, k] -= r * B[:, j]
                    U[:, k] -= r * U[:, j]
                    if j > 0:
                        mu[k, :j] -= r * mu[j, :j]
                    mu[k, j] -= r
            if c[k] >= (delta - mu[k, k - 1] * mu[k, k - 1]) * c[k - 1]:
                k += 1
                continue
            swaps += 1
            if swaps > cap:
                raise PrecisionLoss(f"LLL exceeded {cap} swaps; size reduction is not converging")
            B[:, [k - 1, k]] = B[:, [k, k - 1]]
            U[:, [k - 1, k]] = U[:, [k, k - 1]]
            mu_kk1 = mu[k, k - 1]
            b_new = c[k] + mu_kk1 * mu_kk1 * c[k - 1]
            mu[k, k - 1] = mu_kk1 * c[k - 1] / b_new
            c[k] = c[k - 1] * c[k] / b_new
            c[k - 1] = b_new
            if k >= 2:
                mu[[k - 1, k], : k - 1] = mu[[k, k - 1], : k - 1]
            for i in range(k + 1, n):
                t = mu[i, k]
                mu[i, k] = mu[i, k - 1] - mu_kk1 * t
                mu[i, k - 1] = t + mu[k, k - 1] * mu[i, k]
            k = max(k - 1, 1)
        return U, B

    if precision_bits > 53:
        with mp.workprec(precision_bits):
            return run()
    return run()


def _nearest_int(x) -> int:
    if isinstance(x, mp.mpf):
        return int(mp.nint(x))
    return int(round(float(x)))


@dataclass
class LatticeBundle:
    """Reduced basis plus everything sampling needs.

    A is the caller's basis, B = A U the reduced one, G its Gram-Schmidt
    orthogonalization.  final_sigma is the per-call Gaussian parameter:
    with sigma_mode 'geometric-mean' the constructor's sigma0 is scaled
    by geomean(gs_norms) = |det A|^(1/n) = |disc K|^(1/2n), reproducing
    the covolume-relative parameterization; 'absolute' uses sigma0 as is.
    """

    A: np.ndarray
    U: np.ndarray
    B: np.ndarray
    G: np.ndarray
    gs_norms: list
    precision_bits: int
    delta: float
    sigma_mode: str
    final_sigma: float
    A_f: np.ndarray
    B_f: np.ndarray
    G_f: np.ndarray
    norms_f: np.ndarray

    @property
    def n(self) -> int:
        return self.A_f.shape[1]

    def geometric_mean_norm(self) -> float:
        return float(np.exp(np.mean(np.log(self.norms_f))))


def make_bundle(A, sigma0: float = 1.0, sigma_mode: str = "geometric-mean",
                delta: float = 0.99, precision_bits: int = 53,
                reduce: bool = True) -> LatticeBundle:
    work = _prepare(A, precision_bits)
    n = work.shape[1]
    if reduce:
        U, B = lll_reduce(work, delta=delta, precision_bits=precision_bits)
    else:
        U, B = np.eye(n, dtype=np.int64), work.copy()
    G, norms = gram_schmidt(B, precision_bits=precision_bits)
    A_f, B_f, G_f = _as_float(work), _as_float(B), _as_float(G)
    norms_f = np.array([float(v) for v in norms])
    if sigma_mode == "geometric-mean":
        final_sigma = sigma0 * float(np.exp(np.mean(np.log(norms_f))))
    elif sigma_mode == "absolute":
        final_sigma = float(sigma0)
    else:
        raise ValueError(f"unknown sigma_mode {sigma_mode!r}")
    return LatticeBundle(A=work, U=U, B=B, G=G, gs_norms=norms,
                         precision_bits=precision_bits, delta=delta,
                         sigma_mode=sigma_mode, final_sigma=final_sigma,
                         A_f=A_f, B_f=B_f, G_f=G_f, norms_f=norms_f)


def babai_nearest_plane(L: LatticeBundle, target) -> Tuple[np.ndarray, np.ndarray]:
    """Deterministic nearest plane. Returns (v, z) with v = A z in the
    lattice and target - v inside the Gram-Schmidt parallelepiped."""
    t = np.asarray(target, dtype=float)
    n = L.n
    v = t.copy()
    zs = np.zeros(n, dtype=np.int64)
    for i in range(n - 1, -1, -1):
        coeff = float(v @ L.G_f[:, i]) / (L.norms_f[i] ** 2)
        z = int(round(coeff))
        zs[i] = z
        if z:
            v = v - z * L.B_f[:, i]
    return t - v, L.U @ zs


def sample_integer_gaussian(sigma: float, center: float, rng) -> int:
    """One draw from the integer Gaussian with mass prop. to
    exp(-(z-c)^2 / (2 sigma^2)), truncated at TAIL_CUT standard widths."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    lo = math.ceil(center - TAIL_CUT * sigma)
    hi = math.floor(center + TAIL_CUT * sigma)
    if lo > hi:
        return int(round(center))
    zs = np.arange(lo, hi + 1)
    logw = -((zs - center) ** 2) / (2.0 * sigma * sigma)
    w = np.exp(logw - logw.max())
    cum = np.cumsum(w)
    u = rng.random() * cum[-1]
    return int(zs[int(np.searchsorted(cum, u, side="right"))])


def _integer_gaussian_block(sigma: float, centers: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """Vectorized truncated integer Gaussian, one draw per center."""
    base = np.round(centers).astype(np.int64)
    if sigma <= 0:
        return base
    L = int(math.ceil(TAIL_CUT * sigma + 0.5))
    if L > 4096:
        raise ValueError("integer Gaussian support too wide to tabulate")
    offs = np.arange(-L, L + 1)
    zs = base[:, None] + offs[None, :]
    diff = zs - centers[:, None]
    w = np.exp(-(diff * diff) / (2.0 * sigma * sigma))
    w[np.abs(diff) > TAIL_CUT * sigma] = 0.0
    cum = np.cumsum(w, axis=1)
    total = cum[:, -1]
    targets = uniforms * total
    idx = (cum < targets[:, None]).sum(axis=1)
    out = zs[np.arange(len(base)), np.minimum(idx, 2 * L)]
    dead = total <= 0.0  # width so small the truncated support is empty
    if np.any(dead):
        out[dead] = base[dead]
    return out


def _nearest_plane_block(L: LatticeBundle, sigma: float, centers: np.ndarray,
                         rng) -> np.ndarray:
    """Randomized nearest plane for a block of targets (rows of centers)."""
    n = L.n
    M = centers.shape[0]
    c = centers.astype(float).copy()
    z_levels = np.zeros((M, n), dtype=np.int64)
    for i in range(n - 1, -1, -1):
        proj = (c @ L.G_f[:, i]) / (L.norms_f[i] ** 2)
        level_sigma = sigma / L.norms_f[i]
        u = rng.random(M)
        z = _integer_gaussian_block(level_sigma, proj, u)
        z_levels[:, i] = z
        c -= np.outer(z, L.B_f[:, i])
    return z_levels @ L.U.T


def sample_lattice_gaussian(L: LatticeBundle, sigma: float, center=None, rng=None) -> np.ndarray:
    """One draw; returns integer coordinates with respect to A."""
    if rng is None:
        raise ValueError("an explicit rng or stream is required")
    if isinstance(rng, Stream):
        rng = rng.generator()
    c = np.zeros(L.n) if center is None else np.asarray(center, dtype=float)
    return _nearest_plane_block(L, sigma, c[None, :], rng)[0]


def sample_lattice_gaussian_batch(L: LatticeBundle, sigma: float, count: int,
                                  stream: Stream, centers: Optional[np.ndarray] = None,
                                  threads: int = 1) -> np.ndarray:
    """count draws, blocked so that results are identical however the
    blocks are scheduled across threads."""
    stream = as_stream(stream)
    out = np.zeros((count, L.n), dtype=np.int64)

    def block(lo, hi, idx):
        rng = stream.child(idx).generator()
        cent = np.zeros((hi - lo, L.n)) if centers is None else centers[lo:hi]
        out[lo:hi] = _nearest_plane_block(L, sigma, cent, rng)

    for_blocks(count, block, threads)
    return out
