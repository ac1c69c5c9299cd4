"""RLWE instance lifecycle: sample generation, the dual-circle observable,
and modulus switching.

Ring multiplication goes through the complex embedding: multiply the
diagonalized values componentwise and round the coordinates back.  The
product of algebraic integers has integer coordinates, so a sub-0.5
rounding residual certifies the result; anything larger raises
PrecisionLoss rather than silently corrupting samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import mpmath as mp
import numpy as np

from . import embedding as emb
from . import lattice as lat
from .errors import PrecisionLoss
from .rng import Stream, as_stream, for_blocks
from .subgroups import SubgroupDescriptor, new_subgroup

ROUND_TOL = 0.5


@dataclass
class RlweSample:
    a: np.ndarray
    b: np.ndarray


class SampleBatch:
    """Column-aligned arrays of samples; indexable as RlweSample."""

    def __init__(self, a: np.ndarray, b: np.ndarray, errors: Optional[np.ndarray] = None):
        self.a = np.asarray(a, dtype=np.int64)
        self.b = np.asarray(b, dtype=np.int64)
        self.errors = errors

    def __len__(self) -> int:
        return self.a.shape[0]

    def __getitem__(self, i: int) -> RlweSample:
        return RlweSample(self.a[i], self.b[i])


def as_batch(samples) -> SampleBatch:
    if isinstance(samples, SampleBatch):
        return samples
    a = np.array([s.a for s in samples], dtype=np.int64)
    b = np.array([s.b for s in samples], dtype=np.int64)
    return SampleBatch(a, b)


@dataclass
class RlweInstance:
    descriptor: SubgroupDescriptor
    q: int
    sigma0: float
    sigma: float
    secret: np.ndarray
    seed: int
    secret_mode: str
    embedding: emb.EmbeddingData
    lattice: lat.LatticeBundle
    disc_abs: mp.mpf
    prime_cyclotomic: Optional[int] = None  # p when K = Q(zeta_p) and q = p

    @property
    def n(self) -> int:
        return self.descriptor.degree_n

    def params(self) -> dict:
        if self.prime_cyclotomic is not None:
            base = {"p": self.prime_cyclotomic}
        else:
            base = {"m": self.descriptor.m, "H_gens": list(self.descriptor.gens)}
        base.update({
            "q": self.q,
            "sigma0": self.sigma0,
            "secret_mode": self.secret_mode,
            "seed": self.seed,
        })
        return base


def _build_geometry(H: SubgroupDescriptor, precision_bits=None):
    E = emb.embedding_matrix(H, precision_bits)
    L = lat.make_bundle(E.A_w_np, sigma0=1.0, sigma_mode="geometric-mean",
                        precision_bits=53)
    return E, L


def subfield_instance(m: int, gens, q: int, sigma0: float, seed: int,
                      secret_mode: str = "uniform", precision_bits=None,
                      geometry=None) -> RlweInstance:
    """Non-dual instance over K = Q(zeta_m)^H with unramified-style modulus q.

    ``geometry`` may carry a prebuilt (EmbeddingData, LatticeBundle) pair so
    seed sweeps do not rebuild the field.
    """
    H = new_subgroup(m, gens)
    E, L = geometry if geometry is not None else _build_geometry(H, precision_bits)
    disc = emb.discriminant_abs(E).value
    sigma = emb.sigma_from_sigma0(sigma0, disc, H.degree_n)
    return _finish_instance(H, E, L, q, sigma0, sigma, disc, seed, secret_mode, None)


def prime_cyclotomic_instance(p: int, sigma0: float, seed: int,
                              secret_mode: str = "uniform", precision_bits=None,
                              geometry=None) -> RlweInstance:
    """Instance over Q(zeta_p) with the modulus equal to p itself (the
    ramified prime).  The discriminant p^(p-2) is known in closed form."""
    H = new_subgroup(p, [1])
    if geometry is not None:
        E, L = geometry
    else:
        bits = precision_bits if precision_bits is not None else (
            emb.default_precision(p - 1) if p - 1 <= 150 else emb.HARDWARE_BITS)
        E, L = _build_geometry(H, bits)
    disc = mp.mpf(p) ** (p - 2)
    sigma = emb.sigma_from_sigma0(sigma0, disc, p - 1)
    return _finish_instance(H, E, L, p, sigma0, sigma, disc, seed, secret_mode, p)


def _finish_instance(H, E, L, q, sigma0, sigma, disc, seed, secret_mode, prime_p):
    # the appendix-style geometric-mean sigma must agree with the
    # covolume formula; a mismatch means the reduction lost the determinant
    L = lat.LatticeBundle(**{**L.__dict__, "final_sigma": sigma0 * L.geometric_mean_norm()})
    if abs(L.final_sigma - sigma) > 1e-6 * sigma:
        raise PrecisionLoss(
            f"geometric-mean sigma {L.final_sigma:g} != covolume sigma {sigma:g}")
    stream = Stream(int(seed))
    secret = _draw_secret(H.degree_n, q, secret_mode, L, sigma, stream.child(0))
    return RlweInstance(descriptor=H, q=int(q), sigma0=float(sigma0), sigma=float(sigma),
                        secret=secret, seed=int(seed), secret_mode=secret_mode,
                        embedding=E, lattice=L, disc_abs=disc,
                        prime_cyclotomic=prime_p)


def _draw_secret(n, q, mode, L, sigma, stream: Stream) -> np.ndarray:
    if mode == "uniform":
        return stream.generator().integers(0, q, size=n, dtype=np.int64)
    if mode == "gaussian":
        z = lat.sample_lattice_gaussian_batch(L, sigma, 1, stream)[0]
        return z % q
    raise ValueError(f"unknown secret_mode {mode!r}")


def ring_multiply_batch(E: emb.EmbeddingData, rows: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Coordinate rows of x_i * y for each row x_i, via the embedding."""
    rows = np.asarray(rows, dtype=np.int64)
    emb_rows = E.A_can_np @ rows.T  # (n, M)
    emb_y = E.A_can_np @ np.asarray(y, dtype=float)
    prod = emb_rows * emb_y[:, None]
    coords = E.canonical_inverse() @ prod
    real = coords.real.T  # (M, n)
    rounded = np.round(real)
    residual = float(np.max(np.abs(real - rounded))) if real.size else 0.0
    imag_res = float(np.max(np.abs(coords.imag))) if real.size else 0.0
    if max(residual, imag_res) >= ROUND_TOL:
        raise PrecisionLoss(f"ring product rounding residual {max(residual, imag_res):g}")
    return rounded.astype(np.int64)


def ring_multiply(E: emb.EmbeddingData, x, y) -> np.ndarray:
    return ring_multiply_batch(E, np.asarray(x)[None, :], np.asarray(y))[0]


def ring_one_coords(E: emb.EmbeddingData, L: lat.LatticeBundle) -> np.ndarray:
    """Coordinates of the ring element 1 in the normal basis."""
    n = E.n
    if E.r2 == 0:
        target = np.ones(n)
    else:
        target = np.concatenate([np.full(n // 2, math.sqrt(2.0)), np.zeros(n // 2)])
    _, z = lat.babai_nearest_plane(L, target)
    if np.max(np.abs(E.A_w_np @ z - target)) > 1e-6:
        raise PrecisionLoss("ring one is not a lattice point at working precision")
    return z


def sample_error(inst: RlweInstance, stream) -> np.ndarray:
    """One error draw: integer coordinates, not reduced mod q."""
    return lat.sample_lattice_gaussian_batch(
        inst.lattice, inst.lattice.final_sigma, 1, as_stream(stream))[0]


def sample_errors(inst: RlweInstance, count: int, stream) -> np.ndarray:
    return lat.sample_lattice_gaussian_batch(
        inst.lattice, inst.lattice.final_sigma, count, as_stream(stream))


def generate_samples(inst: RlweInstance, count: int, stream,
                     keep_errors: bool = False,
                     errors: Optional[np.ndarray] = None,
                     threads: int = 1) -> SampleBatch:
    """count samples (a, b = a*s + e mod q), a uniform on coordinates.

    Blocked so regeneration is byte-identical for any thread split; block
    i draws first the uniform a's and then the error vectors from
    child(i) substreams of the given stream.
    """
    stream = as_stream(stream)
    n, q = inst.n, inst.q
    a_all = np.zeros((count, n), dtype=np.int64)
    e_all = np.zeros((count, n), dtype=np.int64)

    def block(lo, hi, idx):
        sub = stream.child(idx)
        a_all[lo:hi] = sub.child(0).generator().integers(0, q, size=(hi - lo, n),
                                                         dtype=np.int64)
        if errors is None:
            e_all[lo:hi] = lat.sample_lattice_gaussian_batch(
                inst.lattice, inst.lattice.final_sigma, hi - lo, sub.child(1))

    for_blocks(count, block, threads)
    if errors is not None:
        e_all = np.asarray(errors, dtype=np.int64)
    a_times_s = ring_multiply_batch(inst.embedding, a_all, inst.secret)
    b_all = (a_times_s + e_all) % q
    return SampleBatch(a_all, b_all, errors=e_all if keep_errors else None)


def generate_uniform_samples(n: int, q: int, count: int, stream,
                             threads: int = 1) -> SampleBatch:
    """Null-model samples: both coordinates i.i.d. uniform."""
    stream = as_stream(stream)
    a_all = np.zeros((count, n), dtype=np.int64)
    b_all = np.zeros((count, n), dtype=np.int64)

    def block(lo, hi, idx):
        rng = stream.child(idx).generator()
        a_all[lo:hi] = rng.integers(0, q, size=(hi - lo, n), dtype=np.int64)
        b_all[lo:hi] = rng.integers(0, q, size=(hi - lo, n), dtype=np.int64)

    for_blocks(count, block, threads)
    return SampleBatch(a_all, b_all)


def fold_dual_noise(E: np.ndarray) -> np.ndarray:
    """First coordinate in the (zeta_p - 1)-power basis of sum e_i zeta_p^i:
    e_0 + ... + e_{p-2} - (p-1) e_{p-1}, per row."""
    E = np.atleast_2d(np.asarray(E, dtype=float))
    p = E.shape[1]
    return E[:, : p - 1].sum(axis=1) - (p - 1) * E[:, p - 1]


def generate_dual_observations(p: int, r: float, count: int, stream,
                               threads: int = 1) -> np.ndarray:
    """Observable values on the circle [0, p) for the dual attack.

    Each observation folds p i.i.d. Gaussians of width sqrt(p)*r (width w
    corresponds to standard deviation w / sqrt(2 pi)).  The secret term
    contributes a multiple of p and is dropped; tests at small p confirm
    that exactly.
    """
    if p < 3 or r <= 0:
        raise ValueError("need an odd prime p >= 3 and r > 0")
    stream = as_stream(stream)
    sd = math.sqrt(p) * r / math.sqrt(2.0 * math.pi)
    out = np.zeros(count)

    def block(lo, hi, idx):
        rng = stream.child(idx).generator()
        E = rng.normal(0.0, sd, size=(hi - lo, p))
        out[lo:hi] = fold_dual_noise(E) % p

    for_blocks(count, block, threads)
    return out


@dataclass
class SwitchResult:
    switched: SampleBatch
    a_err: np.ndarray  # alpha*a - a' as real coordinate vectors
    b_err: np.ndarray
    a_err_scaled: np.ndarray  # q*(alpha*a - a') = p*a - q*a', exact integers
    b_err_scaled: np.ndarray


def modulus_switch_batch(L: lat.LatticeBundle, batch: SampleBatch, q: int, p: int,
                         tau: float, stream, threads: int = 1) -> SwitchResult:
    """Rescale samples by p/q and re-round to the lattice with a shifted
    discrete Gaussian of absolute width tau; coordinates returned mod p."""
    if p > q:
        raise ValueError("target modulus must satisfy p <= q")
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    stream = as_stream(stream)
    alpha = p / q

    def switch(X, sub):
        M = X.shape[0]
        centers_coord = alpha * X.astype(float)
        centers = centers_coord @ L.A_f.T  # embed each row
        Z = lat.sample_lattice_gaussian_batch(L, tau, M, sub, centers=centers,
                                              threads=threads)
        err = centers_coord - Z
        err_scaled = p * X - q * Z
        return Z % p, err, err_scaled

    a_new, a_err, a_err_s = switch(batch.a, stream.child(0))
    b_new, b_err, b_err_s = switch(batch.b, stream.child(1))
    return SwitchResult(SampleBatch(a_new, b_new), a_err, b_err, a_err_s, b_err_s)


def modulus_switch(L: lat.LatticeBundle, sample: RlweSample, q: int, p: int,
                   tau: float, stream) -> Tuple[RlweSample, np.ndarray, np.ndarray]:
    res = modulus_switch_batch(L, SampleBatch(sample.a[None, :], sample.b[None, :]),
                               q, p, tau, stream)
    return res.switched[0], res.a_err[0], res.b_err[0]
