"""Adjusted canonical embedding of the normal integral basis.

The basis element for coset c is w_c = sum_{h in H} zeta_m^{c h}.  The
complex matrix A_can has entry (k, l) equal to the embedding of w_l under
the automorphism indexed by coset k, which only depends on the coset of
k*l.  The real matrix A_w applies the conjugate-pair mixing so that
columns are the embedded basis vectors in R^n; complex embedding pairs
carry the sqrt(2) scaling, which makes det(A_w)^2 equal |disc K|.

Arithmetic runs in mpmath at ``precision_bits`` (software floats) unless
precision_bits == 53, in which case hardware complex128/float64 is used.
Every EmbeddingData also carries float64 copies for the sampling paths.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import mpmath as mp
import numpy as np

from .errors import PrecisionLoss
from .subgroups import SubgroupDescriptor

HARDWARE_BITS = 53


def default_precision(n: int) -> int:
    env = os.environ.get("RLWE_FORGE_PRECISION")
    if env:
        return int(env)
    if n <= 60:
        return 100
    if n <= 150:
        return 200
    return HARDWARE_BITS


@dataclass
class EmbeddingData:
    H: SubgroupDescriptor
    precision_bits: int
    r1: int
    r2: int
    A_can: object  # n x n complex, mp.matrix or complex128 ndarray
    A_w: object  # n x n real, mp.matrix or float64 ndarray
    T: np.ndarray  # complex128, unitary conjugate-pair mixer
    A_can_np: np.ndarray
    A_w_np: np.ndarray
    _A_can_inv_np: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.H.degree_n

    def canonical_inverse(self) -> np.ndarray:
        if self._A_can_inv_np is None:
            self._A_can_inv_np = np.linalg.inv(self.A_can_np)
        return self._A_can_inv_np


class Discriminant(NamedTuple):
    value: mp.mpf
    nearest: Optional[int]


def coset_index_table(H: SubgroupDescriptor) -> np.ndarray:
    """Array t with t[u] = index of the coset of unit u (-1 for non-units)."""
    t = np.full(H.m, -1, dtype=np.int64)
    pos = {c: i for i, c in enumerate(H.cosets)}
    for u, rep in H._coset_map.items():
        t[u] = pos[rep]
    return t


def _t_matrix(n: int, r2: int) -> np.ndarray:
    if r2 == 0:
        return np.eye(n, dtype=complex)
    s = 1.0 / math.sqrt(2.0)
    half = n // 2
    T = np.zeros((n, n), dtype=complex)
    T[:half, :half] = s * np.eye(half)
    T[:half, half:] = s * np.eye(half)
    T[half:, :half] = -1j * s * np.eye(half)
    T[half:, half:] = 1j * s * np.eye(half)
    return T


def embedding_matrix(H: SubgroupDescriptor, precision_bits: Optional[int] = None) -> EmbeddingData:
    """Build A_can and A_w for the subgroup's fixed field."""
    n = H.degree_n
    if precision_bits is None:
        precision_bits = default_precision(n)
    if precision_bits < HARDWARE_BITS:
        raise ValueError("precision_bits must be at least 53")

    if H.totally_real:
        r1, r2 = n, 0
    else:
        r1, r2 = 0, n // 2
    T = _t_matrix(n, r2)

    idx = coset_index_table(H)
    cosets = np.asarray(H.cosets, dtype=np.int64)
    entry_idx = idx[np.outer(cosets, cosets) % H.m]

    if precision_bits == HARDWARE_BITS:
        A_can, A_w = _build_hardware(H, entry_idx, r2)
        data = EmbeddingData(H, precision_bits, r1, r2, A_can, A_w, T,
                             A_can_np=A_can, A_w_np=A_w)
    else:
        A_can, A_w, A_can_np, A_w_np = _build_mpmath(H, entry_idx, r2, precision_bits)
        data = EmbeddingData(H, precision_bits, r1, r2, A_can, A_w, T,
                             A_can_np=A_can_np, A_w_np=A_w_np)
    _check_geometry(data)
    return data


def _build_hardware(H, entry_idx, r2):
    m, n = H.m, H.degree_n
    roots = np.exp(2j * np.pi * np.arange(m) / m)
    w_vals = np.zeros(n, dtype=complex)
    helems = np.asarray(sorted(H.elements), dtype=np.int64)
    for i, c in enumerate(H.cosets):
        w_vals[i] = roots[(c * helems) % m].sum()
    A_can = w_vals[entry_idx]
    if r2 == 0:
        imag_res = float(np.max(np.abs(A_can.imag)))
        if imag_res > 2.0 ** (-HARDWARE_BITS / 2) * max(1.0, H.order):
            raise PrecisionLoss(f"totally real field has imaginary residual {imag_res:g}")
        A_w = A_can.real.copy()
    else:
        half = n // 2
        pair_res = float(np.max(np.abs(A_can[half:] - np.conj(A_can[:half]))))
        if pair_res > 2.0 ** (-HARDWARE_BITS / 2) * max(1.0, H.order):
            raise PrecisionLoss(f"conjugate-pair residual {pair_res:g}")
        root2 = math.sqrt(2.0)
        A_w = np.vstack([root2 * A_can[:half].real, root2 * A_can[:half].imag])
    return A_can, A_w


def _build_mpmath(H, entry_idx, r2, bits):
    m, n = H.m, H.degree_n
    with mp.workprec(bits):
        w_vals = []
        helems = sorted(H.elements)
        for c in H.cosets:
            acc = mp.mpc(0)
            for h in helems:
                acc += mp.expjpi(mp.mpf(2 * ((c * h) % m)) / m)
            w_vals.append(acc)
        A_can = mp.matrix(n, n)
        for k in range(n):
            for l in range(n):
                A_can[k, l] = w_vals[entry_idx[k, l]]
        tol = mp.mpf(2) ** (-bits // 2) * max(1, H.order)
        A_w = mp.matrix(n, n)
        if r2 == 0:
            for k in range(n):
                for l in range(n):
                    z = A_can[k, l]
                    if abs(z.imag) > tol:
                        raise PrecisionLoss("totally real field has imaginary residual")
                    A_w[k, l] = z.real
        else:
            half = n // 2
            root2 = mp.sqrt(2)
            for k in range(half):
                for l in range(n):
                    z = A_can[k, l]
                    zbar = A_can[k + half, l]
                    if abs(zbar - mp.conj(z)) > tol:
                        raise PrecisionLoss("conjugate-pair residual too large")
                    A_w[k, l] = root2 * z.real
                    A_w[k + half, l] = root2 * z.imag
        A_can_np = np.array([[complex(A_can[i, j]) for j in range(n)] for i in range(n)])
        A_w_np = np.array([[float(A_w[i, j]) for j in range(n)] for i in range(n)])
    return A_can, A_w, A_can_np, A_w_np


def _check_geometry(E: EmbeddingData) -> None:
    """Unitarity of the mixer and equality of embedded column norms."""
    s = 1.0 / math.sqrt(2.0)
    if abs(2.0 * s * s - 1.0) > 2.0 ** (-HARDWARE_BITS + 4):
        raise PrecisionLoss("conjugate-pair mixer is not unitary")
    norms = np.linalg.norm(E.A_w_np, axis=0)
    spread = float((norms.max() - norms.min()) / norms.max())
    if spread > 1e-8 * E.n:
        raise PrecisionLoss(f"embedded basis column norms differ: spread {spread:g}")


def gram_matrix(E: EmbeddingData):
    """A_w^T A_w in the working precision (entries are Tr(w_i conj(w_j)))."""
    if E.precision_bits == HARDWARE_BITS:
        return E.A_w_np.T @ E.A_w_np
    with mp.workprec(E.precision_bits):
        return E.A_w.T * E.A_w


def discriminant_abs(E: EmbeddingData) -> Discriminant:
    """det(A_w)^2 as an arbitrary-exponent float, with the nearest integer
    attached when the value is within 1e-3 relative of one."""
    if E.precision_bits == HARDWARE_BITS:
        sign, logabs = np.linalg.slogdet(E.A_w_np)
        if sign == 0:
            raise PrecisionLoss("embedding matrix is numerically singular")
        value = mp.e ** (2.0 * mp.mpf(logabs))
    else:
        with mp.workprec(E.precision_bits):
            det = mp.det(E.A_w)
            if det == 0:
                raise PrecisionLoss("embedding matrix is numerically singular")
            value = det * det
    return _attach_nearest(value, E.precision_bits)


def _attach_nearest(value: mp.mpf, bits: int) -> Discriminant:
    value = abs(value)
    uncertainty = value * mp.mpf(2) ** (-bits + 8)
    if uncertainty >= mp.mpf("0.5"):
        return Discriminant(value, None)  # integer spacing unresolvable
    nearest = int(mp.nint(value))
    gap = abs(value - nearest)
    claim = mp.mpf("1e-3") * value
    if abs(gap - claim) <= uncertainty:
        raise PrecisionLoss("integer rounding of the discriminant is ambiguous")
    return Discriminant(value, nearest if gap <= claim else None)


def sigma_from_sigma0(sigma0: float, disc_abs, n: int) -> float:
    """Absolute Gaussian parameter from the covolume-relative one."""
    if sigma0 <= 0 or disc_abs <= 0:
        raise ValueError("sigma0 and disc_abs must be positive")
    return float(sigma0 * mp.mpf(disc_abs) ** (mp.mpf(1) / (2 * n)))
