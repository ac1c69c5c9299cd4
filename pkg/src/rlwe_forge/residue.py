"""Finite-field residue machinery.

A prime q unramified in K = Q(zeta_m)^H reduces ring elements modulo a
prime ideal above q into the field with q^f elements, where f is the
order of q in G/H.  We realize that field inside F = F_{q^F}, F being
the order of q mod m: F contains a primitive m-th root of unity zeta,
and fixing zeta pins one prime ideal.  The basis element w_c reduces to
sum_{h in H} zeta^{c h}; the other primes above q are reached by Galois
twists of the index set, never by changing zeta.

Determinism rules (also in the README): the modulus polynomial of F is
the monic irreducible with the least integer code (code = sum c_i q^i
over coefficients of x^i); the distinguished generator g is the least
nonzero element code generating F*; zeta = g^((q^F - 1)/m); subfield
elements are enumerated in ascending element code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
from sympy import factorint, isprime, n_order

from .errors import NotInSubfield, RamifiedPrime, RlweForgeError, UnsupportedContext
from .subgroups import SubgroupDescriptor, coset_of, residue_degree

MAX_EXTENSION_DEGREE = 24


def _poly_trim(p):
    while p and p[-1] == 0:
        p = p[:-1]
    return p


def _poly_mulmod(a, b, mod, q):
    """Schoolbook product of coefficient tuples, reduced mod (mod, q)."""
    deg = len(mod)
    res = [0] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        if ai:
            for j, bj in enumerate(b):
                res[i + j] = (res[i + j] + ai * bj) % q
    for i in range(len(res) - 1, deg - 1, -1):
        c = res[i]
        if c:
            res[i] = 0
            for j, mj in enumerate(mod):
                res[i - deg + j] = (res[i - deg + j] - c * mj) % q
    return tuple(res[:deg]) + (0,) * (deg - len(res))


def _poly_powmod(a, e, mod, q):
    deg = len(mod)
    result = (1,) + (0,) * (deg - 1)
    base = a
    while e:
        if e & 1:
            result = _poly_mulmod(result, base, mod, q)
        base = _poly_mulmod(base, base, mod, q)
        e >>= 1
    return result


def _poly_gcd(a, b, q):
    a, b = list(_poly_trim(tuple(a))), list(_poly_trim(tuple(b)))
    while b:
        inv = pow(b[-1], q - 2, q)
        b_monic = [(c * inv) % q for c in b]
        while len(a) >= len(b_monic) and a:
            shift = len(a) - len(b_monic)
            lead = a[-1]
            for i, c in enumerate(b_monic):
                a[shift + i] = (a[shift + i] - lead * c) % q
            a = list(_poly_trim(tuple(a)))
        a, b = b, a
    return tuple(a)


def _is_irreducible(mod, q):
    """Rabin test for the monic polynomial x^deg + sum mod[i] x^i."""
    deg = len(mod)
    x = (0, 1) + (0,) * (deg - 2) if deg >= 2 else (0,)
    if deg == 1:
        return True
    xq = _poly_powmod(x, q**deg, mod, q)
    if _poly_trim(tuple((a - b) % q for a, b in zip(xq, x))):
        return False
    for r in factorint(deg):
        xr = _poly_powmod(x, q ** (deg // r), mod, q)
        diff = tuple((a - b) % q for a, b in zip(xr, x))
        full = list(mod) + [1]
        if len(_poly_gcd(full, diff, q)) > 1:
            return False
    return True


@lru_cache(maxsize=None)
def _least_irreducible(q: int, deg: int) -> tuple:
    if deg == 1:
        return (0,)  # the polynomial x
    for code in range(q**deg):
        mod = _decode_tuple(code, q, deg)
        if mod[0] == 0:
            continue
        if _is_irreducible(mod, q):
            return mod
    raise AssertionError("no irreducible polynomial found")


def _decode_tuple(code: int, q: int, deg: int) -> tuple:
    out = []
    for _ in range(deg):
        code, r = divmod(code, q)
        out.append(r)
    return tuple(out)


class ExtField:
    """F_{q^deg} as F_q[x] modulo the canonical irreducible polynomial.

    Elements are coefficient tuples of length deg (constant term first).
    The integer code of an element is sum c_i q^i.
    """

    def __init__(self, q: int, deg: int):
        self.q = int(q)
        self.deg = int(deg)
        self.modulus = _least_irreducible(self.q, self.deg)
        self.card = self.q**self.deg
        self.zero = (0,) * self.deg
        self.one = (1,) + (0,) * (self.deg - 1)
        self._unit_factors = factorint(self.card - 1)
        self._gen: Optional[tuple] = None

    def encode(self, e: tuple) -> int:
        code = 0
        for c in reversed(e):
            code = code * self.q + c
        return code

    def decode(self, code: int) -> tuple:
        return _decode_tuple(code, self.q, self.deg)

    def from_int(self, a: int) -> tuple:
        return (a % self.q,) + (0,) * (self.deg - 1)

    def add(self, a, b):
        return tuple((x + y) % self.q for x, y in zip(a, b))

    def sub(self, a, b):
        return tuple((x - y) % self.q for x, y in zip(a, b))

    def neg(self, a):
        return tuple((-x) % self.q for x in a)

    def mul(self, a, b):
        return _poly_mulmod(a, b, self.modulus, self.q)

    def pow(self, a, e: int):
        e = int(e)
        if e < 0:
            return self.pow(self.inv(a), -e)
        return _poly_powmod(a, e, self.modulus, self.q)

    def inv(self, a):
        if a == self.zero:
            raise ZeroDivisionError("zero has no inverse")
        return self.pow(a, self.card - 2)

    def frobenius(self, a, k: int = 1):
        return self.pow(a, self.q**k)

    def order(self, a) -> int:
        if a == self.zero:
            raise ZeroDivisionError("zero has no multiplicative order")
        o = self.card - 1
        for p in self._unit_factors:
            while o % p == 0 and self.pow(a, o // p) == self.one:
                o //= p
        return o

    def generator(self) -> tuple:
        if self._gen is None:
            n = self.card - 1
            for code in range(2, self.card):
                cand = self.decode(code)
                if all(self.pow(cand, n // p) != self.one for p in self._unit_factors):
                    self._gen = cand
                    break
            else:
                raise AssertionError("no multiplicative generator found")
        return self._gen

    def mul_matrix(self, e: tuple) -> np.ndarray:
        """Matrix of y -> e*y on coefficient columns; rows @ M.T multiplies
        a batch of elements (as rows) by e."""
        cols = []
        cur = e
        x = (0, 1) + (0,) * (self.deg - 2) if self.deg >= 2 else self.one
        for _ in range(self.deg):
            cols.append(cur)
            cur = self.mul(cur, x)
        return np.array(cols, dtype=np.int64).T  # column i = e * x^i

    def frobenius_matrix(self, k: int = 1) -> np.ndarray:
        cols = []
        for i in range(self.deg):
            basis = tuple(1 if j == i else 0 for j in range(self.deg))
            cols.append(self.frobenius(basis, k))
        return np.array(cols, dtype=np.int64).T


# guess loops must enumerate the q^f-element subfield; above this, the
# instance is out of desk scale anyway
MAX_ENUMERABLE_SUBFIELD = 1 << 22


@dataclass
class ResidueContext:
    H: SubgroupDescriptor
    q: int
    f: int
    order_F: int
    field: ExtField
    zeta: tuple
    reduction_vec: tuple  # one field element per coset, aligned with H.cosets
    rv_matrix: np.ndarray = dc_field(repr=False, default=None)  # (n, F) int64
    _sub: dict = dc_field(repr=False, default=None)  # lazy enumeration cache

    @property
    def N(self) -> int:
        return self.q**self.f

    @property
    def subfield_elements(self) -> tuple:
        return self._subfield()["elements"]

    def _subfield(self) -> dict:
        if not self._sub:
            if self.N > MAX_ENUMERABLE_SUBFIELD:
                raise UnsupportedContext(
                    f"subfield with {self.N} elements is too large to enumerate")
            self._sub.update(_subfield_tables(self.field, self.f))
        return self._sub

    def subfield_index(self, e: tuple) -> int:
        """Position of e in the canonical subfield enumeration."""
        row = np.asarray(e, dtype=np.int64)[None, :]
        return int(self.bin_indices(row)[0])

    def bin_indices(self, rows: np.ndarray) -> np.ndarray:
        """Canonical subfield indices for a batch of coefficient rows."""
        sub = self._subfield()
        coords = (rows @ sub["proj"].T) % self.q
        codes = coords @ (self.q ** np.arange(self.f))
        idx = sub["perm"][codes]
        if np.any(idx < 0):
            raise NotInSubfield("value does not lie in the q^f-element subfield")
        return idx

    def full_degree_mask(self, rows: np.ndarray) -> np.ndarray:
        """True where the element's minimal polynomial has degree exactly f."""
        return self._subfield()["full"][self.bin_indices(rows)]


def build_residue_context(H: SubgroupDescriptor, q: int) -> ResidueContext:
    q = int(q)
    if not isprime(q):
        raise ValueError(f"q must be prime, got {q}")
    if H.m % q == 0:
        raise RamifiedPrime(f"{q} divides m = {H.m}")
    order_F = int(n_order(q, H.m))
    if order_F > MAX_EXTENSION_DEGREE:
        raise UnsupportedContext(
            f"order of {q} mod {H.m} is {order_F} > {MAX_EXTENSION_DEGREE}")
    f = residue_degree(H, q)
    fld = ExtField(q, order_F)
    g = fld.generator()
    zeta = fld.pow(g, (fld.card - 1) // H.m)
    if fld.pow(zeta, H.m) != fld.one:
        raise RlweForgeError("root of unity construction failed")
    for p in factorint(H.m):
        if fld.pow(zeta, H.m // p) == fld.one:
            raise RlweForgeError("root of unity is not primitive")

    zpow = [fld.one]
    for _ in range(1, H.m):
        zpow.append(fld.mul(zpow[-1], zeta))

    helems = sorted(H.elements)
    rvec = []
    for c in H.cosets:
        acc = fld.zero
        for h in helems:
            acc = fld.add(acc, zpow[(c * h) % H.m])
        if fld.frobenius(acc, f) != acc:
            raise RlweForgeError("reduction vector entry not fixed by Frobenius^f")
        rvec.append(acc)

    return ResidueContext(
        H=H, q=q, f=f, order_F=order_F, field=fld, zeta=zeta,
        reduction_vec=tuple(rvec),
        rv_matrix=np.array(rvec, dtype=np.int64),
        _sub={},
    )


def _enumerate_subfield(fld: ExtField, f: int) -> np.ndarray:
    """Frobenius^f fixed points as (q^f, F) rows, ascending element code."""
    target = fld.q**f
    if fld.card <= MAX_ENUMERABLE_SUBFIELD and fld.card * fld.deg <= 3 * 10**7:
        codes = np.arange(fld.card, dtype=np.int64)
        rows = _codes_to_rows(codes, fld.q, fld.deg)
        frob = fld.frobenius_matrix(f)
        rows = rows[np.all((rows @ frob.T) % fld.q == rows, axis=1)]
    else:
        g = fld.generator()
        y = fld.pow(g, (fld.card - 1) // (target - 1))
        elements = [fld.zero]
        cur = fld.one
        for _ in range(target - 1):
            elements.append(cur)
            cur = fld.mul(cur, y)
        rows = np.array(sorted(elements, key=fld.encode), dtype=np.int64)
    if rows.shape[0] != target:
        raise RlweForgeError("subfield enumeration produced the wrong count")
    return rows


def _codes_to_rows(codes: np.ndarray, q: int, deg: int) -> np.ndarray:
    rows = np.empty((codes.size, deg), dtype=np.int64)
    rem = codes.copy()
    for i in range(deg):
        rows[:, i] = rem % q
        rem //= q
    return rows


def _subfield_tables(fld: ExtField, f: int) -> dict:
    """Canonical enumeration plus the coordinate projection, index lookup,
    and full-degree flags, all vectorized over the subfield."""
    q = fld.q
    rows = _enumerate_subfield(fld, f)
    g = fld.generator()
    y = fld.pow(g, (fld.card - 1) // (q**f - 1))
    basis = []
    cur = fld.one
    for _ in range(f):
        basis.append(cur)
        cur = fld.mul(cur, y)
    S = np.array(basis, dtype=np.int64).T  # (F, f)
    proj = _left_inverse_mod(S, q)  # (f, F)

    coords = (rows @ proj.T) % q
    codes = coords @ (q ** np.arange(f))
    perm = np.full(q**f, -1, dtype=np.int64)
    perm[codes] = np.arange(rows.shape[0])
    if np.any(perm < 0):
        raise RlweForgeError("subfield coordinate collision")

    full = np.ones(rows.shape[0], dtype=bool)
    for r in factorint(f):
        frob_d = fld.frobenius_matrix(f // r)
        full &= ~np.all((rows @ frob_d.T) % q == rows, axis=1)

    elements = tuple(tuple(int(v) for v in row) for row in rows)
    return {"elements": elements, "proj": proj, "perm": perm, "full": full}


def _left_inverse_mod(S: np.ndarray, q: int) -> np.ndarray:
    """P with P S = I over F_q, for S with full column rank.

    Row reduction of S^T locates f linearly independent rows of S; P
    inverts that square block and ignores the remaining coordinates.
    """
    F, f = S.shape
    work = S.T % q  # (f, F)
    row = 0
    pivots = []
    for col in range(F):
        piv = next((r for r in range(row, f) if work[r, col] % q), None)
        if piv is None:
            continue
        work[[row, piv]] = work[[piv, row]]
        inv = pow(int(work[row, col]), q - 2, q)
        work[row] = (work[row] * inv) % q
        for r in range(f):
            if r != row and work[r, col] % q:
                work[r] = (work[r] - work[r, col] * work[row]) % q
        pivots.append(col)
        row += 1
        if row == f:
            break
    if row < f:
        raise RlweForgeError("subfield basis is rank deficient")
    block_inv = _matrix_inverse_mod(S[pivots, :] % q, q)
    P = np.zeros((f, F), dtype=np.int64)
    P[:, pivots] = block_inv
    return P % q


def _matrix_inverse_mod(A: np.ndarray, q: int) -> np.ndarray:
    n = A.shape[0]
    aug = np.concatenate([A % q, np.eye(n, dtype=np.int64)], axis=1)
    for col in range(n):
        piv = None
        for r in range(col, n):
            if aug[r, col] % q:
                piv = r
                break
        if piv is None:
            raise RlweForgeError("matrix not invertible mod q")
        aug[[col, piv]] = aug[[piv, col]]
        inv = pow(int(aug[col, col]), q - 2, q)
        aug[col] = (aug[col] * inv) % q
        for r in range(n):
            if r != col and aug[r, col] % q:
                aug[r] = (aug[r] - aug[r, col] * aug[col]) % q
    return aug[:, n:] % q


def twisted_reduction_vector(ctx: ResidueContext, H: SubgroupDescriptor, c: int) -> tuple:
    """Reduction vector for the prime ideal reached by the twist c: the
    entry at coset a is the untwisted entry at coset_of(a*c)."""
    if c not in H.cosets:
        raise ValueError(f"{c} is not a coset representative")
    pos = {rep: i for i, rep in enumerate(H.cosets)}
    return tuple(ctx.reduction_vec[pos[coset_of(H, a * c)]] for a in H.cosets)


def twisted_rv_matrix(ctx: ResidueContext, c: int) -> np.ndarray:
    return np.array(twisted_reduction_vector(ctx, ctx.H, c), dtype=np.int64)


def reduce_ring_element(ctx: ResidueContext, coeffs, twist: int = 1) -> tuple:
    """Image of sum coeffs[c] * w_c under reduction at the twisted prime."""
    rows = np.asarray(coeffs, dtype=np.int64)[None, :]
    return tuple(int(v) for v in reduce_batch(ctx, rows, twist)[0])


def reduce_batch(ctx: ResidueContext, coeff_rows: np.ndarray, twist: int = 1) -> np.ndarray:
    """(M, n) integer coefficient rows -> (M, F) field coefficient rows."""
    rv = ctx.rv_matrix if twist == 1 else twisted_rv_matrix(ctx, twist)
    rows = np.asarray(coeff_rows, dtype=np.int64) % ctx.q
    return (rows @ rv) % ctx.q


def is_full_degree(ctx: ResidueContext, x: tuple, f: int) -> bool:
    """True iff the minimal polynomial of x over F_q has degree exactly f."""
    fld = ctx.field
    if fld.frobenius(x, f) != x:
        raise NotInSubfield(f"element is not fixed by Frobenius^{f}")
    if x == fld.zero:
        return f == 1
    for r in factorint(f):
        if fld.frobenius(x, f // r) == x:
            return False
    return True


def decomposition_twists(ctx: ResidueContext) -> list:
    """One coset representative per prime ideal above q: orbit
    representatives of the cosets under multiplication by q."""
    H = ctx.H
    seen = set()
    reps = []
    for c in H.cosets:
        if c in seen:
            continue
        reps.append(c)
        cur = c
        for _ in range(ctx.f):
            seen.add(cur)
            cur = coset_of(H, cur * ctx.q)
    if len(reps) != H.degree_n // ctx.f:
        raise RlweForgeError("twist deduplication produced the wrong prime count")
    return reps
