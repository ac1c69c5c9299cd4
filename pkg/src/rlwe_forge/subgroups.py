"""Subgroups H of (Z/mZ)* and the fixed subfields K = Q(zeta_m)^H.

Everything downstream is indexed by the coset representatives of G/H,
because the normal integral basis w_c = sum_{h in H} zeta_m^{c h} is
permuted by the Galois group exactly as the cosets are permuted.

Coset ordering rule (serialization-stable, documented in the README):
greedy smallest-representative order; when the field is totally complex
the list is reordered to [c_1 .. c_{n/2}, -c_1 .. -c_{n/2}] mod m so that
conjugate pairs sit in mirrored positions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from sympy import divisors, factorint, isprime, primerange

from .errors import BadModulus, NonUnit, NonUnitGenerator, RamifiedPrime, ZeroElement


@dataclass(frozen=True)
class SubgroupDescriptor:
    m: int
    gens: tuple
    elements: frozenset
    order: int
    degree_n: int
    cosets: tuple
    totally_real: bool
    _coset_map: dict = field(repr=False, hash=False, compare=False, default=None)

    def coset_index(self, c: int) -> int:
        return self.cosets.index(c)

    def to_json_fragment(self) -> dict:
        return {"m": self.m, "H_gens": list(self.gens)}


def _multiplicative_closure(m: int, gens) -> frozenset:
    elems = {1}
    frontier = [1]
    gens = [g % m for g in gens]
    while frontier:
        a = frontier.pop()
        for g in gens:
            b = (a * g) % m
            if b not in elems:
                elems.add(b)
                frontier.append(b)
    return frozenset(elems)


def new_subgroup(m: int, gens) -> SubgroupDescriptor:
    """Build the descriptor for H = <gens> inside (Z/mZ)*.

    m must be odd, squarefree and at least 3; every generator must be a
    unit mod m.  Cosets are computed greedily in increasing representative
    order, then conjugate-paired when -1 is not in H.
    """
    m = int(m)
    if m < 3 or m % 2 == 0:
        raise BadModulus(f"m must be odd and >= 3, got {m}")
    if any(e > 1 for e in factorint(m).values()):
        raise BadModulus(f"m must be squarefree, got {m}")
    gens = tuple(int(g) % m for g in gens)
    for g in gens:
        if math.gcd(g, m) != 1:
            raise NonUnitGenerator(f"generator {g} is not a unit mod {m}")

    elements = _multiplicative_closure(m, gens)
    order = len(elements)
    phi = _euler_phi(m)
    degree_n = phi // order

    coset_map = {}
    reps = []
    for a in range(1, m):
        if math.gcd(a, m) != 1 or a in coset_map:
            continue
        reps.append(a)
        for h in elements:
            coset_map[(a * h) % m] = a
        if len(reps) * order == phi:
            break

    totally_real = (m - 1) in elements
    if not totally_real:
        merged = []
        for c in reps:
            neg = (m - c) % m
            if coset_map[neg] not in merged:
                merged.append(c)
        reps = merged + [(m - c) % m for c in merged]
        # representatives in the mirrored half are literally -c, which may
        # not be the smallest member of their class; remap accordingly
        new_map = {}
        for c in reps:
            for h in elements:
                new_map[(c * h) % m] = c
        coset_map = new_map

    return SubgroupDescriptor(
        m=m,
        gens=gens,
        elements=elements,
        order=order,
        degree_n=degree_n,
        cosets=tuple(reps),
        totally_real=totally_real,
        _coset_map=coset_map,
    )


def _euler_phi(m: int) -> int:
    phi = 1
    for p, e in factorint(m).items():
        phi *= (p - 1) * p ** (e - 1)
    return phi


def coset_of(H: SubgroupDescriptor, a: int) -> int:
    """Representative c in H.cosets with a * c^-1 in H."""
    a = int(a) % H.m
    if math.gcd(a, H.m) != 1:
        raise NonUnit(f"{a} is not a unit mod {H.m}")
    return H._coset_map[a]


def residue_degree(H: SubgroupDescriptor, q: int) -> int:
    """Least f >= 1 with q^f mod m in H (the order of q in G/H)."""
    q = int(q)
    if not isprime(q):
        raise ValueError(f"q must be prime, got {q}")
    if H.m % q == 0:
        raise RamifiedPrime(f"{q} divides m = {H.m}")
    for d in divisors(H.degree_n):
        if pow(q, d, H.m) in H.elements:
            return d
    raise AssertionError("order of q in G/H must divide [G:H]")


def galois_permutation(H: SubgroupDescriptor, c: int) -> dict:
    """The action a -> coset_of(a*c) as a dict on coset representatives."""
    if c not in H.cosets:
        raise ValueError(f"{c} is not a coset representative")
    return {a: coset_of(H, a * c) for a in H.cosets}


def permutation_indices(H: SubgroupDescriptor, c: int) -> list:
    """galois_permutation as index positions: perm[i] = index of sigma_c(cosets[i])."""
    g = galois_permutation(H, c)
    pos = {a: i for i, a in enumerate(H.cosets)}
    return [pos[g[a]] for a in H.cosets]


def extension_degree(H: SubgroupDescriptor, coeffs) -> int:
    """Degree [Q(z):Q] of z = sum_c coeffs[c] * w_c.

    Computed as degree_n divided by the number of cosets whose Galois
    action fixes the coefficient vector.
    """
    coeffs = list(coeffs)
    if len(coeffs) != len(H.cosets):
        raise ValueError("coefficient vector must be indexed by the cosets")
    if all(v == 0 for v in coeffs):
        raise ZeroElement("degree of the zero element is undefined")
    by_coset = dict(zip(H.cosets, coeffs))
    fixed = 0
    for ell in H.cosets:
        if all(by_coset[coset_of(H, ell * a)] == v for a, v in by_coset.items()):
            fixed += 1
    return H.degree_n // fixed


def degree_f_primes(H: SubgroupDescriptor, lo: int, hi: int, f: int) -> list:
    """Primes q with lo < q < hi, q unramified, and residue degree exactly f."""
    out = []
    for q in primerange(lo + 1, hi):
        if H.m % q == 0:
            continue
        if residue_degree(H, q) == f:
            out.append(int(q))
    return out
