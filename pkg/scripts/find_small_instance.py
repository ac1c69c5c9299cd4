#!/usr/bin/env python3
"""Dev search for a small strongly-vulnerable instance (n <= 12, q <= 13,
f = 2) and a weak/strong modulus pair for the switching experiment."""

import sys
from itertools import combinations

import numpy as np
from sympy import factorint, primerange

sys.path.insert(0, "src")

import rlwe_forge as rf
from rlwe_forge import attacks as atk, residue as res, rlwe as rl
from rlwe_forge.rng import Stream


def all_subgroups(m):
    units = [a for a in range(1, m) if np.gcd(a, m) == 1]
    subs = {frozenset([1])}
    frontier = [frozenset([1])]
    while frontier:
        base = frontier.pop()
        for a in units:
            if a in base:
                continue
            H = rf.new_subgroup(m, list(base) + [a])
            key = H.elements
            if key not in subs:
                subs.add(key)
                frontier.append(key)
    return subs


def main():
    ms = [m for m in range(15, 260, 2)
          if all(e == 1 for e in factorint(m).values()) and m % 2 == 1
          and len(factorint(m)) >= 2]
    rows = []
    for m in ms:
        phi = len([a for a in range(1, m) if np.gcd(a, m) == 1])
        if phi > 130:
            continue
        for elems in all_subgroups(m):
            order = len(elems)
            n = phi // order
            if n < 4 or n > 12:
                continue
            gens = sorted(elems)
            H = rf.new_subgroup(m, gens)
            for q in primerange(3, 14):
                if m % q == 0:
                    continue
                f = rf.residue_degree(H, q)
                if f != 2:
                    continue
                try:
                    inst = rl.subfield_instance(m, gens, q, 1.0, seed=1)
                    ctx = res.build_residue_context(H, q)
                    dh = atk.estimate_reduced_delta(inst, ctx, 20000, Stream(1).child(9))
                    rows.append((dh, m, n, q, f, ctx.order_F, tuple(gens)))
                    print(f"m={m} n={n} q={q} F={ctx.order_F} delta_hat={dh:.3f}")
                except Exception as exc:
                    print(f"m={m} q={q}: {type(exc).__name__}: {exc}")
    rows.sort(reverse=True)
    print("\nTOP 15:")
    for dh, m, n, q, f, F, gens in rows[:15]:
        print(f"  delta={dh:.3f} m={m} n={n} q={q} f={f} F={F} gens={list(gens)}")


if __name__ == "__main__":
    main()
