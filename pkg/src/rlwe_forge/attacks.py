"""Attack drivers.

chi_square_attack is the full guess loop against one prime ideal: for
every candidate reduced secret s' it tests whether {b - a s' mod ideal}
looks uniform, and the verdict follows from how many candidates get
rejected (exactly one: that is the guess; none: the samples were not
RLWE; several: not enough samples to separate).

search_attack runs the guess loop once per prime ideal (twists
deduplicated by the decomposition orbit of q), turns each recovered
residue into f linear equations over F_q, and solves the stacked system
for the full secret.

The ramified and dual drivers are the narrow-error cyclotomic attacks;
modulus_switch_experiment is the negative control showing the rounding
errors of switching wash out the signal.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import lattice as lat
from . import rlwe as rl
from . import stats as st
from .errors import InsufficientSamples, PartialFailure, SingularSystem
from .residue import (
    ResidueContext,
    build_residue_context,
    decomposition_twists,
    twisted_rv_matrix,
)
from .rng import Stream, as_stream
from .subgroups import SubgroupDescriptor


def default_alpha(N: int) -> float:
    """Confidence level 1 - 1/(10 N): all-wrong-guesses-pass probability
    stays near e^(-1/10) however large the guess space is."""
    return 1.0 - 1.0 / (10.0 * N)


@dataclass
class AttackReport:
    verdict: str  # "Guess" | "NOT-RLWE" | "INSUFFICIENT-SAMPLES" | "Uniform" | "NonUniform"
    guess: Optional[object] = None
    chi2_max: float = 0.0
    chi2_by_guess: Optional[np.ndarray] = None
    rejected_count: int = 0
    alpha: Optional[float] = None
    threshold: Optional[float] = None
    empirical_delta: Optional[float] = None
    bound: Optional[float] = None
    params: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {
            "verdict": self.verdict,
            "chi2_max": self.chi2_max,
            "rejected_count": self.rejected_count,
            "alpha": self.alpha,
            "threshold": self.threshold,
            "params": self.params,
            "timings": self.timings,
        }
        if self.guess is not None:
            out["guess"] = list(self.guess) if isinstance(self.guess, tuple) else self.guess
        if self.empirical_delta is not None:
            out["delta_hat"] = self.empirical_delta
        if self.bound is not None:
            out["bound"] = self.bound
        if self.chi2_by_guess is not None and self.chi2_by_guess.size <= 4096:
            out["chi2_by_guess"] = [float(v) for v in self.chi2_by_guess]
        out.update(self.extra)
        return out


def _chunks(total: int, parts: int):
    step = (total + parts - 1) // parts
    return [(i, min(i + step, total)) for i in range(0, total, step)]


def _parallel_chi2(worker, N: int, threads: int) -> np.ndarray:
    """Run worker(lo, hi) -> array over a fixed chunking; order-stable."""
    if threads <= 1:
        return worker(0, N)
    out = np.zeros(N)
    ranges = _chunks(N, threads * 4)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for (lo, hi), res in zip(ranges, pool.map(lambda r: worker(*r), ranges)):
            out[lo:hi] = res
    return out


def chi_square_attack(ctx: ResidueContext, H: SubgroupDescriptor, samples,
                      twist: int = 1, alpha: Optional[float] = None,
                      bins: Optional[st.BinSpec] = None, threads: int = 1,
                      early_exit: bool = False) -> AttackReport:
    """Guess loop over the q^f residues at one prime ideal.

    Guesses are enumerated in the canonical subfield order; the work per
    guess is independent, so the loop is chunked across threads with a
    fixed chunk layout (verdicts never depend on the thread count).
    """
    t0 = time.perf_counter()
    batch = rl.as_batch(samples)
    M = len(batch)
    N = ctx.N
    if alpha is None:
        alpha = default_alpha(N)
    if bins is None:
        bins = st.per_element_bins(N, M)
    if float(np.min(bins.expected)) < 5.0:
        raise InsufficientSamples(
            f"{M} samples give minimum expected bin mass below 5 for {bins.kind}")

    rv = twisted_rv_matrix(ctx, twist)
    abar = (batch.a % ctx.q) @ rv % ctx.q  # (M, F) rows in the subfield
    bbar = (batch.b % ctx.q) @ rv % ctx.q
    t_reduce = time.perf_counter()

    threshold = st.chi_square_inv_cdf(alpha, bins.r - 1)
    fld = ctx.field
    two_bin = bins.kind == "subfield-two-bin"

    def chi2_of_rows(rows: np.ndarray) -> float:
        if two_bin:
            full = ctx.full_degree_mask(rows)
            counts = np.array([M - int(full.sum()), int(full.sum())])
        else:
            counts = np.bincount(ctx.bin_indices(rows), minlength=N)
        return st.chi_square_statistic(counts, bins.expected)

    def worker(lo: int, hi: int) -> np.ndarray:
        out = np.zeros(hi - lo)
        for i in range(lo, hi):
            mul = fld.mul_matrix(ctx.subfield_elements[i])
            rows = (bbar - (abar @ mul.T)) % ctx.q
            out[i - lo] = chi2_of_rows(rows)
            if early_exit and out[i - lo] > threshold:
                return out[: i - lo + 1]
        return out

    if early_exit:
        chi2s = np.zeros(N)
        done = 0
        for lo, hi in _chunks(N, max(1, N // 64)):
            part = worker(lo, hi)
            chi2s[lo:lo + part.size] = part
            done = lo + part.size
            if part.size and part[-1] > threshold:
                break
        chi2s = chi2s[:done]
    else:
        chi2s = _parallel_chi2(worker, N, threads)

    rejected = np.nonzero(chi2s > threshold)[0]
    if rejected.size == 0:
        verdict, guess = "NOT-RLWE", None
    elif rejected.size == 1:
        verdict, guess = "Guess", ctx.subfield_elements[int(rejected[0])]
    else:
        verdict, guess = "INSUFFICIENT-SAMPLES", None
    t1 = time.perf_counter()
    return AttackReport(
        verdict=verdict, guess=guess,
        chi2_max=float(chi2s.max()) if chi2s.size else 0.0,
        chi2_by_guess=chi2s, rejected_count=int(rejected.size),
        alpha=alpha, threshold=threshold,
        params={"q": ctx.q, "f": ctx.f, "N": N, "M": M, "twist": int(twist),
                "bins": bins.kind, "m": H.m, "H_gens": list(H.gens)},
        timings={"reduce_s": t_reduce - t0, "guess_loop_s": t1 - t_reduce,
                 "total_s": t1 - t0},
    )


def secret_residue(ctx: ResidueContext, secret: np.ndarray, twist: int = 1) -> tuple:
    """Ground-truth reduced secret for a twist (test and report helper)."""
    from .residue import reduce_ring_element

    return reduce_ring_element(ctx, secret, twist)


def search_attack(inst: rl.RlweInstance, samples, alpha: Optional[float] = None,
                  bins_kind: str = "per-element", threads: int = 1) -> dict:
    """Full secret recovery: one guess loop per prime ideal above q, then
    an F_q-linear solve stitching the residues together.

    Returns a dict with the recovered secret and the per-twist reports.
    Raises PartialFailure when any per-prime attack does not produce a
    guess, and SingularSystem when the stacked system loses rank.
    """
    t0 = time.perf_counter()
    ctx = build_residue_context(inst.descriptor, inst.q)
    twists = decomposition_twists(ctx)
    N, q, F = ctx.N, ctx.q, ctx.order_F
    reports = {}
    failed = []
    for c in twists:
        bins = (st.subfield_two_bins(q, ctx.f, len(rl.as_batch(samples)))
                if bins_kind == "subfield-two-bin"
                else st.per_element_bins(N, len(rl.as_batch(samples))))
        rep = chi_square_attack(ctx, inst.descriptor, samples, twist=c,
                                alpha=alpha, bins=bins, threads=threads)
        reports[c] = rep
        if rep.verdict != "Guess":
            failed.append(c)
    if failed:
        raise PartialFailure(failed, reports)

    # stack F rows per twist: sum_j s_j * rv[j][k] = guess[k] over F_q
    rows = []
    rhs = []
    for c in twists:
        rv = twisted_rv_matrix(ctx, c)  # (n, F)
        guess = reports[c].guess
        for k in range(F):
            rows.append(rv[:, k] % q)
            rhs.append(guess[k] % q)
    A = np.array(rows, dtype=np.int64)
    y = np.array(rhs, dtype=np.int64)
    secret = _solve_mod_q(A, y, q)
    t1 = time.perf_counter()
    return {
        "secret": secret,
        "reports": reports,
        "twists": twists,
        "elapsed_s": t1 - t0,
    }


def _solve_mod_q(A: np.ndarray, y: np.ndarray, q: int) -> np.ndarray:
    """Unique solution of A x = y over F_q; SingularSystem if rank < n."""
    A = A % q
    y = y % q
    rows, n = A.shape
    aug = np.concatenate([A, y[:, None]], axis=1)
    row = 0
    piv_cols = []
    for col in range(n):
        piv = next((r for r in range(row, rows) if aug[r, col] % q), None)
        if piv is None:
            continue
        aug[[row, piv]] = aug[[piv, row]]
        inv = pow(int(aug[row, col]), q - 2, q)
        aug[row] = (aug[row] * inv) % q
        for r in range(rows):
            if r != row and aug[r, col] % q:
                aug[r] = (aug[r] - aug[r, col] * aug[row]) % q
        piv_cols.append(col)
        row += 1
        if row == rows:
            break
    if len(piv_cols) < n:
        raise SingularSystem(f"stacked system has rank {len(piv_cols)} < {n}")
    x = np.zeros(n, dtype=np.int64)
    for r, col in enumerate(piv_cols):
        x[col] = aug[r, n]
    return x


def ramified_reduce(coeff_rows: np.ndarray, p: int) -> np.ndarray:
    """Reduction modulo the totally ramified prime of Q(zeta_p): every
    basis element maps to 1, so a coordinate vector reduces to the sum of
    its coordinates mod p."""
    return np.asarray(coeff_rows, dtype=np.int64).sum(axis=1) % p


def ramified_decision_attack(p: int, sigma0: float, samples,
                             alpha: Optional[float] = None,
                             coarse_bins: Optional[int] = None,
                             threads: int = 1) -> AttackReport:
    """Decision attack on Q(zeta_p) with modulus p.

    Loops the p candidate residues; per candidate, tests uniformity of
    b - a s' over F_p.  The primary binning is one bin per centered
    representative; a coarse binning into equal intervals of centered
    representatives is reported alongside (it concentrates the
    small-value signal).  Any rejection is reported as NonUniform with
    the maximizing candidate.
    """
    t0 = time.perf_counter()
    batch = rl.as_batch(samples)
    M = len(batch)
    N = p
    if alpha is None:
        # stricter than the guess-loop default: the decision verdict fires
        # on any of the N tests, so keep the family-wise null rate near 2%
        alpha = 1.0 - 1.0 / (50.0 * N)
    if M < 5 * N:
        raise InsufficientSamples(f"need at least {5 * N} samples, got {M}")
    abar = ramified_reduce(batch.a, p)
    bbar = ramified_reduce(batch.b, p)
    k_coarse = coarse_bins if coarse_bins is not None else max(2, (p + 19) // 20)
    threshold = st.chi_square_inv_cdf(alpha, N - 1)
    expected = np.full(N, M / N)

    coarse_edges = np.linspace(-p / 2, p / 2, k_coarse + 1)
    # expected masses count the integers actually inside each interval
    support = np.arange(-(p // 2), p // 2 + 1)
    per_bin, _ = np.histogram(support, bins=coarse_edges)
    coarse_expected = per_bin / p * M

    def worker(lo, hi):
        out = np.zeros(hi - lo)
        coarse = np.zeros(hi - lo)
        for s in range(lo, hi):
            e = (bbar - s * abar) % p
            counts = np.bincount(e, minlength=N)
            out[s - lo] = st.chi_square_statistic(counts, expected)
            centered = np.where(e > p // 2, e - p, e).astype(float)
            ccounts, _ = np.histogram(centered, bins=coarse_edges)
            coarse[s - lo] = st.chi_square_statistic(ccounts, coarse_expected)
        return np.stack([out, coarse])

    if threads <= 1:
        stacked = worker(0, N)
    else:
        parts = []
        ranges = _chunks(N, threads * 4)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda r: worker(*r), ranges))
        stacked = np.concatenate(parts, axis=1)
    chi2s, coarse_chi2s = stacked[0], stacked[1]

    rejected = np.nonzero(chi2s > threshold)[0]
    if rejected.size:
        verdict = "NonUniform"
        guess = int(chi2s.argmax())
    else:
        verdict, guess = "Uniform", None
    t1 = time.perf_counter()
    coarse_threshold = st.chi_square_inv_cdf(alpha, k_coarse - 1)
    return AttackReport(
        verdict=verdict, guess=guess, chi2_max=float(chi2s.max()),
        chi2_by_guess=chi2s, rejected_count=int(rejected.size),
        alpha=alpha, threshold=threshold,
        params={"p": p, "sigma0": sigma0, "M": M, "bins": "centered-per-element",
                "coarse_bins": k_coarse},
        timings={"total_s": t1 - t0},
        extra={"coarse_chi2_max": float(coarse_chi2s.max()),
               "coarse_threshold": coarse_threshold,
               "coarse_rejections": int((coarse_chi2s > coarse_threshold).sum())},
    )


def dual_decision_attack(p: int, observations, nbins: int = 50,
                         alpha: float = 0.999) -> AttackReport:
    """Uniformity test of the circle observable on [0, p)."""
    t0 = time.perf_counter()
    values = np.asarray(observations, dtype=float)
    M = values.size
    if M < 5 * nbins:
        raise InsufficientSamples(f"need at least {5 * nbins} observations, got {M}")
    bins = st.circle_bins(nbins, p, M)
    result = st.uniformity_test(values, bins, alpha)
    t1 = time.perf_counter()
    return AttackReport(
        verdict="NonUniform" if result.rejected else "Uniform",
        chi2_max=result.chi2, alpha=alpha, threshold=result.threshold,
        rejected_count=int(result.rejected),
        params={"p": p, "nbins": nbins, "M": M},
        timings={"total_s": t1 - t0},
        extra={"p_value": result.p_value},
    )


def modulus_switch_experiment(inst: rl.RlweInstance, p: int, tau: float,
                              samples, alpha: Optional[float] = None,
                              stream=None, threads: int = 1) -> dict:
    """Switch samples from modulus q down to p and attack at p; also test
    the switching rounding errors for uniformity mod a prime above p.

    The expected outcome is the negative one: the attack returns NOT-RLWE
    even when p alone is weak, while the rounding errors pass uniformity.
    """
    stream = as_stream(stream if stream is not None else inst.seed + 77)
    batch = rl.as_batch(samples)
    res = rl.modulus_switch_batch(inst.lattice, batch, inst.q, p, tau, stream)
    ctx_p = build_residue_context(inst.descriptor, p)
    report = chi_square_attack(ctx_p, inst.descriptor, res.switched,
                               alpha=alpha, threads=threads)

    # rounding-error uniformity: reduce q*a'' (integer vector), then divide
    # by q in the residue field; that is the phi-map image of a''
    reduced = _phi_map(ctx_p, res.a_err_scaled, inst.q)
    idx = ctx_p.bin_indices(reduced)
    M = idx.size
    test = st.uniformity_test(idx, st.per_element_bins(ctx_p.N, M), alpha=0.99)
    return {
        "attack_report": report,
        "rounding_uniformity": test,
        "switch": res,
        "ctx_p": ctx_p,
    }


def _phi_map(ctx_p: ResidueContext, scaled_err: np.ndarray, q: int) -> np.ndarray:
    """phi(x) for x with q*x integral: reduce(q*x) * (q mod p)^(-1)."""
    from .residue import reduce_batch

    reduced = reduce_batch(ctx_p, scaled_err % ctx_p.q, twist=1)
    qinv = pow(q % ctx_p.q, ctx_p.q - 2, ctx_p.q)
    return (reduced * qinv) % ctx_p.q


def verify_switch_congruence(inst: rl.RlweInstance, ctx_p: ResidueContext,
                             batch: rl.SampleBatch, res: rl.SwitchResult,
                             count: Optional[int] = None) -> bool:
    """Check e' == -b'' + a'' s modulo the prime above p, exactly, where
    e' = b' - a' s is the switched error.  Needs the planted secret."""
    from .residue import reduce_batch

    E = inst.embedding
    n = count if count is not None else len(batch)
    a_new, b_new = res.switched.a[:n], res.switched.b[:n]
    s = inst.secret
    e_new = b_new - rl.ring_multiply_batch(E, a_new, s)
    lhs = reduce_batch(ctx_p, e_new, twist=1)

    qb = res.b_err_scaled[:n].astype(np.int64)
    qa_s = rl.ring_multiply_batch(E, res.a_err_scaled[:n].astype(np.int64), s)
    rhs = _phi_map(ctx_p, (-qb + qa_s), inst.q)
    return bool(np.array_equal(lhs % ctx_p.q, rhs % ctx_p.q))


@dataclass
class SearchBudget:
    est_draws: int = 20000
    max_samples: int = 50000
    run_attacks: bool = True
    attack_bound_gate: float = 0.5


ESTIMATED_CONFIDENT = 1.0 - 2.0**-10


def estimate_reduced_delta(inst: rl.RlweInstance, ctx: ResidueContext,
                           draws: int, stream, twist: int = 1) -> float:
    """Empirical statistical distance of the reduced error distribution
    from uniform, from fresh error draws."""
    errs = rl.sample_errors(inst, draws, stream)
    from .residue import reduce_batch

    idx = ctx.bin_indices(reduce_batch(ctx, errs, twist))
    counts = np.bincount(idx, minlength=ctx.N).astype(float)
    emp = counts / counts.sum()
    uniform = np.full(ctx.N, 1.0 / ctx.N)
    return st.statistical_distance(emp, uniform)


def vulnerability_search(candidates, q_lo: int, q_hi: int, f_target: int,
                         sigma0: float, alpha: Optional[float] = None,
                         budget: Optional[SearchBudget] = None,
                         seed: int = 1, threads: int = 1) -> list:
    """Sweep (m, gens) candidates: estimate the reduced-error distance for
    each admissible prime, compute the success bound, optionally run the
    attack when the bound clears the gate.  Per-candidate failures are
    recorded, never raised."""
    from .subgroups import degree_f_primes, new_subgroup

    budget = budget or SearchBudget()
    out = []
    for m, gens in candidates:
        row = {"m": m, "gens": list(gens), "sigma0": sigma0, "f": f_target}
        t0 = time.perf_counter()
        try:
            H = new_subgroup(m, gens)
            row["n"] = H.degree_n
            primes = degree_f_primes(H, q_lo, q_hi, f_target)
            if not primes:
                row["status"] = "no-admissible-prime"
                out.append(row)
                continue
            q = primes[0]
            row["q"] = q
            inst = rl.subfield_instance(m, gens, q, sigma0, seed=seed)
            ctx = build_residue_context(H, q)
            N = ctx.N
            M = 5 * N
            row["M"] = M
            a = alpha if alpha is not None else default_alpha(N)
            delta_hat = estimate_reduced_delta(inst, ctx, budget.est_draws,
                                               Stream(seed).child(9))
            bound = st.success_lower_bound(N, M, delta_hat, a)
            row["delta_hat"] = delta_hat
            row["bound"] = bound
            if budget.run_attacks and bound > budget.attack_bound_gate and M <= budget.max_samples:
                samples = rl.generate_samples(inst, M, Stream(seed).child(1))
                rep = chi_square_attack(ctx, H, samples, alpha=a, threads=threads)
                truth = secret_residue(ctx, inst.secret)
                ok = rep.verdict == "Guess" and rep.guess == truth
                row["status"] = "attacked-success" if ok else f"attacked-{rep.verdict}"
            elif bound > ESTIMATED_CONFIDENT:
                row["status"] = "estimated-vulnerable"
            elif bound > budget.attack_bound_gate:
                row["status"] = "estimated-possible"
            else:
                row["status"] = "estimated-safe"
        except Exception as exc:  # noqa: BLE001 - sweep must survive bad rows
            row["status"] = f"error: {type(exc).__name__}: {exc}"
        row["elapsed_s"] = time.perf_counter() - t0
        out.append(row)
    return out
