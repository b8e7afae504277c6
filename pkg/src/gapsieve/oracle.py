"""Exhaustive ground-truth engines and the benchmark harness.

exact_Y finds, by complete backtracking search, the longest prefix [1, y]
coverable by one residue class per prime up to x.  jacobsthal scans a full
period for the maximal gap between integers coprime to n; the two agree
through exact_Y(x) = jacobsthal(primorial(x)) - 1 and are implemented
independently so each checks the other.
"""

import csv
import io
import time
from dataclasses import dataclass
from math import sqrt

import numpy as np

from .primes import primes_up_to
from .residues import ResidueSystem

EXACT_Y_CUTOFF = 17
JACOBSTHAL_CUTOFF = 10**9


class InfeasibleError(ValueError):
    """Requested computation is beyond the configured exhaustive-search range."""


@dataclass(frozen=True)
class OracleResult:
    x: int
    Y: int
    witness: ResidueSystem
    nodes_explored: int


class _CoverSearch:
    """Backtracking feasibility search: can classes a_p mod p cover [1, y]?

    Branches on the smallest uncovered position t; any prime that covers t
    must be congruent to t, so each unassigned prime contributes exactly one
    candidate class.  Primes are tried largest first (larger moduli are the
    scarcer resource); correctness does not depend on the order.
    """

    def __init__(self, primes):
        self.primes = sorted(primes, reverse=True)
        self.nodes = 0

    def feasible(self, y: int):
        cover = np.zeros(y + 1, dtype=np.int32)  # cover[t] = #classes hitting t
        assignment = {}

        def first_uncovered():
            idx = np.flatnonzero(cover[1:] == 0)
            return int(idx[0]) + 1 if len(idx) else None

        def rec():
            t = first_uncovered()
            if t is None:
                return True
            for p in self.primes:
                if p in assignment:
                    continue
                self.nodes += 1
                a = t % p
                assignment[p] = a
                start = a if a else p
                cover[start :: p] += 1
                if rec():
                    return True
                cover[start :: p] -= 1
                del assignment[p]
            return False

        if rec():
            return dict(assignment)
        return None


def exact_Y(x: int, cutoff: int = EXACT_Y_CUTOFF) -> OracleResult:
    """Largest y such that classes a_p mod p (p <= x) cover [1, y], exactly.

    Wraps the feasibility search in doubling plus binary search over the
    target, so optimality is certified by one exhausted search at Y + 1.
    """
    if x > cutoff:
        raise InfeasibleError(
            f"x = {x} exceeds the exhaustive cutoff {cutoff}; "
            "use jacobsthal(primorial(x)) for an independent route"
        )
    primes = list(primes_up_to(x))
    if not primes:
        return OracleResult(x=x, Y=0, witness=ResidueSystem({}), nodes_explored=0)

    search = _CoverSearch(primes)
    lo = 1
    if search.feasible(1) is None:
        return OracleResult(x=x, Y=0, witness=ResidueSystem({}), nodes_explored=search.nodes)
    hi = 2
    while search.feasible(hi) is not None:
        lo = hi
        hi *= 2
    # invariant: feasible(lo), not feasible(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if search.feasible(mid) is not None:
            lo = mid
        else:
            hi = mid
    assignment = search.feasible(lo)
    witness = {p: assignment.get(p, 0) for p in primes}
    return OracleResult(
        x=x, Y=lo, witness=ResidueSystem(witness), nodes_explored=search.nodes
    )


def jacobsthal(n: int, cutoff: int = JACOBSTHAL_CUTOFF) -> int:
    """Maximal gap between consecutive integers coprime to n.

    Scans one full period [1, n + 1] with a segmented bit vector; n beyond
    the cutoff (default 1e9) is rejected rather than attempted.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > cutoff:
        raise InfeasibleError(f"n = {n} exceeds the period-scan cutoff {cutoff}")
    if n == 1:
        return 1
    ps = sorted(_distinct_prime_factors(n))
    segment = 1 << 22
    max_gap = 0
    prev = None
    for lo in range(1, n + 2, segment):
        hi = min(lo + segment - 1, n + 1)
        flags = np.ones(hi - lo + 1, dtype=bool)
        for p in ps:
            start = (-lo) % p
            flags[start::p] = False
        for idx in np.flatnonzero(flags):
            pos = int(idx) + lo
            if prev is not None:
                max_gap = max(max_gap, pos - prev)
            prev = pos
    return max_gap


def _distinct_prime_factors(n: int):
    out = []
    d = 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1 if d == 2 else 2
    if n > 1:
        out.append(n)
    return out


def smooth_count(y: int, z: int, segment: int = 1 << 20) -> int:
    """#{1 <= n <= y : every prime factor of n is <= z}.

    Divides out all primes up to z segment by segment; n is smooth exactly
    when the remaining cofactor is 1.
    """
    if y < 1:
        return 0
    if z >= y:
        return y
    total = 0
    ps = [int(p) for p in primes_up_to(max(z, 1))]
    for lo in range(1, y + 1, segment):
        hi = min(lo + segment - 1, y)
        rem = np.arange(lo, hi + 1, dtype=np.int64)
        for p in ps:
            start = (-lo) % p
            sl = rem[start::p]
            while True:
                m = sl % p == 0
                if not m.any():
                    break
                sl[m] //= p
        total += int((rem == 1).sum())
    return total


def smooth_flags(lo: int, hi: int, z: int) -> np.ndarray:
    """Boolean z-smooth indicator for each n in [lo, hi]."""
    rem = np.arange(lo, hi + 1, dtype=np.int64)
    for p in primes_up_to(max(z, 1)):
        p = int(p)
        start = (-lo) % p
        sl = rem[start::p]
        while True:
            m = sl % p == 0
            if not m.any():
                break
            sl[m] //= p
    return rem == 1


# -- second-moment concentration test utility ----------------------------------


@dataclass(frozen=True)
class ChebyshevVerdict:
    first_moment: float
    second_moment: float
    deviation_freq: float
    predicted_bound: float
    passed: bool


def chebyshev_check(paired_samples, alpha: float, epsilon: float, theta: float,
                    multiplier: float = 3.0) -> ChebyshevVerdict:
    """Concentration check from paired evaluations (F(X,Y), F(X,Y')).

    Y' is a conditionally independent copy of Y given X, so the pair average
    estimates the X-conditional mean and the cross product estimates its
    square.  Reports how often the conditional-mean estimate strays from
    alpha by more than theta, against the epsilon * alpha^2 / theta^2
    failure-rate shape (scaled by `multiplier`).
    """
    pairs = [(float(a), float(b)) for a, b in paired_samples]
    if not pairs:
        raise ValueError("need at least one sample")
    firsts = [a for a, _ in pairs] + [b for _, b in pairs]
    first_moment = float(np.mean(firsts))
    second_moment = float(np.mean([a * b for a, b in pairs]))
    deviations = [abs((a + b) / 2 - alpha) > theta for a, b in pairs]
    freq = sum(deviations) / len(pairs)
    bound = multiplier * epsilon * alpha * alpha / (theta * theta)
    return ChebyshevVerdict(
        first_moment=first_moment,
        second_moment=second_moment,
        deviation_freq=freq,
        predicted_bound=bound,
        passed=freq <= max(bound, 0.0) + 1e-12,
    )


# -- strategy benchmark ----------------------------------------------------------

COMPARE_SCHEMA_VERSION = 1
COMPARE_COLUMNS = ("x", "seed", "method", "achieved_y", "residual_count", "runtime_s")


def compare_strategies(xs, seeds, methods, **config_kwargs):
    """Run the staged pipeline over a grid and tabulate the outcomes.

    Returns (rows, summary): rows follow COMPARE_COLUMNS; the summary has
    per-method means plus paired nibble-minus-independent differences with a
    normal-theory 95% confidence interval when both methods are present.
    """
    from .pipeline import StagedConfig, run_pipeline

    rows = []
    for x in xs:
        for seed in seeds:
            for method in methods:
                cfg = StagedConfig(x=x, seed=seed, stage3_method=method, **config_kwargs)
                t0 = time.perf_counter()
                report, _ = run_pipeline(cfg)
                dt = time.perf_counter() - t0
                rows.append(
                    {
                        "x": x,
                        "seed": seed,
                        "method": method,
                        "achieved_y": report.achieved_y,
                        "residual_count": report.residual_after_stage3,
                        "runtime_s": dt,
                    }
                )

    summary = {"schema_version": COMPARE_SCHEMA_VERSION, "methods": {}}
    for method in methods:
        sub = [r for r in rows if r["method"] == method]
        if sub:
            summary["methods"][method] = {
                "mean_achieved_y": float(np.mean([r["achieved_y"] for r in sub])),
                "mean_residual": float(np.mean([r["residual_count"] for r in sub])),
                "runs": len(sub),
            }
    if "nibble" in methods and "independent" in methods:
        diffs = []
        for x in xs:
            for seed in seeds:
                pair = {
                    r["method"]: r
                    for r in rows
                    if r["x"] == x and r["seed"] == seed
                }
                if "nibble" in pair and "independent" in pair:
                    diffs.append(
                        pair["nibble"]["achieved_y"] - pair["independent"]["achieved_y"]
                    )
        if diffs:
            mean = float(np.mean(diffs))
            sd = float(np.std(diffs, ddof=1)) if len(diffs) > 1 else 0.0
            half = 1.96 * sd / sqrt(len(diffs)) if len(diffs) > 1 else 0.0
            summary["paired_achieved_y_diff"] = {
                "mean": mean,
                "ci95": [mean - half, mean + half],
                "n": len(diffs),
            }
    return rows, summary


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(COMPARE_COLUMNS))
    writer.writeheader()
    for r in rows:
        writer.writerow({k: r[k] for k in COMPARE_COLUMNS})
    return buf.getvalue()
