"""Multidimensional sieve weights for admissible systems of linear forms.

Given admissible forms L_i(n) = l1*n + l2 the module builds the classical
squared-divisor-sum weight

    w(n) = ( sum over d with d_i | L_i(n) of lambda_d )^2

where the lambda coefficients come from a smooth cap F on the simplex via
the y-weight transform.  Everything is computed by direct enumeration over
the support tuples, exactly as the defining formulas read; the enumeration
is cheap because desk-scale truncation levels R keep the support tiny, and
it doubles as the oracle for any faster path.

All products over primes (singular series) are truncated at a configurable
cutoff with a reported tail estimate.
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from math import gcd

import numpy as np

from .primes import primes_up_to


class InadmissibleError(ValueError):
    """Some prime divides every value of the form product."""


@dataclass(frozen=True)
class LinearForm:
    l1: int
    l2: int

    def __post_init__(self):
        if self.l1 == 0:
            raise ValueError("leading coefficient must be nonzero")

    def __call__(self, n: int) -> int:
        return self.l1 * n + self.l2


def _factorize(n: int) -> dict:
    n = abs(n)
    out = {}
    d = 2
    while d * d <= n:
        while n % d == 0:
            out[d] = out.get(d, 0) + 1
            n //= d
        d += 1 if d == 2 else 2
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def _euler_phi(n: int) -> int:
    out = n
    for p in _factorize(n):
        out = out // p * (p - 1)
    return out


def _is_squarefree(n: int) -> bool:
    return all(e == 1 for e in _factorize(n).values())


@dataclass(frozen=True)
class OmegaData:
    count: int
    roots: tuple  # n in [1, p] with p | prod L_i(n), increasing
    j_least: tuple  # for each root, least form index (1-based) it kills


class FormSystem:
    """Admissible linear forms with the exceptional modulus B and level W.

    W is the product of primes up to 2k^2 not dividing B; B is 1 (default)
    or a prime standing in for a possible exceptional modulus.
    """

    def __init__(self, forms, B: int = 1):
        self.forms = tuple(
            f if isinstance(f, LinearForm) else LinearForm(*f) for f in forms
        )
        self.k = len(self.forms)
        if self.k < 1:
            raise ValueError("need at least one form")
        if B != 1 and not _is_prime_small(B):
            raise ValueError("B must be 1 or a prime")
        self.B = B
        self.W = 1
        for p in primes_up_to(2 * self.k * self.k):
            if B % p != 0:
                self.W *= p
        self._check_admissible()

    def _check_admissible(self):
        # a single form has a fixed prime divisor iff gcd(l1, l2) > 1
        # (gcd(l1, 0) = |l1| handles l2 = 0); beyond that only primes
        # p <= k can have every class covered, since each form kills at
        # most one class mod p.
        for f in self.forms:
            g = gcd(abs(f.l1), abs(f.l2))
            if g > 1:
                raise InadmissibleError(f"form {f} has fixed divisor gcd {g}")
        for p in primes_up_to(self.k):
            if self.omega(p).count == p:
                raise InadmissibleError(f"all classes mod {p} are covered")

    @lru_cache(maxsize=None)
    def omega(self, p: int) -> OmegaData:
        """Roots of prod L_i(n) mod p in [1, p], with least-form assignments.

        Each form l1*n + l2 contributes the single root -l2/l1 mod p when
        p does not divide l1, and no root otherwise (fixed divisors are
        excluded at construction), so the scan is O(k) per prime.
        """
        root_to_j = {}
        for j, f in enumerate(self.forms, start=1):
            if f.l1 % p == 0:
                continue  # p | l2 impossible for an admissible form
            n = (-f.l2 * pow(f.l1, -1, p)) % p
            n = n if n else p  # represent classes by [1, p]
            root_to_j.setdefault(n, j)  # ascending j, so first hit is least
        roots = tuple(sorted(root_to_j))
        return OmegaData(
            count=len(roots),
            roots=roots,
            j_least=tuple(root_to_j[n] for n in roots),
        )

    def allowed_positions(self, p: int) -> set:
        """Form indices j (1-based) that a prime p not dividing WB may enter."""
        return set(self.omega(p).j_least)

    def phi_omega(self, n: int) -> int:
        """prod over p | n of (p - omega(p))."""
        out = 1
        for p in _factorize(n):
            out *= p - self.omega(p).count
        return out


def _is_prime_small(n: int) -> bool:
    if n < 2:
        return False
    d = 2
    while d * d <= n:
        if n % d == 0:
            return False
        d += 1
    return True


def singular_series(sys: FormSystem, cutoff: int):
    """Truncated Euler product prod_{p <= cutoff, p !| B} (1 - w(p)/p)(1 - 1/p)^-k.

    Returns (value, tail_bound) where tail_bound estimates the multiplicative
    error from primes beyond the cutoff: the neglected log mass is at most
    about sum k^2/p^2, summed explicitly to 10*cutoff and integral-estimated
    beyond.
    """
    value = 1.0
    k = sys.k
    for p in primes_up_to(cutoff):
        if sys.B % p == 0:
            continue
        w = sys.omega(p).count
        if w == p:
            raise InadmissibleError(f"all classes mod {p} are covered")
        value *= (1 - w / p) * (1 - 1 / p) ** (-k)
    tail = sum(k * k / (p * p) for p in primes_up_to(10 * cutoff) if p > cutoff)
    tail += k * k / (10 * cutoff * math.log(10 * cutoff))
    return value, math.expm1(tail)


def singular_series_wb(sys: FormSystem, cutoff: int):
    """Same product restricted to primes not dividing W*B."""
    value = 1.0
    k = sys.k
    for p in primes_up_to(cutoff):
        if (sys.W * sys.B) % p == 0:
            continue
        w = sys.omega(p).count
        if w == p:
            raise InadmissibleError(f"all classes mod {p} are covered")
        value *= (1 - w / p) * (1 - 1 / p) ** (-k)
    tail = sum(k * k / (p * p) for p in primes_up_to(10 * cutoff) if p > cutoff)
    tail += k * k / (10 * cutoff * math.log(10 * cutoff))
    return value, math.expm1(tail)


def in_Dk(sys: FormSystem, d) -> bool:
    """Membership in the support lattice for coefficient tuples.

    Requires: the coordinate product squarefree, coprime to W*B, and each
    prime entering only at form positions it can actually divide.
    """
    if len(d) != sys.k:
        raise ValueError("tuple length must equal k")
    if any(x < 1 for x in d):
        raise ValueError("coordinates must be positive")
    prod = 1
    for x in d:
        prod *= x
    if not _is_squarefree(prod):
        return False
    if gcd(prod, sys.W * sys.B) != 1:
        return False
    for j, x in enumerate(d, start=1):
        for p in _factorize(x):
            if j not in sys.allowed_positions(p):
                return False
    return True


def simplex_power_cap(k: int):
    """F(t) = (1 - t_1 - ... - t_k)^(k+1) on the simplex, 0 outside."""

    def F(t):
        s = 0.0
        for ti in t:
            if ti < 0:
                return 0.0
            s += ti
        if s > 1:
            return 0.0
        return (1.0 - s) ** (k + 1)

    return F


class WeightSystem:
    """Lambda table and weight evaluation for one admissible form system."""

    def __init__(self, system: FormSystem, R: float, F=None, series_cutoff: int = 10**4):
        if R < 1:
            raise ValueError("R must be >= 1")
        self.system = system
        self.R = float(R)
        self.F = F if F is not None else simplex_power_cap(system.k)
        self.series_cutoff = series_cutoff
        self.S, self.S_tail = singular_series(system, series_cutoff)
        self.Swb, self.Swb_tail = singular_series_wb(system, series_cutoff)
        self.support = self._enumerate_support()
        self.y_table = {r: self._y_weight(r) for r in self.support}
        self.table = self._lambda_table()

    # -- support enumeration ---------------------------------------------

    def _coordinate_primes(self):
        """Primes usable inside support coordinates: !| WB, <= R."""
        sysm = self.system
        return [
            p
            for p in primes_up_to(int(self.R))
            if (sysm.W * sysm.B) % p != 0
        ]

    def _enumerate_support(self):
        """All tuples in the support lattice with coordinate product <= R."""
        sysm = self.system
        primes = self._coordinate_primes()
        by_position = {
            j: [p for p in primes if j in sysm.allowed_positions(p)]
            for j in range(1, sysm.k + 1)
        }

        out = []

        def extend(j, tup, prod, used):
            if j > sysm.k:
                out.append(tuple(tup))
                return
            # coordinate j: squarefree products of allowed primes
            choices = [1]
            stack = [(1, 0)]
            cand = [p for p in by_position[j] if p not in used]
            while stack:
                val, start = stack.pop()
                for idx in range(start, len(cand)):
                    nxt = val * cand[idx]
                    if prod * nxt > self.R:
                        continue
                    choices.append(nxt)
                    stack.append((nxt, idx + 1))
            for c in sorted(set(choices)):
                if prod * c > self.R:
                    continue
                extend(j + 1, tup + [c], prod * c, used | set(_factorize(c)))

        extend(1, [], 1, set())
        return sorted(set(out))

    # -- tables ------------------------------------------------------------

    def _y_weight(self, r) -> float:
        sysm = self.system
        prod = 1
        for x in r:
            prod *= x
        scale = (sysm.W * sysm.B) ** sysm.k / _euler_phi(sysm.W * sysm.B) ** sysm.k
        args = tuple(math.log(x) / math.log(self.R) if self.R > 1 else 0.0 for x in r)
        return scale * self.Swb * self.F(args)

    def _lambda_table(self) -> dict:
        sysm = self.system
        table = {}
        for d in self.support:
            prod_d = 1
            for x in d:
                prod_d *= x
            mu = _moebius(prod_d)
            total = 0.0
            for r in self.support:
                if all(ri % di == 0 for di, ri in zip(d, r)):
                    prod_r = 1
                    for x in r:
                        prod_r *= x
                    yr = self.y_table[r]
                    if yr:
                        total += yr / sysm.phi_omega(prod_r)
            table[d] = mu * prod_d * total
        return table

    # -- evaluation ----------------------------------------------------------

    def inner_sum(self, n: int) -> float:
        forms = self.system.forms
        vals = [f(n) for f in forms]
        total = 0.0
        for d, lam in self.table.items():
            if lam and all(v % di == 0 for di, v in zip(d, vals)):
                total += lam
        return total

    def weight(self, n: int) -> float:
        s = self.inner_sum(n)
        return s * s

    def sum_over_interval(self, lo: int, hi: int) -> float:
        """Exact sum of w(n) for n in [lo, hi] via pairwise lambda expansion.

        Requires every form to be monic (l1 = 1); the divisibility
        constraints then pin n to residue classes combined by CRT, and the
        class counts in the interval are exact floor arithmetic.
        """
        if any(f.l1 != 1 for f in self.system.forms):
            raise ValueError("interval sums require monic forms")
        if hi < lo:
            return 0.0
        shifts = [f.l2 for f in self.system.forms]
        items = [(d, lam) for d, lam in self.table.items() if lam]
        total = 0.0
        for d, lam_d in items:
            for e, lam_e in items:
                cls = (0, 1)
                for di, ei, c in zip(d, e, shifts):
                    mod = di * ei // gcd(di, ei)
                    cls = _crt_merge(cls, ((-c) % mod, mod))
                    if cls is None:
                        break
                if cls is None:
                    continue
                r, m = cls
                count = (hi - r) // m - (lo - 1 - r) // m
                total += lam_d * lam_e * count
        return total


def _moebius(n: int) -> int:
    f = _factorize(n)
    if any(e > 1 for e in f.values()):
        return 0
    return -1 if len(f) % 2 else 1


def _crt_merge(a, b):
    """Merge congruences allowing common factors; None if incompatible."""
    r1, m1 = a
    r2, m2 = b
    g = gcd(m1, m2)
    if (r2 - r1) % g != 0:
        return None
    l = m1 // g * m2
    t = ((r2 - r1) // g * pow(m1 // g, -1, m2 // g)) % (m2 // g)
    return (r1 + m1 * t) % l, l


def lambda_table(ws: WeightSystem) -> dict:
    return dict(ws.table)


def weight_w(ws: WeightSystem, n: int) -> float:
    return ws.weight(n)


# -- weights for shifted tuples (one system per sieving prime) ----------------


class PairWeightContext:
    """Weights w(p, n) for the shifted forms n + h_i * p, clamped to [-y, y].

    R is fixed to (x/4)^(1/9) (theta = 1/3 with the R = x^(theta/3) choice).
    Lambda tables are cached per prime; they agree across primes up to the
    singular-series scalar, but each is computed honestly from its own
    system.
    """

    def __init__(self, offsets, x: int, B: int = 1, F=None, series_cutoff: int = 10**4):
        self.offsets = tuple(offsets)
        self.x = x
        self.B = B
        self.F = F
        self.series_cutoff = series_cutoff
        self.R = (x / 4) ** (1.0 / 9.0)
        self._cache = {}

    @property
    def k(self) -> int:
        return len(self.offsets)

    def weight_system(self, p: int) -> WeightSystem:
        if p not in self._cache:
            forms = [LinearForm(1, h * p) for h in self.offsets]
            self._cache[p] = WeightSystem(
                FormSystem(forms, B=self.B),
                R=max(self.R, 1.0),
                F=self.F,
                series_cutoff=self.series_cutoff,
            )
        return self._cache[p]

    def weight(self, p: int, n: int, y: int) -> float:
        if abs(n) > y:
            return 0.0
        return self.weight_system(p).weight(n)

    def sum_over_support(self, p: int, y: int) -> float:
        return self.weight_system(p).sum_over_interval(-y, y)


def pair_weight(ctx: PairWeightContext, p: int, n: int, y: int) -> float:
    return ctx.weight(p, n, y)


# -- numeric integrals over the simplex ----------------------------------------


@dataclass(frozen=True)
class IntegralEstimates:
    I: float
    J: float
    se_I: float
    se_J: float
    samples: int


def integrals_IJ(F, k: int, samples: int, rng) -> IntegralEstimates:
    """Monte Carlo estimates of I = int F^2 and J = int (int F dt_k)^2.

    Both integrals are over the unit simplex; sampling is uniform over the
    unit cube with F vanishing outside the simplex.  J uses the identity
    (int F dt_k)^2 = E[F(t, a) F(t, b)] with a, b independent uniform.
    """
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))
    if samples < 2:
        raise ValueError("need at least 2 samples")
    pts = rng.random((samples, k))
    vals_sq = np.fromiter((F(tuple(row)) ** 2 for row in pts), dtype=float, count=samples)
    I = float(vals_sq.mean())
    se_I = float(vals_sq.std(ddof=1) / math.sqrt(samples))

    outer = rng.random((samples, k - 1)) if k > 1 else np.zeros((samples, 0))
    a = rng.random(samples)
    b = rng.random(samples)
    prods = np.fromiter(
        (
            F(tuple(outer[i]) + (a[i],)) * F(tuple(outer[i]) + (b[i],))
            for i in range(samples)
        ),
        dtype=float,
        count=samples,
    )
    J = float(prods.mean())
    se_J = float(prods.std(ddof=1) / math.sqrt(samples))
    return IntegralEstimates(I=I, J=J, se_I=se_I, se_J=se_J, samples=samples)


def tau_u(ws: WeightSystem, x: int, ij: IntegralEstimates):
    """The normalization pair (tau, u) for a weight system at scale x.

    tau = 2 (B/phi(B))^k S (log R)^k (log x)^k I_k and
    u = (phi(B)/B) (log R / log x) k J_k / (2 I_k); both are relative to the
    chosen cap F, which the report labels.
    """
    sysm = ws.system
    k = sysm.k
    phi_B = _euler_phi(sysm.B)
    logR = math.log(ws.R)
    logx = math.log(x)
    tau = 2 * (sysm.B / phi_B) ** k * ws.S * logR**k * logx**k * ij.I
    u = (phi_B / sysm.B) * (logR / logx) * k * ij.J / (2 * ij.I)
    return tau, u


# -- distribution diagnostics ---------------------------------------------------


def uniformity_diagnostics(ctx: PairWeightContext, x: int, y: int, sample_ps, sample_qs, off_h=None):
    """Reported (never asserted) distribution statistics of w(p, .).

    Row sums across sampled p, column sums across sampled q and shifts,
    the off-tuple column sum for a shift h outside the tuple, the largest
    observed weight, and the discriminant ratio for the off-tuple form.
    """
    sample_ps = list(sample_ps)
    sample_qs = list(sample_qs)
    row_sums = [ctx.sum_over_support(p, y) for p in sample_ps]
    mean_row = float(np.mean(row_sums)) if row_sums else 0.0
    cv_row = float(np.std(row_sums) / mean_row) if row_sums and mean_row else 0.0

    col_sums = {}
    for i, h in enumerate(ctx.offsets, start=1):
        vals = []
        for q in sample_qs:
            vals.append(
                math.fsum(ctx.weight(p, q - h * p, y) for p in sample_ps)
            )
        col_sums[i] = float(np.mean(vals)) if vals else 0.0

    report = {
        "sampled_ps": len(sample_ps),
        "sampled_qs": len(sample_qs),
        "row_sum_mean": mean_row,
        "row_sum_cv": cv_row,
        "col_sum_means": col_sums,
    }

    if off_h is not None:
        if off_h in ctx.offsets:
            raise ValueError("off_h must lie outside the tuple")
        off_vals = [
            math.fsum(ctx.weight(p, q - off_h * p, y) for p in sample_ps)
            for q in sample_qs
        ]
        report["off_tuple_h"] = off_h
        report["off_tuple_sum_mean"] = float(np.mean(off_vals)) if off_vals else 0.0
        if sample_ps:
            p0 = sample_ps[0]
            delta = 1
            for h in ctx.offsets:
                delta *= abs(h * p0 - off_h * p0)
            report["discriminant_ratio"] = delta / _euler_phi(delta) if delta else 0.0

    max_w = 0.0
    for p in sample_ps:
        for n in range(-y, y + 1, max(1, (2 * y) // 64)):
            max_w = max(max_w, ctx.weight(p, n, y))
    report["max_sampled_w"] = max_w
    report["crude_bound_shape"] = x ** (2.0 / 9.0)
    return report
