"""Staged construction of a covering system for the interval (x, y].

Stage 1 fixes the class 0 mod p for very small primes (p <= v) and medium
primes (z < p <= x/2): their multiples blanket most of the interval.
Stage 2 draws one uniform class per small prime in (v, z].  The survivors
are mostly the primes of (x, y] plus a sprinkling of z-smooth numbers and
small-times-large composites.  Stage 3 spends the primes of (x/2, x]: each
p picks an anchor n_p so that the class n_p mod p swallows several
surviving primes at once (shifted by an admissible tuple), with the anchor
chosen independently, greedily, or through the nibble covering engine.
Whatever survives is matched to fresh primes above x, one each, which
completes the cover of (x, y].

Thresholds come in two modes.  The paper-formula mode uses the asymptotic
expressions (the very-small bound log^20 x is clamped to x^(1/4) with a
warning, since it exceeds x for every feasible x); the desk preset uses
plain powers x^v_exp and x^z_exp, preserving the staged structure at
reachable sizes.
"""

import json
import math
from dataclasses import dataclass, replace

from . import nibble as nib
from .primes import admissible_tuple, primes_up_to, sieve_interval
from .residues import ResidueSystem, sift
from .rng import stream
from .weights import PairWeightContext


class BudgetError(RuntimeError):
    """Final matching ran out of fresh primes."""

    def __init__(self, needed: int, available: int, required_C_extra: float):
        self.required_C_extra = required_C_extra
        super().__init__(
            f"matching needs {needed} fresh primes but only {available} are "
            f"available; C_extra of about {required_C_extra:.1f} would suffice"
        )


class VerificationError(RuntimeError):
    """The combined system failed its independent full-cover check."""


@dataclass(frozen=True)
class StagedConfig:
    x: int
    c: float = 1.0
    mode: str = "desk-preset"  # "desk-preset" | "paper-formula"
    v_exp: float = 0.10
    z_exp: float = 0.35
    seed: int = 0
    stage3_method: str = "nibble"  # "independent" | "greedy" | "nibble" | "none"
    C_extra: float = 10.0
    r: int = 0  # 0 = formula default
    tuple_style: str = "auto"
    weights: str = "uniform"  # "uniform" | "sieve"
    nibble_rounds: int = 0  # 0 = formula default
    filter_atypical: bool = False
    filter_tol: float = 0.0  # 0 = 1/log^3 x

    def validate(self):
        if self.x < 100:
            raise ValueError("x must be >= 100")
        if self.c <= 0:
            raise ValueError("c must be positive")
        if not 0 < self.v_exp < self.z_exp < 0.5:
            raise ValueError("need 0 < v_exp < z_exp < 1/2")
        if self.mode not in ("desk-preset", "paper-formula"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.stage3_method not in ("independent", "greedy", "nibble", "none"):
            raise ValueError(f"unknown stage3 method {self.stage3_method!r}")
        if self.weights not in ("uniform", "sieve"):
            raise ValueError(f"unknown weights mode {self.weights!r}")


def _iterated_logs(x: float):
    l1 = math.log(x)
    l2 = math.log(l1) if l1 > 1 else 1.0
    l3 = math.log(l2) if l2 > 1 else 1.0
    return l1, l2, l3


def paper_thresholds_log(log_x: float):
    """(log v, log z, clamped) for the paper-formula thresholds, given log x.

    Works directly in log space so astronomically large x can be checked:
    v = min(log^20 x, x^(1/4)) and z = x^(log3 x / (4 log2 x)).
    """
    log2 = math.log(log_x)
    log3 = math.log(log2)
    log_v_raw = 20 * log2
    log_v_clamp = log_x / 4
    clamped = log_v_raw > log_v_clamp
    log_z = (log3 / (4 * log2)) * log_x
    return min(log_v_raw, log_v_clamp), log_z, clamped


@dataclass(frozen=True)
class Thresholds:
    v: float
    z: float
    y: int
    clamped: bool

    def small_primes(self):
        """The random-class primes: v < s <= z."""
        return [p for p in primes_up_to(int(self.z)) if p > self.v]


def thresholds(cfg: StagedConfig) -> Thresholds:
    x = cfg.x
    l1, l2, l3 = _iterated_logs(x)
    y = math.ceil(cfg.c * x * l1 * max(1.0, l3) / max(1.0, l2))
    if cfg.mode == "desk-preset":
        return Thresholds(v=x**cfg.v_exp, z=x**cfg.z_exp, y=y, clamped=False)
    log_v, log_z, clamped = paper_thresholds_log(l1)
    return Thresholds(v=math.exp(log_v), z=math.exp(log_z), y=y, clamped=clamped)


def default_r(x: int) -> int:
    """Tuple length floor(log^(1/5) x), clamped to at least 2."""
    return max(2, math.floor(math.log(x) ** 0.2))


def default_rounds(x: int) -> int:
    """floor(log3 x / log 5), clamped to at least 1 round."""
    _, _, l3 = _iterated_logs(x)
    return max(1, math.floor(l3 / math.log(5)))


def sigma_of(small_primes) -> float:
    out = 1.0
    for s in small_primes:
        out *= 1 - 1 / s
    return out


# -- stages -------------------------------------------------------------------


def stage1_zero_classes(cfg: StagedConfig) -> ResidueSystem:
    """Class 0 mod p for very small primes p <= v and medium z < p <= x/2."""
    th = thresholds(cfg)
    entries = {}
    for p in primes_up_to(cfg.x // 2):
        if p <= th.v or th.z < p <= cfg.x / 2:
            entries[p] = 0
    return ResidueSystem(entries)


def stage2_random_small(cfg: StagedConfig, rng=None) -> ResidueSystem:
    """One uniform class per small prime; stream-per-prime keeps the draw
    independent of iteration order."""
    th = thresholds(cfg)
    entries = {}
    for s in th.small_primes():
        r = rng if rng is not None else stream(cfg.seed, "stage2", s)
        entries[s] = r.randrange(s)
    return ResidueSystem(entries)


@dataclass
class SurvivorSplit:
    interval: object  # SiftedInterval over (x, y]
    primes: list
    smooth: list
    other: list

    def total(self) -> int:
        return self.interval.count()


def survivors_after_small(cfg: StagedConfig, sys12: ResidueSystem) -> SurvivorSplit:
    """Sift (x, y] by stages 1-2 and classify survivors.

    Survivors are split into primes of (x, y], z-smooth numbers (every
    prime factor <= z, counted exactly by trial removal), and the rest.
    """
    th = thresholds(cfg)
    interval = sift(sys12, cfg.x + 1, th.y)
    prime_set = set(int(p) for p in sieve_interval(cfg.x + 1, th.y))
    small = [int(p) for p in primes_up_to(int(th.z))]
    primes_out, smooth_out, other_out = [], [], []
    for n in interval.survivor_list():
        if n in prime_set:
            primes_out.append(n)
            continue
        m = n
        for p in small:
            while m % p == 0:
                m //= p
        (smooth_out if m == 1 else other_out).append(n)
    return SurvivorSplit(interval=interval, primes=primes_out, smooth=smooth_out, other=other_out)


@dataclass
class PipelineInstance:
    """Edge-distribution bundle for stage 3.

    The cover instance works on vertex ids 0..len(values)-1; values maps ids
    back to surviving primes.  Each index belongs to one sieving prime p,
    and every support edge remembers the smallest anchor n that realizes it
    (distinct anchors can intersect the survivor set identically).
    """

    cover: nib.CoverInstance
    values: list  # vertex id -> surviving prime q
    index_primes: list  # index id -> sieving prime p
    anchors: list  # index id -> {edge -> representative n}
    offsets: tuple
    C_measured: float
    skipped_primes: list  # primes with no nonempty edge (or filtered out)


def _sieving_primes(cfg: StagedConfig):
    return [int(p) for p in sieve_interval(cfg.x // 2 + 1, cfg.x) if p > cfg.x / 2]


def build_edge_distributions(cfg: StagedConfig, split: SurvivorSplit,
                             weight_ctx: PairWeightContext = None) -> PipelineInstance:
    """For each sieving prime, the distribution of its survivor edge.

    An anchor n yields the edge {n + h_i p} intersected with the surviving
    primes.  In uniform mode anchors with nonempty edges are equally likely;
    in sieve mode anchor probabilities are proportional to the pair weight
    w(p, n), whose mass on empty-edge anchors becomes an explicit remainder.
    """
    cfg.validate()
    th = thresholds(cfg)
    r = cfg.r or default_r(cfg.x)
    offsets = admissible_tuple(r, cfg.tuple_style).offsets
    values = sorted(split.primes)
    vmap = {q: i for i, q in enumerate(values)}
    if not values:
        raise ValueError("no surviving primes to cover")

    if cfg.weights == "sieve" and weight_ctx is None:
        weight_ctx = PairWeightContext(offsets, cfg.x)

    index_primes = []
    anchors = []
    dists = {}
    skipped = []
    rounds_flat = []
    for p in _sieving_primes(cfg):
        edge_by_anchor = {}
        for q in values:
            for h in offsets:
                n = q - h * p
                if n in edge_by_anchor:
                    continue
                edge = frozenset(
                    vmap[n + hh * p] for hh in offsets if (n + hh * p) in vmap
                )
                edge_by_anchor[n] = edge
        if not edge_by_anchor:
            skipped.append(p)
            continue

        merged = {}  # edge -> (representative anchor, probability mass)
        if cfg.weights == "uniform":
            mass = 1.0 / len(edge_by_anchor)
            for n in sorted(edge_by_anchor):
                e = edge_by_anchor[n]
                rep, q_acc = merged.get(e, (n, 0.0))
                merged[e] = (min(rep, n), q_acc + mass)
        else:
            total = weight_ctx.sum_over_support(p, th.y)
            if total <= 0:
                skipped.append(p)
                continue
            for n in sorted(edge_by_anchor):
                w = weight_ctx.weight(p, n, th.y)
                if w <= 0:
                    continue
                e = edge_by_anchor[n]
                rep, q_acc = merged.get(e, (n, 0.0))
                merged[e] = (min(rep, n), q_acc + w / total)
            if not merged:
                skipped.append(p)
                continue

        atoms = [(e, q) for e, (rep, q) in sorted(merged.items(), key=lambda kv: kv[1][0])]
        idx = len(index_primes)
        index_primes.append(p)
        anchors.append({e: rep for e, (rep, q) in merged.items()})
        dists[idx] = nib.EdgeDist(atoms=atoms)
        rounds_flat.append(idx)

    if not index_primes:
        raise ValueError("every sieving prime has an empty edge distribution")

    degree = [0.0] * len(values)
    max_vertex_prob = 0.0
    for idx, p in enumerate(index_primes):
        for v, q in dists[idx].vertex_probs().items():
            degree[v] += q
            max_vertex_prob = max(max_vertex_prob, q)
    C_measured = sum(degree) / len(degree)

    r_max = len(offsets)
    cover = nib.CoverInstance(
        n_vertices=len(values),
        rounds=[rounds_flat],
        dist=dists,
        # delta records the measured sparsity witness max P(v in e_p); the
        # full hypothesis extremes come from check_hypotheses on demand
        params=nib.NibbleParams(
            delta=max_vertex_prob, r_max=r_max, A=2 * r_max + 2, D=1.0, kappa=1e-300
        ),
    )
    return PipelineInstance(
        cover=cover,
        values=values,
        index_primes=index_primes,
        anchors=anchors,
        offsets=offsets,
        C_measured=C_measured,
        skipped_primes=skipped,
    )


def _filter_atypical(cfg: StagedConfig, pinst: PipelineInstance, sys2: ResidueSystem):
    """Optional emulation of the proof's conditioning: drop primes whose
    all-shifts-survive probability strays from sigma^r.  Experimental."""
    small = sys2.entries
    sigma = sigma_of(sorted(small))
    r = len(pinst.offsets)
    tol = cfg.filter_tol or 1.0 / math.log(cfg.x) ** 3
    target = sigma**r
    keep = []
    for idx, p in enumerate(pinst.index_primes):
        X_p = 0.0
        for e, q in pinst.cover.dist[idx].atoms:
            n = pinst.anchors[idx][e]
            if all(
                all((n + h * p) % s != a for s, a in small.items())
                for h in pinst.offsets
            ):
                X_p += q
        if abs(X_p / target - 1) <= tol:
            keep.append(idx)
    return keep


def _paper_round_lengths(C: float, m: int):
    """Membership interval lengths 5^(1-j) log 5 / C, scaled to fit [0, 1]."""
    lengths = [5 ** (1 - j) * math.log(5) / C for j in range(1, m + 1)]
    total = sum(lengths)
    if total > 1:
        lengths = [l / total for l in lengths]
    return lengths


def stage3_select(cfg: StagedConfig, pinst: PipelineInstance) -> dict:
    """Choose an anchor n_p (or skip) for every sieving prime."""
    cfg.validate()
    method = cfg.stage3_method
    chosen_n = {p: None for p in pinst.skipped_primes}

    if method == "none":
        for p in pinst.index_primes:
            chosen_n[p] = None
        return chosen_n

    if method == "independent":
        for idx, p in enumerate(pinst.index_primes):
            rng = stream(cfg.seed, "stage3", p)
            pick = nib.independent_select(
                nib.CoverInstance(
                    n_vertices=pinst.cover.n_vertices,
                    rounds=[[idx]],
                    dist={idx: pinst.cover.dist[idx]},
                    params=pinst.cover.params,
                ),
                rng,
            )[idx]
            chosen_n[p] = pinst.anchors[idx][pick] if pick else None
        return chosen_n

    if method == "greedy":
        order = list(range(len(pinst.index_primes)))
        stream(cfg.seed, "stage3-order").shuffle(order)
        uncovered = set(range(pinst.cover.n_vertices))
        for idx in order:
            p = pinst.index_primes[idx]
            best = None
            for e, q in pinst.cover.dist[idx].atoms:
                gain = len(e & uncovered)
                rep = pinst.anchors[idx][e]
                key = (-gain, rep)
                if best is None or key < best[0]:
                    best = (key, e, rep)
            _, edge, rep = best
            uncovered -= edge
            chosen_n[p] = rep
        return chosen_n

    # nibble: round membership via the geometric interval recipe
    m = cfg.nibble_rounds or default_rounds(cfg.x)
    lengths = _paper_round_lengths(pinst.C_measured, m)
    bounds = []
    acc = 0.0
    for l in lengths:
        acc += l
        bounds.append(acc)
    rounds = [[] for _ in range(m)]
    for idx, p in enumerate(pinst.index_primes):
        t = stream(cfg.seed, "stage3-round", p).random()
        for j, b in enumerate(bounds):
            if t < b:
                rounds[j].append(idx)
                break
        else:
            chosen_n[p] = None  # outside every membership interval
    rounds = [blk for blk in rounds if blk]
    if not rounds:
        for p in pinst.index_primes:
            chosen_n.setdefault(p, None)
        return chosen_n
    inst = nib.CoverInstance(
        n_vertices=pinst.cover.n_vertices,
        rounds=rounds,
        dist=pinst.cover.dist,
        params=pinst.cover.params,
    )
    result = nib.run_cover(inst, stream(cfg.seed, "stage3-nibble"))
    for blk in rounds:
        for idx in blk:
            p = pinst.index_primes[idx]
            pick = result.chosen[idx]
            chosen_n[p] = pinst.anchors[idx][pick] if pick else None
    return chosen_n


def final_matching(cfg: StagedConfig, residual_survivors) -> ResidueSystem:
    """Assign each leftover survivor its own fresh prime in (x, C_extra x].

    Survivors and primes are paired in increasing order; a fresh prime p'
    covers its survivor through the class n mod p'.  Exceeding the budget
    raises with the C_extra that would have sufficed.
    """
    residual = sorted(residual_survivors)
    if not residual:
        return ResidueSystem({})
    hi = int(cfg.C_extra * cfg.x)
    fresh = [int(p) for p in sieve_interval(cfg.x + 1, hi)]
    if len(residual) > len(fresh):
        # estimate the budget that would work: primes thin out slowly, so
        # scale the span proportionally with slack
        needed_ratio = len(residual) / max(len(fresh), 1)
        raise BudgetError(
            needed=len(residual),
            available=len(fresh),
            required_C_extra=cfg.C_extra * needed_ratio * 1.5,
        )
    entries = {}
    for n, p in zip(residual, fresh):
        entries[p] = n % p
    return ResidueSystem(entries)


# -- orchestration ---------------------------------------------------------------


@dataclass
class PipelineReport:
    x: int
    y: int
    v: float
    z: float
    c: float
    seed: int
    mode: str
    method: str
    sigma: float
    interval_size: int
    survivors_after_stage1: int
    survivors_after_stage12: int
    prime_survivors: int
    smooth_survivors: int
    other_survivors: int
    stage3_indices: int
    stage3_assigned: int
    stage3_skips: int
    residual_after_stage3: int
    extra_primes_used: int
    achieved_y: int
    C_measured: float
    C_target: float  # 1/c, the expected order of the covering constant
    prime_survivor_target: float  # 80 c x log2 x / log x
    prime_survivor_ratio: float
    y_formula: float
    achieved_ratio: float

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=False, separators=(",", ":")) + "\n"


def run_pipeline(cfg: StagedConfig):
    """Execute all stages; returns (report, combined ResidueSystem).

    The combined system is re-verified from scratch: a full sift of
    (x, achieved_y] must leave zero survivors.
    """
    cfg.validate()
    th = thresholds(cfg)
    l1, l2, l3 = _iterated_logs(cfg.x)

    s1 = stage1_zero_classes(cfg)
    s2 = stage2_random_small(cfg)
    sys12 = s1.merged(s2)
    small = sorted(s2.entries)
    sigma = sigma_of(small)

    after1 = sift(s1, cfg.x + 1, th.y).count()
    split = survivors_after_small(cfg, sys12)

    stage3_entries = {}
    skips = 0
    n_indices = 0
    C_measured = 0.0
    if cfg.stage3_method != "none" and split.primes:
        pinst = build_edge_distributions(cfg, split)
        if cfg.filter_atypical:
            keep = set(_filter_atypical(cfg, pinst, s2))
            dropped = [
                pinst.index_primes[i]
                for i in range(len(pinst.index_primes))
                if i not in keep
            ]
            filtered_map = {i: pinst.cover.dist[i] for i in keep}
            if keep:
                kept_sorted = sorted(keep)
                remap = {old: new for new, old in enumerate(kept_sorted)}
                pinst = PipelineInstance(
                    cover=nib.CoverInstance(
                        n_vertices=pinst.cover.n_vertices,
                        rounds=[[remap[i] for i in kept_sorted]],
                        dist={remap[i]: filtered_map[i] for i in kept_sorted},
                        params=pinst.cover.params,
                    ),
                    values=pinst.values,
                    index_primes=[pinst.index_primes[i] for i in kept_sorted],
                    anchors=[pinst.anchors[i] for i in kept_sorted],
                    offsets=pinst.offsets,
                    C_measured=pinst.C_measured,
                    skipped_primes=pinst.skipped_primes + dropped,
                )
            else:
                pinst = replace(pinst, skipped_primes=pinst.skipped_primes + dropped)
        n_indices = len(pinst.index_primes)
        C_measured = pinst.C_measured
        chosen_n = stage3_select(cfg, pinst)
        for p, n in chosen_n.items():
            if n is None:
                skips += 1
            else:
                stage3_entries[p] = n % p
    sys3 = ResidueSystem(stage3_entries)
    sys123 = sys12.merged(sys3)

    residual = sift(sys123, cfg.x + 1, th.y).survivor_list()
    ext = final_matching(cfg, residual)
    combined = sys123.merged(ext)

    check = sift(combined, cfg.x + 1, th.y)
    if check.count() != 0:
        raise VerificationError(
            f"cover check failed: first uncovered at {check.first_survivor()}"
        )
    achieved_y = th.y

    target_prime_survivors = 80 * cfg.c * cfg.x * l2 / l1
    y_formula = cfg.c * cfg.x * l1 * max(1.0, l3) / max(1.0, l2)
    report = PipelineReport(
        x=cfg.x,
        y=th.y,
        v=th.v,
        z=th.z,
        c=cfg.c,
        seed=cfg.seed,
        mode=cfg.mode,
        method=cfg.stage3_method,
        sigma=sigma,
        interval_size=th.y - cfg.x,
        survivors_after_stage1=after1,
        survivors_after_stage12=split.total(),
        prime_survivors=len(split.primes),
        smooth_survivors=len(split.smooth),
        other_survivors=len(split.other),
        stage3_indices=n_indices,
        stage3_assigned=len(stage3_entries),
        stage3_skips=skips,
        residual_after_stage3=len(residual),
        extra_primes_used=len(ext),
        achieved_y=achieved_y,
        C_measured=C_measured,
        C_target=1.0 / cfg.c,
        prime_survivor_target=target_prime_survivors,
        prime_survivor_ratio=len(split.primes) / target_prime_survivors,
        y_formula=y_formula,
        achieved_ratio=achieved_y / y_formula,
    )
    return report, combined
