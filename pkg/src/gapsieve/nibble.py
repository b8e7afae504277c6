"""Semi-random ("nibble") covering engine with variable-size random edges.

The engine selects one edge per index across m rounds.  Within round j each
index i samples from its edge distribution conditioned to lie inside the
current survivor set W and reweighted by the survival target P_{j-1}(edge),
which cancels the size bias against large edges.  Indices whose
normalization factor X_i(W) drifts too far from 1 are skipped (empty edge)
for that run.

Quantities:
    d_{I_j}(v)  normalized degree: sum over round-j indices of P(v in e_i)
    P_j(v)      survival target: P_0 = 1, P_{j+1} = P_j * exp(-d_{j+1}/P_j)
    X_i(W)      normalization: sum over edges e inside W of P(e_i=e)/P_{j-1}(e),
                counting the empty-edge remainder mass (P_{j-1}(empty) = 1)

Probabilities may be floats or Fractions; with Fractions (and a profile
whose survival targets stay rational) the full outcome distribution of the
process can be enumerated exactly.
"""

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np


@dataclass(frozen=True)
class NibbleParams:
    delta: float
    r_max: int
    A: float
    D: float
    kappa: float
    C0: float = 1.0


@dataclass
class EdgeDist:
    """Finite edge distribution: subsets of V with probabilities summing <= 1.

    The missing mass is an explicit remainder on the empty edge.  Instances
    may share one EdgeDist object across many indices; the engine exploits
    that to compute per-round normalization factors once per distinct object.
    """

    atoms: list  # [(frozenset of vertex ids, probability)]

    def total(self):
        return sum(q for _, q in self.atoms)

    def remainder(self):
        rem = 1 - self.total()
        if isinstance(rem, Fraction):
            return rem if rem > 0 else Fraction(0)
        return max(0.0, float(rem))

    def vertex_probs(self) -> dict:
        probs = {}
        for e, q in self.atoms:
            for v in e:
                probs[v] = probs.get(v, 0) + q
        return probs

    def max_edge_size(self) -> int:
        return max((len(e) for e, _ in self.atoms), default=0)


@dataclass
class CoverInstance:
    """Vertices 0..n_vertices-1, disjoint rounds of indices, one EdgeDist per index."""

    n_vertices: int
    rounds: list  # [[index ids in round 1], [round 2], ...]
    dist: dict  # index id -> EdgeDist (objects may be shared)
    params: NibbleParams

    @property
    def m(self) -> int:
        return len(self.rounds)

    def all_indices(self):
        for block in self.rounds:
            yield from block

    def validate(self) -> None:
        seen = set()
        for block in self.rounds:
            if not block:
                raise ValueError("rounds must be nonempty")
            for i in block:
                if i in seen:
                    raise ValueError(f"index {i} appears in two rounds")
                seen.add(i)
        checked = set()  # shared EdgeDist objects are validated once
        for i in seen:
            d = self.dist[i]
            if id(d) in checked:
                continue
            checked.add(id(d))
            if d.total() > 1 + 1e-12:
                raise ValueError(f"index {i}: probabilities sum above 1")
            for e, q in d.atoms:
                if q < 0:
                    raise ValueError(f"index {i}: negative probability")
                if len(e) > self.params.r_max:
                    raise ValueError(f"index {i}: edge larger than r_max")
                for v in e:
                    if not 0 <= v < self.n_vertices:
                        raise ValueError(f"index {i}: vertex {v} out of range")


class DegreeProfile:
    """Normalized degrees d[j] and survival targets P[j] as float arrays.

    d[j][v] for j = 1..m (d[0] is zeros); P[j][v] for j = 0..m with
    P[0] = 1 and P[j+1] = P[j] * exp(-d[j+1] / P[j]).
    """

    def __init__(self, d_rows):
        n = len(d_rows[0]) if d_rows else 0
        self.m = len(d_rows)
        self.d = [np.zeros(n)] + [np.asarray(row, dtype=float) for row in d_rows]
        self.P = [np.ones(n)]
        for j in range(1, self.m + 1):
            prev = self.P[j - 1]
            self.P.append(prev * np.exp(-self.d[j] / prev))

    def d_vertex(self, j: int, v: int) -> float:
        return float(self.d[j][v])

    def P_vertex(self, j: int, v: int) -> float:
        return float(self.P[j][v])

    def P_edge(self, j: int, edge) -> float:
        row = self.P[j]
        out = 1.0
        for v in edge:
            out *= row[v]
        return float(out)


def degree_profile(inst: CoverInstance) -> DegreeProfile:
    """Exact degree sums and the P recursion for an instance."""
    n = inst.n_vertices
    vec_cache = {}
    rows = []
    for block in inst.rounds:
        row = np.zeros(n)
        counts = {}
        for i in block:
            d = inst.dist[i]
            counts[id(d)] = (d, counts.get(id(d), (d, 0))[1] + 1)
        for d, cnt in counts.values():
            key = id(d)
            if key not in vec_cache:
                vec = np.zeros(n)
                for v, q in d.vertex_probs().items():
                    vec[v] = float(q)
                vec_cache[key] = vec
            row += cnt * vec_cache[key]
        rows.append(row)
    return DegreeProfile(rows)


class ExactProfile:
    """Survival targets in exact arithmetic, for enumeration tests.

    P values stay Fractions as long as the recursion multiplier is exp(0);
    a vertex whose degree becomes nonzero has an irrational target from the
    next round on and is marked tainted (None).  Tests may also construct
    this class directly to inject chosen rational targets.
    """

    def __init__(self, m: int, d: dict, P: dict):
        self.m = m
        self._d = d  # (j, v) -> Fraction
        self._P = P  # (j, v) -> Fraction | None

    @classmethod
    def from_instance(cls, inst: CoverInstance) -> "ExactProfile":
        d = {}
        P = {}
        for v in range(inst.n_vertices):
            P[(0, v)] = Fraction(1)
        for j, block in enumerate(inst.rounds, start=1):
            deg = {}
            for i in block:
                for v, q in inst.dist[i].vertex_probs().items():
                    deg[v] = deg.get(v, Fraction(0)) + Fraction(q)
            for v in range(inst.n_vertices):
                dv = deg.get(v, Fraction(0))
                d[(j, v)] = dv
                prev = P[(j - 1, v)]
                if prev is None or dv != 0:
                    P[(j, v)] = None
                else:
                    P[(j, v)] = prev
        return cls(len(inst.rounds), d, P)

    def d_vertex(self, j, v):
        return self._d.get((j, v), Fraction(0))

    def P_vertex(self, j, v):
        val = self._P[(j, v)]
        if val is None:
            raise ValueError(
                f"survival target P_{j}({v}) is irrational; "
                "exact enumeration needs rational targets on every support edge"
            )
        return val

    def P_edge(self, j, edge):
        out = Fraction(1)
        for v in edge:
            out *= self.P_vertex(j, v)
        return out


EMPTY = frozenset()


@dataclass
class RoundStats:
    round: int
    index: int
    X: float
    passed: bool
    w_size: int


@dataclass
class NibbleState:
    W: set
    chosen: dict = field(default_factory=dict)  # index -> frozenset (EMPTY = skip)
    round_log: list = field(default_factory=list)


def default_tol(params: NibbleParams, m: int) -> float:
    """max(delta^(1/(3*10^m)), 0.1), clamped below 1.

    The asymptotic-strength band is hopeless at desk scale; the clamp keeps
    the drift test meaningful (tol < 1 guarantees X = 0 can never pass it).
    """
    if params.delta <= 0:
        return 0.1
    return min(max(params.delta ** (1.0 / (3 * 10**m)), 0.1), 0.999)


def _reweighted_atoms(dist: EdgeDist, profile, j: int, W):
    """In-W atoms with weights P(e)/P_{j-1}(e), plus the remainder weight."""
    atoms = [(e, q / profile.P_edge(j - 1, e)) for e, q in dist.atoms if e <= W]
    return atoms, dist.remainder()


def normalization_factor(inst: CoverInstance, profile, i, j: int, W) -> float:
    """X_i(W) for index i in round j: conditioned, reweighted total mass."""
    atoms, rem = _reweighted_atoms(inst.dist[i], profile, j, W)
    weights = [w for _, w in atoms]
    if any(isinstance(w, Fraction) for w in weights) or isinstance(rem, Fraction):
        return sum(weights, Fraction(0)) + rem
    return math.fsum(weights) + rem


def nibble_round(inst: CoverInstance, profile, state: NibbleState, j: int, rng, tol):
    """Execute round j: sample one edge (or skip) per index, then shrink W.

    All indices of the round sample against the same W; the union of their
    choices is removed only after the whole round has been drawn.
    """
    if not tol < 1:
        raise ValueError("tol must be < 1 so that X = 0 always fails the drift test")
    W = state.W
    w_size = len(W)
    cache = {}
    for i in inst.rounds[j - 1]:
        dist = inst.dist[i]
        key = id(dist)
        if key not in cache:
            atoms, rem = _reweighted_atoms(dist, profile, j, W)
            weights = [w for _, w in atoms]
            X = (math.fsum(weights) if weights else 0.0) + rem
            cum = []
            acc = 0.0
            for w in weights:
                acc += w
                cum.append(acc)
            cache[key] = (atoms, cum, X)
        atoms, cum, X = cache[key]
        passed = abs(X - 1) <= tol
        if not passed:
            state.chosen[i] = EMPTY
        else:
            assert X > 0, "X = 0 cannot pass the drift test with tol < 1"
            u = rng.random() * X
            pos = bisect_right(cum, u)
            state.chosen[i] = atoms[pos][0] if pos < len(atoms) else EMPTY
        state.round_log.append(RoundStats(j, i, float(X), passed, w_size))
    removed = set()
    for i in inst.rounds[j - 1]:
        removed |= state.chosen[i]
    state.W = W - removed
    return state


@dataclass
class CoverResult:
    chosen: dict  # index -> frozenset (EMPTY = no edge)
    leftover: set
    stats: list
    profile: DegreeProfile


def run_cover(inst: CoverInstance, rng, tol=None, profile=None) -> CoverResult:
    """Run all m rounds; m = 0 leaves every vertex uncovered (vacuous case)."""
    inst.validate()
    if profile is None:
        profile = degree_profile(inst)
    if tol is None:
        tol = default_tol(inst.params, inst.m)
    state = NibbleState(W=set(range(inst.n_vertices)))
    for j in range(1, inst.m + 1):
        nibble_round(inst, profile, state, j, rng, tol)
    return CoverResult(
        chosen=state.chosen, leftover=state.W, stats=state.round_log, profile=profile
    )


def independent_select(inst: CoverInstance, rng) -> dict:
    """Baseline: every index samples its raw distribution, no conditioning."""
    chosen = {}
    cum_cache = {}
    for block in inst.rounds:
        for i in block:
            dist = inst.dist[i]
            key = id(dist)
            if key not in cum_cache:
                cum = []
                acc = 0.0
                for _, q in dist.atoms:
                    acc += float(q)
                    cum.append(acc)
                cum_cache[key] = cum
            cum = cum_cache[key]
            u = rng.random()
            pos = bisect_right(cum, u)
            chosen[i] = dist.atoms[pos][0] if pos < len(dist.atoms) else EMPTY
    return chosen


def leftover_of(inst: CoverInstance, chosen: dict) -> set:
    removed = set()
    for e in chosen.values():
        removed |= e
    return set(range(inst.n_vertices)) - removed


# -- hypothesis checking ------------------------------------------------------


@dataclass
class HypothesisReport:
    """Measured extremal values for each covering-theorem hypothesis.

    Reporting only: desk-scale instances always fail the delta-smallness
    bound (its exponent is 10^(m+2)), and the report says so without
    aborting anything.
    """

    max_edge_size: int
    edge_size_ok: bool
    max_sparsity: float  # max over j, i, v of P(v in e_i) * sqrt(#I_j)
    sparsity_ok: bool
    max_codegree: float  # max over j, pairs of sum_i P(v1, v2 in e_i)
    codegree_ok: bool
    max_degree_ratio: float  # max over j, v of d_j(v) / P_{j-1}(v)
    degree_ok: bool
    min_survival: float  # min over j, v of P_j(v)
    survival_ok: bool
    delta_log_bound: float  # log of the smallness threshold
    delta_small_ok: bool

    def all_structural_ok(self) -> bool:
        """Everything except the asymptotic delta-smallness condition."""
        return (
            self.edge_size_ok
            and self.sparsity_ok
            and self.codegree_ok
            and self.degree_ok
            and self.survival_ok
        )


def check_hypotheses(inst: CoverInstance, profile=None) -> HypothesisReport:
    inst.validate()
    p = inst.params
    if profile is None:
        profile = degree_profile(inst)

    max_size = 0
    max_sparsity = 0.0
    max_codeg = 0.0
    for j, block in enumerate(inst.rounds, start=1):
        sqrt_nj = math.sqrt(len(block))
        pair_sums = {}
        seen_dists = {}
        for i in block:
            d = inst.dist[i]
            seen_dists[id(d)] = (d, seen_dists.get(id(d), (d, 0))[1] + 1)
        for d, cnt in seen_dists.values():
            max_size = max(max_size, d.max_edge_size())
            for q in d.vertex_probs().values():
                max_sparsity = max(max_sparsity, float(q) * sqrt_nj)
            for e, q in d.atoms:
                verts = sorted(e)
                for a in range(len(verts)):
                    for b in range(a + 1, len(verts)):
                        key = (verts[a], verts[b])
                        pair_sums[key] = pair_sums.get(key, 0.0) + cnt * float(q)
        if pair_sums:
            max_codeg = max(max_codeg, max(pair_sums.values()))

    max_ratio = 0.0
    min_P = 1.0
    for j in range(1, inst.m + 1):
        prev = profile.P[j - 1]
        ratio = np.max(profile.d[j] / prev) if inst.n_vertices else 0.0
        max_ratio = max(max_ratio, float(ratio))
    for j in range(0, inst.m + 1):
        if inst.n_vertices:
            min_P = min(min_P, float(np.min(profile.P[j])))

    # delta <= (kappa^A / (C0 exp(A D)))^(10^(m+2)), compared in logs
    log_thresh = 10 ** (inst.m + 2) * (
        p.A * math.log(p.kappa) - math.log(p.C0) - p.A * p.D
    )
    delta_ok = p.delta > 0 and math.log(p.delta) <= log_thresh

    return HypothesisReport(
        max_edge_size=max_size,
        edge_size_ok=max_size <= p.r_max,
        max_sparsity=max_sparsity,
        sparsity_ok=max_sparsity <= p.delta + 1e-15,
        max_codegree=max_codeg,
        codegree_ok=max_codeg <= p.delta + 1e-15,
        max_degree_ratio=max_ratio,
        degree_ok=max_ratio <= p.D + 1e-12,
        min_survival=min_P,
        survival_ok=min_P >= p.kappa - 1e-12,
        delta_log_bound=log_thresh,
        delta_small_ok=delta_ok,
    )


# -- uniform-hypergraph wrapper ----------------------------------------------


def uniform_round_counts(n1: int, k: int, m: int) -> list:
    """Round sizes n_j = ceil(n1 * e^{(1-j)/k}) for j = 1..m."""
    return [math.ceil(n1 * math.exp((1 - j) / k)) for j in range(1, m + 1)]


def build_uniform_instance(n_vertices: int, edges, counts) -> CoverInstance:
    """Instance where every index draws uniformly from one edge list."""
    edges = [frozenset(e) for e in edges]
    if not edges:
        raise ValueError("edge list must be nonempty")
    n_edges = len(edges)
    shared = EdgeDist(atoms=[(e, 1.0 / n_edges) for e in edges])

    deg = {}
    pair = {}
    for e in edges:
        verts = sorted(e)
        for v in verts:
            deg[v] = deg.get(v, 0) + 1
        for a in range(len(verts)):
            for b in range(a + 1, len(verts)):
                pair[(verts[a], verts[b])] = pair.get((verts[a], verts[b]), 0) + 1

    r_max = max(len(e) for e in edges)
    m = len(counts)
    n_max = max(counts)
    # smallest delta satisfying the per-round sparsity and codegree bounds
    delta = max(
        max(deg.values()) * math.sqrt(n_max) / n_edges,
        (max(pair.values()) if pair else 0) * n_max / n_edges,
    )

    rounds = []
    nxt = 0
    dist = {}
    for nj in counts:
        block = list(range(nxt, nxt + nj))
        for i in block:
            dist[i] = shared
        rounds.append(block)
        nxt += nj

    inst = CoverInstance(
        n_vertices=n_vertices,
        rounds=rounds,
        dist=dist,
        params=NibbleParams(delta=delta, r_max=r_max, A=2 * r_max * m + 1, D=1.0, kappa=0.0),
    )
    prof = degree_profile(inst)
    max_ratio = max(
        float(np.max(prof.d[j] / prof.P[j - 1])) for j in range(1, m + 1)
    )
    kappa = min(float(np.min(prof.P[j])) for j in range(m + 1))
    inst.params = NibbleParams(
        delta=delta,
        r_max=r_max,
        A=2 * r_max * m + 1,
        D=max_ratio,
        kappa=max(kappa, 1e-300),
    )
    return inst


def cover_uniform(n_vertices: int, edges, counts, rng, tol=None):
    """Nibble-cover with uniformly drawn edges; returns (used edges, leftover, result).

    At most n_1 + ... + n_m nonempty edges are used.
    """
    inst = build_uniform_instance(n_vertices, edges, counts)
    result = run_cover(inst, rng, tol=tol)
    used = [result.chosen[i] for i in inst.all_indices() if result.chosen[i]]
    return used, result.leftover, result


# -- exact outcome enumeration -------------------------------------------------


@dataclass
class ExactDistribution:
    """Full law of the nibble process for a tiny instance.

    outcomes maps a tuple of chosen edges (rounds in order, indices in listed
    order) to its exact probability; survival[v] is the probability vertex v
    is never covered; marginals[i][edge] is the law of each index's choice.
    """

    index_order: tuple
    outcomes: dict
    survival: dict
    marginals: dict


def exact_cover_distribution(inst: CoverInstance, tol, profile=None) -> ExactDistribution:
    """Enumerate every sampling path of run_cover in exact arithmetic.

    Requires Fraction probabilities.  With the derived profile this only
    works when all support vertices keep rational survival targets (degree
    zero until used); tests may inject any rational profile instead.
    """
    inst.validate()
    if profile is None:
        profile = ExactProfile.from_instance(inst)
    tol = Fraction(tol)

    index_order = tuple(inst.all_indices())
    states = {(frozenset(range(inst.n_vertices)), ()): Fraction(1)}
    for j, block in enumerate(inst.rounds, start=1):
        nxt = {}
        for (W, picks), prob in states.items():
            options_per_index = []
            for i in block:
                dist = inst.dist[i]
                atoms = [
                    (e, Fraction(q) / profile.P_edge(j - 1, e))
                    for e, q in dist.atoms
                    if e <= W
                ]
                rem = Fraction(dist.remainder())
                X = sum((w for _, w in atoms), Fraction(0)) + rem
                if abs(X - 1) > tol:
                    options_per_index.append([(EMPTY, Fraction(1))])
                else:
                    opts = [(e, w / X) for e, w in atoms]
                    if rem:
                        opts.append((EMPTY, rem / X))
                    options_per_index.append(opts)
            combos = [((), Fraction(1))]
            for opts in options_per_index:
                combos = [
                    (picked + (e,), pr * q) for picked, pr in combos for e, q in opts if q
                ]
            for picked, pr in combos:
                removed = set()
                for e in picked:
                    removed |= e
                key = (W - removed, picks + picked)
                nxt[key] = nxt.get(key, Fraction(0)) + prob * pr
        states = nxt

    outcomes = {}
    survival = {v: Fraction(0) for v in range(inst.n_vertices)}
    marginals = {i: {} for i in index_order}
    for (W, picks), prob in states.items():
        outcomes[picks] = outcomes.get(picks, Fraction(0)) + prob
        for v in W:
            survival[v] += prob
        for i, e in zip(index_order, picks):
            marginals[i][e] = marginals[i].get(e, Fraction(0)) + prob
    return ExactDistribution(
        index_order=index_order, outcomes=outcomes, survival=survival, marginals=marginals
    )


# -- hypergraph instance file format -------------------------------------------
#
# {"vertices": N, "rounds": [[indices...], ...],
#  "dist": {"index": [[sorted edge, prob], ...], ...},
#  "params": {"delta": ..., "r_max": ..., "A": ..., "D": ..., "kappa": ...}}


def instance_to_json(inst: CoverInstance) -> str:
    import json

    dist_doc = {}
    for i in inst.all_indices():
        dist_doc[str(i)] = [[sorted(e), float(q)] for e, q in inst.dist[i].atoms]
    doc = {
        "vertices": inst.n_vertices,
        "rounds": [list(b) for b in inst.rounds],
        "dist": dist_doc,
        "params": {
            "delta": inst.params.delta,
            "r_max": inst.params.r_max,
            "A": inst.params.A,
            "D": inst.params.D,
            "kappa": inst.params.kappa,
        },
    }
    return json.dumps(doc, separators=(",", ":"), sort_keys=True) + "\n"


def instance_from_json(text: str) -> CoverInstance:
    import json

    doc = json.loads(text)
    params = NibbleParams(
        delta=float(doc["params"]["delta"]),
        r_max=int(doc["params"]["r_max"]),
        A=float(doc["params"]["A"]),
        D=float(doc["params"]["D"]),
        kappa=float(doc["params"]["kappa"]),
    )
    dist = {}
    for key, atoms in doc["dist"].items():
        dist[int(key)] = EdgeDist(
            atoms=[(frozenset(int(v) for v in e), float(q)) for e, q in atoms]
        )
    inst = CoverInstance(
        n_vertices=int(doc["vertices"]),
        rounds=[[int(i) for i in block] for block in doc["rounds"]],
        dist=dist,
        params=params,
    )
    inst.validate()
    return inst


def stats_to_csv(stats) -> str:
    lines = ["round,index,X,F_passed,W_size"]
    for s in stats:
        lines.append(f"{s.round},{s.index},{s.X!r},{int(s.passed)},{s.w_size}")
    return "\n".join(lines) + "\n"
