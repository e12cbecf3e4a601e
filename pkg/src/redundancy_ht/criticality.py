"""Criticality analysis: lambda*, critical subsets, CRP components and their DAG.

Two independent routes to the critical subsets are provided:

* a brute-force scan of all 2^|S|-1 nonempty type subsets
  (`critical_rate_and_subsets_bruteforce`), and
* the max-flow construction (`crp_components` + `critical_subsets_via_construction`),
  which enumerates CRP components from the residual matching at lambda = lambda*
  and takes unions along topological prefixes.

All structural decisions (equalities like N*lambda* p(T) = mu(T)) are made in
exact rational arithmetic; feeding float models into these routines is rejected.
"""
from __future__ import annotations

import itertools
import random
from collections import deque
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from .errors import CapExceeded, ConsistencyError, ModelError
from .model import Scalar, SystemModel, is_exact

BRUTEFORCE_CAP = 20  # refuse 2^|S| scans beyond this many job types
TOPO_CAP = 12  # refuse materializing Sigma_K beyond this many components


class CrpClass(Enum):
    STRONG_CRP = "StrongCRP"
    WEAK_CRP = "WeakCRP"
    NON_CRP = "NonCRP"


@dataclass(frozen=True)
class CriticalityReport:
    lambda_star: Scalar
    critical_subsets: frozenset  # frozenset of frozensets of type indices
    depth_K: int
    crp_class: CrpClass

    @property
    def critical_types(self) -> frozenset:
        out = set()
        for sub in self.critical_subsets:
            out |= sub
        return frozenset(out)


@dataclass(frozen=True)
class CrpComponent:
    types: frozenset  # job-type indices C_k
    servers: frozenset  # server ids Z_k


@dataclass(frozen=True)
class ComponentDag:
    """CRP components with overflow edges, topological orders and rooted subtrees.

    Components are canonically ordered ascending by (subtree size, min type
    index), which is itself a valid reverse-topological order: every edge
    (i, j) has j < i.
    """

    model: SystemModel
    lambda_star: Scalar
    components: tuple  # tuple of CrpComponent
    edges: frozenset  # (i, j): some type in C_i is compatible with a server in Z_j
    topo_orders: tuple  # all sigma in Sigma_K, each a tuple of component indices
    subtree_nodes: tuple  # per component: frozenset of component indices in its rooted subtree
    subtree_types: tuple  # per component: V_k as frozenset of type indices

    @property
    def K(self) -> int:
        return len(self.components)

    @property
    def critical_types(self) -> frozenset:
        out = set()
        for comp in self.components:
            out |= comp.types
        return frozenset(out)

    @property
    def non_critical_types(self) -> frozenset:
        return frozenset(self.model.type_indices) - self.critical_types

    def p_subtree(self, k: int) -> Scalar:
        return self.model.p_of(self.subtree_types[k])

    def gamma_subtree(self, k: int, traj) -> Scalar:
        return traj.gamma_of(self.subtree_types[k])

    @property
    def subtrees_laminar(self) -> bool:
        """True when any two rooted subtrees are nested or disjoint.

        The subtree product form of the limit law (and the nested-sum
        identity behind it) is valid exactly in this case; two incomparable
        components sharing a descendant break it.
        """
        sets = self.subtree_nodes
        for a, b in itertools.combinations(sets, 2):
            inter = a & b
            if inter and inter != a and inter != b:
                return False
        return True


def _require_exact(model: SystemModel, what: str):
    if not (all(is_exact(m) for m in model.mu) and all(is_exact(p) for p in model.p)
            and is_exact(model.lam)):
        raise ModelError(f"{what} requires an exact-rational model (criticality is an equality test)")


def _nonempty_subsets(n: int):
    for mask in range(1, 1 << n):
        yield frozenset(i for i in range(n) if mask >> i & 1)


def check_stability(model: SystemModel, cap: int = BRUTEFORCE_CAP):
    """Return (stable, witness): stable iff N*lambda*p(T) < mu(T) for all nonempty T.

    On failure the witness is a violating subset of minimum cardinality
    (hence inclusion-minimal).
    """
    if model.n_types > cap:
        raise CapExceeded(f"{model.n_types} job types exceeds the subset-scan cap {cap}")
    n = model.n_servers
    best = None
    for sub in sorted(_nonempty_subsets(model.n_types), key=len):
        if n * model.lam * model.p_of(sub) >= model.mu_of(sub):
            best = sub
            break
    return (best is None), best


def critical_rate_and_subsets_bruteforce(model: SystemModel, cap: int = BRUTEFORCE_CAP) -> CriticalityReport:
    """Scan all nonempty subsets for lambda* = (1/N) min mu(T)/p(T) and the argmin set."""
    _require_exact(model, "brute-force criticality")
    if model.n_types > cap:
        raise CapExceeded(
            f"{model.n_types} job types exceeds the brute-force cap {cap}; "
            "use the construction route (crp_components)")
    n = model.n_servers
    ratios = {sub: Fraction(model.mu_of(sub), n * model.p_of(sub))
              for sub in _nonempty_subsets(model.n_types)}
    lam_star = min(ratios.values())
    critical = frozenset(sub for sub, r in ratios.items() if r == lam_star)
    depth = _longest_nesting_chain(critical)
    return CriticalityReport(
        lambda_star=lam_star,
        critical_subsets=critical,
        depth_K=depth,
        crp_class=_classify(critical, model.n_types),
    )


def _classify(critical_subsets, n_types: int) -> CrpClass:
    if len(critical_subsets) > 1:
        return CrpClass.NON_CRP
    (only,) = critical_subsets
    return CrpClass.STRONG_CRP if len(only) == n_types else CrpClass.WEAK_CRP


def _longest_nesting_chain(subsets) -> int:
    order = sorted(subsets, key=len)
    best = {}
    for i, sub in enumerate(order):
        best[sub] = 1 + max((best[prev] for prev in order[:i] if prev < sub), default=0)
    return max(best.values())


# ---------------------------------------------------------------------------
# Exact max flow (Edmonds-Karp on rational capacities)
# ---------------------------------------------------------------------------

_SRC, _SNK = "src", "snk"


class _FlowNet:
    def __init__(self):
        self.adj = {}  # node -> list of neighbor nodes
        self.cap = {}  # (u, v) -> residual capacity (None = infinite)

    def add_edge(self, u, v, capacity):
        self.adj.setdefault(u, []).append(v)
        self.adj.setdefault(v, []).append(u)
        self.cap[(u, v)] = capacity
        self.cap[(v, u)] = Fraction(0)

    def _residual(self, u, v):
        return self.cap[(u, v)]

    def _bfs_path(self, order_key=None):
        prev = {_SRC: None}
        queue = deque([_SRC])
        while queue:
            u = queue.popleft()
            nbrs = self.adj.get(u, ())
            if order_key is not None:
                nbrs = sorted(nbrs, key=order_key)
            for v in nbrs:
                if v in prev:
                    continue
                r = self._residual(u, v)
                if r is None or r > 0:
                    prev[v] = u
                    if v == _SNK:
                        path = []
                        while v != _SRC:
                            path.append((prev[v], v))
                            v = prev[v]
                        return path[::-1]
                    queue.append(v)
        return None

    def max_flow(self, order_key=None):
        total = Fraction(0)
        while True:
            path = self._bfs_path(order_key)
            if path is None:
                return total
            bottleneck = min((self.cap[e] for e in path if self.cap[e] is not None),
                             default=None)
            if bottleneck is None:
                raise ConsistencyError("unbounded augmenting path")
            for (u, v) in path:
                if self.cap[(u, v)] is not None:
                    self.cap[(u, v)] -= bottleneck
                cv = self.cap[(v, u)]
                self.cap[(v, u)] = (cv if cv is not None else Fraction(0)) + bottleneck
            total += bottleneck

    def src_reachable(self):
        seen = {_SRC}
        queue = deque([_SRC])
        while queue:
            u = queue.popleft()
            for v in self.adj.get(u, ()):
                if v in seen:
                    continue
                r = self._residual(u, v)
                if r is None or r > 0:
                    seen.add(v)
                    queue.append(v)
        return seen


def _build_net(model: SystemModel, lam: Scalar) -> _FlowNet:
    net = _FlowNet()
    n = model.n_servers
    for t in model.type_indices:
        net.add_edge(_SRC, ("t", t), Fraction(n) * lam * model.p[t])
        for srv in model.job_types[t]:
            net.add_edge(("t", t), ("s", srv), None)
    for srv in range(1, n + 1):
        net.add_edge(("s", srv), _SNK, Fraction(model.mu[srv - 1]))
    return net


def _flow_solution(model: SystemModel, lam: Scalar, order_key=None):
    """Max flow at arrival rates N*lam*p_S; returns (value, type->server flow dict)."""
    net = _build_net(model, lam)
    value = net.max_flow(order_key)
    flows = {}
    for t in model.type_indices:
        for srv in model.job_types[t]:
            f = net.cap[(("s", srv), ("t", t))]  # reverse capacity == pushed flow
            if f > 0:
                flows[(t, srv)] = f
    return value, flows


def critical_rate(model: SystemModel) -> Fraction:
    """Exact lambda* via Dinkelbach iteration on max-flow min-cuts.

    Starts from the best singleton ratio and repeatedly replaces the guess
    by the ratio of the min-cut's violating subset; terminates at the exact
    minimum since successive ratios strictly decrease and stay >= lambda*.
    """
    _require_exact(model, "critical_rate")
    n = model.n_servers
    lam = min(Fraction(model.mu_of({t}), n * model.p[t]) for t in model.type_indices)
    while True:
        net = _build_net(model, lam)
        value = net.max_flow()
        if value == n * lam:
            return lam
        reachable = net.src_reachable()
        tight = frozenset(t for t in model.type_indices if ("t", t) in reachable)
        if not tight:
            raise ConsistencyError("min cut yielded no violating subset")
        lam_next = Fraction(model.mu_of(tight), n * model.p_of(tight))
        if lam_next >= lam:
            raise ConsistencyError("Dinkelbach iteration failed to decrease")
        lam = lam_next


def crp_components(model: SystemModel, lam_star: Scalar = None, audit: bool = False) -> ComponentDag:
    """CRP components, DAG, topological orders and rooted subtrees at lambda = lambda*.

    The residual matching consists of the type-server edges carrying positive
    flow in a maximum flow of the criticality network; components are its
    connected pieces restricted to critical job types. With ``audit=True`` the
    flow is re-solved under several augmentation orders and the component
    partition is required to be identical each time.
    """
    _require_exact(model, "crp_components")
    if lam_star is None:
        lam_star = critical_rate(model)
    parts = _component_partition(model, lam_star)
    if audit:
        rng = random.Random(0)
        for _ in range(4):
            perm = {t: rng.random() for t in model.type_indices}
            key = lambda node: (perm.get(node[1], 0) if isinstance(node, tuple) and node[0] == "t"
                                else rng.random())
            other = _component_partition(model, lam_star, order_key=key)
            if {c.types for c in other} != {c.types for c in parts}:
                raise ConsistencyError("max-flow choice changed the component partition")
    return _assemble_dag(model, lam_star, parts)


def _component_partition(model: SystemModel, lam_star, order_key=None):
    n = model.n_servers
    value, flows = _flow_solution(model, lam_star, order_key)
    if value != n * lam_star:
        raise ConsistencyError("max flow at lambda* failed to route all arrivals")
    inflow = {srv: Fraction(0) for srv in range(1, n + 1)}
    for (t, srv), f in flows.items():
        inflow[srv] += f
    saturated = {srv for srv in inflow if inflow[srv] == model.mu[srv - 1]}
    served_by = {}  # server -> types sending it positive flow
    for (t, srv) in flows:
        served_by.setdefault(srv, set()).add(t)

    def is_critical(t0: int) -> bool:
        # Alternating search: type -> all compatible servers, server -> types
        # feeding it. t0 is critical iff no unsaturated server is reachable.
        seen_t, seen_s = {t0}, set()
        stack = [t0]
        while stack:
            t = stack.pop()
            for srv in model.job_types[t]:
                if srv in seen_s:
                    continue
                if srv not in saturated:
                    return False
                seen_s.add(srv)
                for t2 in served_by.get(srv, ()):
                    if t2 not in seen_t:
                        seen_t.add(t2)
                        stack.append(t2)
        return True

    critical_types = {t for t in model.type_indices if is_critical(t)}
    if not critical_types:
        raise ConsistencyError("no critical job types at lambda*")

    # The residual matching holds every type-server edge that carries flow in
    # SOME maximum flow: either positive flow here, or completable through a
    # residual path from the server back to the type (push along the cycle).
    # This makes the matching, and hence the components, flow-invariant.
    matching = set(flows)
    reach_cache = {}
    for t in critical_types:
        for srv in model.job_types[t]:
            if (t, srv) in matching:
                continue
            if srv not in reach_cache:
                reach_cache[srv] = _residual_reachable_types(model, srv, flows,
                                                             inflow, saturated)
            if t in reach_cache[srv]:
                matching.add((t, srv))

    # Connected components of the residual matching restricted to critical types.
    parent = {t: t for t in critical_types}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    match_by_server = {}
    for (t, srv) in matching:
        if t in critical_types:
            match_by_server.setdefault(srv, []).append(t)
    for types_here in match_by_server.values():
        for a, b in zip(types_here, types_here[1:]):
            parent[find(a)] = find(b)

    groups = {}
    for t in critical_types:
        groups.setdefault(find(t), set()).add(t)
    comps = []
    for types_set in groups.values():
        servers = frozenset(srv for (t, srv) in matching if t in types_set)
        comps.append(CrpComponent(types=frozenset(types_set), servers=servers))
    for comp in comps:
        if model.n_servers * lam_star * model.p_of(comp.types) != \
                sum(model.mu[s - 1] for s in comp.servers):
            raise ConsistencyError(
                f"component balance N*lam*p(C)=mu(Z) violated for {comp}")
    return comps


def _residual_reachable_types(model: SystemModel, start_server: int, flows,
                              inflow, saturated):
    """Types reachable from a server in the residual graph of a maximum flow.

    Arcs: server -> type over positive flow; type -> its compatible servers
    (infinite residual); unsaturated server -> sink; sink -> any server with
    positive inflow. The source is a dead end at lambda* and is omitted.
    """
    fed_by = {}
    for (t, srv) in flows:
        fed_by.setdefault(srv, []).append(t)
    seen_t, seen_s = set(), {start_server}
    snk_visited = False
    stack = [("s", start_server)]
    while stack:
        kind, node = stack.pop()
        if kind == "s":
            for t in fed_by.get(node, ()):
                if t not in seen_t:
                    seen_t.add(t)
                    stack.append(("t", t))
            if node not in saturated and not snk_visited:
                snk_visited = True
                for srv in range(1, model.n_servers + 1):
                    if inflow[srv] > 0 and srv not in seen_s:
                        seen_s.add(srv)
                        stack.append(("s", srv))
        else:
            for srv in model.job_types[node]:
                if srv not in seen_s:
                    seen_s.add(srv)
                    stack.append(("s", srv))
    return seen_t


def _assemble_dag(model: SystemModel, lam_star, comps) -> ComponentDag:
    k = len(comps)
    edges = set()
    for i, ci in enumerate(comps):
        for j, cj in enumerate(comps):
            if i == j:
                continue
            if any(model.job_types[t] & cj.servers for t in ci.types):
                edges.add((i, j))
    # rooted subtree of i = components reachable from i along overflow edges
    reach = []
    for i in range(k):
        seen = {i}
        stack = [i]
        while stack:
            u = stack.pop()
            for (a, b) in edges:
                if a == u and b not in seen:
                    seen.add(b)
                    stack.append(b)
        reach.append(frozenset(seen))

    order = sorted(range(k), key=lambda i: (len(reach[i]), min(comps[i].types)))
    rank = {old: new for new, old in enumerate(order)}
    comps2 = tuple(comps[old] for old in order)
    edges2 = frozenset((rank[a], rank[b]) for (a, b) in edges)
    reach2 = tuple(frozenset(rank[x] for x in reach[old]) for old in order)
    for (a, b) in edges2:
        if not b < a:
            raise ConsistencyError("canonical component order is not topological")
    vtypes = tuple(frozenset(t for idx in nodes for t in comps2[idx].types)
                   for nodes in reach2)
    return ComponentDag(
        model=model,
        lambda_star=lam_star,
        components=comps2,
        edges=edges2,
        topo_orders=_all_topo_orders(k, edges2),
        subtree_nodes=reach2,
        subtree_types=vtypes,
    )


def _all_topo_orders(k: int, edges) -> tuple:
    """All component permutations sigma with pos(j) < pos(i) for every edge (i, j)."""
    if k > TOPO_CAP:
        raise CapExceeded(f"K={k} exceeds the Sigma_K materialization cap {TOPO_CAP}")
    # sigma must place the targets (overflow receivers) before the sources,
    # i.e. it is a topological order of the edge-reversed DAG.
    succ = {i: set() for i in range(k)}  # i -> components that must come before i
    for (i, j) in edges:
        succ[i].add(j)
    out = []

    def backtrack(placed, remaining):
        if not remaining:
            out.append(tuple(placed))
            return
        for i in sorted(remaining):
            if succ[i] <= set(placed):
                placed.append(i)
                remaining.remove(i)
                backtrack(placed, remaining)
                remaining.add(i)
                placed.pop()

    backtrack([], set(range(k)))
    return tuple(out)


def critical_subsets_via_construction(dag: ComponentDag) -> frozenset:
    """All unions of topological prefixes of components, deduplicated."""
    out = set()
    for sigma in dag.topo_orders:
        acc = set()
        for i in sigma:
            acc |= dag.components[i].types
            out.add(frozenset(acc))
    return frozenset(out)


def report_from_construction(model: SystemModel, dag: ComponentDag) -> CriticalityReport:
    """A CriticalityReport built from the construction route (no subset scan)."""
    critical = critical_subsets_via_construction(dag)
    return CriticalityReport(
        lambda_star=dag.lambda_star,
        critical_subsets=critical,
        depth_K=dag.K,
        crp_class=_classify(critical, model.n_types),
    )
