"""Directed acyclic capacitated networks with sources, terminals and flows.

Everything downstream works on two graph values: a `Network` (the physical
topology) and an `AugmentedNetwork` (the same graph plus a virtual super
source wired to every source node, with virtual capacities equal to the
per-source entropies).  Both are immutable after construction and safe to
share across threads; all operations here are pure functions of their inputs.

Units: capacities and rates are nats per transmission, costs are per unit
flow.
"""

import json
from collections import namedtuple

import numpy as np

from . import kernels

#: comparison tolerance for flow arithmetic
EPS = 1e-9

#: capacities are rescaled so the largest one is at most this before max-flow
CAP_SCALE_LIMIT = 1e6

Edge = namedtuple("Edge", ["tail", "head", "capacity", "cost"])


class NetworkError(ValueError):
    """Malformed network input (cycles, bad ids, negative capacities...)."""


class InfeasibleError(RuntimeError):
    """The requested allocation problem has an empty feasible set."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class Network:
    """Directed acyclic graph with edge capacities/costs and node roles.

    Parameters
    ----------
    nodes : iterable of node ids (ints)
    edges : iterable of (tail, head, capacity, cost)
    sources : ordered list of source node ids
    terminals : list of terminal node ids
    coords : optional dict id -> (x, y) planar coordinates in the unit square
    """

    def __init__(self, nodes, edges, sources, terminals, coords=None):
        self.nodes = [int(v) for v in nodes]
        if len(set(self.nodes)) != len(self.nodes):
            raise NetworkError("duplicate node ids")
        self.node_index = {v: i for i, v in enumerate(self.nodes)}
        self.edges = [Edge(int(t), int(h), float(c), float(f))
                      for t, h, c, f in edges]
        self.sources = [int(v) for v in sources]
        self.terminals = [int(v) for v in terminals]
        self.coords = dict(coords) if coords else None
        self._validate()
        self.capacities = np.array([e.capacity for e in self.edges])
        self.costs = np.array([e.cost for e in self.edges])

    def _validate(self):
        for e in self.edges:
            if e.tail not in self.node_index or e.head not in self.node_index:
                raise NetworkError(f"edge {e} references unknown node")
            if e.tail == e.head:
                raise NetworkError(f"self loop at node {e.tail}")
            if not (np.isfinite(e.capacity) and e.capacity >= 0):
                raise NetworkError(f"bad capacity on edge {e}")
            if not (np.isfinite(e.cost) and e.cost >= 0):
                raise NetworkError(f"bad cost on edge {e}")
        roles = set(self.sources) | set(self.terminals)
        if not roles <= set(self.nodes):
            raise NetworkError("source/terminal ids not among nodes")
        if set(self.sources) & set(self.terminals):
            raise NetworkError("sources and terminals must be disjoint")
        self._topo_order()  # raises on cycles

    def _topo_order(self):
        """Topological order of node ids; NetworkError if the graph cycles."""
        indeg = {v: 0 for v in self.nodes}
        succ = {v: [] for v in self.nodes}
        for e in self.edges:
            indeg[e.head] += 1
            succ[e.tail].append(e.head)
        stack = [v for v in self.nodes if indeg[v] == 0]
        order = []
        while stack:
            v = stack.pop()
            order.append(v)
            for w in succ[v]:
                indeg[w] -= 1
                if indeg[w] == 0:
                    stack.append(w)
        if len(order) != len(self.nodes):
            raise NetworkError("edge set is not acyclic")
        return order

    @property
    def n_sources(self):
        return len(self.sources)

    def out_edges(self, v):
        return [i for i, e in enumerate(self.edges) if e.tail == v]

    def in_edges(self, v):
        return [i for i, e in enumerate(self.edges) if e.head == v]

    # ---- instance file format ------------------------------------------
    def to_dict(self):
        nodes = []
        for v in self.nodes:
            entry = {"id": v}
            if self.coords and v in self.coords:
                entry["x"], entry["y"] = self.coords[v]
            nodes.append(entry)
        return {
            "nodes": nodes,
            "edges": [{"tail": e.tail, "head": e.head,
                       "capacity": e.capacity, "cost": e.cost}
                      for e in self.edges],
            "sources": list(self.sources),
            "terminals": list(self.terminals),
        }

    @classmethod
    def from_dict(cls, data):
        coords = {}
        nodes = []
        for entry in data["nodes"]:
            nodes.append(entry["id"])
            if "x" in entry and "y" in entry:
                coords[entry["id"]] = (entry["x"], entry["y"])
        edges = [(e["tail"], e["head"], e["capacity"], e["cost"])
                 for e in data["edges"]]
        return cls(nodes, edges, data["sources"], data["terminals"],
                   coords=coords or None)

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


class AugmentedNetwork(Network):
    """A Network plus a virtual super source feeding every source node.

    Virtual edges carry capacity equal to the per-source entropy and zero
    cost; they are appended after the physical edges, so edge index ``i <
    n_physical`` iff the edge is physical.
    """

    def __init__(self, base, marginal_entropies):
        ents = [float(h) for h in marginal_entropies]
        if len(ents) != base.n_sources:
            raise NetworkError(
                f"need {base.n_sources} entropies, got {len(ents)}")
        if base.n_sources == 0:
            raise NetworkError("network has no sources")
        if any(h <= 0 for h in ents):
            raise NetworkError("marginal entropies must be positive")
        s_star = max(base.nodes) + 1
        edges = [tuple(e) for e in base.edges]
        edges += [(s_star, v, h, 0.0) for v, h in zip(base.sources, ents)]
        coords = dict(base.coords) if base.coords else None
        super().__init__(list(base.nodes) + [s_star], edges,
                         base.sources, base.terminals, coords=coords)
        self.base = base
        self.s_star = s_star
        self.n_physical = len(base.edges)
        self.marginal_entropies = np.array(ents)

    def virtual_edge_index(self, source):
        """Edge index of the virtual arc feeding the given source node."""
        return self.n_physical + self.sources.index(source)


class FlowAssignment:
    """Per-terminal virtual flows, shared physical flow, per-terminal rates.

    ``x`` maps terminal id -> array over the edges of the augmented graph,
    ``z`` is the physical (max-of-flows) variable on the same index set and
    ``rates`` maps terminal id -> per-source rate vector.  ``total_rate`` is
    the multicast session rate (the joint entropy for lossless problems).
    """

    def __init__(self, z, x, rates, total_rate):
        self.z = np.asarray(z, dtype=float)
        self.x = {int(t): np.asarray(v, dtype=float) for t, v in x.items()}
        self.rates = {int(t): np.asarray(r, dtype=float)
                      for t, r in rates.items()}
        self.total_rate = float(total_rate)

    def to_dict(self, g):
        return {
            "total_rate": self.total_rate,
            "z": {f"{e.tail}->{e.head}#{i}": self.z[i]
                  for i, e in enumerate(g.edges)},
            "terminals": {
                str(t): {
                    "x": {f"{e.tail}->{e.head}#{i}": self.x[t][i]
                          for i, e in enumerate(g.edges)},
                    "rates": list(self.rates[t]),
                }
                for t in self.x
            },
        }


def build_augmented(net, marginal_entropies):
    """Attach the virtual super source; see `AugmentedNetwork`."""
    return AugmentedNetwork(net, marginal_entropies)


def _edge_arrays(net):
    idx = net.node_index
    tails = np.array([idx[e.tail] for e in net.edges], dtype=np.int64)
    heads = np.array([idx[e.head] for e in net.edges], dtype=np.int64)
    caps = np.array([e.capacity for e in net.edges], dtype=np.float64)
    return tails, heads, caps


def max_flow(net, src, sink):
    """Exact max-flow value (== min-cut capacity) from src to sink."""
    value, _, _ = max_flow_detailed(net, src, sink)
    return value


def max_flow_detailed(net, src, sink):
    """Max flow plus the per-edge flows and the source-side min-cut set.

    The cut set is the residual-reachable node set, so
    ``sum(cap(e) for e crossing the cut) == value`` up to tolerance; tests
    rely on this to confirm max-flow/min-cut agreement on every instance.
    """
    if src == sink:
        raise NetworkError("source equals sink")
    if src not in net.node_index or sink not in net.node_index:
        raise NetworkError("unknown node id in max-flow query")
    tails, heads, caps = _edge_arrays(net)
    scale = max(1.0, caps.max(initial=0.0) / CAP_SCALE_LIMIT)
    value, flows = kernels.dinic_maxflow(
        tails, heads, caps / scale, len(net.nodes),
        net.node_index[src], net.node_index[sink], EPS)
    value *= scale
    flows = flows * scale

    # residual-reachable side of the cut
    n = len(net.nodes)
    res_fwd = [[] for _ in range(n)]
    for i in range(len(net.edges)):
        if caps[i] - flows[i] > EPS * scale:
            res_fwd[tails[i]].append(heads[i])
        if flows[i] > EPS * scale:
            res_fwd[heads[i]].append(tails[i])
    seen = np.zeros(n, dtype=bool)
    stack = [net.node_index[src]]
    seen[stack[0]] = True
    while stack:
        u = stack.pop()
        for v in res_fwd[u]:
            if not seen[v]:
                seen[v] = True
                stack.append(v)
    cut = {net.nodes[i] for i in range(n) if seen[i]}
    return value, flows, cut


def infinite_capacity(net):
    """Finite surrogate for 'unbounded' merge edges: total capacity + 1."""
    return float(sum(e.capacity for e in net.edges)) + 1.0


def min_cut_subset(net, subset, terminal):
    """Min cut between a set of source nodes and one terminal.

    Wires a temporary super node to every node in ``subset`` with effectively
    infinite capacity and runs max-flow from it.
    """
    subset = list(subset)
    if not subset:
        raise NetworkError("empty source subset")
    if terminal in subset:
        raise NetworkError("terminal contained in source subset")
    big = infinite_capacity(net)
    super_id = max(net.nodes) + 1
    edges = [tuple(e) for e in net.edges]
    edges += [(super_id, v, big, 0.0) for v in subset]
    merged = Network(list(net.nodes) + [super_id], edges, [], [])
    return max_flow(merged, super_id, terminal)


def all_subset_mincuts(net, sources, terminal):
    """min-cut(B, terminal) for every nonempty B, keyed by source bitmask.

    Shares one arc layout across all 2^n - 1 queries: a super node feeds
    every source through a mergeable arc whose capacity is toggled between
    zero and the infinite surrogate per subset.
    """
    n = len(sources)
    idx = net.node_index
    big = infinite_capacity(net)
    tails = np.array([idx[e.tail] for e in net.edges]
                     + [len(net.nodes)] * n, dtype=np.int64)
    heads = np.array([idx[e.head] for e in net.edges]
                     + [idx[s] for s in sources], dtype=np.int64)
    caps = np.concatenate([net.capacities, np.zeros(n)])
    scale = max(1.0, max(caps.max(initial=0.0), big) / CAP_SCALE_LIMIT)
    n_e = len(net.edges)
    t_idx = idx[terminal]
    out = {}
    for mask in range(1, 1 << n):
        for i in range(n):
            caps[n_e + i] = big if mask >> i & 1 else 0.0
        value, _ = kernels.dinic_maxflow(
            tails, heads, caps / scale, len(net.nodes) + 1,
            len(net.nodes), t_idx, EPS)
        out[mask] = value * scale
    return out


class FeasibilityReport:
    """Outcome of the rate-region / capacity-region intersection test."""

    def __init__(self, feasible, witnesses, violations):
        self.feasible = feasible
        #: terminal id -> witness rate vector (only for satisfiable terminals)
        self.witnesses = witnesses
        #: terminal id -> (worst subset mask, cut value, required rank value)
        self.violations = violations

    def __bool__(self):
        return self.feasible


def check_feasibility(net, region, marginal_entropies=None,
                      max_sources=12):
    """Decide whether every terminal can receive a region rate vector.

    For each terminal the polyhedron ``{R : sum_B R >= g(B), sum_B R <=
    min-cut(B, T)}`` over all nonempty source subsets B is checked for
    non-emptiness with an LP (minimizing the sum rate, so the witness is
    sum-rate tight).  Exponential in the number of sources; refuses to run
    above ``max_sources``.
    """
    from . import lpcore

    n = net.n_sources
    if n == 0:
        raise NetworkError("network has no sources")
    if n > max_sources:
        raise NetworkError(
            f"exhaustive feasibility check limited to {max_sources} sources")
    masks = list(range(1, 1 << n))
    witnesses = {}
    violations = {}
    feasible = True
    for t in net.terminals:
        cuts = all_subset_mincuts(net, net.sources, t)
        rows = []
        rhs = []
        for mask in masks:
            ind = np.array([(mask >> i) & 1 for i in range(n)], dtype=float)
            rows.append(-ind)           # sum_B R >= g(B)
            rhs.append(-region.value_mask(mask))
            rows.append(ind)            # sum_B R <= min-cut(B, T)
            rhs.append(cuts[mask])
        ub = None
        if marginal_entropies is not None:
            ub = np.asarray(marginal_entropies, dtype=float)
        lp = lpcore.LinearProgram(
            c=np.ones(n), a_ub=np.array(rows), b_ub=np.array(rhs),
            lb=np.zeros(n), ub=ub)
        res = lpcore.solve_lp(lp)
        if res.status == "optimal":
            witnesses[t] = res.x
        else:
            feasible = False
            worst = max(masks, key=lambda m: region.value_mask(m) - cuts[m])
            violations[t] = (worst, cuts[worst], region.value_mask(worst))
    return FeasibilityReport(feasible, witnesses, violations)


class FlowValidationReport:
    """Max constraint residuals of a flow assignment, by category."""

    def __init__(self, capacity, coupling, balance, rate_link, tol):
        self.capacity = capacity
        self.coupling = coupling
        self.balance = balance
        self.rate_link = rate_link
        self.tol = tol

    @property
    def max_violation(self):
        return max(self.capacity, self.coupling, self.balance, self.rate_link)

    @property
    def ok(self):
        return self.max_violation <= self.tol

    def __repr__(self):
        return (f"FlowValidationReport(capacity={self.capacity:.3g}, "
                f"coupling={self.coupling:.3g}, balance={self.balance:.3g}, "
                f"rate_link={self.rate_link:.3g}, ok={self.ok})")


def validate_flow(fa, g, tol=1e-6):
    """Residuals of capacity, x<=z coupling, balance and rate-link checks.

    Balance at the super source must equal +total_rate, at each terminal
    (for its own commodity) -total_rate, zero elsewhere.  Report-only: never
    raises on violations.
    """
    caps = g.capacities
    cap_v = max(np.max(fa.z - caps, initial=0.0),
                np.max(-fa.z, initial=0.0))
    coup_v = 0.0
    bal_v = 0.0
    rate_v = 0.0
    for t in g.terminals:
        x = fa.x[t]
        if x.shape != fa.z.shape:
            raise NetworkError("flow vector length mismatch")
        coup_v = max(coup_v, np.max(x - fa.z, initial=0.0),
                     np.max(-x, initial=0.0))
        div = {v: 0.0 for v in g.nodes}
        for i, e in enumerate(g.edges):
            div[e.tail] += x[i]
            div[e.head] -= x[i]
        for v in g.nodes:
            want = 0.0
            if v == g.s_star:
                want = fa.total_rate
            elif v == t:
                want = -fa.total_rate
            bal_v = max(bal_v, abs(div[v] - want))
        for j, s in enumerate(g.sources):
            rate_v = max(rate_v,
                         fa.rates[t][j] - x[g.virtual_edge_index(s)])
    return FlowValidationReport(cap_v, coup_v, bal_v, rate_v, tol)


def induced_subgraph(g, z, tol=EPS):
    """Subgraph keeping edges with flow above tol, recapacitated to the flow.

    This is the graph a converged physical flow certifies: the min cut of
    every source subset to every terminal in it must still clear the rate
    region's rank values.  The result is a plain `Network` over the augmented
    node set (surviving virtual edges included); the super source id is kept
    on the ``s_star`` attribute.
    """
    z = np.asarray(z, dtype=float)
    if len(z) != len(g.edges):
        raise NetworkError("flow vector length mismatch")
    if np.any(z < -tol):
        raise NetworkError("negative flow entries")
    edges = [(e.tail, e.head, z[i], e.cost)
             for i, e in enumerate(g.edges) if z[i] > tol]
    sub = Network(list(g.nodes), edges, g.sources, g.terminals,
                  coords=g.coords)
    sub.s_star = g.s_star
    return sub
