"""Successive-shortest-path min-cost flow on unit-capacity networks.

Shortest paths are found with SPFA (queue-based Bellman-Ford) over the
residual graph; edge costs may be negative, and the input graph is a DAG,
so no negative cycles exist. A node's outgoing edges are scanned in
insertion order and distances update only on strict improvement, so path
selection is deterministic: cost ties resolve to the first path discovered
in that fixed order.
"""
from __future__ import annotations

from collections import deque

INF = float("inf")
EPS = 1e-12


class MinCostFlow:
    """Unit-augmenting min-cost flow; push while the total strictly decreases."""

    def __init__(self, n_nodes: int):
        self.n = n_nodes
        # edge arrays; paired forward/backward edges at ids 2k, 2k+1
        self.to: list[int] = []
        self.cap: list[int] = []
        self.cost: list[float] = []
        self.adj: list[list[int]] = [[] for _ in range(n_nodes)]

    def add_edge(self, u: int, v: int, cap: int, cost: float) -> int:
        """Returns the forward edge id; the reverse edge is id ^ 1."""
        eid = len(self.to)
        self.to.extend((v, u))
        self.cap.extend((cap, 0))
        self.cost.extend((cost, -cost))
        self.adj[u].append(eid)
        self.adj[v].append(eid + 1)
        return eid

    def flow_on(self, eid: int) -> int:
        """Units pushed through a forward edge."""
        return self.cap[eid ^ 1]

    def _shortest_path(self, s: int, t: int):
        dist = [INF] * self.n
        parent_edge = [-1] * self.n
        in_queue = [False] * self.n
        dist[s] = 0.0
        queue = deque([s])
        in_queue[s] = True
        while queue:
            u = queue.popleft()
            in_queue[u] = False
            du = dist[u]
            for eid in self.adj[u]:
                if self.cap[eid] <= 0:
                    continue
                v = self.to[eid]
                nd = du + self.cost[eid]
                if nd < dist[v] - EPS:
                    dist[v] = nd
                    parent_edge[v] = eid
                    if not in_queue[v]:
                        queue.append(v)
                        in_queue[v] = True
        return dist[t], parent_edge

    def run(self, s: int, t: int) -> tuple[int, float]:
        """Augment unit flows while each shortest s-t path has negative cost."""
        flow = 0
        total_cost = 0.0
        while True:
            path_cost, parent_edge = self._shortest_path(s, t)
            if not path_cost < -EPS:
                break
            v = t
            while v != s:
                eid = parent_edge[v]
                self.cap[eid] -= 1
                self.cap[eid ^ 1] += 1
                v = self.to[eid ^ 1]
            flow += 1
            total_cost += path_cost
        return flow, total_cost
