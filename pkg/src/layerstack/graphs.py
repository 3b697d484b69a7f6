"""Depth/occlusion graph model, proto-ordering and the inpaint-order passes.

Edge conventions: a depth edge (i, j) means i is closer to the camera
than j; an occlusion edge (i, j) means i occludes j. Bidirectional pairs
are legal and encode equal mean depth / mutual occlusion respectively.
Depth values grow with distance from the camera.
"""

from dataclasses import dataclass

from .errors import InvariantError


@dataclass(frozen=True)
class SceneGraphs:
    nodes: tuple
    depth_edges: frozenset
    occlusion_edges: frozenset
    max_depth: dict
    mean_depth: dict

    def __post_init__(self):
        nodes = tuple(self.nodes)
        known = set(nodes)
        depth_edges = frozenset(tuple(e) for e in self.depth_edges)
        occlusion_edges = frozenset(tuple(e) for e in self.occlusion_edges)
        for name, edges in (("depth", depth_edges), ("occlusion", occlusion_edges)):
            for i, j in edges:
                if i == j:
                    raise InvariantError(f"self-edge {i}->{j} in {name} graph")
                if i not in known or j not in known:
                    raise InvariantError(f"{name} edge {i}->{j} references unknown node")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "depth_edges", depth_edges)
        object.__setattr__(self, "occlusion_edges", occlusion_edges)
        object.__setattr__(self, "max_depth", dict(self.max_depth))
        object.__setattr__(self, "mean_depth", dict(self.mean_depth))

    def occludes(self, i, j) -> bool:
        return (i, j) in self.occlusion_edges

    def mutual_occlusion(self, i, j) -> bool:
        return (i, j) in self.occlusion_edges and (j, i) in self.occlusion_edges

    def as_dict(self):
        return {
            "nodes": list(self.nodes),
            "depth_edges": sorted(list(e) for e in self.depth_edges),
            "occlusion_edges": sorted(list(e) for e in self.occlusion_edges),
            "max_depth": {str(k): v for k, v in self.max_depth.items()},
            "mean_depth": {str(k): v for k, v in self.mean_depth.items()},
        }

    @classmethod
    def from_dict(cls, data, node_type=int):
        return cls(
            nodes=tuple(node_type(n) for n in data["nodes"]),
            depth_edges=frozenset((node_type(i), node_type(j)) for i, j in data["depth_edges"]),
            occlusion_edges=frozenset((node_type(i), node_type(j)) for i, j in data["occlusion_edges"]),
            max_depth={node_type(k): v for k, v in data["max_depth"].items()},
            mean_depth={node_type(k): v for k, v in data["mean_depth"].items()},
        )


def depth_outdegree(graphs: SceneGraphs, node) -> int:
    """Number of depth edges leaving ``node``, i.e. instances behind it."""
    if node not in graphs.nodes:
        raise InvariantError(f"unknown node {node!r}")
    return sum(1 for (i, _) in graphs.depth_edges if i == node)


def order_instances(graphs: SceneGraphs, initial_order=None) -> list:
    """Three-pass inpaint ordering over the scene graphs.

    Pass 1 sorts by ascending depth outdegree (farthest first; the sort is
    stable so ties keep the ``initial_order`` position). Pass 2 swaps each
    scanned pair where the earlier instance one-way-occludes the later
    one. Pass 3 swaps mutually occluding pairs whose max depths are
    inverted. Swaps are applied in place during the literal double scans.
    """
    nodes = list(initial_order) if initial_order is not None else list(graphs.nodes)
    if set(nodes) != set(graphs.nodes):
        raise InvariantError("initial order is not a permutation of the nodes")

    order = sorted(nodes, key=lambda n: depth_outdegree(graphs, n))

    n = len(order)
    for i in range(n - 1):
        for j in range(i + 1, n):
            if graphs.occludes(order[i], order[j]) and not graphs.occludes(order[j], order[i]):
                order[i], order[j] = order[j], order[i]

    for i in range(n - 1):
        for j in range(i + 1, n):
            if graphs.mutual_occlusion(order[i], order[j]):
                if graphs.max_depth[order[i]] < graphs.max_depth[order[j]]:
                    order[i], order[j] = order[j], order[i]

    return order


def depth_only_order(graphs: SceneGraphs, initial_order=None) -> list:
    """Pass 1 alone: ascending depth outdegree (farthest first)."""
    nodes = list(initial_order) if initial_order is not None else list(graphs.nodes)
    return sorted(nodes, key=lambda n: depth_outdegree(graphs, n))


def occlusion_resolved_order(graphs: SceneGraphs, initial_order=None) -> list:
    """Passes 1 and 2 without the mutual-occlusion adjustment."""
    order = depth_only_order(graphs, initial_order)
    n = len(order)
    for i in range(n - 1):
        for j in range(i + 1, n):
            if graphs.occludes(order[i], order[j]) and not graphs.occludes(order[j], order[i]):
                order[i], order[j] = order[j], order[i]
    return order


def bbox_intersection_area(a, b) -> int:
    """Intersection area of two (x, y, w, h) boxes."""
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    w = min(ax + aw, bx + bw) - max(ax, bx)
    h = min(ay + ah, by + bh) - max(ay, by)
    return max(0, w) * max(0, h)


def cluster_by_overlap(bboxes) -> list[list[int]]:
    """Connected components of the positive-bbox-intersection graph.

    Returns clusters as lists of indices into ``bboxes``; clusters and
    their members keep first-seen index order.
    """
    n = len(bboxes)
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i in range(n):
        for j in range(i + 1, n):
            if bbox_intersection_area(bboxes[i], bboxes[j]) > 0:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)

    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return [groups[root] for root in sorted(groups)]


def proto_order(clusters, bbox_areas, mean_depths) -> list:
    """Extraction order: big clusters first, closest instance first within.

    Clusters are sorted by descending largest-member bbox area; members by
    ascending mean depth. Ties keep the incoming order (stable sorts), so
    the result is deterministic.
    """
    seen = [m for cluster in clusters for m in cluster]
    if len(seen) != len(set(seen)):
        raise InvariantError("an instance appears in more than one cluster")
    ordered_clusters = sorted(clusters, key=lambda c: -max(bbox_areas[m] for m in c))
    order = []
    for cluster in ordered_clusters:
        order.extend(sorted(cluster, key=lambda m: mean_depths[m]))
    return order
