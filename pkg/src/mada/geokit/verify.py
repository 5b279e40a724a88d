"""Geometry verification: bounding-box congruence, best-match vertex
bijection between two models, and token-set similarity of command scripts."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import GeoModel
from .retrieval import tokenize

# Exact search is affordable up to this many vertices; beyond it a greedy
# matcher with adjacency repair takes over.
EXACT_LIMIT = 10


class EmptyModel(Exception):
    """A check needed vertices but the model has none."""


class TopologyMismatch(Exception):
    """The two models cannot be matched: counts, degrees, or adjacency differ."""


class DistanceExceeded(Exception):
    """A bijection exists but its worst vertex distance is over the limit."""

    def __init__(self, achieved: float, limit: float):
        super().__init__(f"best bijection reaches {achieved:.6g}, limit {limit:.6g}")
        self.achieved = achieved
        self.limit = limit


def bounding_box(model: GeoModel) -> tuple[float, float, float, float]:
    if not model.vertices:
        raise EmptyModel("model has no vertices")
    xs = [p[0] for p in model.vertices.values()]
    ys = [p[1] for p in model.vertices.values()]
    return (min(xs), min(ys), max(xs), max(ys))


def bbox_congruent(a: GeoModel, b: GeoModel, tol: float) -> bool:
    """True when every bounding-box corner coordinate agrees within tol."""
    box_a = bounding_box(a)
    box_b = bounding_box(b)
    return all(abs(p - q) <= tol for p, q in zip(box_a, box_b))


@dataclass
class BijectionResult:
    mapping: dict[int, int]
    max_distance: float


def _adjacency(model: GeoModel, keep: set[int]) -> dict[int, set[int]]:
    adj: dict[int, set[int]] = {vid: set() for vid in keep}
    for curve in model.curves.values():
        if curve.v1 in keep and curve.v2 in keep:
            adj[curve.v1].add(curve.v2)
            adj[curve.v2].add(curve.v1)
    return adj


def _dist(p: tuple[float, float], q: tuple[float, float]) -> float:
    return math.hypot(p[0] - q[0], p[1] - q[1])


def best_match_bijection(a: GeoModel, b: GeoModel, max_dist: float) -> BijectionResult:
    """Match every vertex of `a` to a distinct vertex of `b`, preserving
    adjacency, minimizing the worst pairwise distance.

    Vertices of `b` outside `a`'s bounding box (expanded by max_dist) are
    ignored, so extra geometry in `b` does not break the match.  Exhaustive
    search up to EXACT_LIMIT vertices; greedy nearest-neighbor with
    adjacency repair above that.
    """
    if not a.vertices:
        raise EmptyModel("model has no vertices")
    if not b.vertices:
        raise EmptyModel("model has no vertices")
    x0, y0, x1, y1 = bounding_box(a)
    keep_b = {
        vid for vid, (x, y) in b.vertices.items()
        if x0 - max_dist <= x <= x1 + max_dist and y0 - max_dist <= y <= y1 + max_dist
    }
    keep_a = set(a.vertices)
    if len(keep_a) != len(keep_b):
        raise TopologyMismatch(
            f"vertex counts differ: {len(keep_a)} vs {len(keep_b)} in range"
        )
    adj_a = _adjacency(a, keep_a)
    adj_b = _adjacency(b, keep_b)
    degrees_a = sorted(len(adj_a[v]) for v in keep_a)
    degrees_b = sorted(len(adj_b[v]) for v in keep_b)
    if degrees_a != degrees_b:
        raise TopologyMismatch(f"degree multisets differ: {degrees_a} vs {degrees_b}")

    if len(keep_a) <= EXACT_LIMIT:
        result = _exact_bijection(a, b, keep_a, keep_b, adj_a, adj_b)
    else:
        result = _greedy_bijection(a, b, keep_a, keep_b, adj_a, adj_b)
    if result is None:
        raise TopologyMismatch("no adjacency-preserving bijection exists")
    if result.max_distance > max_dist:
        raise DistanceExceeded(result.max_distance, max_dist)
    return result


def _exact_bijection(a, b, keep_a, keep_b, adj_a, adj_b) -> BijectionResult | None:
    """Backtracking over adjacency-preserving bijections, minimizing the
    maximum vertex distance; prunes branches that cannot beat the best."""
    # Assign high-degree vertices first: fewer candidates, earlier pruning.
    order = sorted(keep_a, key=lambda v: (-len(adj_a[v]), v))
    b_ids = sorted(keep_b)
    best: dict[str, object] = {"mapping": None, "worst": math.inf}

    def compatible(av: int, bv: int, assigned: dict[int, int]) -> bool:
        if len(adj_a[av]) != len(adj_b[bv]):
            return False
        for done_a, done_b in assigned.items():
            if (done_a in adj_a[av]) != (done_b in adj_b[bv]):
                return False
        return True

    def extend(idx: int, assigned: dict[int, int], used: set[int], worst: float):
        if worst >= best["worst"]:
            return
        if idx == len(order):
            best["mapping"] = dict(assigned)
            best["worst"] = worst
            return
        av = order[idx]
        pa = a.vertices[av]
        candidates = sorted(
            (bv for bv in b_ids if bv not in used),
            key=lambda bv: _dist(pa, b.vertices[bv]),
        )
        for bv in candidates:
            d = _dist(pa, b.vertices[bv])
            if max(worst, d) >= best["worst"]:
                break
            if not compatible(av, bv, assigned):
                continue
            assigned[av] = bv
            used.add(bv)
            extend(idx + 1, assigned, used, max(worst, d))
            del assigned[av]
            used.discard(bv)

    extend(0, {}, set(), 0.0)
    if best["mapping"] is None:
        return None
    return BijectionResult(mapping=best["mapping"], max_distance=best["worst"])


def _greedy_bijection(a, b, keep_a, keep_b, adj_a, adj_b) -> BijectionResult | None:
    """Nearest-neighbor assignment with a bounded swap-repair pass for
    adjacency violations.  Not optimal, but fast on large meshes."""
    order = sorted(keep_a, key=lambda v: (-len(adj_a[v]), v))
    mapping: dict[int, int] = {}
    used: set[int] = set()
    for av in order:
        pa = a.vertices[av]
        candidates = sorted(
            (bv for bv in keep_b if bv not in used and len(adj_b[bv]) == len(adj_a[av])),
            key=lambda bv: _dist(pa, b.vertices[bv]),
        )
        if not candidates:
            return None
        mapping[av] = candidates[0]
        used.add(candidates[0])

    def violations() -> list[tuple[int, int]]:
        bad = []
        for av in keep_a:
            for nbr in adj_a[av]:
                if mapping[nbr] not in adj_b[mapping[av]] and av < nbr:
                    bad.append((av, nbr))
        return bad

    # Swap assignments pairwise while that strictly reduces violations.
    for _ in range(4 * len(keep_a)):
        bad = violations()
        if not bad:
            break
        improved = False
        involved = sorted({v for pair in bad for v in pair})
        count = len(bad)
        for i, u in enumerate(involved):
            for w in involved[i + 1:]:
                mapping[u], mapping[w] = mapping[w], mapping[u]
                if len(violations()) < count:
                    improved = True
                    break
                mapping[u], mapping[w] = mapping[w], mapping[u]
            if improved:
                break
        if not improved:
            return None
    if violations():
        return None
    worst = max(_dist(a.vertices[av], b.vertices[bv]) for av, bv in mapping.items())
    return BijectionResult(mapping=mapping, max_distance=worst)


def textual_similarity(candidate: str, reference: str) -> float:
    """Jaccard similarity of the token sets of two command scripts.

    Line order does not matter; comments and blank lines are ignored.
    """
    def token_set(script: str) -> set[str]:
        out: set[str] = set()
        for raw in script.splitlines():
            text = raw.split("#", 1)[0].strip()
            if text:
                out.update(tokenize(text))
        return out

    ref = token_set(reference)
    if not ref:
        raise ValueError("reference script has no tokens")
    cand = token_set(candidate)
    union = ref | cand
    return len(ref & cand) / len(union)
