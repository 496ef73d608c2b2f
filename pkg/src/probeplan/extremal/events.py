"""Combinatorial event enumeration for extremal trajectories.

Obstacle edges are deduplicated, split at sphere C, and classified once per
scene; each catalog row then iterates tuples of classified pieces, vertices
and tangency elements in a fixed deterministic order.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from ..geometry import norm, point_segment_distance3, point_triangle_closest
from ..scene import EdgePiece, Scene, SceneEdge, SceneVertex, edge_pieces, unique_edges, unique_vertices

SQRT2 = math.sqrt(2.0)

# rows with their support-role signature: (ab, bc, bt, sector, arc) counts
ROW_SIGNATURE = {
    "A1": (1, 1, 1, 1, 0),
    "A2": (1, 2, 1, 0, 0),
    "A3": (1, 1, 2, 0, 0),
    "A4": (1, 0, 1, 2, 0),
    "A5": (1, 0, 2, 1, 0),
    "A6": (2, 0, 1, 1, 0),
    "A7": (2, 1, 0, 1, 0),
    "A8": (2, 1, 1, 0, 0),
    "A9": (2, 2, 0, 0, 0),
    "A10": (2, 0, 2, 0, 0),
    "A11": (2, 0, 0, 2, 0),
    "A12": (3, 1, 0, 0, 0),
    "A13": (3, 0, 1, 0, 0),
    "A14": (3, 0, 0, 1, 0),
    "A15": (4, 0, 0, 0, 0),
    "A16": (1, 0, 1, 0, 1),
    "A17": (1, 1, 1, 0, 1),
    "A18": (1, 0, 1, 1, 1),   # no tuples beyond A16 (see enumerate_row)
    "A19": (1, 0, 2, 0, 1),   # no tuples beyond A16
    "A20": (2, 1, 0, 0, 1),
    "A21": (2, 0, 1, 0, 1),
    "A22": (2, 0, 0, 1, 1),
}

AV_CASES = ("AV1", "AV2", "AV3")
CASE_IDS = tuple(f"A{i}" for i in range(1, 23)) + AV_CASES


@dataclass(frozen=True)
class Support:
    kind: str    # "edge" | "vertex" | "surface"
    index: int   # piece uid for role edges, vertex index, or triangle index
    role: str    # "ab" | "bc" | "bt" | "sector" | "arc"


@dataclass(frozen=True)
class ExtremalEvent:
    case: str
    supports: tuple[Support, ...]

    def key(self) -> tuple:
        return (self.case,) + tuple((s.kind, s.index, s.role) for s in self.supports)


@dataclass(frozen=True)
class SceneIndex:
    """Classified scene geometry shared by enumeration and solving."""

    scene: Scene
    edges: tuple[SceneEdge, ...]
    vertices: tuple[SceneVertex, ...]
    pieces: tuple[EdgePiece, ...]
    out_pieces: tuple[int, ...]      # piece uids, ab-support candidates
    in_pieces: tuple[int, ...]       # piece uids, bt-support candidates
    bc_pieces: tuple[int, ...]       # piece uids within sqrt(2) r of t
    sigma_vertices: tuple[int, ...]  # vertex ids within 2r of t
    inner_vertices: tuple[int, ...]  # vertex ids strictly inside C
    gamma_edges: tuple[int, ...]     # edge ids within 2r of t
    gamma_surfaces: tuple[int, ...]  # triangle ids within 2r of t

    def piece(self, uid: int) -> EdgePiece:
        return self.pieces[uid]

    def vertex(self, vid: int) -> SceneVertex:
        return self.vertices[vid]

    def edge(self, eid: int) -> SceneEdge:
        return self.edges[eid]


def index_scene(scene: Scene) -> SceneIndex:
    edges = tuple(unique_edges(scene))
    vertices = tuple(unique_vertices(scene))
    pieces = tuple(edge_pieces(scene))
    r = scene.r
    origin = np.zeros(3)
    out_p, in_p, bc_p = [], [], []
    for p in pieces:
        if p.inside:
            in_p.append(p.uid)
            bc_p.append(p.uid)
        else:
            out_p.append(p.uid)
            if point_segment_distance3(origin, p.u, p.v) <= SQRT2 * r + scene.tol.tol_incidence:
                bc_p.append(p.uid)
    sig_v = [v.index for v in vertices if norm(v.p) <= 2.0 * r]
    inner_v = [v.index for v in vertices if norm(v.p) < r]
    g_e = [e.index for e in edges
           if point_segment_distance3(origin, e.u, e.v) <= 2.0 * r]
    g_s = [i for i, tri in enumerate(scene.triangles)
           if point_triangle_closest(origin, tri)[0] <= 2.0 * r]
    return SceneIndex(scene=scene, edges=edges, vertices=vertices, pieces=pieces,
                      out_pieces=tuple(out_p), in_pieces=tuple(in_p),
                      bc_pieces=tuple(bc_p), sigma_vertices=tuple(sig_v),
                      inner_vertices=tuple(inner_v), gamma_edges=tuple(g_e),
                      gamma_surfaces=tuple(g_s))


def support_to_dict(index: SceneIndex, s: Support) -> dict:
    if s.kind == "edge" and s.role == "arc":
        ti, ei = index.edge(s.index).owners[0]
        return {"kind": "edge", "triangle": ti, "edge": ei, "role": s.role}
    if s.kind == "edge":
        piece = index.piece(s.index)
        ti, ei = index.edge(piece.edge_index).owners[0]
        return {"kind": "edge", "triangle": ti, "edge": ei, "role": s.role,
                "piece": piece.piece_index}
    if s.kind == "vertex":
        ti, vi = index.vertex(s.index).owners[0]
        return {"kind": "vertex", "triangle": ti, "vertex": vi, "role": s.role}
    return {"kind": "surface", "triangle": s.index, "role": s.role}


# ---------------------------------------------------------------------------
# unarticulated candidates


@dataclass(frozen=True)
class UnarticulatedCandidate:
    case: str                      # "U1" | "U2"
    direction: np.ndarray          # unit ray direction from the target
    supports: tuple[Support, ...]


def enumerate_unarticulated(index: SceneIndex) -> Iterator[UnarticulatedCandidate]:
    """Rays through a vertex, then rays pinned by an edge pair.

    The edge-pair rays come from intersecting the plane spanned by the
    target and the first edge with the second edge.
    """
    tol = index.scene.tol
    for v in index.vertices:
        nv = norm(v.p)
        if nv <= tol.tol_incidence or nv >= index.scene.R:
            continue
        yield UnarticulatedCandidate(
            "U1", v.p / nv, (Support("vertex", v.index, "ab"),))
    for e1, e2 in itertools.permutations(index.edges, 2):
        n = np.cross(e1.u, e1.v)   # normal of plane(t, e1)
        nn = norm(n)
        if nn <= 1e-12:
            continue  # edge collinear with the target
        n = n / nn
        d2 = e2.v - e2.u
        denom = float(np.dot(n, d2))
        if abs(denom) <= 1e-12:
            continue
        s = -float(np.dot(n, e2.u)) / denom
        if s < -1e-9 or s > 1.0 + 1e-9:
            continue
        x = e2.u + min(max(s, 0.0), 1.0) * d2
        nx = norm(x)
        if nx <= tol.tol_incidence:
            continue
        u = x / nx
        # the ray must actually meet e1 at a positive parameter
        d1 = e1.v - e1.u
        m1 = np.cross(e1.u, e1.v)
        # closest approach of line(0, u) with line(e1)
        cr = np.cross(u, d1)
        cr2 = float(np.dot(cr, cr))
        if cr2 <= 1e-18:
            continue
        t1 = float(np.dot(np.cross(-e1.u, d1), cr)) / cr2
        s1 = float(np.dot(np.cross(-e1.u, u), cr)) / cr2
        if t1 <= tol.tol_incidence or not (-1e-9 <= s1 <= 1.0 + 1e-9):
            continue
        if point_segment_distance3(t1 * u, e1.u, e1.v) > tol.tol_incidence:
            continue
        yield UnarticulatedCandidate(
            "U2", u,
            (Support("edge", _piece_of_edge_at(index, e1.index, t1 * u), "ab"),
             Support("edge", _piece_of_edge_at(index, e2.index, x), "ab")))


def _piece_of_edge_at(index: SceneIndex, edge_index: int, point: np.ndarray) -> int:
    """Piece uid of the given edge closest to a contact point."""
    best = None
    for p in index.pieces:
        if p.edge_index != edge_index:
            continue
        d = point_segment_distance3(point, p.u, p.v)
        if best is None or d < best[0]:
            best = (d, p.uid)
    return best[1]


# ---------------------------------------------------------------------------
# articulated event tuples


def enumerate_row(index: SceneIndex, case: str) -> Iterator[ExtremalEvent]:
    """Deterministic tuple stream for one catalog row."""
    out = index.out_pieces
    inn = index.in_pieces
    bc = index.bc_pieces
    sig = index.sigma_vertices
    gammas = [("edge", e) for e in index.gamma_edges] + \
             [("surface", s) for s in index.gamma_surfaces]

    def ev(*supports: Support) -> ExtremalEvent:
        return ExtremalEvent(case, supports)

    def distinct(*uids: int) -> bool:
        return len(set(uids)) == len(uids)

    if case == "A1":
        for ea in out:
            for eb in bc:
                if eb == ea:
                    continue
                for et in inn:
                    if et == eb:
                        continue
                    for v in sig:
                        yield ev(Support("edge", ea, "ab"), Support("edge", eb, "bc"),
                                 Support("edge", et, "bt"), Support("vertex", v, "sector"))
    elif case == "A2":
        for ea in out:
            for eb1, eb2 in itertools.combinations(bc, 2):
                for et in inn:
                    if not distinct(ea, eb1, eb2, et):
                        continue
                    yield ev(Support("edge", ea, "ab"), Support("edge", eb1, "bc"),
                             Support("edge", eb2, "bc"), Support("edge", et, "bt"))
    elif case == "A3":
        for ea in out:
            for eb in bc:
                if eb == ea:
                    continue
                for et1, et2 in itertools.combinations(inn, 2):
                    if not distinct(ea, eb, et1, et2):
                        continue
                    yield ev(Support("edge", ea, "ab"), Support("edge", eb, "bc"),
                             Support("edge", et1, "bt"), Support("edge", et2, "bt"))
    elif case == "A4":
        for ea in out:
            for et in inn:
                for v1, v2 in itertools.combinations(sig, 2):
                    yield ev(Support("edge", ea, "ab"), Support("edge", et, "bt"),
                             Support("vertex", v1, "sector"), Support("vertex", v2, "sector"))
    elif case == "A5":
        for ea in out:
            for et1, et2 in itertools.combinations(inn, 2):
                for v in sig:
                    yield ev(Support("edge", ea, "ab"), Support("edge", et1, "bt"),
                             Support("edge", et2, "bt"), Support("vertex", v, "sector"))
    elif case == "A6":
        for ea1, ea2 in itertools.combinations(out, 2):
            for et in inn:
                for v in sig:
                    yield ev(Support("edge", ea1, "ab"), Support("edge", ea2, "ab"),
                             Support("edge", et, "bt"), Support("vertex", v, "sector"))
    elif case == "A7":
        for ea1, ea2 in itertools.combinations(out, 2):
            for eb in bc:
                if eb in (ea1, ea2):
                    continue
                for v in sig:
                    yield ev(Support("edge", ea1, "ab"), Support("edge", ea2, "ab"),
                             Support("edge", eb, "bc"), Support("vertex", v, "sector"))
    elif case == "A8":
        for ea1, ea2 in itertools.combinations(out, 2):
            for eb in bc:
                for et in inn:
                    if not distinct(ea1, ea2, eb, et):
                        continue
                    yield ev(Support("edge", ea1, "ab"), Support("edge", ea2, "ab"),
                             Support("edge", eb, "bc"), Support("edge", et, "bt"))
    elif case == "A9":
        for ea1, ea2 in itertools.combinations(out, 2):
            for eb1, eb2 in itertools.combinations(bc, 2):
                if not distinct(ea1, ea2, eb1, eb2):
                    continue
                yield ev(Support("edge", ea1, "ab"), Support("edge", ea2, "ab"),
                         Support("edge", eb1, "bc"), Support("edge", eb2, "bc"))
    elif case == "A10":
        for ea1, ea2 in itertools.combinations(out, 2):
            for et1, et2 in itertools.combinations(inn, 2):
                yield ev(Support("edge", ea1, "ab"), Support("edge", ea2, "ab"),
                         Support("edge", et1, "bt"), Support("edge", et2, "bt"))
    elif case == "A11":
        for ea1, ea2 in itertools.combinations(out, 2):
            for v1, v2 in itertools.combinations(sig, 2):
                yield ev(Support("edge", ea1, "ab"), Support("edge", ea2, "ab"),
                         Support("vertex", v1, "sector"), Support("vertex", v2, "sector"))
    elif case == "A12":
        for trio in itertools.combinations(out, 3):
            for eb in bc:
                if eb in trio:
                    continue
                yield ev(*(Support("edge", e, "ab") for e in trio),
                         Support("edge", eb, "bc"))
    elif case == "A13":
        for trio in itertools.combinations(out, 3):
            for et in inn:
                yield ev(*(Support("edge", e, "ab") for e in trio),
                         Support("edge", et, "bt"))
    elif case == "A14":
        for trio in itertools.combinations(out, 3):
            for v in sig:
                yield ev(*(Support("edge", e, "ab") for e in trio),
                         Support("vertex", v, "sector"))
    elif case == "A15":
        for quad in itertools.combinations(out, 4):
            yield ev(*(Support("edge", e, "ab") for e in quad))
    elif case == "A16":
        for ea in out:
            for et in inn:
                for kind, g in gammas:
                    yield ev(Support("edge", ea, "ab"), Support("edge", et, "bt"),
                             Support(kind, g, "arc"))
    elif case == "A17":
        for ea in out:
            for eb in bc:
                if eb == ea:
                    continue
                for et in inn:
                    if et == eb:
                        continue
                    for kind, g in gammas:
                        yield ev(Support("edge", ea, "ab"), Support("edge", eb, "bc"),
                                 Support("edge", et, "bt"), Support(kind, g, "arc"))
    elif case in ("A18", "A19"):
        # their trajectory sets coincide with A16's; no extra tuples
        return
    elif case == "A20":
        for ea1, ea2 in itertools.combinations(out, 2):
            for eb in bc:
                if eb in (ea1, ea2):
                    continue
                for kind, g in gammas:
                    yield ev(Support("edge", ea1, "ab"), Support("edge", ea2, "ab"),
                             Support("edge", eb, "bc"), Support(kind, g, "arc"))
    elif case == "A21":
        for ea1, ea2 in itertools.combinations(out, 2):
            for et in inn:
                for kind, g in gammas:
                    yield ev(Support("edge", ea1, "ab"), Support("edge", ea2, "ab"),
                             Support("edge", et, "bt"), Support(kind, g, "arc"))
    elif case == "A22":
        for ea1, ea2 in itertools.combinations(out, 2):
            for v in sig:
                for kind, g in gammas:
                    yield ev(Support("edge", ea1, "ab"), Support("edge", ea2, "ab"),
                             Support("vertex", v, "sector"), Support(kind, g, "arc"))
    elif case == "AV1":
        for v1, v2 in itertools.combinations(range(len(index.vertices)), 2):
            yield ev(Support("vertex", v1, "ab"), Support("vertex", v2, "ab"))
    elif case == "AV2":
        for v in range(len(index.vertices)):
            for e1, e2 in itertools.combinations(range(len(index.pieces)), 2):
                yield ev(Support("vertex", v, "ab"), Support("edge", e1, "ab"),
                         Support("edge", e2, "ab"))
    elif case == "AV3":
        for v in index.inner_vertices:
            for w in sig:
                if w == v:
                    continue
                yield ev(Support("vertex", v, "bt"), Support("vertex", w, "sector"))
    else:
        raise KeyError(f"unknown case {case}")


def enumerate_articulated(index: SceneIndex) -> Iterator[ExtremalEvent]:
    for case in CASE_IDS:
        yield from enumerate_row(index, case)


def row_event_count(index: SceneIndex, case: str) -> int:
    return sum(1 for _ in enumerate_row(index, case))
