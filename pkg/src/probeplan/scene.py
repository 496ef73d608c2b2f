"""Scene ingestion, validation and generation.

A scene is a target point, a probe radius r, an enclosing radius R and a
triangle soup. Internally all geometry is translated so the target sits at
the origin; the original coordinates are kept so that saving reproduces the
input exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geometry import (
    DEFAULT_TOL,
    Segment3,
    ToleranceProfile,
    Triangle3,
    norm,
    point_segment_distance3,
    point_triangle_closest,
    seg_triangle_intersect,
    tri_plane_cross_section,
    triangle_boundary_distance,
    unit,
)


class SchemaError(Exception):
    """Scene or trajectory document is structurally malformed."""


class ValidationError(Exception):
    """A scene invariant is violated; the message names it."""


class GenerationFailure(Exception):
    """Rejection sampling could not place the requested obstacles."""


_SCENE_KEYS = {"r", "R", "target", "triangles"}


@dataclass(frozen=True)
class Scene:
    """Validated scene with the target at the origin.

    triangles hold the working (translated) coordinates; triangles_raw and
    target keep the as-loaded coordinates for exact round-trips.
    """

    r: float
    R: float
    target: np.ndarray
    triangles: tuple[Triangle3, ...]
    triangles_raw: np.ndarray  # (n, 3, 3) original coordinates
    tol: ToleranceProfile

    @property
    def n(self) -> int:
        return len(self.triangles)

    def diameter(self) -> float:
        return 2.0 * self.R


@dataclass(frozen=True)
class SceneStats:
    n: int
    edge_count: int          # 3n, before deduplication
    unique_edge_count: int
    vertex_count: int        # unique vertices
    edges_inside: int
    edges_crossing: int
    edges_outside: int


@dataclass(frozen=True)
class SceneEdge:
    """Deduplicated obstacle edge with its owning (triangle, edge-slot) list."""

    index: int
    u: np.ndarray
    v: np.ndarray
    owners: tuple[tuple[int, int], ...]

    def segment(self) -> Segment3:
        return Segment3(self.u, self.v)


@dataclass(frozen=True)
class SceneVertex:
    index: int
    p: np.ndarray
    owners: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class EdgePiece:
    """Maximal sub-segment of an edge lying on one side of sphere C."""

    uid: int
    edge_index: int
    piece_index: int
    u: np.ndarray
    v: np.ndarray
    inside: bool

    def segment(self) -> Segment3:
        return Segment3(self.u, self.v)


# ---------------------------------------------------------------------------
# construction and validation


def build_scene(r: float, triangles: Sequence, target=(0.0, 0.0, 0.0),
                R: Optional[float] = None) -> Scene:
    """Validate raw inputs and assemble a Scene (target moved to the origin)."""
    if not (isinstance(r, (int, float)) and math.isfinite(r) and r > 0):
        raise ValidationError("probe radius r must be a positive finite number")
    target = np.asarray(target, dtype=float)
    if target.shape != (3,) or not np.all(np.isfinite(target)):
        raise ValidationError("target must be a finite 3D point")

    raw = np.asarray(triangles, dtype=float)
    if raw.size == 0:
        raw = np.zeros((0, 3, 3))
    if raw.ndim != 3 or raw.shape[1:] != (3, 3) or not np.all(np.isfinite(raw)):
        raise ValidationError("triangles must be an (n, 3, 3) array of finite coordinates")

    shifted = raw - target
    max_dist = 0.0
    if len(shifted):
        max_dist = float(np.max(np.linalg.norm(shifted.reshape(-1, 3), axis=1)))
    if R is None:
        R = max(1.05 * max_dist, float(r))
    if not (math.isfinite(R) and R > 0):
        raise ValidationError("enclosing radius R must be a positive finite number")
    if r > R:
        raise ValidationError("r exceeds R")

    tol = DEFAULT_TOL.scaled(2.0 * R)
    tris = tuple(Triangle3(v) for v in shifted)
    for i, tri in enumerate(tris):
        if tri.area() <= tol.tol_area:
            raise ValidationError(f"degenerate triangle at index {i}")
        vmax = float(np.max(np.linalg.norm(tri.vertices, axis=1)))
        if vmax >= R:
            raise ValidationError(f"triangle {i} vertex outside enclosing sphere")
        dist, _ = point_triangle_closest(np.zeros(3), tri)
        if dist < tol.tol_incidence:
            raise ValidationError(f"target touches obstacle triangle {i}")

    for i in range(len(tris)):
        for j in range(i + 1, len(tris)):
            if _interior_overlap(tris[i], tris[j], tol):
                raise ValidationError(f"triangles {i} and {j} interpenetrate")

    return Scene(r=float(r), R=float(R), target=target, triangles=tris,
                 triangles_raw=raw, tol=tol)


def scene_from_dict(doc: dict) -> Scene:
    if not isinstance(doc, dict):
        raise SchemaError("scene document must be a JSON object")
    unknown = set(doc) - _SCENE_KEYS
    if unknown:
        raise SchemaError(f"unknown scene keys: {sorted(unknown)}")
    for key in ("r", "target", "triangles"):
        if key not in doc:
            raise SchemaError(f"missing scene key: {key}")
    if not isinstance(doc["r"], (int, float)) or isinstance(doc["r"], bool):
        raise SchemaError("r must be a number")
    if "R" in doc and (not isinstance(doc["R"], (int, float)) or isinstance(doc["R"], bool)):
        raise SchemaError("R must be a number")
    tgt = doc["target"]
    if not (isinstance(tgt, list) and len(tgt) == 3
            and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in tgt)):
        raise SchemaError("target must be a list of three numbers")
    tris = doc["triangles"]
    if not isinstance(tris, list):
        raise SchemaError("triangles must be a list")
    for t in tris:
        if not (isinstance(t, list) and len(t) == 3):
            raise SchemaError("each triangle must list three vertices")
        for p in t:
            if not (isinstance(p, list) and len(p) == 3
                    and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in p)):
                raise SchemaError("each vertex must be a list of three numbers")
    return build_scene(doc["r"], np.asarray(tris, dtype=float) if tris else [],
                       target=tgt, R=doc.get("R"))


def scene_to_dict(scene: Scene) -> dict:
    return {
        "r": scene.r,
        "R": scene.R,
        "target": [float(x) for x in scene.target],
        "triangles": [[[float(x) for x in v] for v in tri] for tri in scene.triangles_raw],
    }


def load_scene(path) -> Scene:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read scene file: {exc}") from exc
    return scene_from_dict(doc)


def save_scene(scene: Scene, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scene_to_dict(scene), fh)
        fh.write("\n")


# ---------------------------------------------------------------------------
# interior disjointness


def _clip_segment_to_triangle(seg: Segment3, tri: Triangle3):
    """Clip a coplanar-ish segment to the closed triangle; None when empty."""
    plane = tri.plane()
    u, v = plane.basis()
    origin = tri.a

    def to2(p):
        w = p - origin
        return np.array([float(np.dot(w, u)), float(np.dot(w, v))])

    t2 = [to2(p) for p in tri.vertices]
    area2 = (t2[1][0] - t2[0][0]) * (t2[2][1] - t2[0][1]) - \
            (t2[2][0] - t2[0][0]) * (t2[1][1] - t2[0][1])
    sgn = 1.0 if area2 >= 0 else -1.0
    p0, p1 = to2(seg.u), to2(seg.v)
    lo, hi = 0.0, 1.0
    for i in range(3):
        a, b = t2[i], t2[(i + 1) % 3]
        e = b - a
        f0 = sgn * ((e[0]) * (p0[1] - a[1]) - (e[1]) * (p0[0] - a[0]))
        f1 = sgn * ((e[0]) * (p1[1] - a[1]) - (e[1]) * (p1[0] - a[0]))
        df = f1 - f0
        if abs(df) < 1e-300:
            if f0 < 0.0:
                return None
            continue
        t_cross = -f0 / df
        if df > 0:
            lo = max(lo, t_cross)
        else:
            hi = min(hi, t_cross)
        if lo > hi:
            return None
    return seg.point_at(lo), seg.point_at(hi)


def _coplanar_interior_overlap(t1: Triangle3, t2: Triangle3, tol: ToleranceProfile) -> bool:
    plane = t1.plane()
    u, v = plane.basis()
    origin = t1.a

    def to2(p):
        w = p - origin
        return np.array([float(np.dot(w, u)), float(np.dot(w, v))])

    a2 = [to2(p) for p in t1.vertices]
    b2 = [to2(p) for p in t2.vertices]

    def strictly_inside(q, poly):
        vals = []
        for i in range(3):
            s, e = poly[i], poly[(i + 1) % 3]
            vals.append((e[0] - s[0]) * (q[1] - s[1]) - (e[1] - s[1]) * (q[0] - s[0]))
        margin = tol.tol_incidence
        return all(x > margin for x in vals) or all(x < -margin for x in vals)

    if any(strictly_inside(q, a2) for q in b2):
        return True
    if any(strictly_inside(q, b2) for q in a2):
        return True
    for i in range(3):
        for j in range(3):
            s0, s1 = a2[i], a2[(i + 1) % 3]
            q0, q1 = b2[j], b2[(j + 1) % 3]
            d1 = s1 - s0
            d2 = q1 - q0
            den = d1[0] * d2[1] - d1[1] * d2[0]
            if abs(den) < 1e-14:
                continue
            t = ((q0[0] - s0[0]) * d2[1] - (q0[1] - s0[1]) * d2[0]) / den
            s = ((q0[0] - s0[0]) * d1[1] - (q0[1] - s0[1]) * d1[0]) / den
            eps = 1e-9
            if eps < t < 1 - eps and eps < s < 1 - eps:
                return True
    return False


def _interior_overlap(t1: Triangle3, t2: Triangle3, tol: ToleranceProfile) -> bool:
    """True when the open interiors of two triangles intersect."""
    cs = tri_plane_cross_section(t2, t1.plane(), tol)
    if cs.kind in ("empty", "point"):
        return False
    if cs.kind == "triangle":
        return _coplanar_interior_overlap(t1, t2, tol)
    piece = _clip_segment_to_triangle(cs.segment, t1)
    if piece is None:
        return False
    p0, p1 = piece
    if norm(p1 - p0) <= 10.0 * tol.tol_len:
        return False
    m = 0.5 * (p0 + p1)
    if triangle_boundary_distance(m, t1) <= tol.tol_incidence:
        return False
    if triangle_boundary_distance(m, t2) <= tol.tol_incidence:
        return False
    return True


# ---------------------------------------------------------------------------
# edges, vertices, classification against sphere C


def unique_edges(scene: Scene) -> list[SceneEdge]:
    """Edges deduplicated by their (sorted) endpoint coordinates."""
    seen: dict[tuple, list] = {}
    order: list[tuple] = []
    for ti, tri in enumerate(scene.triangles):
        vs = tri.vertices
        for ei in range(3):
            a, b = vs[ei], vs[(ei + 1) % 3]
            ka, kb = tuple(a.tolist()), tuple(b.tolist())
            key = (ka, kb) if ka <= kb else (kb, ka)
            if key not in seen:
                seen[key] = [np.asarray(key[0]), np.asarray(key[1]), []]
                order.append(key)
            seen[key][2].append((ti, ei))
    out = []
    for idx, key in enumerate(order):
        u, v, owners = seen[key]
        out.append(SceneEdge(idx, u, v, tuple(owners)))
    return out


def unique_vertices(scene: Scene) -> list[SceneVertex]:
    seen: dict[tuple, list] = {}
    order: list[tuple] = []
    for ti, tri in enumerate(scene.triangles):
        for vi in range(3):
            p = tri.vertices[vi]
            key = tuple(p.tolist())
            if key not in seen:
                seen[key] = [p, []]
                order.append(key)
            seen[key][1].append((ti, vi))
    return [SceneVertex(i, seen[k][0], tuple(seen[k][1])) for i, k in enumerate(order)]


def _split_segment_at_sphere(u: np.ndarray, v: np.ndarray, radius: float) -> list[tuple]:
    """Split [u, v] at its crossings with the sphere |x| = radius.

    Returns (a, b, inside) pieces; tangential grazes do not split.
    """
    d = v - u
    qa = float(np.dot(d, d))
    qb = 2.0 * float(np.dot(u, d))
    qc = float(np.dot(u, u)) - radius * radius
    cuts = [0.0, 1.0]
    disc = qb * qb - 4 * qa * qc
    if disc > 0 and qa > 0:
        sq = math.sqrt(disc)
        for t in ((-qb - sq) / (2 * qa), (-qb + sq) / (2 * qa)):
            if 1e-12 < t < 1 - 1e-12:
                cuts.append(t)
    cuts = sorted(set(cuts))
    pieces = []
    for t0, t1 in zip(cuts[:-1], cuts[1:]):
        if t1 - t0 <= 1e-12:
            continue
        mid = u + 0.5 * (t0 + t1) * d
        inside = bool(norm(mid) < radius)
        a, b = u + t0 * d, u + t1 * d
        if pieces and pieces[-1][2] == inside:
            pieces[-1] = (pieces[-1][0], b, inside)
        else:
            pieces.append((a, b, inside))
    return pieces


def edge_pieces(scene: Scene) -> list[EdgePiece]:
    """Every unique edge split at sphere C into inside/outside pieces."""
    out: list[EdgePiece] = []
    uid = 0
    for e in unique_edges(scene):
        for pi, (a, b, inside) in enumerate(_split_segment_at_sphere(e.u, e.v, scene.r)):
            out.append(EdgePiece(uid, e.index, pi, a, b, inside))
            uid += 1
    return out


def scene_stats(scene: Scene) -> SceneStats:
    edges = unique_edges(scene)
    verts = unique_vertices(scene)
    inside = crossing = outside = 0
    for tri in scene.triangles:
        vs = tri.vertices
        for ei in range(3):
            a, b = vs[ei], vs[(ei + 1) % 3]
            da, db = norm(a), norm(b)
            if da < scene.r and db < scene.r:
                inside += 1
            elif point_segment_distance3(np.zeros(3), a, b) >= scene.r:
                outside += 1
            else:
                crossing += 1
    return SceneStats(
        n=scene.n,
        edge_count=3 * scene.n,
        unique_edge_count=len(edges),
        vertex_count=len(verts),
        edges_inside=inside,
        edges_crossing=crossing,
        edges_outside=outside,
    )


# ---------------------------------------------------------------------------
# generation


def _rotation_about(axis: np.ndarray, angle: float) -> np.ndarray:
    a = unit(axis)
    c, s = math.cos(angle), math.sin(angle)
    K = np.array([[0, -a[2], a[1]], [a[2], 0, -a[0]], [-a[1], a[0], 0]])
    return np.eye(3) * c + s * K + (1 - c) * np.outer(a, a)


def _random_triangle(rng: np.random.Generator, R: float) -> np.ndarray:
    center = rng.normal(size=3)
    center = unit(center) * rng.uniform(0.3, 0.85) * R
    scale = rng.uniform(0.15, 0.45) * R
    for _ in range(32):
        pts = center + rng.normal(size=(3, 3)) * scale * 0.5
        tri = Triangle3(pts)
        if tri.area() > 1e-4 * R * R:
            return pts
    return center + np.array([[0, 0, 0], [scale, 0, 0], [0, scale, 0]])


def _sector_sample_points(b, d, rho, r, count=160):
    """Deterministic coverage of the swept sector, used for clearance checks."""
    bhat = unit(b)
    axis = np.cross(d, -bhat)
    if norm(axis) < 1e-12:
        return [b + s * r * d for s in np.linspace(0.0, 1.0, 12)]
    axis = unit(axis)
    pts = []
    for ang in np.linspace(0.0, rho, 16):
        Rm = _rotation_about(axis, ang)
        w = Rm @ d
        for s in np.linspace(0.15, 1.0, 10):
            pts.append(b + s * r * w)
    return pts


def generate_scene(n: int, seed: int, planted: str = "none") -> Scene:
    """Deterministic random scene; planted modes keep a known trajectory clear."""
    if planted not in ("none", "unarticulated", "articulated"):
        raise ValueError("planted must be one of none|unarticulated|articulated")
    if n < 0:
        raise ValueError("n must be non-negative")
    rng = np.random.default_rng(seed)
    r = 1.0
    R = 4.0

    clear_segments: list[tuple[np.ndarray, np.ndarray]] = []
    clear_points: list[np.ndarray] = []
    if planted == "unarticulated":
        u0 = unit(rng.normal(size=3))
        clear_segments.append((np.zeros(3), R * u0))
    elif planted == "articulated":
        b = r * unit(rng.normal(size=3))
        w = rng.normal(size=3)
        w = unit(w - np.dot(w, unit(b)) * unit(b))
        rho = float(rng.uniform(0.5, 0.5 * math.pi))
        axis = unit(np.cross(unit(b), w)) * (1.0 if rng.random() < 0.5 else -1.0)
        d = _rotation_about(axis, rho) @ (-unit(b))
        lam = float(np.dot(b, d) + math.sqrt(np.dot(b, d) ** 2 + R * R - r * r))
        a = b - lam * d
        c_int = b + r * d
        clear_segments.append((a, c_int))
        clear_points.extend(_sector_sample_points(b, d, rho, r))

    margin = 0.12 * r
    accepted: list[np.ndarray] = []
    tris: list[Triangle3] = []
    consecutive = 0
    while len(accepted) < n:
        if consecutive >= 10_000:
            raise GenerationFailure(f"could not place triangle {len(accepted) + 1}")
        pts = _random_triangle(rng, R)
        tri = Triangle3(pts)
        ok = True
        if float(np.max(np.linalg.norm(pts, axis=1))) >= 0.95 * R:
            ok = False
        if ok:
            dist, _ = point_triangle_closest(np.zeros(3), tri)
            if dist < 0.05 * r:
                ok = False
        if ok:
            for s0, s1 in clear_segments:
                if seg_triangle_intersect(Segment3(s0, s1), tri).hit():
                    ok = False
                    break
                steps = np.linspace(0.0, 1.0, 24)
                if min(point_triangle_closest(s0 + t * (s1 - s0), tri)[0] for t in steps) < margin:
                    ok = False
                    break
        if ok and clear_points:
            if min(point_triangle_closest(p, tri)[0] for p in clear_points) < margin:
                ok = False
        if ok:
            for prev in tris:
                if _interior_overlap(prev, tri, DEFAULT_TOL.scaled(2 * R)):
                    ok = False
                    break
        if not ok:
            consecutive += 1
            continue
        consecutive = 0
        accepted.append(pts)
        tris.append(tri)

    return build_scene(r, np.asarray(accepted) if accepted else [], target=(0.0, 0.0, 0.0), R=R)


def planted_trajectory_params(seed: int):
    """Re-derive the trajectory parameters a planted-articulated scene protects."""
    rng = np.random.default_rng(seed)
    r = 1.0
    b = r * unit(rng.normal(size=3))
    w = rng.normal(size=3)
    w = unit(w - np.dot(w, unit(b)) * unit(b))
    rho = float(rng.uniform(0.5, 0.5 * math.pi))
    axis = unit(np.cross(unit(b), w)) * (1.0 if rng.random() < 0.5 else -1.0)
    d = _rotation_about(axis, rho) @ (-unit(b))
    return b, d, rho


# ---------------------------------------------------------------------------
# canned shells (sealed-target scenes for tests and demos)


_ICOSA_VERTS = None


def _icosahedron():
    global _ICOSA_VERTS
    if _ICOSA_VERTS is None:
        phi = (1 + math.sqrt(5)) / 2
        verts = []
        for a in (-1, 1):
            for b in (-phi, phi):
                verts.extend([(0, a, b), (a, b, 0), (b, 0, a)])
        verts = [unit(np.array(v, dtype=float)) for v in verts]
        faces = []
        for i in range(12):
            for j in range(i + 1, 12):
                for k in range(j + 1, 12):
                    d = sorted([norm(verts[i] - verts[j]), norm(verts[j] - verts[k]),
                                norm(verts[i] - verts[k])])
                    if all(abs(x - d[0]) < 1e-9 for x in d) and d[0] < 1.2:
                        faces.append((i, j, k))
        _ICOSA_VERTS = (verts, faces)
    return _ICOSA_VERTS


def icosphere_shell(radius: float, subdivisions: int = 1) -> np.ndarray:
    """Closed triangulated sphere: 20 * 4**subdivisions triangles."""
    verts, faces = _icosahedron()
    tris = [np.stack([verts[a], verts[b], verts[c]]) for a, b, c in faces]
    for _ in range(subdivisions):
        nxt = []
        for t in tris:
            a, b, c = t
            ab, bc, ca = unit(a + b), unit(b + c), unit(c + a)
            nxt.extend([np.stack([a, ab, ca]), np.stack([ab, b, bc]),
                        np.stack([ca, bc, c]), np.stack([ab, bc, ca])])
        tris = nxt
    return np.asarray(tris) * radius


def box_shell(circumradius: float) -> np.ndarray:
    """Closed 12-triangle box with vertices at the given distance from the origin."""
    s = circumradius / math.sqrt(3.0)
    v = {}
    idx = 0
    corners = []
    for x in (-s, s):
        for y in (-s, s):
            for z in (-s, s):
                corners.append(np.array([x, y, z]))
    # faces as corner index quads (consistent diagonals)
    quads = [
        (0, 1, 3, 2), (4, 6, 7, 5), (0, 4, 5, 1),
        (2, 3, 7, 6), (0, 2, 6, 4), (1, 5, 7, 3),
    ]
    tris = []
    for (a, b, c, d) in quads:
        tris.append(np.stack([corners[a], corners[b], corners[c]]))
        tris.append(np.stack([corners[a], corners[c], corners[d]]))
    return np.asarray(tris)


def sealed_scene(r: float = 1.0, shell_radius: float = 0.5, kind: str = "icosphere",
                 subdivisions: int = 1) -> Scene:
    """Scene whose target is fully enclosed by a triangulated shell."""
    tris = icosphere_shell(shell_radius, subdivisions) if kind == "icosphere" \
        else box_shell(shell_radius)
    return build_scene(r, tris, R=max(2.5 * r, 2.5 * shell_radius))
