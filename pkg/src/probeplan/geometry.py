"""Geometric primitives and predicates shared by every other module.

All coordinates are numpy float64 arrays. Points and vectors are plain
arrays of shape (3,) (or (2,) for planar work); the small wrapper classes
below only bundle them with validity checks. A single ToleranceProfile
instance controls every fuzzy comparison in the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np


class DegenerateConfiguration(Exception):
    """Raised when a construction admits infinitely many answers."""


# ---------------------------------------------------------------------------
# tolerances


@dataclass(frozen=True)
class ToleranceProfile:
    """Global tolerance policy.

    tol_len / tol_area are length/area scales below which geometry counts as
    degenerate; tol_residual bounds accepted solver residuals; tol_incidence
    is the contact distance under which a touch is declared.
    """

    tol_len: float = 1e-12
    tol_area: float = 1e-12
    tol_unit: float = 1e-9
    tol_residual: float = 1e-10
    tol_incidence: float = 1e-8

    def __post_init__(self):
        for name in ("tol_len", "tol_area", "tol_unit", "tol_residual", "tol_incidence"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.tol_incidence < self.tol_residual:
            raise ValueError("tol_incidence must be >= tol_residual")

    def scaled(self, diameter: float) -> "ToleranceProfile":
        """Profile with the length/area tolerances scaled to a scene diameter."""
        d = max(float(diameter), 1.0)
        return ToleranceProfile(
            tol_len=self.tol_len * d,
            tol_area=self.tol_area * d * d,
            tol_unit=self.tol_unit,
            tol_residual=self.tol_residual,
            tol_incidence=self.tol_incidence,
        )


DEFAULT_TOL = ToleranceProfile()


# ---------------------------------------------------------------------------
# small vector helpers


def vec(*xs) -> np.ndarray:
    return np.asarray(xs, dtype=float)


def norm(v) -> float:
    return float(np.linalg.norm(v))


def unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ValueError("cannot normalize zero vector")
    return v / n


def cross2(a, b) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


def rot2(v, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])


def polar_angle(p) -> float:
    """Angle of a 2D point in [0, 2*pi)."""
    a = math.atan2(p[1], p[0])
    return a + 2.0 * math.pi if a < 0.0 else a


def angle_between(u, v) -> float:
    """Unsigned angle between two 3D vectors, robust near 0 and pi."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    c = float(np.dot(u, v)) / (nu * nv)
    s = float(np.linalg.norm(np.cross(u, v))) / (nu * nv)
    return math.atan2(max(s, 0.0), c)


# ---------------------------------------------------------------------------
# shapes


@dataclass(frozen=True)
class Segment3:
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u", np.asarray(self.u, dtype=float))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float))

    def validate(self, tol: ToleranceProfile = DEFAULT_TOL):
        if not (np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v))):
            raise ValueError("segment coordinates must be finite")
        if norm(self.v - self.u) <= tol.tol_len:
            raise ValueError("degenerate segment")

    @property
    def direction(self) -> np.ndarray:
        return self.v - self.u

    def point_at(self, s: float) -> np.ndarray:
        return self.u + s * (self.v - self.u)

    def length(self) -> float:
        return norm(self.v - self.u)


@dataclass(frozen=True)
class Triangle3:
    vertices: np.ndarray  # shape (3, 3)

    def __post_init__(self):
        object.__setattr__(self, "vertices", np.asarray(self.vertices, dtype=float).reshape(3, 3))

    def validate(self, tol: ToleranceProfile = DEFAULT_TOL):
        if not np.all(np.isfinite(self.vertices)):
            raise ValueError("triangle coordinates must be finite")
        if self.area() <= tol.tol_area:
            raise ValueError("degenerate triangle")

    @property
    def a(self) -> np.ndarray:
        return self.vertices[0]

    @property
    def b(self) -> np.ndarray:
        return self.vertices[1]

    @property
    def c(self) -> np.ndarray:
        return self.vertices[2]

    def normal(self) -> np.ndarray:
        return unit(np.cross(self.b - self.a, self.c - self.a))

    def area(self) -> float:
        return 0.5 * norm(np.cross(self.b - self.a, self.c - self.a))

    def edges(self) -> list[Segment3]:
        v = self.vertices
        return [Segment3(v[0], v[1]), Segment3(v[1], v[2]), Segment3(v[2], v[0])]

    def plane(self) -> "Plane3":
        n = self.normal()
        return Plane3(n, float(np.dot(n, self.a)))


@dataclass(frozen=True)
class Plane3:
    """Plane {x : normal . x = offset} with a unit normal."""

    normal: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "normal", np.asarray(self.normal, dtype=float))

    def signed_distance(self, p) -> float:
        return float(np.dot(self.normal, p)) - self.offset

    def basis(self) -> tuple[np.ndarray, np.ndarray]:
        """Deterministic in-plane orthonormal frame (u, v).

        Derived from the inclination/node angles so that the base plane
        (normal +z) gets the global x/y axes.
        """
        inc, node = plane_angles(self)
        u = np.array([math.cos(node), math.sin(node), 0.0])
        n = _canonical_normal(self.normal)
        v = unit(np.cross(n, u))
        return u, v

    def project2(self, p) -> np.ndarray:
        u, v = self.basis()
        return np.array([float(np.dot(p, u)), float(np.dot(p, v))])

    def lift3(self, q2) -> np.ndarray:
        u, v = self.basis()
        return q2[0] * u + q2[1] * v + self.offset * _canonical_normal(self.normal)


@dataclass(frozen=True)
class Circle2:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if self.radius <= 0.0:
            raise ValueError("radius must be positive")


@dataclass(frozen=True)
class Sphere3:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if self.radius <= 0.0:
            raise ValueError("radius must be positive")


def _canonical_normal(n: np.ndarray) -> np.ndarray:
    """Flip the normal into the canonical half-space used by plane_angles."""
    n = unit(n)
    if n[2] < -1e-14:
        return -n
    if abs(n[2]) <= 1e-14:
        if n[0] < -1e-14:
            return -n
        if abs(n[0]) <= 1e-14 and n[1] < 0.0:
            return -n
    return n


def plane_from_angles(inc: float, node: float) -> Plane3:
    """Plane through the origin from its inclination/node angle pair.

    (0, 0) is the base plane z = 0; the node angle rotates the intersection
    line with the base plane, the inclination tilts about it.
    """
    n = np.array([
        math.sin(inc) * math.sin(node),
        -math.sin(inc) * math.cos(node),
        math.cos(inc),
    ])
    return Plane3(unit(n), 0.0)


def plane_angles(plane: Plane3) -> tuple[float, float]:
    """Inverse of plane_from_angles up to normal sign."""
    n = _canonical_normal(plane.normal)
    inc = math.acos(max(-1.0, min(1.0, float(n[2]))))
    s = math.hypot(n[0], n[1])
    if s <= 1e-14:
        return 0.0, 0.0
    node = math.atan2(n[0], -n[1]) % math.pi
    return inc, node


def plane_through(points: Sequence[np.ndarray]) -> Plane3:
    """Plane through three points (raises on collinear input)."""
    a, b, c = (np.asarray(p, dtype=float) for p in points)
    n = np.cross(b - a, c - a)
    if norm(n) <= 1e-14 * max(norm(b - a) * norm(c - a), 1e-300):
        raise DegenerateConfiguration("collinear points do not define a plane")
    n = unit(n)
    return Plane3(n, float(np.dot(n, a)))


# ---------------------------------------------------------------------------
# distances


def point_segment_distance2(p, a, b) -> float:
    d = b - a
    dd = float(np.dot(d, d))
    if dd == 0.0:
        return norm(p - a)
    s = max(0.0, min(1.0, float(np.dot(p - a, d)) / dd))
    return norm(p - (a + s * d))


def segment_segment_distance2(a0, a1, b0, b1) -> float:
    """Distance between two 2D segments (0 when they cross)."""
    d1 = a1 - a0
    d2 = b1 - b0
    denom = cross2(d1, d2)
    if abs(denom) > 1e-15 * (norm(d1) * norm(d2) + 1e-300):
        t = cross2(b0 - a0, d2) / denom
        s = cross2(b0 - a0, d1) / denom
        if 0.0 <= t <= 1.0 and 0.0 <= s <= 1.0:
            return 0.0
    return min(
        point_segment_distance2(a0, b0, b1),
        point_segment_distance2(a1, b0, b1),
        point_segment_distance2(b0, a0, a1),
        point_segment_distance2(b1, a0, a1),
    )


def point_line_distance3(p, origin, direction) -> float:
    d = unit(direction)
    w = p - origin
    return norm(w - float(np.dot(w, d)) * d)


def point_segment_distance3(p, a, b) -> float:
    d = b - a
    dd = float(np.dot(d, d))
    if dd == 0.0:
        return norm(p - a)
    s = max(0.0, min(1.0, float(np.dot(p - a, d)) / dd))
    return norm(p - (a + s * d))


def line_segment_closest(origin, direction, seg: Segment3):
    """Closest approach between an infinite line and a segment.

    Returns (distance, point_on_line, segment_param).
    """
    u = np.asarray(direction, dtype=float)
    v = seg.v - seg.u
    w0 = np.asarray(origin, dtype=float) - seg.u
    a = float(np.dot(u, u))
    b = float(np.dot(u, v))
    c = float(np.dot(v, v))
    d = float(np.dot(u, w0))
    e = float(np.dot(v, w0))
    den = a * c - b * b
    if den <= 1e-14 * a * c or c == 0.0:
        # parallel: clamp both segment ends
        best = None
        for s in (0.0, 1.0):
            q = seg.point_at(s)
            t = float(np.dot(q - origin, u)) / a
            dist = norm(q - (origin + t * u))
            if best is None or dist < best[0]:
                best = (dist, origin + t * u, s)
        return best
    s = (a * e - b * d) / den
    s = max(0.0, min(1.0, s))
    t = (b * s - d) / a
    p_line = origin + t * u
    q_seg = seg.point_at(s)
    return norm(p_line - q_seg), p_line, s


def segment_segment_distance3(a0, a1, b0, b1) -> float:
    """Distance between two 3D segments."""
    u = a1 - a0
    v = b1 - b0
    w0 = a0 - b0
    a = float(np.dot(u, u))
    b = float(np.dot(u, v))
    c = float(np.dot(v, v))
    d = float(np.dot(u, w0))
    e = float(np.dot(v, w0))
    den = a * c - b * b
    if den > 1e-14 * max(a * c, 1e-300):
        s = (b * e - c * d) / den
        t = (a * e - b * d) / den
        if 0.0 <= s <= 1.0 and 0.0 <= t <= 1.0:
            return norm(w0 + s * u - t * v)
    return min(
        point_segment_distance3(a0, b0, b1),
        point_segment_distance3(a1, b0, b1),
        point_segment_distance3(b0, a0, a1),
        point_segment_distance3(b1, a0, a1),
    )


def point_triangle_closest(p, tri: Triangle3) -> tuple[float, np.ndarray]:
    """Distance from a point to the closed triangle region, with witness."""
    a, b, c = tri.a, tri.b, tri.c
    n = tri.normal()
    w = p - a
    dist_plane = float(np.dot(w, n))
    proj = p - dist_plane * n
    if _barycentric_inside(proj, tri, 0.0):
        return abs(dist_plane), proj
    best = None
    for e in tri.edges():
        d = e.v - e.u
        dd = float(np.dot(d, d))
        s = max(0.0, min(1.0, float(np.dot(p - e.u, d)) / dd))
        q = e.point_at(s)
        dist = norm(p - q)
        if best is None or dist < best[0]:
            best = (dist, q)
    return best


def _barycentric(p, tri: Triangle3) -> tuple[float, float, float]:
    a, b, c = tri.a, tri.b, tri.c
    v0, v1, v2 = b - a, c - a, p - a
    d00 = float(np.dot(v0, v0))
    d01 = float(np.dot(v0, v1))
    d11 = float(np.dot(v1, v1))
    d20 = float(np.dot(v2, v0))
    d21 = float(np.dot(v2, v1))
    den = d00 * d11 - d01 * d01
    v = (d11 * d20 - d01 * d21) / den
    w = (d00 * d21 - d01 * d20) / den
    return 1.0 - v - w, v, w


def _barycentric_inside(p, tri: Triangle3, slack: float) -> bool:
    l0, l1, l2 = _barycentric(p, tri)
    return l0 >= -slack and l1 >= -slack and l2 >= -slack


def triangle_boundary_distance(p, tri: Triangle3) -> float:
    """In-plane distance from p to the nearest triangle edge."""
    return min(point_segment_distance3(p, e.u, e.v) for e in tri.edges())


# ---------------------------------------------------------------------------
# segment / triangle intersection


@dataclass(frozen=True)
class SegTriHit:
    """Outcome of a segment-vs-triangle test.

    kind is one of "none", "interior", "boundary", "coplanar"; everything but
    "none" counts as a contact under the conservative touch rule.
    """

    kind: str
    point: Optional[np.ndarray] = None

    def hit(self) -> bool:
        return self.kind != "none"


def seg_triangle_intersect(seg: Segment3, tri: Triangle3,
                           tol: ToleranceProfile = DEFAULT_TOL) -> SegTriHit:
    """Classify the contact between a closed segment and a closed triangle.

    Interior stabs are distinguished from touches within tol_incidence of an
    edge or vertex; segments within tol_incidence of the triangle's plane at
    both ends take the coplanar path.
    """
    n = tri.normal()
    ti = tol.tol_incidence
    d0 = float(np.dot(n, seg.u - tri.a))
    d1 = float(np.dot(n, seg.v - tri.a))

    if abs(d0) <= ti and abs(d1) <= ti:
        return _coplanar_overlap(seg, tri, tol)
    if d0 > ti and d1 > ti:
        return SegTriHit("none")
    if d0 < -ti and d1 < -ti:
        return SegTriHit("none")

    if abs(d0 - d1) <= 1e-300:
        s = 0.0 if abs(d0) <= abs(d1) else 1.0
    else:
        s = d0 / (d0 - d1)
    s = max(0.0, min(1.0, s))
    x = seg.point_at(s)

    dist, witness = point_triangle_closest(x, tri)
    if dist > ti:
        return SegTriHit("none")
    if _barycentric_inside(witness, tri, 0.0) and triangle_boundary_distance(witness, tri) > ti:
        return SegTriHit("interior", witness)
    return SegTriHit("boundary", witness)


def _coplanar_overlap(seg: Segment3, tri: Triangle3, tol: ToleranceProfile) -> SegTriHit:
    plane = tri.plane()
    u, v = plane.basis()
    origin = tri.a

    def to2(p):
        w = p - origin
        return np.array([float(np.dot(w, u)), float(np.dot(w, v))])

    s0, s1 = to2(seg.u), to2(seg.v)
    t2 = [to2(p) for p in tri.vertices]

    def inside2(q):
        d = []
        for i in range(3):
            a, b = t2[i], t2[(i + 1) % 3]
            d.append(cross2(b - a, q - a))
        return all(x >= -tol.tol_incidence for x in d) or all(x <= tol.tol_incidence for x in d)

    if inside2(s0):
        return SegTriHit("coplanar", seg.u)
    if inside2(s1):
        return SegTriHit("coplanar", seg.v)
    for i in range(3):
        a, b = t2[i], t2[(i + 1) % 3]
        if segment_segment_distance2(s0, s1, a, b) <= tol.tol_incidence:
            mid = 0.5 * (a + b)
            return SegTriHit("coplanar", origin + mid[0] * u + mid[1] * v)
    return SegTriHit("none")


# ---------------------------------------------------------------------------
# triangle / plane cross-section


@dataclass(frozen=True)
class CrossSection:
    """Triangle-plane intersection: empty, a point, a segment or the whole triangle."""

    kind: str  # "empty" | "point" | "segment" | "triangle"
    point: Optional[np.ndarray] = None
    segment: Optional[Segment3] = None
    triangle: Optional[Triangle3] = None


def tri_plane_cross_section(tri: Triangle3, plane: Plane3,
                            tol: ToleranceProfile = DEFAULT_TOL) -> CrossSection:
    ti = tol.tol_incidence
    d = np.array([plane.signed_distance(p) for p in tri.vertices])

    if np.all(np.abs(d) <= ti):
        return CrossSection("triangle", triangle=tri)
    if np.all(d > ti) or np.all(d < -ti):
        return CrossSection("empty")

    pts: list[np.ndarray] = []
    for i in range(3):
        if abs(d[i]) <= ti:
            pts.append(tri.vertices[i])
    for i in range(3):
        j = (i + 1) % 3
        di, dj = d[i], d[j]
        if (di > ti and dj < -ti) or (di < -ti and dj > ti):
            s = di / (di - dj)
            pts.append(tri.vertices[i] + s * (tri.vertices[j] - tri.vertices[i]))

    dedup: list[np.ndarray] = []
    for p in pts:
        if all(norm(p - q) > ti for q in dedup):
            dedup.append(p)
    if not dedup:
        return CrossSection("empty")
    if len(dedup) == 1:
        return CrossSection("point", point=dedup[0])
    if len(dedup) > 2:
        # numeric fuzz: keep the farthest pair
        best = max(((i, j) for i in range(len(dedup)) for j in range(i + 1, len(dedup))),
                   key=lambda ij: norm(dedup[ij[0]] - dedup[ij[1]]))
        dedup = [dedup[best[0]], dedup[best[1]]]
    return CrossSection("segment", segment=Segment3(dedup[0], dedup[1]))


# ---------------------------------------------------------------------------
# 2D segment clipping against a circle


@dataclass(frozen=True)
class ClippedPiece:
    a: np.ndarray
    b: np.ndarray
    inside: bool


def clip_segment_by_circle(a, b, circle: Circle2,
                           tol: ToleranceProfile = DEFAULT_TOL) -> list[ClippedPiece]:
    """Partition a 2D segment into maximal pieces inside/outside a circle.

    Tangential grazes do not produce an inside piece; the returned pieces
    chain exactly from a to b.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    w = a - circle.center
    qa = float(np.dot(d, d))
    if qa == 0.0:
        return [ClippedPiece(a, b, bool(norm(w) < circle.radius))]
    qb = 2.0 * float(np.dot(w, d))
    qc = float(np.dot(w, w)) - circle.radius ** 2
    disc = qb * qb - 4.0 * qa * qc
    cuts = [0.0, 1.0]
    if disc > 0.0:
        sq = math.sqrt(disc)
        for t in ((-qb - sq) / (2 * qa), (-qb + sq) / (2 * qa)):
            if 0.0 < t < 1.0:
                cuts.append(t)
    cuts = sorted(set(cuts))

    eps_t = tol.tol_len / math.sqrt(qa)
    pieces: list[ClippedPiece] = []
    for t0, t1 in zip(cuts[:-1], cuts[1:]):
        if t1 - t0 <= eps_t:
            continue
        mid = a + 0.5 * (t0 + t1) * d
        inside = norm(mid - circle.center) < circle.radius
        p0, p1 = a + t0 * d, a + t1 * d
        if pieces and pieces[-1].inside == inside:
            pieces[-1] = ClippedPiece(pieces[-1].a, p1, inside)
        else:
            pieces.append(ClippedPiece(p0, p1, inside))
    if not pieces:
        mid = a + 0.5 * d
        pieces = [ClippedPiece(a, b, bool(norm(mid - circle.center) < circle.radius))]
    else:
        # re-pin the chain ends exactly
        pieces[0] = ClippedPiece(a, pieces[0].b, pieces[0].inside)
        pieces[-1] = ClippedPiece(pieces[-1].a, b, pieces[-1].inside)
    return pieces


# ---------------------------------------------------------------------------
# line transversals of four segments (Pluecker coordinates)


@dataclass(frozen=True)
class Line3:
    point: np.ndarray
    direction: np.ndarray  # unit


def pluecker_of_segment(seg: Segment3) -> np.ndarray:
    d = seg.v - seg.u
    m = np.cross(seg.u, seg.v)
    L = np.concatenate([d, m])
    return L / np.linalg.norm(L)


def pluecker_side(L1: np.ndarray, L2: np.ndarray) -> float:
    """Reciprocal product; zero iff the two lines are coplanar (meet)."""
    return float(np.dot(L1[:3], L2[3:]) + np.dot(L2[:3], L1[3:]))


def _lines_identical(s1: Segment3, s2: Segment3, tol: ToleranceProfile) -> bool:
    d1, d2 = s1.direction, s2.direction
    if norm(np.cross(d1, d2)) > 1e-9 * norm(d1) * norm(d2):
        return False
    return point_line_distance3(s2.u, s1.u, d1) <= tol.tol_incidence


def line_transversals_4(segs: Sequence[Segment3],
                        tol: ToleranceProfile = DEFAULT_TOL) -> list[Line3]:
    """Lines meeting all four supporting lines, filtered to the segments.

    The four incidence conditions are linear on the Pluecker quadric; their
    null space is a pencil which the quadric cuts in at most two real lines.
    Raises DegenerateConfiguration when infinitely many transversals exist.
    """
    if len(segs) != 4:
        raise ValueError("exactly four segments required")
    for i in range(4):
        for j in range(i + 1, 4):
            if _lines_identical(segs[i], segs[j], tol):
                raise DegenerateConfiguration("two supports share a supporting line")

    rows = []
    for s in segs:
        L = pluecker_of_segment(s)
        rows.append(np.concatenate([L[3:], L[:3]]))  # so that row . (d|m) = side product
    M = np.vstack(rows)
    _, sv, Vt = np.linalg.svd(M)
    rank = int(np.sum(sv > 1e-10 * sv[0]))
    null = Vt[rank:]
    if null.shape[0] > 2:
        raise DegenerateConfiguration("transversal pencil is not one-dimensional")
    if null.shape[0] < 2:
        return []

    A, B = null[0], null[1]
    qa = float(np.dot(A[:3], A[3:]))
    qb = float(np.dot(A[:3], B[3:]) + np.dot(B[:3], A[3:]))
    qc = float(np.dot(B[:3], B[3:]))
    scale = max(abs(qa), abs(qb), abs(qc))
    if scale <= 1e-14:
        raise DegenerateConfiguration("entire pencil lies on the quadric")

    roots: list[tuple[float, float]] = []
    if abs(qa) <= 1e-14 * scale:
        roots.append((1.0, 0.0))
        if abs(qb) > 1e-14 * scale:
            roots.append((-qc, qb))
    else:
        disc = qb * qb - 4.0 * qa * qc
        if disc < -1e-13 * scale * scale:
            return []
        if disc <= 1e-13 * scale * scale:
            roots.append((-qb / (2.0 * qa), 1.0))
        else:
            sq = math.sqrt(max(disc, 0.0))
            roots.append(((-qb - sq) / (2.0 * qa), 1.0))
            roots.append(((-qb + sq) / (2.0 * qa), 1.0))

    out: list[Line3] = []
    for alpha, beta in roots:
        X = alpha * A + beta * B
        nx = np.linalg.norm(X)
        if nx == 0.0:
            continue
        X = X / nx
        d, m = X[:3], X[3:]
        if np.linalg.norm(d) <= 1e-9:
            continue  # line at infinity
        p0 = np.cross(d, m) / float(np.dot(d, d))
        direction = unit(d)
        ok = True
        for s in segs:
            dist, _, sparam = line_segment_closest(p0, direction, s)
            if dist > tol.tol_incidence or sparam < -1e-9 or sparam > 1.0 + 1e-9:
                ok = False
                break
        if not ok:
            continue
        dup = False
        for prev in out:
            if norm(np.cross(prev.direction, direction)) <= 1e-9 and \
               point_line_distance3(p0, prev.point, prev.direction) <= tol.tol_incidence:
                dup = True
                break
        if not dup:
            out.append(Line3(p0, direction))
    return out


# ---------------------------------------------------------------------------
# multi-start damped Newton for small square systems


def solve_square_system(residual: Callable[[np.ndarray], np.ndarray],
                        seeds: Iterable[np.ndarray],
                        bounds: tuple[np.ndarray, np.ndarray],
                        tol: ToleranceProfile = DEFAULT_TOL,
                        max_iter: int = 60) -> list[np.ndarray]:
    """Distinct roots of a square smooth system inside a box.

    Runs damped Newton (numeric Jacobian, backtracking) from every seed,
    keeps converged iterates with residual below tol_residual, deduplicates
    at tol_incidence distance and drops roots outside the box.
    """
    lo = np.asarray(bounds[0], dtype=float)
    hi = np.asarray(bounds[1], dtype=float)
    k = lo.size
    if k > 20:
        raise ValueError("system dimension above 20 not supported")
    span = hi - lo
    margin = tol.tol_incidence + 1e-12 * np.maximum(np.abs(lo), np.abs(hi)).max()

    roots: list[np.ndarray] = []
    for seed in seeds:
        x = np.clip(np.asarray(seed, dtype=float), lo, hi)
        r = np.asarray(residual(x), dtype=float)
        if not np.all(np.isfinite(r)):
            continue
        rn = np.linalg.norm(r)
        converged = False
        for it in range(max_iter):
            if np.max(np.abs(r)) <= tol.tol_residual:
                converged = True
                break
            if it >= 12 and rn > 1e-5:
                break  # stagnating far from a root; give up on this seed
            J = _numeric_jacobian(residual, x, r)
            try:
                dx = np.linalg.solve(J, -r)
            except np.linalg.LinAlgError:
                dx = np.linalg.lstsq(J, -r, rcond=None)[0]
            if not np.all(np.isfinite(dx)):
                break
            lam = 1.0
            improved = False
            while lam >= 1.0 / 64.0:
                x2 = x + lam * dx
                x2 = np.clip(x2, lo - 10.0 * span, hi + 10.0 * span)
                r2 = np.asarray(residual(x2), dtype=float)
                if np.all(np.isfinite(r2)) and np.linalg.norm(r2) < rn:
                    x, r, rn = x2, r2, float(np.linalg.norm(r2))
                    improved = True
                    break
                lam *= 0.5
            if not improved:
                break
        if not converged or np.max(np.abs(r)) > tol.tol_residual:
            continue
        if np.any(x < lo - margin) or np.any(x > hi + margin):
            continue
        if any(np.linalg.norm(x - root) <= tol.tol_incidence for root in roots):
            continue
        roots.append(x)
    return roots


def _numeric_jacobian(residual, x, r0):
    k = x.size
    J = np.empty((r0.size, k))
    for i in range(k):
        h = 1e-7 * max(1.0, abs(float(x[i])))
        xp = x.copy()
        xp[i] += h
        xm = x.copy()
        xm[i] -= h
        J[:, i] = (np.asarray(residual(xp)) - np.asarray(residual(xm))) / (2.0 * h)
    return J


def seed_grid(bounds: tuple[np.ndarray, np.ndarray],
              per_axis: int = 3,
              cap: int = 729,
              extra_random: int = 64,
              rng: Optional[np.random.Generator] = None) -> list[np.ndarray]:
    """Default seed set: uniform grid (capped) plus random fill-in.

    The grid density is the completeness knob for the numeric solvers.
    """
    lo = np.asarray(bounds[0], dtype=float)
    hi = np.asarray(bounds[1], dtype=float)
    k = lo.size
    axes = [np.linspace(lo[i], hi[i], per_axis) for i in range(k)]
    total = per_axis ** k
    seeds: list[np.ndarray] = []
    if total <= cap:
        mesh = np.meshgrid(*axes, indexing="ij")
        grid = np.stack([m.ravel() for m in mesh], axis=1)
        seeds.extend(grid)
    else:
        r = rng if rng is not None else np.random.default_rng(0)
        seeds.extend(lo + (hi - lo) * r.random((cap, k)))
    r = rng if rng is not None else np.random.default_rng(1)
    seeds.extend(lo + (hi - lo) * r.random((extra_random, k)))
    return [np.asarray(s, dtype=float) for s in seeds]
