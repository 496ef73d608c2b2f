"""Circular-sector emptiness structure for a fixed radius and fixed target.

Works in a plane through the target (the origin). For each obstacle segment
the largest safe rotation angle, as a function of the elbow angle theta on
circle C, is a monotone curve; sin(angle/2) is its algebraic surrogate. Two
implicit lower envelopes of those curves (one per hemisphere of C) answer
emptiness queries in O(log n): look up the segment inducing the envelope
under the query elbow and test the query sector against that one segment.

Everything internal is built for the clockwise rotation sense; the
counter-clockwise structure is built on the mirrored instance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .feasibility import (
    CircularSector,
    sector_segment_intersect_2d,
    sector_segment_witness_2d,
)
from .geometry import (
    DEFAULT_TOL,
    Circle2,
    Plane3,
    ToleranceProfile,
    clip_segment_by_circle,
    norm,
    polar_angle,
    rot2,
    tri_plane_cross_section,
)
from .scene import Scene

TWO_PI = 2.0 * math.pi
HALF_PI = 0.5 * math.pi
F_CAP = math.sin(math.pi / 4.0)  # upper bound of the rotation surrogate


class OutOfDomain(Exception):
    """Angle outside a curve piece's domain."""


class SenseMismatch(Exception):
    """Query rotation sense does not match the envelope's."""


# ---------------------------------------------------------------------------
# stored geometry


@dataclass(frozen=True)
class StoredSegment:
    """Clipped obstacle piece, wholly inside C or wholly in the annulus."""

    sid: int
    p0: np.ndarray
    p1: np.ndarray
    case: str          # "inside" | "annulus"
    source: int        # index of the originating input segment / triangle

    def __post_init__(self):
        # scalar cache for the hot curve-evaluation path
        p0 = np.asarray(self.p0, dtype=float)
        p1 = np.asarray(self.p1, dtype=float)
        object.__setattr__(self, "p0", p0)
        object.__setattr__(self, "p1", p1)
        object.__setattr__(self, "_pts",
                           (float(p0[0]), float(p0[1]), float(p1[0]), float(p1[1])))


@dataclass(frozen=True)
class PlanarInstance:
    r: float
    sense: str
    mirrored: bool                  # stored coordinates are y-flipped
    stored: tuple[StoredSegment, ...]
    plane: Optional[Plane3] = None
    tol: ToleranceProfile = DEFAULT_TOL


@dataclass
class CurvePiece:
    """Monotone piece of one segment's safe-rotation curve.

    The domain is a theta interval inside one hemisphere; evaluation works
    on theta or on x = r*cos(theta), the hemisphere fixing the sign of y.
    """

    seg: StoredSegment
    theta_lo: float
    theta_hi: float
    hemi: int          # +1 for y >= 0, -1 for y < 0
    regime: str        # "line" | "endpoint" | "mixed"
    r: float

    @property
    def x_lo(self) -> float:
        a = self.r * math.cos(self.theta_lo)
        b = self.r * math.cos(self.theta_hi)
        return min(a, b)

    @property
    def x_hi(self) -> float:
        a = self.r * math.cos(self.theta_lo)
        b = self.r * math.cos(self.theta_hi)
        return max(a, b)

    def theta_of_x(self, x: float) -> float:
        c = max(-1.0, min(1.0, x / self.r))
        t = math.acos(c)
        return t if self.hemi >= 0 else TWO_PI - t

    def value_at_x(self, x: float) -> float:
        th = self.theta_of_x(x)
        th = max(self.theta_lo, min(self.theta_hi, th))
        return segment_rotation_metric(self.seg, th, self.r)


@dataclass(frozen=True)
class Envelope:
    """Implicit lower envelopes V1/V2 plus the blocked spoke intervals.

    xs* are breakpoint arrays; segs* give the inducing stored segment per
    elementary interval (None where no curve is defined).
    """

    r: float
    sense: str
    mirrored: bool
    xs1: np.ndarray
    segs1: tuple[Optional[StoredSegment], ...]
    xs2: np.ndarray
    segs2: tuple[Optional[StoredSegment], ...]
    forbidden: tuple[tuple[float, float], ...]   # sorted, non-wrapping
    stored: tuple[StoredSegment, ...]
    curve_pieces: tuple[CurvePiece, ...]
    tol: ToleranceProfile = DEFAULT_TOL

    def interval_count(self) -> int:
        return sum(s is not None for s in self.segs1) + \
            sum(s is not None for s in self.segs2)


# ---------------------------------------------------------------------------
# pointwise curve evaluation


def _elbow(theta: float, r: float) -> np.ndarray:
    return np.array([r * math.cos(theta), r * math.sin(theta)])


def _cw_angle_from_target_dir(b: np.ndarray, x: np.ndarray) -> float:
    """Clockwise angle from the elbow->target direction to elbow->x."""
    return _psi_cw(float(b[0]), float(b[1]), float(x[0]), float(x[1]))


def _psi_cw(bx: float, by: float, xx: float, xy: float) -> float:
    ang_t = math.atan2(-by, -bx)
    ang_x = math.atan2(xy - by, xx - bx)
    psi = (ang_t - ang_x) % TWO_PI
    if psi > TWO_PI - 1e-13:
        psi = 0.0
    return psi


def _scalar_candidates(seg: StoredSegment, bx: float, by: float, r: float):
    """(psi, kind) first-contact candidates: segment endpoints inside the
    elbow disk and crossings of the segment with the elbow circle."""
    p0x, p0y, p1x, p1y = seg._pts
    out = []
    for px, py in ((p0x, p0y), (p1x, p1y)):
        wx, wy = px - bx, py - by
        d2 = wx * wx + wy * wy
        if d2 <= 1e-24 * r * r:
            out.append((0.0, "apex"))  # obstacle point at the apex: blocked
        elif d2 < r * r:
            out.append((_psi_cw(bx, by, px, py), "endpoint"))
    dx, dy = p1x - p0x, p1y - p0y
    qa = dx * dx + dy * dy
    if qa > 0.0:
        wx, wy = p0x - bx, p0y - by
        qb = 2.0 * (wx * dx + wy * dy)
        qc = wx * wx + wy * wy - r * r
        disc = qb * qb - 4.0 * qa * qc
        if disc > 0.0:
            sq = math.sqrt(disc)
            for t in ((-qb - sq) / (2 * qa), (-qb + sq) / (2 * qa)):
                if -1e-12 <= t <= 1.0 + 1e-12:
                    tc = 0.0 if t < 0.0 else (1.0 if t > 1.0 else t)
                    out.append((_psi_cw(bx, by, p0x + tc * dx, p0y + tc * dy), "line"))
    return out


def _contact_candidates(seg: StoredSegment, b: np.ndarray, r: float):
    """Array-flavoured view of the contact candidates (points, not angles)."""
    bx, by = float(b[0]), float(b[1])
    out = []
    p0, p1 = seg.p0, seg.p1
    for p in (p0, p1):
        dpb = norm(p - b)
        if dpb <= 1e-12 * r:
            out.append((b - 1e-9 * b, "apex"))
        elif dpb < r:
            out.append((p, "endpoint"))
    d = p1 - p0
    qa = float(np.dot(d, d))
    if qa > 0.0:
        w = p0 - b
        qb = 2.0 * float(np.dot(w, d))
        qc = float(np.dot(w, w)) - r * r
        disc = qb * qb - 4.0 * qa * qc
        if disc > 0.0:
            sq = math.sqrt(disc)
            for t in ((-qb - sq) / (2 * qa), (-qb + sq) / (2 * qa)):
                if -1e-12 <= t <= 1.0 + 1e-12:
                    out.append((p0 + max(0.0, min(1.0, t)) * d, "line"))
    return out


def safe_rotation_of_segment(seg: StoredSegment, theta: float, r: float) -> float:
    """Largest clockwise rotation before the sector touches the segment;
    pi/2 when even the full quarter sector misses it."""
    bx, by = r * math.cos(theta), r * math.sin(theta)
    best = HALF_PI
    for psi, _kind in _scalar_candidates(seg, bx, by, r):
        if psi <= HALF_PI + 1e-9 and psi < best:
            best = psi
    return 0.0 if best < 0.0 else best


def _argmin_kind(seg: StoredSegment, theta: float, r: float) -> str:
    bx, by = r * math.cos(theta), r * math.sin(theta)
    best_psi = HALF_PI + 1e-9
    best_kind = "mixed"
    for psi, kind in _scalar_candidates(seg, bx, by, r):
        if psi <= HALF_PI + 1e-9 and psi < best_psi:
            best_psi, best_kind = psi, kind
    return best_kind


def segment_rotation_metric(seg: StoredSegment, theta: float, r: float) -> float:
    """sin(safe_rotation/2); lies in [0, sqrt(1/2)]."""
    return min(math.sin(0.5 * safe_rotation_of_segment(seg, theta, r)), F_CAP)


def safe_rotation(piece: CurvePiece, theta: float) -> float:
    """Largest safe rotation at theta for the piece's segment."""
    eps = 1e-9
    if theta < piece.theta_lo - eps or theta > piece.theta_hi + eps:
        raise OutOfDomain(
            f"theta {theta:.6f} outside [{piece.theta_lo:.6f}, {piece.theta_hi:.6f}]")
    th = max(piece.theta_lo, min(piece.theta_hi, theta))
    return safe_rotation_of_segment(piece.seg, th, piece.r)


# ---------------------------------------------------------------------------
# instance construction


def planar_instance_from_segments(segments: Sequence, r: float, sense: str,
                                  tol: ToleranceProfile = DEFAULT_TOL,
                                  plane: Optional[Plane3] = None,
                                  sources: Optional[Sequence[int]] = None) -> PlanarInstance:
    """Clip raw 2D segments by the two relevance circles and store them.

    Pieces outside the sqrt(2)*r circle cannot meet any query sector and are
    dropped; pieces crossing C are split so each falls under one case.
    """
    if sense not in ("cw", "ccw"):
        raise ValueError("sense must be 'cw' or 'ccw'")
    mirrored = sense == "ccw"
    flip = np.array([1.0, -1.0])
    inner = Circle2(np.zeros(2), r)
    outer = Circle2(np.zeros(2), math.sqrt(2.0) * r)
    stored: list[StoredSegment] = []
    sid = 0
    for i, seg in enumerate(segments):
        p0 = np.asarray(seg[0], dtype=float)
        p1 = np.asarray(seg[1], dtype=float)
        if mirrored:
            p0 = p0 * flip
            p1 = p1 * flip
        src = sources[i] if sources is not None else i
        if norm(p1 - p0) <= tol.tol_len:
            continue
        for outer_piece in clip_segment_by_circle(p0, p1, outer, tol):
            if not outer_piece.inside:
                continue
            for piece in clip_segment_by_circle(outer_piece.a, outer_piece.b, inner, tol):
                if norm(piece.b - piece.a) <= tol.tol_len:
                    continue
                case = "inside" if piece.inside else "annulus"
                stored.append(StoredSegment(sid, piece.a, piece.b, case, src))
                sid += 1
    return PlanarInstance(r=float(r), sense=sense, mirrored=mirrored,
                          stored=tuple(stored), plane=plane, tol=tol)


def build_planar_instance(scene: Scene, plane: Plane3, sense: str) -> PlanarInstance:
    """Cross-section the scene with a plane through the target."""
    if abs(plane.offset) > scene.tol.tol_incidence:
        raise ValueError("plane must pass through the target")
    u, v = plane.basis()
    segs = []
    srcs = []
    for ti, tri in enumerate(scene.triangles):
        cs = tri_plane_cross_section(tri, plane, scene.tol)
        if cs.kind == "segment":
            a = np.array([float(np.dot(cs.segment.u, u)), float(np.dot(cs.segment.u, v))])
            b = np.array([float(np.dot(cs.segment.v, u)), float(np.dot(cs.segment.v, v))])
            segs.append((a, b))
            srcs.append(ti)
        elif cs.kind == "triangle":
            pts2 = [np.array([float(np.dot(p, u)), float(np.dot(p, v))])
                    for p in cs.triangle.vertices]
            for k in range(3):
                segs.append((pts2[k], pts2[(k + 1) % 3]))
                srcs.append(ti)
    return planar_instance_from_segments(segs, scene.r, sense, scene.tol, plane, srcs)


# ---------------------------------------------------------------------------
# relevance intervals and piece construction


def _quarter_sector(theta: float, r: float) -> CircularSector:
    b = _elbow(theta, r)
    dir_end = -b / r
    dir_start = rot2(dir_end, -HALF_PI)  # clockwise quarter
    return CircularSector(b, dir_start, dir_end, HALF_PI, r)


def _sector_at(b: np.ndarray, rho: float, r: float) -> CircularSector:
    bu = b * (r / norm(b))
    dir_end = -bu / r
    dir_start = rot2(dir_end, -rho)
    return CircularSector(bu, dir_start, dir_end, rho, r)


def _critical_angles(seg: StoredSegment, r: float) -> list[float]:
    """Angles where the quarter-sector/segment contact pattern can change."""
    crit: list[float] = []
    p0, p1 = seg.p0, seg.p1
    for p in (p0, p1):
        dp = norm(p)
        if dp <= 2.0 * r:
            base = polar_angle(p)
            if dp > 1e-12:
                delta = math.acos(max(-1.0, min(1.0, dp / (2.0 * r))))
                crit.extend([(base - delta) % TWO_PI, (base + delta) % TWO_PI])
            crit.append(base)  # spoke through the endpoint
    # supporting line: elbow on it (contact regime flips there) and elbow
    # disk tangent to it (crossing candidates appear/disappear)
    d = p1 - p0
    nvec = np.array([-d[1], d[0]])
    nn = norm(nvec)
    if nn > 0.0:
        nhat = nvec / nn
        c = float(np.dot(nhat, p0))
        if c < 0:
            nhat, c = -nhat, -c
        base = math.atan2(nhat[1], nhat[0])
        for target in ((c - r) / r, c / r, (c + r) / r):
            if abs(target) <= 1.0:
                delta = math.acos(target)
                crit.extend([(base - delta) % TWO_PI, (base + delta) % TWO_PI])
        # quarter-arc endpoint sweeping along the supporting line
        rr = math.sqrt(2.0) * r
        if c <= rr:
            half = math.sqrt(max(rr * rr - c * c, 0.0))
            tdir = d / norm(d)
            for sgn in (-1.0, 1.0):
                x = c * nhat + sgn * half * tdir
                crit.append((polar_angle(x) - math.pi / 4.0) % TWO_PI)
    return sorted(set(a % TWO_PI for a in crit))


def _relevance_intervals(seg: StoredSegment, r: float,
                         tol: ToleranceProfile) -> list[tuple[float, float]]:
    """Maximal theta intervals where the full quarter sector touches the
    segment. Returned unwrapped (hi may exceed 2*pi); the endpoints are
    exact critical angles."""
    crit = _critical_angles(seg, r)
    if not crit:
        hit = sector_segment_intersect_2d(_quarter_sector(0.0, r), seg.p0, seg.p1, tol)
        return [(0.0, TWO_PI)] if hit else []
    k = len(crit)
    hits = []
    for i in range(k):
        lo = crit[i]
        width = (crit[(i + 1) % k] - lo) % TWO_PI
        if width == 0.0:
            width = TWO_PI if k == 1 else 0.0
        mid = (lo + 0.5 * width) % TWO_PI
        hits.append(sector_segment_intersect_2d(_quarter_sector(mid, r),
                                                seg.p0, seg.p1, tol))
    if all(hits):
        return [(0.0, TWO_PI)]
    if not any(hits):
        return []
    # walk the cyclic gap list starting on a miss, on an unwrapped axis
    start = next(i for i, h in enumerate(hits) if not h)
    intervals: list[list[float]] = []
    pos = crit[start]
    open_run = False
    for j in range(k):
        idx = (start + j) % k
        width = (crit[(idx + 1) % k] - crit[idx]) % TWO_PI
        if width == 0.0 and k > 1:
            continue
        if hits[idx]:
            if open_run:
                intervals[-1][1] = pos + width
            else:
                intervals.append([pos, pos + width])
                open_run = True
        else:
            open_run = False
        pos += width
    return [(lo % TWO_PI, lo % TWO_PI + (hi - lo)) for lo, hi in intervals]


def _spoke_interval(seg: StoredSegment) -> tuple[float, float]:
    """Angular extent of an inside segment as seen from the target
    (unwrapped: hi = lo + width, width <= pi)."""
    a0 = polar_angle(seg.p0)
    a1 = polar_angle(seg.p1)
    if (a1 - a0) % TWO_PI <= math.pi:
        return a0, a0 + ((a1 - a0) % TWO_PI)
    return a1, a1 + ((a0 - a1) % TWO_PI)


def _subtract_interval(intervals: list[tuple[float, float]],
                       cut: tuple[float, float]) -> list[tuple[float, float]]:
    """Remove an angular interval (mod 2*pi) from unwrapped intervals."""
    out: list[tuple[float, float]] = []
    for lo, hi in intervals:
        pieces = [(lo, hi)]
        for shift in (-TWO_PI, 0.0, TWO_PI):
            clo, chi = cut[0] + shift, cut[1] + shift
            nxt = []
            for a, b in pieces:
                if chi <= a or clo >= b:
                    nxt.append((a, b))
                    continue
                if clo > a:
                    nxt.append((a, clo))
                if chi < b:
                    nxt.append((chi, b))
            pieces = nxt
        out.extend(pieces)
    return [(a, b) for a, b in out if b - a > 1e-12]


def _split_at(intervals: list[tuple[float, float]],
              angles: Sequence[float]) -> list[tuple[float, float]]:
    out = []
    for lo, hi in intervals:
        cuts = [lo, hi]
        for a in angles:
            for shift in (0.0, TWO_PI):
                v = a + shift
                if lo + 1e-12 < v < hi - 1e-12:
                    cuts.append(v)
        cuts = sorted(set(cuts))
        out.extend(zip(cuts[:-1], cuts[1:]))
    return out


def _monotone_subsplit(seg: StoredSegment, lo: float, hi: float, r: float,
                       depth: int = 0) -> list[tuple[float, float]]:
    """Split an interval at interior extrema of the safe-rotation curve.

    Long segments close to circle C produce genuinely bitonic stretches
    between critical angles; each returned sub-interval is monotone.
    """
    if hi - lo <= 1e-10 or depth >= 4:
        return [(lo, hi)]
    k = 65
    ths = np.linspace(lo, hi, k)
    vals = [safe_rotation_of_segment(seg, t % TWO_PI, r) for t in ths]
    dv = np.diff(vals)
    eps = 1e-12
    if np.all(dv <= eps) or np.all(dv >= -eps):
        return [(lo, hi)]
    sign = np.sign(dv)
    nz = np.nonzero(np.abs(dv) > eps)[0]
    flip = None
    for a, b in zip(nz[:-1], nz[1:]):
        if sign[a] != sign[b]:
            flip = (a, b)
            break
    if flip is None:
        return [(lo, hi)]
    want_max = sign[flip[0]] > 0
    a = ths[flip[0]]
    b = ths[min(flip[1] + 1, k - 1)]
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = b - phi * (b - a)
    x2 = a + phi * (b - a)
    f1 = safe_rotation_of_segment(seg, x1 % TWO_PI, r)
    f2 = safe_rotation_of_segment(seg, x2 % TWO_PI, r)
    for _ in range(60):
        if (f1 < f2) == want_max:
            a, x1, f1 = x1, x2, f2
            x2 = a + phi * (b - a)
            f2 = safe_rotation_of_segment(seg, x2 % TWO_PI, r)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - phi * (b - a)
            f1 = safe_rotation_of_segment(seg, x1 % TWO_PI, r)
        if b - a <= 1e-12:
            break
    cut = 0.5 * (a + b)
    if cut - lo <= 1e-10 or hi - cut <= 1e-10:
        return [(lo, hi)]
    return _monotone_subsplit(seg, lo, cut, r, depth + 1) + \
        _monotone_subsplit(seg, cut, hi, r, depth + 1)


def curve_pieces_of(seg: StoredSegment, r: float,
                    tol: ToleranceProfile = DEFAULT_TOL
                    ) -> tuple[list[CurvePiece], list[tuple[float, float]]]:
    """Hemisphere-pure monotone curve pieces plus blocked spoke intervals."""
    intervals = _relevance_intervals(seg, r, tol)
    forbidden: list[tuple[float, float]] = []
    if seg.case == "inside":
        spoke = _spoke_interval(seg)
        forbidden.append(spoke)
        intervals = _subtract_interval(intervals, spoke)
    # split at every contact-pattern event, then at any leftover interior
    # extrema, so each stored sub-piece is monotone
    switches = _critical_angles(seg, r)
    intervals = _split_at(intervals, list(switches) + [0.0, math.pi])
    refined: list[tuple[float, float]] = []
    for lo, hi in intervals:
        refined.extend(_monotone_subsplit(seg, lo, hi, r))
    intervals = refined

    # domains are shrunk by a hair: exact interval endpoints sit on
    # degenerate contacts (elbow meeting an obstacle point, spoke through an
    # endpoint) where the curve can jump; the gap stays below tol_incidence
    shrink = 1e-9
    min_width = 1e-9
    pieces: list[CurvePiece] = []

    def emit(lo: float, hi: float):
        lo, hi = lo + shrink, hi - shrink
        if hi - lo <= min_width:
            return
        if hi - lo <= 1e-6:
            # micro-shard between near-coincident criticals: keep it only if
            # it constrains anything below grazing quarter rotations
            vals = [safe_rotation_of_segment(seg, t % TWO_PI, r)
                    for t in np.linspace(lo, hi, 9)]
            if min(vals) >= HALF_PI - 3e-5:
                return
        mid = 0.5 * (lo + hi) % TWO_PI
        pieces.append(CurvePiece(seg, lo, hi, 1 if mid <= math.pi else -1,
                                 _argmin_kind(seg, mid, r), r))

    for lo, hi in intervals:
        if hi - lo <= min_width:
            continue
        if lo >= TWO_PI:
            lo, hi = lo - TWO_PI, hi - TWO_PI
        if hi > TWO_PI + 1e-12:
            # wrapped across 0: emit both parts, hemisphere-split again
            for a, b in ((lo, TWO_PI), (0.0, hi - TWO_PI)):
                for s_lo, s_hi in _split_at([(a, b)], [0.0, math.pi]):
                    emit(s_lo, s_hi)
        else:
            emit(lo, hi)
    return pieces, forbidden


# ---------------------------------------------------------------------------
# curve intersections


@dataclass(frozen=True)
class CurveCrossing:
    x: float
    below_left: int    # sid of the lower curve left of the crossing
    below_right: int


def _bisect_crossing(fa, fb, lo: float, hi: float, flo: float) -> float:
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        g = fa(mid) - fb(mid)
        if g == 0.0:
            return mid
        if (g > 0.0) == (flo > 0.0):
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, abs(hi)):
            break
    return 0.5 * (lo + hi)


def _case_a_closed_form(pa: CurvePiece, pb: CurvePiece, x_guess: float,
                        tol: ToleranceProfile) -> Optional[float]:
    """Both curves pinned at segment endpoints: the crossing elbow lies on
    circle C cut by the line through the two pinned endpoints."""
    r = pa.r
    th = pa.theta_of_x(x_guess)
    b = _elbow(th, r)

    def pinned(piece):
        best = None
        for x, kind in _contact_candidates(piece.seg, b, r):
            psi = _cw_angle_from_target_dir(b, x)
            if psi <= HALF_PI + 1e-9 and (best is None or psi < best[0]):
                best = (psi, x, kind)
        return best

    ca, cb = pinned(pa), pinned(pb)
    if not ca or not cb or ca[2] != "endpoint" or cb[2] != "endpoint":
        return None
    p, q = ca[1], cb[1]
    d = q - p
    dd = float(np.dot(d, d))
    if dd < 1e-30:
        return None
    qb = 2.0 * float(np.dot(p, d))
    qc = float(np.dot(p, p)) - r * r
    disc = qb * qb - 4.0 * dd * qc
    if disc < 0.0:
        return None
    sq = math.sqrt(disc)
    best = None
    for t in ((-qb - sq) / (2 * dd), (-qb + sq) / (2 * dd)):
        cand = p + t * d
        if (cand[1] >= 0) != (pa.hemi > 0):
            continue
        if best is None or abs(cand[0] - x_guess) < abs(best - x_guess):
            best = float(cand[0])
    if best is None:
        return None
    if abs(pa.value_at_x(best) - pb.value_at_x(best)) > 100.0 * tol.tol_residual:
        return None
    return best


def curve_intersection(pa: CurvePiece, pb: CurvePiece,
                       tol: ToleranceProfile = DEFAULT_TOL) -> Optional[CurveCrossing]:
    """Single crossing of two curve pieces over their shared x-domain.

    Closed form when both contacts are endpoint-pinned at the crossing,
    safeguarded bisection otherwise (justified by the pseudo-segment
    property: two curves cross at most once).
    """
    if pa.seg.sid == pb.seg.sid:
        raise ValueError("pieces must come from distinct segments")
    if pa.hemi != pb.hemi:
        return None
    lo = max(pa.x_lo, pb.x_lo)
    hi = min(pa.x_hi, pb.x_hi)
    if hi - lo <= 1e-14:
        return None
    flo = pa.value_at_x(lo) - pb.value_at_x(lo)
    fhi = pa.value_at_x(hi) - pb.value_at_x(hi)
    if flo == 0.0 and fhi == 0.0:
        return None
    if (flo >= 0.0) == (fhi >= 0.0):
        return None
    x = _bisect_crossing(pa.value_at_x, pb.value_at_x, lo, hi, flo)
    xa = _case_a_closed_form(pa, pb, x, tol)
    if xa is not None and lo - 1e-9 <= xa <= hi + 1e-9:
        x = xa
    below_left = pa.seg.sid if flo < 0 else pb.seg.sid
    below_right = pb.seg.sid if flo < 0 else pa.seg.sid
    return CurveCrossing(x=x, below_left=below_left, below_right=below_right)


# ---------------------------------------------------------------------------
# envelope construction (divide and conquer)


class _HemiEnvelope:
    """Breakpoints xs (len k+1) and the active piece per interval (len k)."""

    __slots__ = ("xs", "pieces")

    def __init__(self, xs, pieces):
        self.xs = xs
        self.pieces = pieces

    @staticmethod
    def of_piece(piece: CurvePiece, r: float) -> "_HemiEnvelope":
        xs = [-r]
        ps: list[Optional[CurvePiece]] = []
        if piece.x_lo > -r + 1e-15:
            xs.append(piece.x_lo)
            ps.append(None)
        xs.append(min(max(piece.x_hi, xs[-1] + 1e-18), r))
        ps.append(piece)
        if xs[-1] < r - 1e-15:
            xs.append(r)
            ps.append(None)
        return _HemiEnvelope(xs, ps)

    @staticmethod
    def empty(r: float) -> "_HemiEnvelope":
        return _HemiEnvelope([-r, r], [None])


def _piece_order(piece: CurvePiece) -> tuple:
    return (piece.seg.sid, piece.theta_lo)


def _merge_cell(pa: Optional[CurvePiece], pb: Optional[CurvePiece],
                x0: float, x1: float):
    """Lower envelope of two pieces over one elementary interval.

    Returns a list of (interval_end, winning_piece)."""
    if pa is None and pb is None:
        return [(x1, None)]
    if pa is None:
        return [(x1, pb)]
    if pb is None:
        return [(x1, pa)]
    f0 = pa.value_at_x(x0) - pb.value_at_x(x0)
    f1 = pa.value_at_x(x1) - pb.value_at_x(x1)
    tie = 1e-15
    if abs(f0) <= tie and abs(f1) <= tie:
        winner = pa if _piece_order(pa) <= _piece_order(pb) else pb
        return [(x1, winner)]
    if (f0 <= 0.0) == (f1 <= 0.0):
        # same side at both ends; guard against a double crossing in the
        # cell (clip-boundary curve pairs can osculate and cross twice)
        xm = 0.5 * (x0 + x1)
        fm = pa.value_at_x(xm) - pb.value_at_x(xm)
        if (fm <= 0.0) == (f0 <= 0.0) or abs(fm) <= tie:
            winner = pa if f0 + f1 < 0.0 else pb
            return [(x1, winner)]
        xc1 = _bisect_crossing(pa.value_at_x, pb.value_at_x, x0, xm, f0)
        xc2 = _bisect_crossing(pa.value_at_x, pb.value_at_x, xm, x1, fm)
        outer, inner = (pa, pb) if f0 < 0.0 else (pb, pa)
        out = []
        if xc1 > x0 + 1e-18:
            out.append((xc1, outer))
        if xc2 > (out[-1][0] if out else x0) + 1e-18:
            out.append((xc2, inner))
        out.append((x1, outer))
        return out
    xc = _bisect_crossing(pa.value_at_x, pb.value_at_x, x0, x1, f0)
    first, second = (pa, pb) if f0 < 0.0 else (pb, pa)
    if xc <= x0 + 1e-18:
        return [(x1, second)]
    if xc >= x1 - 1e-18:
        return [(x1, first)]
    return [(xc, first), (x1, second)]


def _merge_hemi(ea: _HemiEnvelope, eb: _HemiEnvelope) -> _HemiEnvelope:
    xs = sorted(set(ea.xs) | set(eb.xs))
    out_x = [xs[0]]
    out_p: list[Optional[CurvePiece]] = []
    ia = ib = 0
    for x0, x1 in zip(xs[:-1], xs[1:]):
        while ia < len(ea.pieces) - 1 and ea.xs[ia + 1] <= x0:
            ia += 1
        while ib < len(eb.pieces) - 1 and eb.xs[ib + 1] <= x0:
            ib += 1
        for xe, pe in _merge_cell(ea.pieces[ia], eb.pieces[ib], x0, x1):
            if out_p and out_p[-1] is pe:
                out_x[-1] = xe
            else:
                out_x.append(xe)
                out_p.append(pe)
    return _HemiEnvelope(out_x, out_p)


def _dnc(pieces: list[CurvePiece], r: float) -> _HemiEnvelope:
    if not pieces:
        return _HemiEnvelope.empty(r)
    if len(pieces) == 1:
        return _HemiEnvelope.of_piece(pieces[0], r)
    mid = len(pieces) // 2
    return _merge_hemi(_dnc(pieces[:mid], r), _dnc(pieces[mid:], r))


def _coalesce_by_segment(env: _HemiEnvelope):
    """Collapse adjacent intervals induced by the same segment."""
    xs = [env.xs[0]]
    segs: list[Optional[StoredSegment]] = []
    for i, piece in enumerate(env.pieces):
        seg = piece.seg if piece is not None else None
        if segs and ((segs[-1] is None and seg is None) or
                     (segs[-1] is not None and seg is not None
                      and segs[-1].sid == seg.sid)):
            xs[-1] = env.xs[i + 1]
        else:
            xs.append(env.xs[i + 1])
            segs.append(seg)
    return np.asarray(xs), tuple(segs)


def build_envelopes(instance: PlanarInstance) -> Envelope:
    """Divide-and-conquer construction of both hemisphere envelopes."""
    r = instance.r
    all_pieces: list[CurvePiece] = []
    forbidden_raw: list[tuple[float, float]] = []
    for seg in instance.stored:
        pieces, forb = curve_pieces_of(seg, r, instance.tol)
        all_pieces.extend(pieces)
        forbidden_raw.extend(forb)

    upper = sorted([p for p in all_pieces if p.hemi > 0], key=lambda p: p.x_lo)
    lower = sorted([p for p in all_pieces if p.hemi < 0], key=lambda p: p.x_lo)
    e1 = _dnc(upper, r)
    e2 = _dnc(lower, r)
    xs1, segs1 = _coalesce_by_segment(e1)
    xs2, segs2 = _coalesce_by_segment(e2)

    flat: list[tuple[float, float]] = []
    for lo, hi in forbidden_raw:
        width = hi - lo
        lo %= TWO_PI
        hi = lo + width
        if hi <= TWO_PI:
            flat.append((lo, hi))
        else:
            flat.append((lo, TWO_PI))
            flat.append((0.0, hi - TWO_PI))
    flat.sort()

    return Envelope(r=r, sense=instance.sense, mirrored=instance.mirrored,
                    xs1=xs1, segs1=segs1, xs2=xs2, segs2=segs2,
                    forbidden=tuple(flat), stored=instance.stored,
                    curve_pieces=tuple(all_pieces), tol=instance.tol)


# ---------------------------------------------------------------------------
# queries


def _theta_forbidden(env: Envelope, theta: float) -> bool:
    for lo, hi in env.forbidden:
        if lo - 1e-12 <= theta <= hi + 1e-12:
            return True
    return False


def _theta_of_x(x: float, r: float, hemi: int) -> float:
    c = max(-1.0, min(1.0, x / r))
    t = math.acos(c)
    return t if hemi >= 0 else TWO_PI - t


def envelope_value(env: Envelope, x: float, hemi: int) -> float:
    """Pointwise envelope value (testing aid; queries never evaluate it)."""
    xs, segs = (env.xs1, env.segs1) if hemi >= 0 else (env.xs2, env.segs2)
    idx = int(np.searchsorted(xs, x, side="right")) - 1
    idx = max(0, min(idx, len(segs) - 1))
    seg = segs[idx]
    if seg is None:
        return math.inf
    return segment_rotation_metric(seg, _theta_of_x(x, env.r, hemi), env.r)


def retrieve_inducing_segment(env: Envelope, b_internal: np.ndarray
                              ) -> Optional[StoredSegment]:
    xs, segs = (env.xs1, env.segs1) if b_internal[1] >= 0.0 else (env.xs2, env.segs2)
    x = max(-env.r, min(env.r, float(b_internal[0])))
    idx = int(np.searchsorted(xs, x, side="right")) - 1
    idx = max(0, min(idx, len(segs) - 1))
    return segs[idx]


def query_sector_empty(env: Envelope, b, rho: float, sense: str) -> bool:
    """True iff the sector with apex b, angle rho and the given sense misses
    every stored segment: one envelope lookup plus one explicit test."""
    if sense != env.sense:
        raise SenseMismatch(f"envelope built for {env.sense!r}, queried with {sense!r}")
    b = np.asarray(b, dtype=float)
    if env.mirrored:
        b = b * np.array([1.0, -1.0])
    theta = polar_angle(b)
    if _theta_forbidden(env, theta):
        return False
    seg = retrieve_inducing_segment(env, b)
    if seg is None:
        return True
    sec = _sector_at(b, rho, env.r)
    return sector_segment_witness_2d(sec, seg.p0, seg.p1, env.tol) is None


def sector_empty_bruteforce(segments: Sequence, r: float, b, rho: float, sense: str,
                            tol: ToleranceProfile = DEFAULT_TOL) -> bool:
    """Reference answer: test the sector against every raw segment."""
    b = np.asarray(b, dtype=float)
    flip = np.array([1.0, -1.0]) if sense == "ccw" else np.array([1.0, 1.0])
    b = b * flip
    sec = _sector_at(b, rho, r)
    for seg in segments:
        p0 = np.asarray(seg[0], dtype=float) * flip
        p1 = np.asarray(seg[1], dtype=float) * flip
        if sector_segment_witness_2d(sec, p0, p1, tol) is not None:
            return False
    return True


# ---------------------------------------------------------------------------
# vectorized brute force (oracle helper for tests and batch CLI runs)


def sector_hits_segments_bulk(b, rho: float, sense: str, p0: np.ndarray, p1: np.ndarray,
                              r: float, tol: ToleranceProfile = DEFAULT_TOL) -> np.ndarray:
    """Vectorized sector-vs-many-segments contact mask; mirrors the scalar
    predicate's semantics (touches within tol_incidence count)."""
    b = np.asarray(b, dtype=float)
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    if sense == "ccw":
        flip = np.array([1.0, -1.0])
        b = b * flip
        p0 = p0 * flip
        p1 = p1 * flip
    bu = b * (r / norm(b))
    dir_end = -bu / r
    dir_start = rot2(dir_end, -rho)
    ti = tol.tol_incidence
    c12 = dir_start[0] * dir_end[1] - dir_start[1] * dir_end[0]

    def point_dist(pts):
        if rho <= 1e-12:
            return _point_seg_dist_bulk(pts, bu, bu + r * dir_end)
        v = pts - bu
        rv = np.linalg.norm(v, axis=-1)
        c1 = dir_start[0] * v[:, 1] - dir_start[1] * v[:, 0]
        c2 = v[:, 0] * dir_end[1] - v[:, 1] * dir_end[0]
        if c12 >= 0:
            in_wedge = (c1 >= 0) & (c2 >= 0)
        else:
            in_wedge = (c1 <= 0) & (c2 <= 0)
        d_in = np.maximum(rv - r, 0.0)
        d_r1 = _point_seg_dist_bulk(pts, bu, bu + r * dir_start)
        d_r2 = _point_seg_dist_bulk(pts, bu, bu + r * dir_end)
        return np.where(in_wedge, d_in, np.minimum(d_r1, d_r2))

    hit = point_dist(p0) <= ti
    hit |= point_dist(p1) <= ti
    for w in (dir_start, dir_end):
        hit |= _seg_seg_dist_bulk(p0, p1, bu, bu + r * w) <= ti
    d = p1 - p0
    w0 = p0 - bu
    qa = np.sum(d * d, axis=1)
    qb = 2.0 * np.sum(w0 * d, axis=1)
    qc = np.sum(w0 * w0, axis=1) - r * r
    disc = qb * qb - 4.0 * qa * qc
    ok = (disc >= 0.0) & (qa > 0.0)
    sq = np.sqrt(np.maximum(disc, 0.0))
    for sgn in (-1.0, 1.0):
        t = np.where(ok, (-qb + sgn * sq) / np.where(qa > 0, 2 * qa, 1.0), -1.0)
        valid = ok & (t >= -1e-12) & (t <= 1.0 + 1e-12)
        x = p0 + np.clip(t, 0.0, 1.0)[:, None] * d
        hit |= valid & (point_dist(x) <= ti)
    return hit


def _point_seg_dist_bulk(pts, a, b):
    d = b - a
    dd = float(np.dot(d, d))
    if dd == 0.0:
        return np.linalg.norm(pts - a, axis=-1)
    s = np.clip(((pts - a) @ d) / dd, 0.0, 1.0)
    return np.linalg.norm(pts - (a + s[:, None] * d), axis=-1)


def _seg_seg_dist_bulk(p0, p1, a, b):
    d1 = p1 - p0
    d2 = b - a
    den = d1[:, 0] * d2[1] - d1[:, 1] * d2[0]
    w = a - p0
    safe = np.where(np.abs(den) > 1e-15, den, 1.0)
    t = (w[:, 0] * d2[1] - w[:, 1] * d2[0]) / safe
    s = (w[:, 0] * d1[:, 1] - w[:, 1] * d1[:, 0]) / safe
    crossing = (np.abs(den) > 1e-15) & (t >= 0) & (t <= 1) & (s >= 0) & (s <= 1)
    dist = np.minimum.reduce([
        _point_seg_dist_bulk(p0, a, b),
        _point_seg_dist_bulk(p1, a, b),
        _point_to_segs_dist_bulk(a, p0, p1),
        _point_to_segs_dist_bulk(b, p0, p1),
    ])
    return np.where(crossing, 0.0, dist)


def _point_to_segs_dist_bulk(p, a0, a1):
    d = a1 - a0
    dd = np.sum(d * d, axis=1)
    dd_safe = np.where(dd > 0, dd, 1.0)
    s = np.clip(np.sum((p - a0) * d, axis=1) / dd_safe, 0.0, 1.0)
    proj = a0 + s[:, None] * d
    return np.linalg.norm(p - proj, axis=1)
