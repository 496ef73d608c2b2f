"""Per-case solvers turning combinatorial events into candidate trajectories.

Solver families:
  transversal   - four supports on the straight probe line (Pluecker pencil)
  planar        - supports pin the motion plane, the rest is 2D intersection
  curve         - one or two scalar unknowns on sphere C, root-found
  algebraic     - full square residual systems, multi-start Newton

Every raw solution passes a uniform post-filter: rotation within [0, pi/2],
and each declared support must actually touch its probe element within
tol_incidence.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..feasibility import Trajectory, make_trajectory, sector_of, sector_point_distance
from ..geometry import (
    DegenerateConfiguration,
    Segment3,
    ToleranceProfile,
    line_transversals_4,
    norm,
    point_segment_distance3,
    point_triangle_closest,
    pluecker_of_segment,
    pluecker_side,
    seed_grid,
    segment_segment_distance3,
    solve_square_system,
    unit,
)
from .events import ExtremalEvent, SceneIndex, Support


class UnsupportedCase(Exception):
    """Event case id outside the implemented catalog."""


def _rank_seeds(residual, seeds, keep: int):
    """Cheap pre-screen: keep the seeds with the smallest initial residual."""
    scored = []
    for s in seeds:
        r = residual(np.asarray(s, dtype=float))
        n = float(np.linalg.norm(r)) if np.all(np.isfinite(r)) else math.inf
        scored.append((n, tuple(float(t) for t in s)))
    scored.sort(key=lambda t: t[0])
    return [np.array(s) for _, s in scored[:keep]]


@dataclass(frozen=True)
class CandidateSolution:
    event: ExtremalEvent
    trajectory: Trajectory
    residual: float
    incidences: tuple[float, ...]


# ---------------------------------------------------------------------------
# shared constructions


def _entry_elbow(p0: np.ndarray, d: np.ndarray, r: float) -> Optional[np.ndarray]:
    """First crossing of the directed line p0 + t*d with sphere C."""
    qb = 2.0 * float(np.dot(p0, d))
    qc = float(np.dot(p0, p0)) - r * r
    disc = qb * qb - 4.0 * qc
    if disc <= 0.0:
        return None
    sq = math.sqrt(disc)
    t = (-qb - sq) / 2.0
    return p0 + t * d


def _pierce_plane(seg: Segment3, n: np.ndarray) -> Optional[np.ndarray]:
    """Intersection of a segment with the plane n.x = 0 through the target."""
    d = seg.v - seg.u
    den = float(np.dot(n, d))
    if abs(den) <= 1e-14:
        return None
    s = -float(np.dot(n, seg.u)) / den
    if s < -1e-9 or s > 1.0 + 1e-9:
        return None
    return seg.u + min(max(s, 0.0), 1.0) * d


def _line_through_point_meeting_two(b: np.ndarray, s1: Segment3, s2: Segment3
                                    ) -> Optional[np.ndarray]:
    """Direction of the line through b meeting the supporting lines of s1
    and s2 (unique in general position)."""
    d2 = s2.v - s2.u
    n = np.cross(d2, s2.u - b)
    nn = norm(n)
    if nn <= 1e-14:
        return None  # b on line(s2)
    n = n / nn
    d1 = s1.v - s1.u
    den = float(np.dot(n, d1))
    if abs(den) <= 1e-14:
        return None
    s = float(np.dot(n, b - s1.u)) / den
    x1 = s1.u + s * d1
    w = x1 - b
    if norm(w) <= 1e-14:
        return None
    return unit(w)


def _radial_through_two(s1: Segment3, s2: Segment3, tol: ToleranceProfile
                        ) -> Optional[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Ray from the target meeting both segments: (unit direction, x1, x2).

    The incidence condition is linear in the parameter of s1, so the ray is
    closed form.
    """
    m2 = np.cross(s2.u, s2.v)
    a0 = float(np.dot(s1.u, m2))
    a1 = float(np.dot(s1.v, m2))
    if abs(a0 - a1) <= 1e-18:
        return None
    lam = a0 / (a0 - a1)
    if lam < -1e-9 or lam > 1.0 + 1e-9:
        return None
    x1 = s1.u + min(max(lam, 0.0), 1.0) * (s1.v - s1.u)
    n1 = norm(x1)
    if n1 <= 1e-12:
        return None
    u = x1 / n1
    # intersection parameter of the ray with line(s2)
    d2 = s2.v - s2.u
    cr = np.cross(u, d2)
    cr2 = float(np.dot(cr, cr))
    if cr2 <= 1e-18:
        return None
    t2 = float(np.dot(np.cross(s2.u, d2), cr)) / cr2
    if t2 <= tol.tol_incidence:
        return None
    x2 = u * t2
    if point_segment_distance3(x2, s2.u, s2.v) > 10.0 * tol.tol_incidence:
        return None
    return u, x1, x2


# ---------------------------------------------------------------------------
# support incidence checks


def _piece_seg(index: SceneIndex, uid: int) -> Segment3:
    p = index.piece(uid)
    return Segment3(p.u, p.v)


def _support_incidence(index: SceneIndex, s: Support, traj: Trajectory) -> float:
    """Distance by which a declared support misses its probe element."""
    scene = index.scene
    a = traj.entry_point(scene.R)
    c_int = traj.c_int
    origin = np.zeros(3)
    if s.role == "ab":
        target_seg = (a, traj.b)
    elif s.role == "bc":
        target_seg = (traj.b, c_int)
    elif s.role == "bt":
        target_seg = (traj.b, origin)
    else:
        target_seg = None

    if s.role in ("ab", "bc", "bt"):
        if s.kind == "vertex":
            v = index.vertex(s.index).p
            return point_segment_distance3(v, target_seg[0], target_seg[1])
        seg = _piece_seg(index, s.index)
        return segment_segment_distance3(seg.u, seg.v, target_seg[0], target_seg[1])

    sec, plane = sector_of(traj)
    u, v_axis = plane.basis()

    def to2(p):
        return np.array([float(np.dot(p, u)), float(np.dot(p, v_axis))])

    if s.role == "sector":
        p = index.vertex(s.index).p
        plane_dist = abs(plane.signed_distance(p))
        return max(plane_dist, sector_point_distance(sec, to2(p)))

    # arc tangency
    r = scene.r
    if s.kind == "edge":
        e = index.edge(s.index)
        d = e.v - e.u
        dd = float(np.dot(d, d))
        t = float(np.dot(traj.b - e.u, d)) / dd
        foot = e.u + t * d
        seg_miss = max(0.0, (abs(t - 0.5) - 0.5) * math.sqrt(dd))
    else:
        tri = scene.triangles[s.index]
        pl = tri.plane()
        sd = pl.signed_distance(traj.b)
        foot = traj.b - sd * pl.normal
        seg_miss = point_triangle_closest(foot, tri)[0]
    tangency = abs(norm(foot - traj.b) - r)
    plane_dist = abs(plane.signed_distance(foot))
    arc_dist = sector_point_distance(sec, to2(foot))
    return max(tangency, plane_dist, arc_dist, seg_miss)


def _assemble(index: SceneIndex, event: ExtremalEvent, b: np.ndarray,
              d: np.ndarray, residual: float) -> Optional[CandidateSolution]:
    scene = index.scene
    tol = scene.tol
    if abs(norm(b) - scene.r) > tol.tol_incidence:
        return None
    try:
        traj = make_trajectory(b, d)
    except ValueError:
        return None
    ang_tol = max(1e-9, tol.tol_incidence / scene.r)
    if traj.rho > 0.5 * math.pi + ang_tol:
        return None
    incidences = []
    for s in event.supports:
        dist = _support_incidence(index, s, traj)
        if not math.isfinite(dist) or dist > tol.tol_incidence:
            return None
        incidences.append(dist)
    return CandidateSolution(event=event, trajectory=traj,
                             residual=float(residual), incidences=tuple(incidences))


def _assemble_both(index, event, b, direction, residual):
    out = []
    for d in (direction, -direction):
        cand = _assemble(index, event, b, d, residual)
        if cand is not None:
            out.append(cand)
    return out


# ---------------------------------------------------------------------------
# family: transversal (A9, A12, A15)


def _solve_transversal(index: SceneIndex, event: ExtremalEvent) -> list[CandidateSolution]:
    scene = index.scene
    segs = [_piece_seg(index, s.index) for s in event.supports]
    try:
        lines = line_transversals_4(segs, scene.tol)
    except DegenerateConfiguration:
        return []
    out = []
    for L in lines:
        plk = [pluecker_of_segment(s) for s in segs]
        Lp = np.concatenate([L.direction, np.cross(L.point, L.direction)])
        Lp = Lp / np.linalg.norm(Lp)
        residual = max(abs(pluecker_side(Lp, q)) for q in plk)
        for d in (L.direction, -L.direction):
            b = _entry_elbow(L.point, d, scene.r)
            if b is None:
                continue
            cand = _assemble(index, event, b, d, residual)
            if cand is not None:
                out.append(cand)
    return out


# ---------------------------------------------------------------------------
# family: planar reductions (A4, A11, AV1, AV2, AV3)


def _solve_a4(index: SceneIndex, event: ExtremalEvent) -> list[CandidateSolution]:
    ea, et = event.supports[0], event.supports[1]
    v1 = index.vertex(event.supports[2].index).p
    v2 = index.vertex(event.supports[3].index).p
    n = np.cross(v1, v2)
    if norm(n) <= 1e-12 * max(norm(v1) * norm(v2), 1e-30):
        return []  # collinear with the target: no unique plane
    n = unit(n)
    x2 = _pierce_plane(_piece_seg(index, et.index), n)
    if x2 is None or norm(x2) <= 1e-12:
        return []
    b = index.scene.r * unit(x2)
    x1 = _pierce_plane(_piece_seg(index, ea.index), n)
    if x1 is None or norm(b - x1) <= 1e-12:
        return []
    cand = _assemble(index, event, b, unit(b - x1), 0.0)
    return [cand] if cand else []


def _solve_a11(index: SceneIndex, event: ExtremalEvent) -> list[CandidateSolution]:
    v1 = index.vertex(event.supports[2].index).p
    v2 = index.vertex(event.supports[3].index).p
    n = np.cross(v1, v2)
    if norm(n) <= 1e-12 * max(norm(v1) * norm(v2), 1e-30):
        return []
    n = unit(n)
    x1 = _pierce_plane(_piece_seg(index, event.supports[0].index), n)
    x2 = _pierce_plane(_piece_seg(index, event.supports[1].index), n)
    if x1 is None or x2 is None or norm(x2 - x1) <= 1e-12:
        return []
    direction = unit(x2 - x1)
    out = []
    for d in (direction, -direction):
        b = _entry_elbow(x1, d, index.scene.r)
        if b is None:
            continue
        cand = _assemble(index, event, b, d, 0.0)
        if cand is not None:
            out.append(cand)
    return out


def _solve_av1(index: SceneIndex, event: ExtremalEvent) -> list[CandidateSolution]:
    v1 = index.vertex(event.supports[0].index).p
    v2 = index.vertex(event.supports[1].index).p
    if norm(v2 - v1) <= 1e-12:
        return []
    direction = unit(v2 - v1)
    out = []
    for d in (direction, -direction):
        b = _entry_elbow(v1, d, index.scene.r)
        if b is None:
            continue
        cand = _assemble(index, event, b, d, 0.0)
        if cand is not None:
            out.append(cand)
    return out


def _solve_av2(index: SceneIndex, event: ExtremalEvent) -> list[CandidateSolution]:
    v = index.vertex(event.supports[0].index).p
    s1 = _piece_seg(index, event.supports[1].index)
    s2 = _piece_seg(index, event.supports[2].index)
    direction = _line_through_point_meeting_two(v, s1, s2)
    if direction is None:
        return []
    out = []
    for d in (direction, -direction):
        b = _entry_elbow(v, d, index.scene.r)
        if b is None:
            continue
        cand = _assemble(index, event, b, d, 0.0)
        if cand is not None:
            out.append(cand)
    return out


def _solve_av3(index: SceneIndex, event: ExtremalEvent) -> list[CandidateSolution]:
    scene = index.scene
    v = index.vertex(event.supports[0].index).p
    w = index.vertex(event.supports[1].index).p
    nv = norm(v)
    if nv <= 1e-12:
        return []
    b = scene.r * (v / nv)
    n = np.cross(b, w)
    if norm(n) <= 1e-12 * max(norm(b) * norm(w), 1e-30):
        return []
    n = unit(n)
    out = []
    for uid in range(len(index.pieces)):
        x = _pierce_plane(_piece_seg(index, uid), n)
        if x is None or norm(b - x) <= 1e-12:
            continue
        for d in (unit(b - x), unit(x - b)):
            cand = _assemble(index, event, b, d, 0.0)
            if cand is not None:
                out.append(cand)
    return out


# ---------------------------------------------------------------------------
# family: radial-pair reductions (A3, A5, A10)


def _solve_radial_pair(index: SceneIndex, event: ExtremalEvent) -> list[CandidateSolution]:
    scene = index.scene
    case = event.case
    if case == "A3":
        bt_ids = [event.supports[2].index, event.supports[3].index]
    elif case == "A5":
        bt_ids = [event.supports[1].index, event.supports[2].index]
    else:  # A10
        bt_ids = [event.supports[2].index, event.supports[3].index]
    out = []
    for i, j in ((0, 1), (1, 0)):
        hit = _radial_through_two(_piece_seg(index, bt_ids[i]),
                                  _piece_seg(index, bt_ids[j]), scene.tol)
        if hit is None:
            continue
        u, x1, x2 = hit
        if max(norm(x1), norm(x2)) > scene.r + scene.tol.tol_incidence:
            continue
        b = scene.r * u
        if case == "A3":
            ea = _piece_seg(index, event.supports[0].index)
            eb = _piece_seg(index, event.supports[1].index)
            direction = _line_through_point_meeting_two(b, ea, eb)
            if direction is None:
                continue
            out.extend(_assemble_both(index, event, b, direction, 0.0))
        elif case == "A5":
            vtx = index.vertex(event.supports[3].index).p
            n = np.cross(b, vtx)
            if norm(n) <= 1e-12:
                continue
            x = _pierce_plane(_piece_seg(index, event.supports[0].index), unit(n))
            if x is None or norm(b - x) <= 1e-12:
                continue
            cand = _assemble(index, event, b, unit(b - x), 0.0)
            if cand is not None:
                out.append(cand)
        else:  # A10
            ea1 = _piece_seg(index, event.supports[0].index)
            ea2 = _piece_seg(index, event.supports[1].index)
            direction = _line_through_point_meeting_two(b, ea1, ea2)
            if direction is None:
                continue
            out.extend(_assemble_both(index, event, b, direction, 0.0))
    return _dedupe(out, scene.tol)


# ---------------------------------------------------------------------------
# family: one-parameter curve intersections (A2, A8, A13, A16, A17, A21)


def _b_of_lambda(seg: Segment3, r: float):
    du = seg.v - seg.u

    def b_fn(lam: float) -> Optional[np.ndarray]:
        x = seg.u + lam * du
        nx = norm(x)
        if nx <= 1e-12:
            return None
        return r * (x / nx)
    return b_fn


def _solve_line_residual_1d(index: SceneIndex, event: ExtremalEvent,
                            make_pair: Sequence[int], residual_id: int,
                            bt_id: int) -> list[CandidateSolution]:
    """Elbow on the radial projection of the bt edge; the line through the
    elbow meeting two support lines must also meet the third (side product
    residual)."""
    scene = index.scene
    tol = scene.tol
    et = _piece_seg(index, bt_id)
    b_fn = _b_of_lambda(et, scene.r)
    s1 = _piece_seg(index, make_pair[0])
    s2 = _piece_seg(index, make_pair[1])
    s3 = _piece_seg(index, residual_id)
    L3 = pluecker_of_segment(s3)

    def residual(x: np.ndarray) -> np.ndarray:
        b = b_fn(float(x[0]))
        if b is None:
            return np.array([1e6])
        direction = _line_through_point_meeting_two(b, s1, s2)
        if direction is None:
            return np.array([1e6])
        Lp = np.concatenate([direction, np.cross(b, direction)])
        nl = np.linalg.norm(Lp)
        return np.array([pluecker_side(Lp / nl, L3)])

    seeds = [np.array([v]) for v in np.linspace(0.02, 0.98, 9)]
    roots = solve_square_system(residual, seeds,
                                (np.array([0.0]), np.array([1.0])), tol)
    out = []
    for root in roots:
        b = b_fn(float(root[0]))
        if b is None:
            continue
        direction = _line_through_point_meeting_two(b, s1, s2)
        if direction is None:
            continue
        res = abs(float(residual(root)[0]))
        out.extend(_assemble_both(index, event, b, direction, res))
    return _dedupe(out, tol)


def _tangency_residuals(index: SceneIndex, gamma: Support, r: float):
    """Residual branches for sphere-D tangency to a gamma support."""
    if gamma.kind == "edge":
        e = index.edge(gamma.index)
        d = unit(e.v - e.u)
        u0 = e.u

        def dist_line(b):
            w = b - u0
            return norm(w - float(np.dot(w, d)) * d)
        return [lambda b, f=dist_line: f(b) - r]
    tri = index.scene.triangles[gamma.index]
    pl = tri.plane()

    def sd(b):
        return pl.signed_distance(b)
    return [lambda b, f=sd: f(b) - r, lambda b, f=sd: f(b) + r]


def _gamma_foot(index: SceneIndex, gamma: Support, b: np.ndarray) -> Optional[np.ndarray]:
    if gamma.kind == "edge":
        e = index.edge(gamma.index)
        d = e.v - e.u
        t = float(np.dot(b - e.u, d)) / float(np.dot(d, d))
        return e.u + t * d
    tri = index.scene.triangles[gamma.index]
    pl = tri.plane()
    return b - pl.signed_distance(b) * pl.normal


def _solve_gamma_elbows(index: SceneIndex, bt_id: int, gamma: Support
                        ) -> list[np.ndarray]:
    """Elbow points with bt on the given edge and sphere D tangent to the
    gamma support: 1D root-find along the bt edge."""
    scene = index.scene
    et = _piece_seg(index, bt_id)
    b_fn = _b_of_lambda(et, scene.r)
    elbows = []
    for branch in _tangency_residuals(index, gamma, scene.r):
        def residual(x: np.ndarray, br=branch) -> np.ndarray:
            b = b_fn(float(x[0]))
            if b is None:
                return np.array([1e6])
            return np.array([br(b)])
        seeds = [np.array([v]) for v in np.linspace(0.02, 0.98, 9)]
        roots = solve_square_system(residual, seeds,
                                    (np.array([0.0]), np.array([1.0])), scene.tol)
        for root in roots:
            b = b_fn(float(root[0]))
            if b is not None:
                elbows.append(b)
    return elbows


def _solve_a16(index: SceneIndex, event: ExtremalEvent) -> list[CandidateSolution]:
    scene = index.scene
    gamma = event.supports[2]
    out = []
    for b in _solve_gamma_elbows(index, event.supports[1].index, gamma):
        foot = _gamma_foot(index, gamma, b)
        if foot is None:
            continue
        n = np.cross(b, foot)
        if norm(n) <= 1e-12:
            continue
        x3 = _pierce_plane(_piece_seg(index, event.supports[0].index), unit(n))
        if x3 is None or norm(b - x3) <= 1e-12:
            continue
        cand = _assemble(index, event, b, unit(b - x3), 0.0)
        if cand is not None:
            out.append(cand)
    return _dedupe(out, scene.tol)


def _solve_a17_a21(index: SceneIndex, event: ExtremalEvent) -> list[CandidateSolution]:
    """Gamma tangency + bt support pin the elbow; the motion plane must then
    contain one ab edge, and the remaining support pins the direction."""
    scene = index.scene
    tol = scene.tol
    if event.case == "A17":
        inplane_ids = [event.supports[0].index]      # the ab edge
        cross_support = event.supports[1]            # bc support
        bt_id = event.supports[2].index
        gamma = event.supports[3]
    else:  # A21: two ab edges, either may be the in-plane one
        inplane_ids = [event.supports[0].index, event.supports[1].index]
        bt_id = event.supports[2].index
        gamma = event.supports[3]
    out = []
    for b in _solve_gamma_elbows(index, bt_id, gamma):
        foot = _gamma_foot(index, gamma, b)
        if foot is None:
            continue
        nvec = np.cross(b, foot)
        if norm(nvec) <= 1e-12:
            continue
        n = unit(nvec)
        for k, inplane_id in enumerate(inplane_ids):
            seg_in = _piece_seg(index, inplane_id)
            if abs(float(np.dot(n, seg_in.u))) > tol.tol_incidence or \
               abs(float(np.dot(n, seg_in.v))) > tol.tol_incidence:
                continue  # plane does not contain the edge
            if event.case == "A17":
                other = cross_support
            else:
                other = event.supports[1 - k]
            x = _pierce_plane(_piece_seg(index, other.index), n)
            if x is None or norm(b - x) <= 1e-12:
                continue
            if event.case == "A17":
                direction = unit(x - b)   # bc support sits ahead of the elbow
                cand = _assemble(index, event, b, direction, 0.0)
                if cand is not None:
                    out.append(cand)
            else:
                cand = _assemble(index, event, b, unit(b - x), 0.0)
                if cand is not None:
                    out.append(cand)
    return _dedupe(out, tol)


def _sphere_param(theta: float, phi: float, r: float) -> np.ndarray:
    return r * np.array([math.cos(theta) * math.sin(phi),
                         math.sin(theta) * math.sin(phi),
                         math.cos(phi)])


def _solve_a20(index: SceneIndex, event: ExtremalEvent) -> list[CandidateSolution]:
    scene = index.scene
    tol = scene.tol
    ea1 = _piece_seg(index, event.supports[0].index)
    ea2 = _piece_seg(index, event.supports[1].index)
    eb = _piece_seg(index, event.supports[2].index)
    gamma = event.supports[3]
    Lb = pluecker_of_segment(eb)
    out = []
    for branch in _tangency_residuals(index, gamma, scene.r):
        def residual(x: np.ndarray, br=branch) -> np.ndarray:
            b = _sphere_param(float(x[0]), float(x[1]), scene.r)
            direction = _line_through_point_meeting_two(b, ea1, ea2)
            if direction is None:
                return np.array([1e6, 1e6])
            Lp = np.concatenate([direction, np.cross(b, direction)])
            Lp = Lp / np.linalg.norm(Lp)
            return np.array([pluecker_side(Lp, Lb), br(b)])

        seeds = []
        for th in np.linspace(0.1, 2 * math.pi - 0.1, 6):
            for ph in np.linspace(0.2, math.pi - 0.2, 4):
                seeds.append(np.array([th, ph]))
        roots = solve_square_system(
            residual, _rank_seeds(residual, seeds, 10),
            (np.array([-1.0, -0.5]), np.array([2 * math.pi + 1.0, math.pi + 0.5])),
            tol)
        for root in roots:
            b = _sphere_param(float(root[0]), float(root[1]), scene.r)
            direction = _line_through_point_meeting_two(b, ea1, ea2)
            if direction is None:
                continue
            res = float(np.max(np.abs(residual(root))))
            out.extend(_assemble_both(index, event, b, direction, res))
    return _dedupe(out, tol)


# ---------------------------------------------------------------------------
# family: full algebraic systems (A1, A6, A7, A14, A22)


def case1_unknowns(lam: np.ndarray, e1: Segment3, e2: Segment3, e3: Segment3
                   ) -> np.ndarray:
    """Expand the reduced unknowns (l1, l2, l3, l_bt, l_pq) to the full
    14-vector (lambdas, b, p, q)."""
    l1, l2, l3, lbt, lpq = (float(v) for v in lam)
    p = e1.u + l1 * (e1.v - e1.u)
    q = e3.u + l3 * (e3.v - e3.u)
    b = (1.0 - lpq) * p + lpq * q
    return np.concatenate([[l1, l2, l3, lbt, lpq], b, p, q])


def case1_full_residual(x: np.ndarray, e1: Segment3, e2: Segment3, e3: Segment3,
                        v: np.ndarray, r: float) -> np.ndarray:
    """Residual of the full Case 1 system (target already at the origin).

    Components: bt meets e2 (3), elbow on sphere C (1), elbow between the
    two probe-line supports (3), p on e1 (3), q on e3 (3), support vertex
    coplanar with the motion plane (1).
    """
    l1, l2, l3, lbt, lpq = x[:5]
    b = x[5:8]
    p = x[8:11]
    q = x[11:14]
    r1 = (1.0 - lbt) * b - (e2.u + l2 * (e2.v - e2.u))
    r2 = np.array([float(np.dot(b, b)) - r * r])
    r3 = b - ((1.0 - lpq) * p + lpq * q)
    r4 = p - (e1.u + l1 * (e1.v - e1.u))
    r5 = q - (e3.u + l3 * (e3.v - e3.u))
    r6 = np.array([float(np.dot(np.cross(b, v), p))])
    return np.concatenate([r1, r2, r3, r4, r5, r6])


def _solve_a1(index: SceneIndex, event: ExtremalEvent) -> list[CandidateSolution]:
    scene = index.scene
    tol = scene.tol
    e1 = _piece_seg(index, event.supports[0].index)   # ab support
    e3 = _piece_seg(index, event.supports[1].index)   # bc support
    e2 = _piece_seg(index, event.supports[2].index)   # bt support
    v = index.vertex(event.supports[3].index).p
    r = scene.r
    scale = max(r, 1.0)

    def residual(x: np.ndarray) -> np.ndarray:
        l1, l2, l3, lbt, lpq = (float(t) for t in x)
        p = e1.u + l1 * (e1.v - e1.u)
        q = e3.u + l3 * (e3.v - e3.u)
        b = (1.0 - lpq) * p + lpq * q
        r1 = (1.0 - lbt) * b - (e2.u + l2 * (e2.v - e2.u))
        r2 = (float(np.dot(b, b)) - r * r) / scale
        r6 = float(np.dot(np.cross(b, v), p)) / (scale * scale)
        return np.array([r1[0], r1[1], r1[2], r2, r6])

    # consistent seeds: grid the free parameters, complete the rest
    seeds = []
    for l1 in (0.25, 0.5, 0.75):
        for l3 in (0.25, 0.5, 0.75):
            for lpq in (0.3, 0.5, 0.7):
                p = e1.u + l1 * (e1.v - e1.u)
                q = e3.u + l3 * (e3.v - e3.u)
                b = (1.0 - lpq) * p + lpq * q
                nb = norm(b)
                if nb <= 1e-9:
                    continue
                bt_seg = Segment3(b, np.zeros(3))
                d2 = e2.v - e2.u
                dd = float(np.dot(d2, d2))
                l2 = min(max(float(np.dot(-e2.u, d2)) / dd, 0.0), 1.0)
                x2 = e2.u + l2 * d2
                lbt = min(max(1.0 - float(np.dot(x2, b)) / float(np.dot(b, b)), 0.0), 1.0)
                seeds.append(np.array([l1, l2, l3, lbt, lpq]))
    lo = np.array([0.0, 0.0, 0.0, 0.0, 0.0])
    hi = np.array([1.0, 1.0, 1.0, 1.0, 1.0])
    roots = solve_square_system(residual, _rank_seeds(residual, seeds, 10), (lo, hi), tol)
    out = []
    for root in roots:
        full = case1_unknowns(root, e1, e2, e3)
        res_full = float(np.max(np.abs(case1_full_residual(full, e1, e2, e3, v, r))))
        p = full[8:11]
        q = full[11:14]
        b = full[5:8]
        if norm(q - p) <= 1e-12:
            continue
        cand = _assemble(index, event, b, unit(q - p), res_full)
        if cand is not None:
            out.append(cand)
    return _dedupe(out, tol)


def _solve_a6(index: SceneIndex, event: ExtremalEvent) -> list[CandidateSolution]:
    scene = index.scene
    e1 = _piece_seg(index, event.supports[0].index)
    e2 = _piece_seg(index, event.supports[1].index)
    e3 = _piece_seg(index, event.supports[2].index)   # bt support
    v = index.vertex(event.supports[3].index).p
    r = scene.r

    def bt_point(l3):
        x = e3.u + l3 * (e3.v - e3.u)
        nx = norm(x)
        return None if nx <= 1e-12 else r * (x / nx)

    def residual(x: np.ndarray) -> np.ndarray:
        l1, l2, l3, mu = (float(t) for t in x)
        b = bt_point(l3)
        if b is None:
            return np.full(4, 1e6)
        p1 = e1.u + l1 * (e1.v - e1.u)
        p2 = e2.u + l2 * (e2.v - e2.u)
        bl = p1 + mu * (p2 - p1)
        diff = b - bl
        cop = float(np.dot(np.cross(b, v), p1)) / max(r * r, 1.0)
        return np.array([diff[0], diff[1], diff[2], cop])

    seeds = []
    for l1 in (0.25, 0.75):
        for l2 in (0.25, 0.75):
            for l3 in (0.2, 0.5, 0.8):
                p1 = e1.u + l1 * (e1.v - e1.u)
                p2 = e2.u + l2 * (e2.v - e2.u)
                b = bt_point(l3)
                if b is None:
                    continue
                d12 = p2 - p1
                dd = float(np.dot(d12, d12))
                mu = float(np.dot(b - p1, d12)) / dd if dd > 0 else 0.5
                seeds.append(np.array([l1, l2, l3, mu]))
    lo = np.array([0.0, 0.0, 0.0, -50.0])
    hi = np.array([1.0, 1.0, 1.0, 50.0])
    roots = solve_square_system(residual, _rank_seeds(residual, seeds, 10), (lo, hi), scene.tol)
    out = []
    for root in roots:
        l1, l2, l3, mu = (float(t) for t in root)
        b = bt_point(l3)
        if b is None:
            continue
        p1 = e1.u + l1 * (e1.v - e1.u)
        res = float(np.max(np.abs(residual(root))))
        if norm(b - p1) <= 1e-12:
            continue
        cand = _assemble(index, event, b, unit(b - p1), res)
        if cand is not None:
            out.append(cand)
    return _dedupe(out, scene.tol)


def _solve_a7_a14(index: SceneIndex, event: ExtremalEvent) -> list[CandidateSolution]:
    """Three supports on the straight probe line plus a sector vertex."""
    scene = index.scene
    r = scene.r
    e1 = _piece_seg(index, event.supports[0].index)
    e2 = _piece_seg(index, event.supports[1].index)
    e3 = _piece_seg(index, event.supports[2].index)
    v = index.vertex(event.supports[3].index).p

    def residual(x: np.ndarray) -> np.ndarray:
        l1, l2, l3, s, uu = (float(t) for t in x)
        p1 = e1.u + l1 * (e1.v - e1.u)
        p3 = e3.u + l3 * (e3.v - e3.u)
        p2 = e2.u + l2 * (e2.v - e2.u)
        d13 = p3 - p1
        rr = p2 - (p1 + s * d13)
        b = p1 + uu * d13
        rb = (float(np.dot(b, b)) - r * r) / max(r, 1.0)
        cop = float(np.dot(np.cross(b, v), p1)) / max(r * r, 1.0)
        return np.array([rr[0], rr[1], rr[2], rb, cop])

    seeds = []
    for l1 in (0.25, 0.75):
        for l2 in (0.25, 0.75):
            for l3 in (0.25, 0.75):
                p1 = e1.u + l1 * (e1.v - e1.u)
                p3 = e3.u + l3 * (e3.v - e3.u)
                p2 = e2.u + l2 * (e2.v - e2.u)
                d13 = p3 - p1
                dd = float(np.dot(d13, d13))
                if dd <= 1e-18:
                    continue
                s = float(np.dot(p2 - p1, d13)) / dd
                qb = 2.0 * float(np.dot(p1, d13))
                qc = float(np.dot(p1, p1)) - r * r
                disc = qb * qb - 4.0 * dd * qc
                if disc > 0:
                    sq = math.sqrt(disc)
                    for uu in ((-qb - sq) / (2 * dd), (-qb + sq) / (2 * dd)):
                        seeds.append(np.array([l1, l2, l3, s, uu]))
                else:
                    seeds.append(np.array([l1, l2, l3, s, 0.5]))
    lo = np.array([0.0, 0.0, 0.0, -50.0, -50.0])
    hi = np.array([1.0, 1.0, 1.0, 50.0, 50.0])
    roots = solve_square_system(residual, _rank_seeds(residual, seeds, 12), (lo, hi), scene.tol)
    out = []
    for root in roots:
        l1, l2, l3, s, uu = (float(t) for t in root)
        p1 = e1.u + l1 * (e1.v - e1.u)
        p3 = e3.u + l3 * (e3.v - e3.u)
        d13 = p3 - p1
        b = p1 + uu * d13
        if norm(d13) <= 1e-12:
            continue
        res = float(np.max(np.abs(residual(root))))
        out.extend(_assemble_both(index, event, b, unit(d13), res))
    return _dedupe(out, scene.tol)


def _solve_a22(index: SceneIndex, event: ExtremalEvent) -> list[CandidateSolution]:
    scene = index.scene
    r = scene.r
    e1 = _piece_seg(index, event.supports[0].index)
    e2 = _piece_seg(index, event.supports[1].index)
    v = index.vertex(event.supports[2].index).p
    gamma = event.supports[3]
    out = []
    for branch in _tangency_residuals(index, gamma, r):
        def residual(x: np.ndarray, br=branch) -> np.ndarray:
            l1, l2, mu = (float(t) for t in x)
            p1 = e1.u + l1 * (e1.v - e1.u)
            p2 = e2.u + l2 * (e2.v - e2.u)
            b = p1 + mu * (p2 - p1)
            rb = (float(np.dot(b, b)) - r * r) / max(r, 1.0)
            cop = float(np.dot(np.cross(b, v), p2 - p1)) / max(r, 1.0)
            return np.array([rb, br(b), cop])

        seeds = []
        for l1 in (0.2, 0.5, 0.8):
            for l2 in (0.2, 0.5, 0.8):
                for mu in (-2.0, 1.5, 3.0):
                    seeds.append(np.array([l1, l2, mu]))
        lo = np.array([0.0, 0.0, -50.0])
        hi = np.array([1.0, 1.0, 50.0])
        roots = solve_square_system(residual, _rank_seeds(residual, seeds, 10), (lo, hi), scene.tol)
        for root in roots:
            l1, l2, mu = (float(t) for t in root)
            p1 = e1.u + l1 * (e1.v - e1.u)
            p2 = e2.u + l2 * (e2.v - e2.u)
            if norm(p2 - p1) <= 1e-12:
                continue
            b = p1 + mu * (p2 - p1)
            res = float(np.max(np.abs(residual(root))))
            out.extend(_assemble_both(index, event, b, unit(p2 - p1), res))
    return _dedupe(out, scene.tol)


# ---------------------------------------------------------------------------
# dispatch


def _dedupe(cands: list[CandidateSolution], tol: ToleranceProfile
            ) -> list[CandidateSolution]:
    out: list[CandidateSolution] = []
    for c in cands:
        dup = False
        for prev in out:
            if norm(c.trajectory.b - prev.trajectory.b) <= tol.tol_incidence and \
               norm(c.trajectory.d - prev.trajectory.d) <= tol.tol_incidence:
                dup = True
                break
        if not dup:
            out.append(c)
    return out


_SOLVERS = {
    "A1": _solve_a1,
    "A2": lambda idx, ev: _solve_line_residual_1d(
        idx, ev, [ev.supports[1].index, ev.supports[2].index],
        ev.supports[0].index, ev.supports[3].index),
    "A3": _solve_radial_pair,
    "A4": _solve_a4,
    "A5": _solve_radial_pair,
    "A6": _solve_a6,
    "A7": _solve_a7_a14,
    "A8": lambda idx, ev: _solve_line_residual_1d(
        idx, ev, [ev.supports[0].index, ev.supports[1].index],
        ev.supports[2].index, ev.supports[3].index),
    "A9": _solve_transversal,
    "A10": _solve_radial_pair,
    "A11": _solve_a11,
    "A12": _solve_transversal,
    "A13": lambda idx, ev: _solve_line_residual_1d(
        idx, ev, [ev.supports[0].index, ev.supports[1].index],
        ev.supports[2].index, ev.supports[3].index),
    "A14": _solve_a7_a14,
    "A15": _solve_transversal,
    "A16": _solve_a16,
    "A17": _solve_a17_a21,
    "A20": _solve_a20,
    "A21": _solve_a17_a21,
    "A22": _solve_a22,
    "AV1": _solve_av1,
    "AV2": _solve_av2,
    "AV3": _solve_av3,
}


def solve_event(index: SceneIndex, event: ExtremalEvent) -> list[CandidateSolution]:
    """Concrete candidate trajectories isolated by the event's supports.

    Empty when the event admits no solution in range; raises UnsupportedCase
    for ids outside the catalog.
    """
    if event.case in ("A18", "A19"):
        return []  # folded into A16, see the catalog notes
    solver = _SOLVERS.get(event.case)
    if solver is None:
        raise UnsupportedCase(event.case)
    return solver(index, event)
