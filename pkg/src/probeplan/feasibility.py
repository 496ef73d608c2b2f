"""Probe trajectories, swept sectors, and brute-force feasibility checks.

A trajectory is fully determined by the elbow point b on sphere C and the
insertion direction d: the rotation angle follows from the requirement that
rotating the end segment about b brings its tip to the target. Verification
tests the inserted probe body and the swept circular sector against every
obstacle triangle, treating any touch within tolerance as a collision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import (
    DEFAULT_TOL,
    Plane3,
    Segment3,
    ToleranceProfile,
    Triangle3,
    angle_between,
    cross2,
    norm,
    point_segment_distance2,
    rot2,
    seg_triangle_intersect,
    segment_segment_distance2,
    tri_plane_cross_section,
    unit,
)
from .scene import Scene, SchemaError


class InvalidTrajectory(Exception):
    """Trajectory parameters violate the probe model beyond tolerance."""


_TRAJ_KEYS = {"b", "d", "rho", "sense"}


# ---------------------------------------------------------------------------
# trajectory


@dataclass(frozen=True)
class Trajectory:
    """Probe pose: elbow b on sphere C, unit insertion direction d (travel
    a -> b -> c), rotation angle rho in [0, pi/2] and the rotation sense
    within the motion plane."""

    b: np.ndarray
    d: np.ndarray
    rho: float
    sense: str = "ccw"

    def __post_init__(self):
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float))
        object.__setattr__(self, "d", unit(np.asarray(self.d, dtype=float)))

    @property
    def c_int(self) -> np.ndarray:
        """Tip position after insertion, before rotation."""
        return self.b + norm(self.b) * self.d

    def entry_point(self, R: float) -> np.ndarray:
        bd = float(np.dot(self.b, self.d))
        lam = bd + math.sqrt(max(bd * bd + R * R - float(np.dot(self.b, self.b)), 0.0))
        return self.b - lam * self.d

    def plane(self) -> Plane3:
        return trajectory_plane(self.b, self.d)

    def validate(self, r: float, tol: ToleranceProfile = DEFAULT_TOL) -> None:
        if not (np.all(np.isfinite(self.b)) and np.all(np.isfinite(self.d))
                and math.isfinite(self.rho)):
            raise InvalidTrajectory("non-finite trajectory parameters")
        if self.sense not in ("cw", "ccw"):
            raise InvalidTrajectory(f"unknown rotation sense {self.sense!r}")
        if abs(norm(self.b) - r) > tol.tol_incidence:
            raise InvalidTrajectory("elbow is not on sphere C")
        ang_tol = max(1e-9, tol.tol_incidence / r)
        if self.rho < -ang_tol or self.rho > 0.5 * math.pi + ang_tol:
            raise InvalidTrajectory("rotation angle outside [0, pi/2]")
        opening = angle_between(self.d, -self.b)
        if abs(opening - self.rho) > 64.0 * ang_tol:
            raise InvalidTrajectory(
                f"insertion direction inconsistent with rho (opening {opening:.3e}, "
                f"rho {self.rho:.3e})")


def trajectory_plane(b, d) -> Plane3:
    """Motion plane through the target containing b and d."""
    b = np.asarray(b, dtype=float)
    d = np.asarray(d, dtype=float)
    n = np.cross(b, d)
    if norm(n) <= 1e-12 * norm(b):
        # unarticulated: any plane containing b will do; pick a stable one
        ref = np.array([0.0, 0.0, 1.0])
        if abs(np.dot(unit(b), ref)) > 0.9:
            ref = np.array([1.0, 0.0, 0.0])
        n = np.cross(b, ref)
    return Plane3(unit(n), 0.0)


def sense_of(b, d) -> str:
    """Rotation sense carrying the inserted tip to the target, in the
    canonical frame of the motion plane."""
    plane = trajectory_plane(b, d)
    u, v = plane.basis()
    b2 = np.array([float(np.dot(b, u)), float(np.dot(b, v))])
    d2 = np.array([float(np.dot(d, u)), float(np.dot(d, v))])
    return "ccw" if cross2(d2, -b2) >= 0.0 else "cw"


def make_trajectory(b, d, sense: Optional[str] = None) -> Trajectory:
    """Trajectory from elbow and insertion direction; rho is derived."""
    b = np.asarray(b, dtype=float)
    d = unit(np.asarray(d, dtype=float))
    rho = angle_between(d, -b)
    return Trajectory(b=b, d=d, rho=float(rho), sense=sense or sense_of(b, d))


def trajectory_in_plane(plane: Plane3, theta: float, rho: float, sense: str,
                        r: float) -> Trajectory:
    """Assemble a trajectory lying in the given plane through the target."""
    u, v = plane.basis()
    b2 = r * np.array([math.cos(theta), math.sin(theta)])
    end_dir = -b2 / r
    d2 = rot2(end_dir, -rho if sense == "ccw" else rho)
    b = b2[0] * u + b2[1] * v
    d = d2[0] * u + d2[1] * v
    return Trajectory(b=b, d=unit(d), rho=float(rho), sense=sense)


def trajectory_to_dict(traj: Trajectory) -> dict:
    return {
        "b": [float(x) for x in traj.b],
        "d": [float(x) for x in traj.d],
        "rho": float(traj.rho),
        "sense": traj.sense,
    }


def trajectory_from_dict(doc: dict) -> Trajectory:
    if not isinstance(doc, dict):
        raise SchemaError("trajectory document must be a JSON object")
    unknown = set(doc) - _TRAJ_KEYS
    if unknown:
        raise SchemaError(f"unknown trajectory keys: {sorted(unknown)}")
    for key in _TRAJ_KEYS:
        if key not in doc:
            raise SchemaError(f"missing trajectory key: {key}")
    for key in ("b", "d"):
        val = doc[key]
        if not (isinstance(val, list) and len(val) == 3
                and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in val)):
            raise SchemaError(f"{key} must be a list of three numbers")
    if not isinstance(doc["rho"], (int, float)) or isinstance(doc["rho"], bool):
        raise SchemaError("rho must be a number")
    if doc["sense"] not in ("cw", "ccw"):
        raise SchemaError("sense must be 'cw' or 'ccw'")
    return Trajectory(b=np.asarray(doc["b"], dtype=float),
                      d=np.asarray(doc["d"], dtype=float),
                      rho=float(doc["rho"]), sense=doc["sense"])


# ---------------------------------------------------------------------------
# circular sector, in-plane tests


@dataclass(frozen=True)
class CircularSector:
    """Planar sector swept by the end segment: apex b, radius r, bounded by
    the radius toward the inserted tip and the radius toward the target."""

    apex: np.ndarray        # 2D apex in the motion-plane frame
    dir_start: np.ndarray   # unit, toward the inserted tip c_int
    dir_end: np.ndarray     # unit, toward the target
    rho: float
    r: float


def sector_of(traj: Trajectory, plane: Optional[Plane3] = None) -> tuple[CircularSector, Plane3]:
    plane = plane or traj.plane()
    u, v = plane.basis()

    def to2(p):
        return np.array([float(np.dot(p, u)), float(np.dot(p, v))])

    b2 = to2(traj.b)
    r = norm(traj.b)
    c2 = to2(traj.c_int)
    dir_start = (c2 - b2) / r
    dir_end = -b2 / r
    return CircularSector(b2, dir_start, dir_end, traj.rho, r), plane


def sector_point_distance(sec: CircularSector, p) -> float:
    """Distance from a 2D point to the closed sector region (0 when inside).

    Valid because the central angle never exceeds pi/2, keeping the region
    convex.
    """
    p = np.asarray(p, dtype=float)
    v = p - sec.apex
    rv = norm(v)
    w1, w2 = sec.dir_start, sec.dir_end
    c12 = cross2(w1, w2)
    if sec.rho <= 1e-12:
        return point_segment_distance2(p, sec.apex, sec.apex + sec.r * w2)
    if c12 >= 0.0:
        in_wedge = cross2(w1, v) >= 0.0 and cross2(v, w2) >= 0.0
    else:
        in_wedge = cross2(w1, v) <= 0.0 and cross2(v, w2) <= 0.0
    if in_wedge:
        return max(rv - sec.r, 0.0)
    return min(
        point_segment_distance2(p, sec.apex, sec.apex + sec.r * w1),
        point_segment_distance2(p, sec.apex, sec.apex + sec.r * w2),
    )


def sector_segment_witness_2d(sec: CircularSector, p, q,
                              tol: ToleranceProfile = DEFAULT_TOL) -> Optional[np.ndarray]:
    """Contact point between a 2D segment and the closed sector, or None.

    Touches within tol_incidence count as contact.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    ti = tol.tol_incidence
    if sector_point_distance(sec, p) <= ti:
        return p
    if sector_point_distance(sec, q) <= ti:
        return q
    for w in (sec.dir_start, sec.dir_end):
        a0 = sec.apex
        a1 = sec.apex + sec.r * w
        if segment_segment_distance2(p, q, a0, a1) <= ti:
            return _segment_pair_witness(p, q, a0, a1)
    # arc crossings
    d = q - p
    w0 = p - sec.apex
    qa = float(np.dot(d, d))
    if qa > 0.0:
        qb = 2.0 * float(np.dot(w0, d))
        qc = float(np.dot(w0, w0)) - sec.r * sec.r
        disc = qb * qb - 4.0 * qa * qc
        if disc >= 0.0:
            sq = math.sqrt(disc)
            for t in ((-qb - sq) / (2 * qa), (-qb + sq) / (2 * qa)):
                if -1e-12 <= t <= 1.0 + 1e-12:
                    x = p + max(0.0, min(1.0, t)) * d
                    if sector_point_distance(sec, x) <= ti:
                        return x
    return None


def _segment_pair_witness(p, q, a0, a1):
    d1 = q - p
    d2 = a1 - a0
    den = cross2(d1, d2)
    if abs(den) > 1e-15:
        t = cross2(a0 - p, d2) / den
        t = max(0.0, min(1.0, t))
        return p + t * d1
    return 0.5 * (p + q)


def sector_segment_intersect_2d(sec: CircularSector, p, q,
                                tol: ToleranceProfile = DEFAULT_TOL) -> bool:
    """True iff the 2D segment meets the closed sector region."""
    return sector_segment_witness_2d(sec, p, q, tol) is not None


# ---------------------------------------------------------------------------
# sector vs triangle in 3D


def sector_triangle_witness(traj: Trajectory, tri: Triangle3,
                            tol: ToleranceProfile = DEFAULT_TOL) -> Optional[np.ndarray]:
    """3D contact point between the swept sector and a triangle, or None."""
    ang_tol = max(1e-9, tol.tol_incidence / max(norm(traj.b), 1e-12))
    if traj.rho <= ang_tol:
        hit = seg_triangle_intersect(Segment3(traj.b, np.zeros(3)), tri, tol)
        return hit.point if hit.hit() else None

    sec, plane = sector_of(traj)
    cs = tri_plane_cross_section(tri, plane, tol)
    if cs.kind == "empty":
        return None
    u, v = plane.basis()

    def to2(x):
        return np.array([float(np.dot(x, u)), float(np.dot(x, v))])

    def to3(x2):
        return x2[0] * u + x2[1] * v

    if cs.kind == "point":
        p2 = to2(cs.point)
        if sector_point_distance(sec, p2) <= tol.tol_incidence:
            return cs.point
        return None
    if cs.kind == "segment":
        w = sector_segment_witness_2d(sec, to2(cs.segment.u), to2(cs.segment.v), tol)
        return to3(w) if w is not None else None

    # coplanar triangle: test its edges, then apex containment
    t2 = [to2(p) for p in cs.triangle.vertices]
    for i in range(3):
        w = sector_segment_witness_2d(sec, t2[i], t2[(i + 1) % 3], tol)
        if w is not None:
            return to3(w)
    vals = []
    for i in range(3):
        a, b = t2[i], t2[(i + 1) % 3]
        vals.append(cross2(b - a, sec.apex - a))
    if all(x >= -tol.tol_incidence for x in vals) or all(x <= tol.tol_incidence for x in vals):
        return to3(sec.apex)
    return None


def sector_triangle_intersect(traj: Trajectory, tri: Triangle3,
                              tol: ToleranceProfile = DEFAULT_TOL) -> bool:
    return sector_triangle_witness(traj, tri, tol) is not None


# ---------------------------------------------------------------------------
# verification


@dataclass(frozen=True)
class Verdict:
    feasible: bool
    stage: Optional[str] = None          # "insertion" | "sector"
    witness_index: Optional[int] = None
    contact: Optional[np.ndarray] = None

    def to_dict(self) -> dict:
        out: dict = {"feasible": self.feasible}
        if not self.feasible:
            out["stage"] = self.stage
            out["witness"] = self.witness_index
            if self.contact is not None:
                out["contact"] = [float(x) for x in self.contact]
        return out


def verify_trajectory(scene: Scene, traj: Trajectory) -> Verdict:
    """Brute-force feasibility: the inserted probe body, then the swept
    sector, against every obstacle; short-circuits on first contact."""
    traj.validate(scene.r, scene.tol)
    seg = Segment3(traj.entry_point(scene.R), traj.c_int)
    for idx, tri in enumerate(scene.triangles):
        hit = seg_triangle_intersect(seg, tri, scene.tol)
        if hit.hit():
            return Verdict(False, "insertion", idx, hit.point)
    ang_tol = max(1e-9, scene.tol.tol_incidence / scene.r)
    if traj.rho > ang_tol:
        for idx, tri in enumerate(scene.triangles):
            w = sector_triangle_witness(traj, tri, scene.tol)
            if w is not None:
                return Verdict(False, "sector", idx, w)
    return Verdict(True)


# ---------------------------------------------------------------------------
# randomized sampler (completeness oracle)


def _rodrigues_batch(vecs: np.ndarray, axes: np.ndarray, angles: np.ndarray) -> np.ndarray:
    c = np.cos(angles)[:, None]
    s = np.sin(angles)[:, None]
    k = axes
    kv = np.cross(k, vecs)
    kkv = k * np.sum(k * vecs, axis=1, keepdims=True)
    return vecs * c + kv * s + kkv * (1.0 - c)


def _definite_insertion_hits(origins: np.ndarray, ends: np.ndarray,
                             scene: Scene) -> np.ndarray:
    """Vectorized cull: samples whose insertion segment clearly stabs a
    triangle interior. Conservative; near-boundary cases are kept."""
    m = origins.shape[0]
    hit = np.zeros(m, dtype=bool)
    eps = 1e-9
    dirs = ends - origins
    for tri in scene.triangles:
        e1 = tri.b - tri.a
        e2 = tri.c - tri.a
        h = np.cross(dirs, e2)
        a = h @ e1
        ok = np.abs(a) > 1e-14
        f = np.where(ok, 1.0 / np.where(ok, a, 1.0), 0.0)
        s = origins - tri.a
        uu = f * np.sum(s * h, axis=1)
        qv = np.cross(s, e1)
        vv = f * np.sum(dirs * qv, axis=1)
        tt = f * (qv @ e2)
        inside = ok & (uu > eps) & (vv > eps) & (uu + vv < 1.0 - eps) \
            & (tt > eps) & (tt < 1.0 - eps)
        hit |= inside
    return hit


def sample_feasible(scene: Scene, budget: int, seed: int = 0) -> Optional[Trajectory]:
    """First verified-feasible random trajectory within the sample budget.

    Deterministic for a fixed seed; None is a valid outcome.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    rng = np.random.default_rng(seed)
    chunk = 1024
    remaining = budget
    while remaining > 0:
        m = min(chunk, remaining)
        remaining -= m
        g = rng.normal(size=(m, 3))
        bhat = g / np.linalg.norm(g, axis=1, keepdims=True)
        rho = rng.uniform(0.0, 0.5 * math.pi, size=m)
        flip = rng.integers(0, 2, size=m)
        graw = rng.normal(size=(m, 3))

        b = scene.r * bhat
        w = graw - np.sum(graw * bhat, axis=1, keepdims=True) * bhat
        wn = np.linalg.norm(w, axis=1, keepdims=True)
        wn[wn < 1e-12] = 1.0
        w = w / wn
        axes = np.cross(bhat, w)
        axes *= np.where(flip[:, None] == 0, 1.0, -1.0)
        d = _rodrigues_batch(-bhat, axes, rho)

        bd = np.sum(b * d, axis=1)
        lam = bd + np.sqrt(np.maximum(bd * bd + scene.R ** 2 - scene.r ** 2, 0.0))
        a = b - lam[:, None] * d
        c_int = b + scene.r * d

        if scene.n:
            culled = _definite_insertion_hits(a, c_int, scene)
        else:
            culled = np.zeros(m, dtype=bool)
        for i in range(m):
            if culled[i]:
                continue
            traj = make_trajectory(b[i], d[i])
            if verify_trajectory(scene, traj).feasible:
                return traj
    return None
