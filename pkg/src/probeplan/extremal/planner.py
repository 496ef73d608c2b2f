"""Exact planner: enumerate extremal events, solve, back off, verify.

An exactly-extremal candidate touches its supports, so under the
conservative touch-equals-collision rule it can never verify feasible as-is.
Each candidate is therefore re-verified through a ladder of small back-offs
(perturbations of the elbow and the insertion direction); the first variant
that clears every obstacle is returned. Events are processed in fixed
batches so multi-process runs reproduce the single-process result exactly.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from ..feasibility import Trajectory, make_trajectory, verify_trajectory
from ..geometry import norm, point_segment_distance3, point_triangle_closest, unit
from ..scene import Scene
from .events import (
    CASE_IDS,
    ExtremalEvent,
    SceneIndex,
    Support,
    enumerate_row,
    enumerate_unarticulated,
    index_scene,
    support_to_dict,
)
from .solvers import CandidateSolution, solve_event

_BACKOFF_LADDER = (1e-6, 1e-4, 3e-3)
_GRAZE_RADIUS = 2e-2  # contacts farther than this from every support are real blockers


@dataclass(frozen=True)
class PlanOutcome:
    feasible: bool
    trajectory: Optional[Trajectory]
    case: Optional[str]
    supports: tuple[dict, ...]
    residual: Optional[float]
    counters: dict

    def to_report(self) -> dict:
        from ..feasibility import trajectory_to_dict
        out = {"outcome": "feasible" if self.feasible else "infeasible",
               "counters": dict(self.counters)}
        if self.feasible:
            out["trajectory"] = trajectory_to_dict(self.trajectory)
            out["case"] = self.case
            out["supports"] = list(self.supports)
            out["residual"] = self.residual
        return out


# ---------------------------------------------------------------------------
# back-off verification


def _perturbations(traj: Trajectory, r: float, eps: float) -> Iterable[Trajectory]:
    bhat = unit(traj.b)
    ref = np.array([0.0, 0.0, 1.0])
    if abs(float(np.dot(bhat, ref))) > 0.9:
        ref = np.array([1.0, 0.0, 0.0])
    t1 = unit(np.cross(bhat, ref))
    t2 = unit(np.cross(bhat, t1))
    d_axes = (np.cross(traj.b, traj.d), traj.b)
    moves = [(np.zeros(3), None)]
    for db in (t1, -t1, t2, -t2):
        moves.append((db, None))
    for ax in d_axes:
        if norm(ax) <= 1e-12:
            continue
        for sgn in (1.0, -1.0):
            moves.append((np.zeros(3), (unit(ax), sgn)))
    for db, dturn in moves:
        b2 = r * unit(bhat + eps * db)
        d2 = traj.d
        if dturn is not None:
            ax, sgn = dturn
            c, s = math.cos(sgn * eps), math.sin(sgn * eps)
            d2 = d2 * c + np.cross(ax, d2) * s + ax * float(np.dot(ax, d2)) * (1 - c)
        try:
            cand = make_trajectory(b2, unit(d2), traj.sense)
        except ValueError:
            continue
        if cand.rho <= 0.5 * math.pi + 1e-9:
            yield cand


def _support_elements(index: SceneIndex, supports: tuple[Support, ...]):
    elems = []
    for s in supports:
        if s.kind == "vertex":
            elems.append(("point", index.vertex(s.index).p))
        elif s.kind == "surface":
            elems.append(("triangle", index.scene.triangles[s.index]))
        elif s.role == "arc":
            e = index.edge(s.index)
            elems.append(("segment", (e.u, e.v)))
        else:
            p = index.piece(s.index)
            elems.append(("segment", (p.u, p.v)))
    return elems


def _is_grazing(elems, contact: Optional[np.ndarray]) -> bool:
    if contact is None:
        return True
    for kind, geo in elems:
        if kind == "point":
            if norm(contact - geo) <= _GRAZE_RADIUS:
                return True
        elif kind == "segment":
            if point_segment_distance3(contact, geo[0], geo[1]) <= _GRAZE_RADIUS:
                return True
        else:
            if point_triangle_closest(contact, geo)[0] <= _GRAZE_RADIUS:
                return True
    return False


def verify_with_backoff(index: SceneIndex, traj: Trajectory,
                        supports: tuple[Support, ...]) -> Optional[Trajectory]:
    """Plain verification, then support-aware back-off variants."""
    scene = index.scene
    verdict = verify_trajectory(scene, traj)
    if verdict.feasible:
        return traj
    elems = _support_elements(index, supports)
    if not _is_grazing(elems, verdict.contact):
        return None
    for eps in _BACKOFF_LADDER:
        for cand in _perturbations(traj, scene.r, eps):
            if verify_trajectory(scene, cand).feasible:
                return cand
    return None


# ---------------------------------------------------------------------------
# batched event processing


@dataclass
class _ChunkResult:
    events: int
    candidates: int
    verified: int
    hits: list  # (order key, CandidateSolution, feasible Trajectory)


_WORKER_INDEX: Optional[SceneIndex] = None


def _init_worker(scene: Scene):
    global _WORKER_INDEX
    _WORKER_INDEX = index_scene(scene)


def _solve_chunk(args) -> _ChunkResult:
    case, events = args
    index = _WORKER_INDEX
    res = _ChunkResult(0, 0, 0, [])
    for order, event in events:
        res.events += 1
        cands = solve_event(index, event)
        res.candidates += len(cands)
        for ci, cand in enumerate(cands):
            res.verified += 1
            ok = verify_with_backoff(index, cand.trajectory, event.supports)
            if ok is not None:
                res.hits.append(((order, ci), cand, ok))
    return res


def _chunks(seq, size):
    for i in range(0, len(seq), size):
        yield seq[i:i + size]


def plan_exact(scene: Scene, stop_at_first: bool = True, threads: int = 1,
               rows: Optional[Iterable[str]] = None) -> PlanOutcome:
    """Enumerate-solve-verify planner.

    Unarticulated candidates run first (cheaper); the articulated catalog is
    processed row by row in fixed batches whose consumption order makes the
    result independent of the worker count. With stop_at_first the feasible
    candidate with the smallest enumeration order is returned.
    """
    t0 = time.perf_counter()
    index = index_scene(scene)
    counters: dict = {"events": 0, "solved": 0, "verified": 0, "rows": {}}
    feasible: list = []

    if scene.n == 0:
        # free workspace: any straight insertion works (case id U0)
        ex = np.array([1.0, 0.0, 0.0])
        traj = make_trajectory(scene.r * ex, -ex)
        counters["verified"] = 1
        counters["wall_time_s"] = time.perf_counter() - t0
        return PlanOutcome(True, traj, "U0", (), 0.0, counters)

    def finish(hit) -> PlanOutcome:
        counters["wall_time_s"] = time.perf_counter() - t0
        if hit is None:
            return PlanOutcome(False, None, None, (), None, counters)
        _, cand, traj = hit
        supports = tuple(support_to_dict(index, s) for s in cand.event.supports)
        return PlanOutcome(True, traj, cand.event.case, supports,
                           cand.residual, counters)

    # unarticulated stage
    u_count = 0
    u_hit = None
    for order, ucand in enumerate(enumerate_unarticulated(index)):
        u_count += 1
        counters["events"] += 1
        b = scene.r * ucand.direction
        traj = make_trajectory(b, -ucand.direction)
        counters["solved"] += 1
        counters["verified"] += 1
        ok = verify_with_backoff(index, traj, ucand.supports)
        if ok is not None:
            sol = CandidateSolution(
                event=ExtremalEvent(ucand.case, ucand.supports),
                trajectory=traj, residual=0.0,
                incidences=())
            hit = ((-1, order), sol, ok)
            if stop_at_first:
                counters["rows"]["U"] = u_count
                return finish(hit)
            feasible.append(hit)
    counters["rows"]["U"] = u_count

    # articulated stage, batched per row
    row_list = list(rows) if rows is not None else list(CASE_IDS)
    pool = None
    workers = max(1, int(threads))
    if workers > 1:
        pool = ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                                   initargs=(scene,))
    global _WORKER_INDEX
    _WORKER_INDEX = index
    try:
        for case in row_list:
            events = [( (ri,), ev) for ri, ev in enumerate(enumerate_row(index, case))]
            counters["rows"][case] = len(events)
            if not events:
                continue
            chunk_size = max(64, len(events) // (8 * workers) + 1)
            batches = [(case, chunk) for chunk in _chunks(events, chunk_size)]
            if pool is None:
                results = map(_solve_chunk, batches)
            else:
                results = pool.map(_solve_chunk, batches)
            row_hit = None
            for res in results:
                counters["events"] += res.events
                counters["solved"] += res.candidates
                counters["verified"] += res.verified
                if res.hits and row_hit is None:
                    row_hit = min(res.hits, key=lambda h: h[0])
                    if stop_at_first:
                        break
                feasible.extend(res.hits if not stop_at_first else [])
            if stop_at_first and row_hit is not None:
                return finish(row_hit)
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)
        _WORKER_INDEX = None

    if feasible:
        # deduplicate trajectories across rows, keep the lowest case id
        feasible.sort(key=lambda h: (_case_rank(h[1].event.case), h[0]))
        kept = []
        for hit in feasible:
            dup = any(norm(hit[2].b - k[2].b) <= scene.tol.tol_incidence
                      and norm(hit[2].d - k[2].d) <= scene.tol.tol_incidence
                      for k in kept)
            if not dup:
                kept.append(hit)
        counters["feasible_total"] = len(kept)
        return finish(kept[0])
    return finish(None)


def _case_rank(case: str) -> tuple:
    if case.startswith("U"):
        return (0, case)
    if case.startswith("AV"):
        return (2, case)
    return (1, int(case[1:]))
