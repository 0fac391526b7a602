"""Arrangement optimization: maximize soft-constraint satisfaction subject to
containment, non-overlap, global-region and directional hard constraints.

The solver is a two-phase metaheuristic with a hard guarantee: Phase 1 places
assets constructively on a grid (best-scoring feasible cell, in construction
order), Phase 2 anneals with single-asset jitter / re-rotation / swap
proposals, rejecting any proposal that violates a hard constraint.  A layout
is only ever returned when every hard constraint holds.  An exhaustive oracle
for small instances bounds the optimality loss in tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .compiler import ConstraintSet, construction_order
from .errors import InfeasibleLayoutError
from .geometry import Rect, Surface, footprint_contained
from .scene import Layout, Orientation, Placement, footprint, region_of_bbox

_EPS = 1e-9

_ORIENTATIONS = (Orientation(False, False), Orientation(False, True),
                 Orientation(True, False), Orientation(True, True))


@dataclass
class SolverParams:
    grid_step_cm: float = 1.0
    seed: int = 0
    anneal_iters: int = 20000          # per surface
    T0: float = 1.0
    cooling: float = 0.999             # geometric schedule
    D_near_cm: float = 15.0
    D_far_cm: float = 30.0
    T_align_cm: float = 5.0
    edge_margin_cm: float = 1.0
    phase1_restarts: int = 24

    def __post_init__(self):
        if min(self.grid_step_cm, self.T0, self.D_near_cm, self.D_far_cm,
               self.T_align_cm) <= 0 or self.anneal_iters < 0:
            raise ValueError("solver parameters must be positive")
        if not 0.0 < self.cooling < 1.0:
            raise ValueError("cooling must be in (0, 1)")
        if self.edge_margin_cm < 0:
            raise ValueError("edge_margin_cm must be >= 0")


@dataclass
class Violation:
    kind: str                    # containment | overlap | global_region | relation | stacking
    subjects: tuple[str, ...]
    magnitude: float             # cm or cm^2 of violation

    def to_json(self) -> dict:
        return {"kind": self.kind, "subjects": list(self.subjects),
                "magnitude": self.magnitude}


@dataclass
class AnchorTerm:
    """Edit-time soft term tying an asset to its previous position."""

    x_cm: float
    y_cm: float
    weight: float = 0.25
    radius_cm: float = 30.0

    def score(self, x: float, y: float) -> float:
        disp = math.hypot(x - self.x_cm, y - self.y_cm)
        return self.weight * max(0.0, 1.0 - disp / self.radius_cm)


def _alignment_coord(rect: Rect, relation: str) -> float:
    if relation == "vertical_left":
        return rect.min_x
    if relation == "vertical_mid":
        return rect.center[0]
    if relation == "vertical_right":
        return rect.max_x
    if relation == "horizontal_front":
        return rect.min_y
    if relation == "horizontal_mid":
        return rect.center[1]
    if relation == "horizontal_back":
        return rect.max_y
    raise ValueError(f"unknown alignment relation '{relation}'")


def _pair_score(relation: str, rect_i: Rect, rect_j: Rect,
                params: SolverParams) -> float:
    if relation == "near":
        return max(0.0, 1.0 - rect_i.gap(rect_j) / params.D_near_cm)
    if relation == "far":
        return min(1.0, rect_i.gap(rect_j) / params.D_far_cm)
    ei = _alignment_coord(rect_i, relation)
    ej = _alignment_coord(rect_j, relation)
    return max(0.0, 1.0 - abs(ei - ej) / params.T_align_cm)


def soft_score(layout: Layout, cs: ConstraintSet,
               params: SolverParams | None = None) -> float:
    """Sum of [0, 1] satisfaction ramps over all distance and alignment
    directives; a pair holding both kinds contributes both terms."""
    params = params or SolverParams()
    total = 0.0
    for d in cs.soft_pairs:
        for aid in (d.subject, d.reference):
            if aid not in layout:
                raise KeyError(f"layout is missing asset '{aid}'")
        pi = layout[d.subject]
        pj = layout[d.reference]
        rect_i = footprint(cs.assets[d.subject], pi.x_cm, pi.y_cm, pi.orientation)
        rect_j = footprint(cs.assets[d.reference], pj.x_cm, pj.y_cm, pj.orientation)
        total += _pair_score(d.relation, rect_i, rect_j, params)
    return total


def _region_cell(bbox: Rect, region: str) -> Rect:
    cols = {"W": 0, "C": 1, "E": 2, "NW": 0, "N": 1, "NE": 2,
            "SW": 0, "S": 1, "SE": 2}
    rows = {"SW": 0, "S": 0, "SE": 0, "W": 1, "C": 1, "E": 1,
            "NW": 2, "N": 2, "NE": 2}
    col, row = cols[region], rows[region]
    w3, d3 = bbox.width / 3.0, bbox.depth / 3.0
    return Rect(bbox.min_x + col * w3, bbox.min_y + row * d3,
                bbox.min_x + (col + 1) * w3, bbox.min_y + (row + 1) * d3)


def _point_rect_distance(x: float, y: float, rect: Rect) -> float:
    dx = max(rect.min_x - x, 0.0, x - rect.max_x)
    dy = max(rect.min_y - y, 0.0, y - rect.max_y)
    return math.hypot(dx, dy)


def check_hard(layout: Layout, cs: ConstraintSet, surfaces: list[Surface],
               params: SolverParams | None = None) -> list[Violation]:
    """All hard-constraint violations of a layout; empty means feasible.

    Containment applies the edge margin and the occupancy grid; stacked
    assets are contained by their base footprint instead and are exempt
    from overlap checks against it.
    """
    params = params or SolverParams()
    by_index = {s.index: s for s in surfaces}
    out: list[Violation] = []

    rects: dict[str, Rect] = {}
    for aid, asset in cs.assets.items():
        if aid not in layout:
            raise KeyError(f"layout is missing asset '{aid}'")
        p = layout[aid]
        rects[aid] = footprint(asset, p.x_cm, p.y_cm, p.orientation)

    for aid in sorted(cs.assets):
        asset = cs.assets[aid]
        rect = rects[aid]
        if aid in cs.stack_base:
            base_rect = rects[cs.stack_base[aid]]
            if not base_rect.contains_rect(rect):
                overhang = rect.area - rect.intersection_area(base_rect)
                out.append(Violation("stacking", (aid, cs.stack_base[aid]),
                                     max(overhang, _EPS)))
        else:
            surface = by_index[asset.surface_index]
            inflated = rect.inflate(params.edge_margin_cm)
            if not footprint_contained(surface, inflated):
                overhang = inflated.area - inflated.intersection_area(surface.bbox)
                missing = surface.grid.unsupported_area(inflated)
                out.append(Violation("containment", (aid,),
                                     max(overhang + missing, _EPS)))

    for d in cs.global_directives:
        asset = cs.assets[d.subject]
        surface = by_index[asset.surface_index]
        p = layout[d.subject]
        cell = _region_cell(surface.bbox, d.region)
        try:
            ok = region_of_bbox(surface.bbox, p.x_cm, p.y_cm) == d.region
        except ValueError:
            ok = False
        if not ok:
            out.append(Violation("global_region", (d.subject,),
                                 max(_point_rect_distance(p.x_cm, p.y_cm, cell), _EPS)))

    # pairwise disjointness: same-surface same-level footprints must not
    # overlap, and no two 3D boxes anywhere may share positive volume
    # (a tall asset under a higher surface must clear the assets on it)
    zlo = {aid: _stack_z(aid, cs, by_index[a.surface_index].height_cm)
           for aid, a in cs.assets.items()}
    zhi = {aid: zlo[aid] + cs.assets[aid].height_cm for aid in cs.assets}
    ids = sorted(cs.assets)
    for i, a in enumerate(ids):
        for b in ids[i + 1:]:
            dz = min(zhi[a], zhi[b]) - max(zlo[a], zlo[b])
            if dz <= _EPS:
                continue
            inter = rects[a].intersection_area(rects[b])
            if inter > _EPS:
                out.append(Violation("overlap", (a, b), inter))

    for d in cs.directional_pairs():
        ri, rj = rects[d.subject], rects[d.reference]
        if d.relation == "left_of":
            short = ri.max_x - rj.min_x
        elif d.relation == "right_of":
            short = rj.max_x - ri.min_x
        elif d.relation == "in_front_of":
            short = ri.max_y - rj.min_y
        elif d.relation == "behind":
            short = rj.max_y - ri.min_y
        else:
            continue
        if short > _EPS:
            out.append(Violation("relation", (d.subject, d.reference), short))

    for aid, orient in sorted(cs.fixed_orientations.items()):
        got = layout[aid].orientation
        if got != orient:
            diff = abs(got.yaw_deg - orient.yaw_deg) % 360
            out.append(Violation("relation", (aid,), float(min(diff, 360 - diff))))
    return out


def _stack_level(aid: str, stack_base: dict[str, str]) -> int:
    level = 0
    cur = aid
    while cur in stack_base:
        level += 1
        cur = stack_base[cur]
        if level > len(stack_base) + 1:
            raise ValueError("stack_base chain contains a cycle")
    return level


def _stack_z(aid: str, cs: ConstraintSet, surface_height: float) -> float:
    z = surface_height
    cur = aid
    while cur in cs.stack_base:
        cur = cs.stack_base[cur]
        z += cs.assets[cur].height_cm
    return z


# --- per-surface solver ------------------------------------------------------

class _SurfaceSolver:
    def __init__(self, surface: Surface, ids: list[str], cs: ConstraintSet,
                 params: SolverParams, anchors: dict[str, AnchorTerm],
                 obstacles: list[tuple[Rect, float, float]] | None = None):
        self.surface = surface
        self.params = params
        self.ids = ids
        self.index = {aid: k for k, aid in enumerate(ids)}
        n = len(ids)
        self.n = n
        self.dims = np.array([[cs.assets[a].width_cm, cs.assets[a].depth_cm]
                              for a in ids])
        self.fixed = {self.index[a]: o for a, o in cs.fixed_orientations.items()
                      if a in self.index}
        self.base_of = {self.index[a]: self.index[b]
                        for a, b in cs.stack_base.items() if a in self.index}
        self.subjects_of: dict[int, list[int]] = {}
        for sub, base in self.base_of.items():
            self.subjects_of.setdefault(base, []).append(sub)
        self.level = np.zeros(n, dtype=int)
        for k in range(n):
            cur, lv = k, 0
            while cur in self.base_of:
                cur = self.base_of[cur]
                lv += 1
            self.level[k] = lv

        self.region: dict[int, tuple[str, Rect]] = {}
        for d in cs.global_directives:
            if d.subject in self.index:
                self.region[self.index[d.subject]] = (
                    d.region, _region_cell(surface.bbox, d.region))

        self.dir_cons = []           # (relation, subject idx, reference idx)
        for d in cs.directional_pairs():
            if d.subject in self.index and d.reference in self.index:
                self.dir_cons.append((d.relation, self.index[d.subject],
                                      self.index[d.reference]))

        self.terms = []              # (relation, i, j)
        for d in cs.soft_pairs:
            if d.subject in self.index and d.reference in self.index:
                self.terms.append((d.relation, self.index[d.subject],
                                   self.index[d.reference]))
        self.terms_by_asset: dict[int, list[int]] = {k: [] for k in range(n)}
        for t, (_rel, i, j) in enumerate(self.terms):
            self.terms_by_asset[i].append(t)
            self.terms_by_asset[j].append(t)
        self.anchors = {self.index[a]: t for a, t in anchors.items()
                        if a in self.index}

        # fixed boxes from other, already-solved surfaces: an asset must not
        # share positive 3D volume with them
        self.obstacles_for: dict[int, list[Rect]] = {k: [] for k in range(n)}
        if obstacles:
            for k, aid in enumerate(ids):
                z0 = _stack_z(aid, cs, surface.height_cm)
                z1 = z0 + cs.assets[aid].height_cm
                for rect, olo, ohi in obstacles:
                    if min(z1, ohi) - max(z0, olo) > _EPS:
                        self.obstacles_for[k].append(rect)

        bbox = surface.bbox
        step = params.grid_step_cm
        cnt_x = int(math.floor(bbox.width / step + _EPS)) + 1
        cnt_y = int(math.floor(bbox.depth / step + _EPS)) + 1
        self.xs = bbox.min_x + step * np.arange(cnt_x)
        self.ys = bbox.min_y + step * np.arange(cnt_y)

        # state
        self.pos = np.zeros((n, 2))
        self.halves = np.zeros((n, 2))
        self.orient = [Orientation() for _ in range(n)]

    # -- geometry helpers ----------------------------------------------------

    def _set_orientation(self, k: int, o: Orientation):
        self.orient[k] = o
        w, d = self.dims[k]
        self.halves[k] = (d / 2.0, w / 2.0) if o.r90 else (w / 2.0, d / 2.0)

    def _halves_for(self, k: int, o: Orientation) -> tuple[float, float]:
        w, d = self.dims[k]
        return (d / 2.0, w / 2.0) if o.r90 else (w / 2.0, d / 2.0)

    def _orientation_options(self, k: int) -> list[Orientation]:
        if k in self.fixed:
            return [self.fixed[k]]
        return list(_ORIENTATIONS)

    def _snap(self, v: float, axis: int) -> float:
        lat = self.xs if axis == 0 else self.ys
        lo, step = lat[0], self.params.grid_step_cm
        i = int(round((v - lo) / step))
        i = max(0, min(len(lat) - 1, i))
        return float(lo + i * step)

    # -- feasibility ----------------------------------------------------------

    def _feasible(self, k: int, placed: set[int]) -> bool:
        x, y = self.pos[k]
        hw, hd = self.halves[k]
        m = self.params.edge_margin_cm
        if k in self.base_of:
            b = self.base_of[k]
            if b in placed:
                bx, by = self.pos[b]
                bhw, bhd = self.halves[b]
                if (x - hw < bx - bhw - _EPS or x + hw > bx + bhw + _EPS
                        or y - hd < by - bhd - _EPS or y + hd > by + bhd + _EPS):
                    return False
        else:
            rect = Rect(x - hw - m, y - hd - m, x + hw + m, y + hd + m)
            if not self.surface.bbox.contains_rect(rect):
                return False
            if not self.surface.grid.rect_fully_supported(rect):
                return False
        target = self.region.get(k)
        if target is not None:
            try:
                if region_of_bbox(self.surface.bbox, x, y) != target[0]:
                    return False
            except ValueError:
                return False
        for rel, i, j in self.dir_cons:
            if i == k and j in placed:
                if not self._dir_ok(rel, k, j):
                    return False
            elif j == k and i in placed:
                if not self._dir_ok(rel, i, k):
                    return False
        for o in placed:
            if o == k or self.level[o] != self.level[k]:
                continue
            ox, oy = self.pos[o]
            ohw, ohd = self.halves[o]
            if (abs(x - ox) < hw + ohw - _EPS) and (abs(y - oy) < hd + ohd - _EPS):
                return False
        for rect in self.obstacles_for.get(k, []):
            if (abs(x - rect.center[0]) < hw + rect.width / 2.0 - _EPS
                    and abs(y - rect.center[1]) < hd + rect.depth / 2.0 - _EPS):
                return False
        # a placed stacked subject must still sit within this (possibly moved) base
        for sub in self.subjects_of.get(k, []):
            if sub not in placed:
                continue
            sx, sy = self.pos[sub]
            shw, shd = self.halves[sub]
            if (sx - shw < x - hw - _EPS or sx + shw > x + hw + _EPS
                    or sy - shd < y - hd - _EPS or sy + shd > y + hd + _EPS):
                return False
        return True

    def _dir_ok(self, rel: str, i: int, j: int) -> bool:
        xi, yi = self.pos[i]
        xj, yj = self.pos[j]
        hwi, hdi = self.halves[i]
        hwj, hdj = self.halves[j]
        if rel == "left_of":
            return xi + hwi <= xj - hwj + _EPS
        if rel == "right_of":
            return xi - hwi >= xj + hwj - _EPS
        if rel == "in_front_of":
            return yi + hdi <= yj - hdj + _EPS
        if rel == "behind":
            return yi - hdi >= yj + hdj - _EPS
        return True

    # -- scoring ---------------------------------------------------------------

    def _term_value(self, t: int) -> float:
        rel, i, j = self.terms[t]
        ri = Rect(self.pos[i][0] - self.halves[i][0], self.pos[i][1] - self.halves[i][1],
                  self.pos[i][0] + self.halves[i][0], self.pos[i][1] + self.halves[i][1])
        rj = Rect(self.pos[j][0] - self.halves[j][0], self.pos[j][1] - self.halves[j][1],
                  self.pos[j][0] + self.halves[j][0], self.pos[j][1] + self.halves[j][1])
        return _pair_score(rel, ri, rj, self.params)

    def _anchor_value(self, k: int) -> float:
        t = self.anchors.get(k)
        if t is None:
            return 0.0
        return t.score(self.pos[k][0], self.pos[k][1])

    def objective(self) -> float:
        return (sum(self._term_value(t) for t in range(len(self.terms)))
                + sum(self._anchor_value(k) for k in self.anchors))

    # -- phase 1 ----------------------------------------------------------------

    def construct(self, order: list[str], rng: np.random.Generator | None) -> str | None:
        """Place all assets; returns the id of the first stuck asset or None.

        Deterministic pass (rng=None): best partial soft score, ties broken by
        the lexicographically smallest (x, y, r90, r180).  Randomized restart
        passes pick uniformly over all feasible candidates.
        """
        placed: set[int] = set()
        for aid in order:
            k = self.index[aid]
            best = None
            pools = []
            for o in self._orientation_options(k):
                hw, hd = self._halves_for(k, o)
                mask, score = self._candidate_mask(k, hw, hd, placed)
                if not mask.any():
                    continue
                if rng is None:
                    flat = np.where(mask.ravel(), score.ravel(), -np.inf)
                    pick = int(np.argmax(flat))
                    val = float(flat[pick])
                    ix, iy = divmod(pick, len(self.ys))
                    cand = (val, float(self.xs[ix]), float(self.ys[iy]), o.r90, o.r180)
                    if best is None or (cand[0], -cand[1], -cand[2], not cand[3], not cand[4]) > \
                            (best[0], -best[1], -best[2], not best[3], not best[4]):
                        best = cand
                else:
                    pools.append((o, np.flatnonzero(mask.ravel())))
            if rng is not None and pools:
                total = sum(len(p[1]) for p in pools)
                t = int(rng.integers(total))
                for o, idx in pools:
                    if t < len(idx):
                        pick = int(idx[t])
                        ix, iy = divmod(pick, len(self.ys))
                        best = (0.0, float(self.xs[ix]), float(self.ys[iy]), o.r90, o.r180)
                        break
                    t -= len(idx)
            if best is None:
                return aid
            _val, x, y, r90, r180 = best
            self._set_orientation(k, Orientation(r90, r180))
            self.pos[k] = (x, y)
            placed.add(k)
        return None

    def _candidate_mask(self, k: int, hw: float, hd: float,
                        placed: set[int]) -> tuple[np.ndarray, np.ndarray]:
        xs, ys = self.xs, self.ys
        m = self.params.edge_margin_cm
        bbox = self.surface.bbox

        if k in self.base_of and self.base_of[k] in placed:
            b = self.base_of[k]
            bx, by = self.pos[b]
            bhw, bhd = self.halves[b]
            mx = (xs >= bx - bhw + hw - _EPS) & (xs <= bx + bhw - hw + _EPS)
            my = (ys >= by - bhd + hd - _EPS) & (ys <= by + bhd - hd + _EPS)
            mask = np.outer(mx, my)
        else:
            mx = (xs >= bbox.min_x + hw + m - _EPS) & (xs <= bbox.max_x - hw - m + _EPS)
            my = (ys >= bbox.min_y + hd + m - _EPS) & (ys <= bbox.max_y - hd - m + _EPS)
            mask = np.outer(mx, my)
            if mask.any():
                mask &= self.surface.grid.windows_all_supported(
                    xs - hw - m, xs + hw + m, ys - hd - m, ys + hd + m)

        target = self.region.get(k)
        if target is not None and mask.any():
            cell = target[1]
            mask &= np.outer(_tercile_mask(xs, bbox.min_x, bbox.max_x, cell.min_x, cell.max_x),
                             _tercile_mask(ys, bbox.min_y, bbox.max_y, cell.min_y, cell.max_y))

        if mask.any():
            for rel, i, j in self.dir_cons:
                if i == k and j in placed:
                    mask &= self._dir_mask(rel, hw, hd, self.pos[j], self.halves[j], subject=True)
                elif j == k and i in placed:
                    mask &= self._dir_mask(rel, hw, hd, self.pos[i], self.halves[i], subject=False)
                if not mask.any():
                    break

        if mask.any():
            mask &= self._lookahead_mask(k, hw, hd, placed)

        if mask.any():
            for o in placed:
                if self.level[o] != self.level[k]:
                    continue
                ox, oy = self.pos[o]
                ohw, ohd = self.halves[o]
                fx = np.abs(xs - ox) < hw + ohw - _EPS
                fy = np.abs(ys - oy) < hd + ohd - _EPS
                mask &= ~np.outer(fx, fy)
                if not mask.any():
                    break

        if mask.any():
            for rect in self.obstacles_for.get(k, []):
                ox, oy = rect.center
                fx = np.abs(xs - ox) < hw + rect.width / 2.0 - _EPS
                fy = np.abs(ys - oy) < hd + rect.depth / 2.0 - _EPS
                mask &= ~np.outer(fx, fy)
                if not mask.any():
                    break

        score = np.zeros(mask.shape)
        if mask.any():
            score = self._candidate_scores(k, hw, hd, placed)
        return mask, score

    def _dir_mask(self, rel: str, hw: float, hd: float, other_pos, other_halves,
                  subject: bool) -> np.ndarray:
        xs, ys = self.xs, self.ys
        ox, oy = other_pos
        ohw, ohd = other_halves
        ones_y = np.ones(len(ys), dtype=bool)
        ones_x = np.ones(len(xs), dtype=bool)
        if rel in ("left_of", "right_of"):
            if (rel == "left_of") == subject:
                mx = xs + hw <= ox - ohw + _EPS
            else:
                mx = xs - hw >= ox + ohw - _EPS
            return np.outer(mx, ones_y)
        if (rel == "in_front_of") == subject:
            my = ys + hd <= oy - ohd + _EPS
        else:
            my = ys - hd >= oy + ohd - _EPS
        return np.outer(ones_x, my)

    def _lookahead_mask(self, k: int, hw: float, hd: float,
                        placed: set[int]) -> np.ndarray:
        """Reserve room for unplaced assets directionally bound to k, so the
        greedy pass does not wall them off against a surface edge."""
        xs, ys = self.xs, self.ys
        bbox = self.surface.bbox
        m = self.params.edge_margin_cm
        need = {"left": 0.0, "right": 0.0, "front": 0.0, "back": 0.0}

        def min_w(i: int) -> float:
            if i in self.fixed:
                return self._halves_for(i, self.fixed[i])[0] * 2.0
            return float(min(self.dims[i]))

        def min_d(i: int) -> float:
            if i in self.fixed:
                return self._halves_for(i, self.fixed[i])[1] * 2.0
            return float(min(self.dims[i]))

        def room(i: int, side: str, seen: frozenset[int]) -> float:
            total = 0.0
            for rel, a, b in self.dir_cons:
                nxt = size = None
                if b == i and a not in placed and a not in seen:
                    # pending subject a sits on <side> of i
                    if (rel == "left_of" and side == "left") or \
                       (rel == "right_of" and side == "right"):
                        nxt, size = a, min_w(a)
                    elif (rel == "in_front_of" and side == "front") or \
                         (rel == "behind" and side == "back"):
                        nxt, size = a, min_d(a)
                elif a == i and b not in placed and b not in seen:
                    # i relates to a pending reference b on the opposite side
                    if (rel == "left_of" and side == "right") or \
                       (rel == "right_of" and side == "left"):
                        nxt, size = b, min_w(b)
                    elif (rel == "in_front_of" and side == "back") or \
                         (rel == "behind" and side == "front"):
                        nxt, size = b, min_d(b)
                if nxt is not None:
                    total = max(total, size + room(nxt, side, seen | {nxt}))
            return total

        for side in need:
            need[side] = room(k, side, frozenset({k}))
        mask_x = np.ones(len(xs), dtype=bool)
        mask_y = np.ones(len(ys), dtype=bool)
        if need["left"] > 0:
            mask_x &= xs - hw >= bbox.min_x + m + need["left"] - _EPS
        if need["right"] > 0:
            mask_x &= xs + hw <= bbox.max_x - m - need["right"] + _EPS
        if need["front"] > 0:
            mask_y &= ys - hd >= bbox.min_y + m + need["front"] - _EPS
        if need["back"] > 0:
            mask_y &= ys + hd <= bbox.max_y - m - need["back"] + _EPS
        return np.outer(mask_x, mask_y)

    def _candidate_scores(self, k: int, hw: float, hd: float,
                          placed: set[int]) -> np.ndarray:
        xs, ys = self.xs, self.ys
        gx = xs[:, None]
        gy = ys[None, :]
        score = np.zeros((len(xs), len(ys)))
        p = self.params
        for t in self.terms_by_asset.get(k, []):
            rel, i, j = self.terms[t]
            other = j if i == k else i
            if other not in placed:
                continue
            ox, oy = self.pos[other]
            ohw, ohd = self.halves[other]
            if rel in ("near", "far"):
                dx = np.maximum(0.0, np.abs(gx - ox) - (hw + ohw))
                dy = np.maximum(0.0, np.abs(gy - oy) - (hd + ohd))
                g = np.hypot(dx, dy)
                if rel == "near":
                    score += np.maximum(0.0, 1.0 - g / p.D_near_cm)
                else:
                    score += np.minimum(1.0, g / p.D_far_cm)
            else:
                if rel.startswith("vertical"):
                    off = {"vertical_left": -hw, "vertical_mid": 0.0,
                           "vertical_right": hw}[rel]
                    ooff = {"vertical_left": -ohw, "vertical_mid": 0.0,
                            "vertical_right": ohw}[rel]
                    diff = np.abs((gx + off) - (ox + ooff)) + 0.0 * gy
                else:
                    off = {"horizontal_front": -hd, "horizontal_mid": 0.0,
                           "horizontal_back": hd}[rel]
                    ooff = {"horizontal_front": -ohd, "horizontal_mid": 0.0,
                            "horizontal_back": ohd}[rel]
                    diff = np.abs((gy + off) - (oy + ooff)) + 0.0 * gx
                score += np.maximum(0.0, 1.0 - diff / p.T_align_cm)
        anchor = self.anchors.get(k)
        if anchor is not None:
            disp = np.hypot(gx - anchor.x_cm, gy - anchor.y_cm)
            score += anchor.weight * np.maximum(0.0, 1.0 - disp / anchor.radius_cm)
        return score

    # -- phase 2 -----------------------------------------------------------------

    def anneal(self, rng: np.random.Generator):
        n = self.n
        p = self.params
        if p.anneal_iters <= 0 or (not self.terms and not self.anchors):
            return
        upper = float(len(self.terms)) + sum(t.weight for t in self.anchors.values())
        term_vals = np.array([self._term_value(t) for t in range(len(self.terms))])
        anchor_vals = {k: self._anchor_value(k) for k in self.anchors}
        cur = float(term_vals.sum() + sum(anchor_vals.values()))
        best = cur
        best_state = (self.pos.copy(), list(self.orient), self.halves.copy())
        all_idx = set(range(n))
        free = [k for k in range(n) if k not in self.fixed]
        swappable = [k for k in range(n) if k not in self.base_of]

        for it in range(p.anneal_iters):
            if best >= upper - 1e-12:
                break
            temp = max(p.T0 * p.cooling ** it, 1e-12)
            u = rng.random()
            affected: list[int]
            saved_pos = None
            saved_orient = None
            if u < 0.6 or n == 1:
                k = int(rng.integers(n))
                delta = rng.normal(0.0, 5.0, 2)
                nx = self._snap(self.pos[k][0] + delta[0], 0)
                ny = self._snap(self.pos[k][1] + delta[1], 1)
                if nx == self.pos[k][0] and ny == self.pos[k][1]:
                    continue
                saved_pos = {k: self.pos[k].copy()}
                self.pos[k] = (nx, ny)
                affected = [k]
            elif u < 0.8 and free:
                k = free[int(rng.integers(len(free)))]
                options = [o for o in _ORIENTATIONS if o != self.orient[k]]
                o = options[int(rng.integers(len(options)))]
                saved_pos = {k: self.pos[k].copy()}
                saved_orient = {k: self.orient[k]}
                self._set_orientation(k, o)
                affected = [k]
            elif len(swappable) >= 2:
                i, j = rng.choice(len(swappable), size=2, replace=False)
                a, b = swappable[int(i)], swappable[int(j)]
                if self.level[a] != self.level[b]:
                    continue
                saved_pos = {a: self.pos[a].copy(), b: self.pos[b].copy()}
                self.pos[a], self.pos[b] = self.pos[b].copy(), self.pos[a].copy()
                affected = [a, b]
            else:
                continue

            ok = all(self._feasible(k, all_idx - {k}) for k in affected)
            if ok:
                touched = sorted({t for k in affected for t in self.terms_by_asset[k]})
                new_vals = {t: self._term_value(t) for t in touched}
                new_anchor = {k: self._anchor_value(k) for k in affected
                              if k in self.anchors}
                delta_s = (sum(new_vals[t] - term_vals[t] for t in touched)
                           + sum(new_anchor[k] - anchor_vals[k] for k in new_anchor))
                if delta_s >= 0 or rng.random() < math.exp(delta_s / temp):
                    for t, v in new_vals.items():
                        term_vals[t] = v
                    anchor_vals.update(new_anchor)
                    cur += delta_s
                    if cur > best + 1e-15:
                        best = cur
                        best_state = (self.pos.copy(), list(self.orient),
                                      self.halves.copy())
                    continue
            # reject: restore
            if saved_pos:
                for k, v in saved_pos.items():
                    self.pos[k] = v
            if saved_orient:
                for k, o in saved_orient.items():
                    self._set_orientation(k, o)

        self.pos, self.orient, self.halves = best_state


def _tercile_mask(vals: np.ndarray, lo: float, hi: float,
                  cell_lo: float, cell_hi: float) -> np.ndarray:
    third = (hi - lo) / 3.0
    idx = np.zeros(len(vals), dtype=int)
    idx += (vals > lo + third + _EPS).astype(int)
    idx += (vals > lo + 2 * third + _EPS).astype(int)
    target = int(round((cell_lo - lo) / third)) if third > 0 else 0
    return idx == target


def solve(cs: ConstraintSet, surfaces: list[Surface],
          params: SolverParams | None = None,
          anchors: dict[str, AnchorTerm] | None = None,
          obstacles: list[tuple[Rect, float, float]] | None = None) -> Layout:
    """Find a hard-feasible layout maximizing the soft score.

    Surfaces are solved lowest-first; assets already placed on lower
    surfaces become 3D obstacles for the ones above, which keeps the
    zero-intersection guarantee across surfaces.  ``obstacles`` may carry
    additional fixed boxes (rect, z_lo, z_hi), e.g. from surfaces excluded
    from an edit-time re-solve.  Deterministic for identical inputs
    (including the seed).  Raises InfeasibleLayoutError when no feasible
    position exists for some asset.
    """
    params = params or SolverParams()
    anchors = anchors or {}
    by_index = {s.index: s for s in surfaces}
    order = construction_order(cs)
    layout = Layout()
    fixed_boxes = list(obstacles or [])

    for sidx in sorted(cs.surface_assets):
        surface = by_index[sidx]
        ids = order[sidx]
        solver = _SurfaceSolver(surface, ids, cs, params, anchors,
                                obstacles=fixed_boxes)

        stuck = solver.construct(ids, rng=None)
        attempt = 0
        while stuck is not None and attempt < params.phase1_restarts:
            attempt += 1
            rng = np.random.default_rng(
                np.random.SeedSequence([params.seed & 0x7FFFFFFF, sidx, attempt]))
            stuck = solver.construct(ids, rng=rng)
        if stuck is not None:
            asset = cs.assets[stuck]
            raise InfeasibleLayoutError(
                stuck,
                f"{asset.width_cm} x {asset.depth_cm} cm on surface {sidx} "
                f"conflicts with its containment, region or relation constraints")

        rng = np.random.default_rng(
            np.random.SeedSequence([params.seed & 0x7FFFFFFF, sidx, 0xA11EA1]))
        solver.anneal(rng)

        for aid in ids:
            k = solver.index[aid]
            z0 = _stack_z(aid, cs, surface.height_cm)
            layout.placements[aid] = Placement(
                x_cm=float(solver.pos[k][0]), y_cm=float(solver.pos[k][1]),
                orientation=solver.orient[k],
                stack_base=cs.stack_base.get(aid), z_cm=z0)
            fixed_boxes.append((
                Rect(solver.pos[k][0] - solver.halves[k][0],
                     solver.pos[k][1] - solver.halves[k][1],
                     solver.pos[k][0] + solver.halves[k][0],
                     solver.pos[k][1] + solver.halves[k][1]),
                z0, z0 + cs.assets[aid].height_cm))

    violations = check_hard(layout, cs, surfaces, params)
    if violations:
        raise RuntimeError(f"internal: solver produced a violating layout: {violations}")
    return layout


def brute_force_solve(cs: ConstraintSet, surfaces: list[Surface],
                      params: SolverParams | None = None) -> Layout:
    """Exhaustive oracle for small instances: enumerates every lattice
    position/orientation tuple, keeps the feasible score maximum (ties:
    lexicographically smallest tuple in asset-id order)."""
    params = params or SolverParams()
    by_index = {s.index: s for s in surfaces}
    layout = Layout()
    fixed_boxes: list[tuple[Rect, float, float]] = []
    for sidx in sorted(cs.surface_assets):
        surface = by_index[sidx]
        ids = sorted(cs.surface_assets[sidx])
        if len(ids) > 3:
            raise ValueError("brute_force_solve supports at most 3 assets per surface")
        solver = _SurfaceSolver(surface, ids, cs, params, anchors={},
                                obstacles=fixed_boxes)
        if len(solver.xs) > 6 or len(solver.ys) > 6:
            raise ValueError("brute_force_solve supports at most a 6x6 lattice")
        best = _enumerate(solver)
        if best is None:
            raise InfeasibleLayoutError(ids[0], f"no feasible assignment on surface {sidx}")
        _score, assignment = best
        for k, aid in enumerate(ids):
            x, y, o = assignment[k]
            z0 = _stack_z(aid, cs, surface.height_cm)
            layout.placements[aid] = Placement(
                x_cm=x, y_cm=y, orientation=o, stack_base=cs.stack_base.get(aid),
                z_cm=z0)
            hw, hd = solver._halves_for(k, o)
            fixed_boxes.append((Rect(x - hw, y - hd, x + hw, y + hd),
                                z0, z0 + cs.assets[aid].height_cm))
    return layout


def _enumerate(solver: _SurfaceSolver):
    n = solver.n
    candidates: list[list[tuple[float, float, Orientation]]] = []
    for k in range(n):
        opts = []
        for o in solver._orientation_options(k):
            hw, hd = solver._halves_for(k, o)
            if k in solver.base_of:
                # base-dependent: containment checked pairwise during search
                for x in solver.xs:
                    for y in solver.ys:
                        opts.append((float(x), float(y), o))
            else:
                mask, _ = _unary_mask(solver, k, hw, hd)
                for ix, x in enumerate(solver.xs):
                    for iy, y in enumerate(solver.ys):
                        if mask[ix, iy]:
                            opts.append((float(x), float(y), o))
        opts.sort(key=lambda c: (c[0], c[1], c[2].r90, c[2].r180))
        if not opts:
            return None
        candidates.append(opts)

    best: tuple[float, list] | None = None
    assignment: list = [None] * n

    def place(k: int, x: float, y: float, o: Orientation):
        solver._set_orientation(k, o)
        solver.pos[k] = (x, y)

    def rec(k: int, placed: set[int]):
        nonlocal best
        if k == n:
            score = solver.objective()
            if best is None or score > best[0] + 1e-15:
                best = (score, list(assignment))
            return
        for x, y, o in candidates[k]:
            place(k, x, y, o)
            if not solver._feasible(k, placed):
                continue
            assignment[k] = (x, y, o)
            rec(k + 1, placed | {k})
        assignment[k] = None

    rec(0, set())
    return best


def _unary_mask(solver: _SurfaceSolver, k: int, hw: float, hd: float):
    return solver._candidate_mask(k, hw, hd, placed=set())


def layout_to_json(layout: Layout) -> dict:
    """Diagnostic dump: asset id -> {x_cm, y_cm, yaw_deg, z_cm, stack_base}."""
    return {aid: {"x_cm": p.x_cm, "y_cm": p.y_cm, "yaw_deg": p.orientation.yaw_deg,
                  "z_cm": p.z_cm, "stack_base": p.stack_base}
            for aid, p in sorted(layout.placements.items())}


def violations_to_json(violations: list[Violation]) -> list[dict]:
    return [v.to_json() for v in violations]
