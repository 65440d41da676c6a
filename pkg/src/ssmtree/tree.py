"""Recursive construction of nested decorated random trees.

Branches are indexed by the Ulam tree; each branch carries a decoration
path and spawns children at its reproduction atoms (one branch per atom
above the mass cutoff, up to the depth cap). A nested family over an
ascending x-grid shares one coupled driver per branch: labels are fixed by
the co-lexicographic enumeration at the top level x0, lower levels inherit
them, and dropped children are recorded as absent rather than stored as
fictitious branches.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, OrderingError
from .growing import GrowingFamily, transform_split
from .measures import CharacteristicQuadruplet
from .sequences import DecorationSequence
from .simulate import (
    ABSORB_REL,
    Cutoffs,
    DecorationPath,
    LevyTrace,
    _derive_lower_path,
    derived_segment_value,
    lamperti,
)

UlamLabel = tuple


@dataclass
class Branch:
    """One decorated branch of a (possibly nested) tree.

    paths maps grid level -> DecorationPath (absent levels omitted);
    child marks are kept per level in the shared x0 ordering, so the
    nested inclusion maps are the key sets themselves.
    """

    label: UlamLabel
    attach_time: float
    init_values: dict            # level -> initial decoration
    paths: dict                  # level -> DecorationPath
    child_marks: dict            # level -> list of (t_ui, child_value) in label order
    children: list               # child labels (present at x0)
    tie_breaker: list = field(default_factory=list)   # sampler draw order of the atoms

    def length(self, x):
        return self.paths[x].z if x in self.paths else 0.0

    def present(self, x):
        return x in self.paths


@dataclass
class DecoratedTree:
    """Ulam-indexed glued branches at one decoration level."""

    x: float
    cutoff: float
    depth_cap: int
    seed: object
    branches: dict               # label -> Branch
    truncated: bool = False

    def root_distance(self, label):
        d = 0.0
        for k in range(1, len(label) + 1):
            d += self.branches[label[:k]].attach_time
        return d

    def present_labels(self):
        return [lab for lab, br in self.branches.items() if br.present(self.x)]


@dataclass
class NestedFamily:
    x_grid: list
    trees: dict                  # level -> DecoratedTree (views onto shared branches)
    branches: dict               # label -> Branch (shared)
    quad: CharacteristicQuadruplet
    family: GrowingFamily
    cutoff: float
    depth_cap: int
    seed: object

    def tree(self, x):
        return self.trees[x]


def _branch_seed(seed, label):
    return np.random.SeedSequence(entropy=_entropy_int(seed), spawn_key=(1,) + tuple(label))


def _entropy_int(seed):
    if isinstance(seed, (int, np.integer)):
        return int(seed)
    return abs(hash(str(seed))) % (2 ** 63)


def build_nested(quad: CharacteristicQuadruplet, family: GrowingFamily, x_grid,
                 cutoff: float, depth_cap: int = 30, seed=0,
                 headroom: float = 1.0) -> NestedFamily:
    """Nested decorated trees over an ascending x-grid from one shared
    recursion: per-branch coupled decoration-reproduction processes, labels
    enumerated once at the top level in co-lexicographic order.

    headroom > 1 stores each branch's driver at a finer truncation
    (relative cutoff divided by headroom) so that a later Markov-forward
    grow step up to headroom times the family level sees the same atom
    resolution a direct build at the target would.
    """
    xs = sorted(float(v) for v in x_grid)
    if not xs or xs[0] <= 0:
        raise ConfigurationError("x_grid must be ascending positive values")
    if cutoff <= 0:
        raise ConfigurationError("cutoff must be positive")
    x0 = xs[-1]
    branches = {}
    truncated = False
    # stack entries: (label, attach_time, per-level initial values)
    stack = [((), 0.0, {x: x for x in xs})]
    while stack:
        label, attach, inits = stack.pop()
        br, kids = _simulate_branch(quad, family, xs, label, attach, inits, cutoff,
                                    seed, headroom)
        branches[label] = br
        if len(label) >= depth_cap:
            if kids:
                truncated = True
            continue
        for child_label, t_ui, child_inits in kids:
            stack.append((child_label, t_ui, child_inits))
    trees = {}
    for x in xs:
        trees[x] = DecoratedTree(x, cutoff, depth_cap, seed, branches, truncated)
    return NestedFamily(xs, trees, branches, quad, family, cutoff, depth_cap, seed)


def _simulate_branch(quad, family, xs, label, attach, inits, cutoff, seed, headroom=1.0):
    """One branch's coupled decoration processes plus its super-cutoff
    children (label order = co-lex at the top level)."""
    x0 = xs[-1]
    w_top = inits[x0]
    rel_cut = min(cutoff / (w_top * headroom), 0.5)
    trace = LevyTrace(quad, Cutoffs(rel_cut), 4.0, _branch_seed(seed, label))
    top = lamperti(trace, quad.alpha, w_top)
    level = ABSORB_REL * w_top
    paths = {x0: top}
    for x in xs[:-1]:
        w = inits.get(x, 0.0)
        if w > 0.0:
            paths[x] = _derive_lower_path(family, top, w, quad.alpha, trace.a_grid, level,
                                          a_own=quad.a)

    # co-lexicographic enumeration at the top level: largest child first,
    # ties by time, then by sampler draw order
    entries = []
    for k, (t, kids) in enumerate(top.atoms):
        for j, val in enumerate(kids):
            entries.append((val, t, k, j))
    entries.sort(key=lambda e: (-e[0], e[1], e[2], e[3]))

    child_marks = {x: [] for x in paths}
    children = []
    child_specs = []
    idx = 0
    for val, t, k, j in entries:
        child_inits = {}
        for x, p in paths.items():
            if k < len(p.atoms) and j < len(p.atoms[k][1]):
                child_inits[x] = float(p.atoms[k][1][j])
            else:
                child_inits[x] = 0.0
        for x in paths:
            child_marks[x].append((t, child_inits[x]))
        if val >= cutoff:
            child_label = label + (idx,)
            children.append(child_label)
            child_specs.append((child_label, t, child_inits))
        idx += 1

    br = Branch(label, attach, dict(inits), paths, child_marks, children,
                tie_breaker=[(e[2], e[3]) for e in entries])
    return br, child_specs


def build_tree(quad: CharacteristicQuadruplet, family: GrowingFamily, x: float,
               cutoff: float, depth_cap: int = 30, seed=0) -> DecoratedTree:
    """Single decorated tree; same recursion as a one-level nested family."""
    return build_nested(quad, family, [x], cutoff, depth_cap, seed).trees[x]


# ---------------------------------------------------------------------------
# statistics
# ---------------------------------------------------------------------------

@dataclass
class TreeStats:
    total_length: float
    height: float
    branch_count: int
    max_decoration: float
    tip_count: int


def tree_stats(tree: DecoratedTree) -> TreeStats:
    total = 0.0
    height = 0.0
    max_dec = 0.0
    count = 0
    leaves = 0
    for lab in tree.present_labels():
        br = tree.branches[lab]
        z = br.length(tree.x)
        total += z
        count += 1
        depth = tree.root_distance(lab) + z
        height = max(height, depth)
        p = br.paths[tree.x]
        max_dec = max(max_dec, p.x0, float(np.max(p.post_values)) if len(p.post_values) else 0.0)
        kids_present = [c for c in br.children if c in tree.branches and tree.branches[c].present(tree.x)]
        if not kids_present:
            leaves += 1
    return TreeStats(total, height, count, max_dec, leaves)


# ---------------------------------------------------------------------------
# Markov-forward grow step
# ---------------------------------------------------------------------------

def grow_step(nested: NestedFamily, target_x: float, fresh_seed) -> DecoratedTree:
    """Grow the family's top tree from x' to target_x > x'.

    Decorations along existing branches are updated through the coupler
    (the stored jump records suffice), fresh independent subtrees are
    grafted at the tips with initial decorations w(u) = updated value at
    the old absorption time, and children that were below the cutoff at x'
    but clear it at the target are grafted as fresh subtrees (the
    truncation-consistent approximation). Labels are re-indexed
    co-lexicographically.
    """
    x_prime = nested.x_grid[-1]
    if target_x <= x_prime:
        if target_x == x_prime:
            return nested.trees[x_prime]
        raise OrderingError(f"target {target_x} must exceed the family level {x_prime}")
    quad, family, cutoff = nested.quad, nested.family, nested.cutoff

    out_branches = {}
    counter = [0]

    def graft(label, attach, w):
        sub = build_nested(quad, family, [w], cutoff, nested.depth_cap,
                           seed=np.random.SeedSequence(
                               entropy=_entropy_int(fresh_seed), spawn_key=(2, counter[0])))
        counter[0] += 1
        _reattach(sub.trees[w], (), label, attach, w, out_branches, target_x)

    def update_branch(old_label, new_label, attach, w_new):
        br = nested.branches[old_label]
        old = br.paths[x_prime]
        jt, pre_v, post_v, splits, atoms = [], [], [], [], []
        x = w_new
        t_prev = 0.0
        # Update through the coupler only while the stored lower path stays
        # above the mass cutoff: below the cutoff the stored tree resolves no
        # further super-cutoff structure and the truncated coupling's tip
        # weight degenerates (the true weight is an infinite-activity limit).
        # The crossing is a stopping time of the stored data, so grafting a
        # fresh subtree from the updated value there is exact by the strong
        # Markov property. Decoration paths here are non-increasing.
        tau = None
        lower_prev = old.x0
        for k, t in enumerate(old.jump_times):
            if old.pre_values[k] < cutoff:
                hit = _drift_floor_hit(old, k, cutoff, quad.alpha, t_prev)
                tau = min(hit, t)
                break
            x_pre = derived_segment_value(x, lower_prev, t - t_prev, quad.alpha,
                                          quad.a, old.drift)
            split = transform_split(family, old.pre_values[k], old.splits[k], x_pre)
            jt.append(t)
            pre_v.append(x_pre)
            post_v.append(x_pre * split.followed)
            splits.append(split)
            atoms.append((t, x_pre * split.offspring))
            x = x_pre * split.followed
            t_prev = t
            lower_prev = old.post_values[k]
            if old.post_values[k] < cutoff:
                tau = t
                break
        if tau is None:
            tau = _drift_floor_hit(old, len(old.jump_times), cutoff, quad.alpha, t_prev)
        tau = min(max(tau, t_prev), old.z)
        n_prefix = len(atoms)
        w_cont = derived_segment_value(x, lower_prev, tau - t_prev, quad.alpha,
                                       quad.a, old.drift)
        # fresh subtree of initial decoration w_cont grafted at the switch
        # point; its root branch extends this branch beyond tau
        cont_seed = np.random.SeedSequence(entropy=_entropy_int(fresh_seed),
                                           spawn_key=(3,) + tuple(old_label))
        cont = build_nested(quad, family, [w_cont], cutoff, nested.depth_cap, seed=cont_seed) \
            if w_cont > cutoff * ABSORB_REL else None
        if cont is not None:
            root = cont.branches[()]
            rp = root.paths[w_cont]
            jt += [tau + t for t in rp.jump_times]
            pre_v += list(rp.pre_values)
            post_v += list(rp.post_values)
            splits += list(rp.splits)
            atoms += [(tau + t, kids) for (t, kids) in rp.atoms]
            z_new = tau + rp.z
        else:
            z_new = tau
        path = DecorationPath(w_new, quad.alpha, old.drift, np.array(jt), np.array(pre_v),
                              np.array(post_v), splits, atoms, z_new, True, z_new)
        marks_flat = [(t, float(v)) for t, kids in atoms for v in kids]
        new_br = Branch(new_label, attach, {target_x: w_new}, {target_x: path},
                        {target_x: marks_flat}, [])
        out_branches[new_label] = new_br

        # children: updated marks on [0, old.z], fresh grafts beyond
        kid_entries = []
        for k, (t, kids) in enumerate(atoms):
            for j, val in enumerate(kids):
                kid_entries.append((float(val), t, k, j))
        kid_entries.sort(key=lambda e: (-e[0], e[1], e[2], e[3]))
        idx = 0
        for val, t, k, j in kid_entries:
            if val < cutoff:
                continue
            child_label = new_label + (idx,)
            idx += 1
            if k < n_prefix:
                # atom from the updated prefix: existed in the stored recursion?
                stored = _find_stored_child(nested, old_label, k, j)
            else:
                stored = None
            if stored is not None:
                update_branch(stored, child_label, t, val)
            else:
                graft(child_label, t, val)
        new_br.children.extend(new_label + (i,) for i in range(idx))

    update_branch((), (), 0.0, target_x)
    tree = DecoratedTree(target_x, cutoff, nested.depth_cap, fresh_seed, out_branches,
                         any(getattr(t, "truncated", False) for t in nested.trees.values()))
    return tree


def _find_stored_child(nested: NestedFamily, parent_label, atom_index, offspring_index):
    parent = nested.branches[parent_label]
    for child_label in parent.children:
        br = nested.branches.get(child_label)
        if br is None:
            continue
        pos = len(child_label) - 1
        # match by the branch's tie-breaker bookkeeping: child order in the
        # parent's enumeration corresponds to (atom_index, offspring_index)
        k = child_label[-1]
        if k < len(parent.tie_breaker) and parent.tie_breaker[k] == (atom_index, offspring_index):
            return child_label
    return None


def _segment(x_start, dt, alpha, a):
    from .simulate import _drift_segment_value

    return _drift_segment_value(x_start, dt, alpha, a)


def _drift_floor_hit(path: DecorationPath, k: int, floor: float, alpha: float,
                     t_seg_start: float) -> float:
    """Time at which the stored path's drift segment starting after jump k-1
    (value post_values[k-1], time t_seg_start) falls to `floor`."""
    from .simulate import _drift_segment_hit

    x0 = path.post_values[k - 1] if k > 0 else path.x0
    hit = _drift_segment_hit(x0, floor, alpha, path.drift)
    return t_seg_start + hit if np.isfinite(hit) else path.z


def _reattach(tree: DecoratedTree, src_label, dst_label, attach, w, out_branches, target_x):
    """Copy a freshly built subtree under a new label with level target_x."""
    br = tree.branches[src_label]
    p = br.paths[tree.x]
    built = [c for c in br.children if c in tree.branches]
    out_branches[dst_label] = Branch(
        dst_label, attach, {target_x: p.x0}, {target_x: p},
        {target_x: br.child_marks.get(tree.x, [])},
        [dst_label + (c[-1],) for c in built])
    for c in built:
        _reattach(tree, c, dst_label + (c[-1],), tree.branches[c].attach_time,
                  tree.branches[c].init_values[tree.x], out_branches, target_x)


# ---------------------------------------------------------------------------
# hypograph distance on nested pairs
# ---------------------------------------------------------------------------

def _branch_mesh(p: DecorationPath, mesh: float, z_override: float | None = None):
    """Sample positions/decorations along one branch at the mesh and at jump
    points, including pre-jump (usc) values."""
    z = p.z if z_override is None else z_override
    ts = np.unique(np.concatenate([
        np.arange(0.0, z, mesh), [z], p.jump_times[p.jump_times < z]]))
    vals = np.array([p.value(t) if t <= p.z else 0.0 for t in ts])
    extra_t, extra_v = [], []
    for k, tj in enumerate(p.jump_times):
        if tj < z:
            extra_t.append(tj)
            extra_v.append(float(p.pre_values[k]))
    t_all = np.concatenate([ts, np.array(extra_t)]) if extra_t else ts
    v_all = np.concatenate([vals, np.array(extra_v)]) if extra_t else vals
    return t_all, v_all


def hypograph_distance_nested(nested: NestedFamily, x_lo: float, x_hi: float,
                              mesh: float = 0.01) -> float:
    """Hausdorff distance between the hypographs of the decorations at two
    nested levels, in their common embedding on the x_hi skeleton, under the
    product metric max(tree distance, decoration gap).

    Since the lower hypograph is contained in the upper one, the distance is
    sup over upper surface points of the distance to the lower hypograph,
    computed exactly within the mesh. Both roots coincide, so no root term
    is added.
    """
    if x_lo not in nested.trees or x_hi not in nested.trees:
        raise ConfigurationError("both levels must belong to the family")
    if x_lo == x_hi:
        return 0.0
    if x_lo > x_hi:
        raise OrderingError("x_lo must not exceed x_hi")
    branches = {lab: br for lab, br in nested.branches.items() if br.present(x_hi)}

    rootdist = {}
    for lab in branches:
        d = 0.0
        for k in range(1, len(lab) + 1):
            d += branches[lab[:k]].attach_time
        rootdist[lab] = d

    hi = {lab: _branch_mesh(br.paths[x_hi], mesh) for lab, br in branches.items()}
    lo = {}
    for lab, br in branches.items():
        z_hi = br.paths[x_hi].z
        if br.present(x_lo):
            lo[lab] = _branch_mesh(br.paths[x_lo], mesh, z_override=z_hi)
        else:
            ts = np.arange(0.0, z_hi + mesh, mesh)
            lo[lab] = (np.minimum(ts, z_hi), np.zeros(len(ts)))

    worst = 0.0
    labs = list(branches)
    for lab_a in labs:
        ta, ra = hi[lab_a]
        best = np.full(len(ta), np.inf)
        for lab_b in labs:
            tb, gb = lo[lab_b]
            if lab_a == lab_b:
                td = np.abs(ta[:, None] - tb[None, :])
            else:
                common = 0
                for i in range(min(len(lab_a), len(lab_b))):
                    if lab_a[i] != lab_b[i]:
                        break
                    common += 1
                da = rootdist[lab_a] + ta
                db = rootdist[lab_b] + tb
                if common == len(lab_a):
                    j = rootdist[lab_b[:common + 1]]
                    td = np.abs(da - j)[:, None] + (db - j)[None, :]
                elif common == len(lab_b):
                    j = rootdist[lab_a[:common + 1]]
                    td = (da - j)[:, None] + np.abs(db - j)[None, :]
                else:
                    ja = rootdist[lab_a[:common + 1]]
                    jb = rootdist[lab_b[:common + 1]]
                    base = rootdist[lab_a[:common]]
                    td = (da - ja)[:, None] + (db - jb)[None, :] + abs((ja - base) - (jb - base))
            gap = np.maximum(ra[:, None] - gb[None, :], 0.0)
            best = np.minimum(best, np.min(np.maximum(td, gap), axis=1))
        worst = max(worst, float(best.max()))
    return worst


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def tree_to_dict(tree: DecoratedTree, samples_per_branch: int = 32) -> dict:
    """Structured export: one record per branch with the label path as
    dot-joined integers, attach time, length, decoration samples and
    children."""
    records = []
    for lab in sorted(tree.present_labels()):
        br = tree.branches[lab]
        p = br.paths[tree.x]
        ts = np.linspace(0.0, p.z, samples_per_branch)
        records.append({
            "label": ".".join(str(i) for i in lab) if lab else "",
            "attach_time": br.attach_time,
            "length": p.z,
            "decoration": [[float(t), float(p.value(t))] for t in ts],
            "children": [".".join(str(i) for i in c) for c in br.children],
        })
    return {"x": tree.x, "cutoff": tree.cutoff, "depth_cap": tree.depth_cap,
            "truncated": tree.truncated, "branches": records}


def save_tree(tree: DecoratedTree, path, samples_per_branch: int = 32):
    with open(path, "w") as fh:
        json.dump(tree_to_dict(tree, samples_per_branch), fh, indent=1)
