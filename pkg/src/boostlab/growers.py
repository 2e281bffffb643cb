"""Tree construction: leaf weights, split gain, the pre-sorted and histogram
split finders, and the three growth strategies (level-wise, leaf-wise,
oblivious).

All growers consume per-instance first/second-order statistics (g, h) and a
BinnedDataset; they return DecisionTree objects whose thresholds are raw
feature values (bin upper edges for histogram splits), so routing a raw value
through the tree reproduces the training-time partition exactly.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .dataset import BinnedDataset


@dataclass(frozen=True)
class NodeStats:
    """Sufficient statistics of one node: sums of g and h plus the instance count."""

    sum_g: float
    sum_h: float
    count: int

    def __add__(self, other: "NodeStats") -> "NodeStats":
        return NodeStats(self.sum_g + other.sum_g, self.sum_h + other.sum_h,
                         self.count + other.count)

    def __sub__(self, other: "NodeStats") -> "NodeStats":
        return NodeStats(self.sum_g - other.sum_g, self.sum_h - other.sum_h,
                         self.count - other.count)


def node_stats(indices: np.ndarray, g: np.ndarray, h: np.ndarray) -> NodeStats:
    return NodeStats(float(g[indices].sum()), float(h[indices].sum()), int(len(indices)))


def leaf_weight(stats: NodeStats, lam: float) -> float:
    """Optimal leaf value -sum_g / (sum_h + lam)."""
    denom = stats.sum_h + lam
    if denom <= 0.0:
        raise ValueError(f"nonpositive leaf denominator {denom}")
    return -stats.sum_g / denom


def split_gain(left: NodeStats, right: NodeStats, lam: float, gamma: float) -> float:
    """Reduction in the regularized quadratic objective from one split."""
    dl = left.sum_h + lam
    dr = right.sum_h + lam
    if dl <= 0.0 or dr <= 0.0:
        raise ValueError("degenerate split denominators")
    parent = left + right
    return 0.5 * (left.sum_g ** 2 / dl + right.sum_g ** 2 / dr
                  - parent.sum_g ** 2 / (parent.sum_h + lam)) - gamma


@dataclass
class SplitCandidate:
    """A proposed split: feature index, raw threshold, and both child stats."""

    feature: int
    threshold: float
    gain: float
    left: NodeStats
    right: NodeStats
    default_left: bool
    bin_threshold: int | None = None  # bin index when found on a histogram


@dataclass
class Histogram:
    """Per-feature (sum_g, sum_h, count) accumulated by bin.

    Arrays are (n_features, width) where width covers every feature's bins
    plus its reserved missing bin; unused trailing cells stay zero.
    """

    sum_g: np.ndarray
    sum_h: np.ndarray
    count: np.ndarray

    def subtract(self, other: "Histogram") -> "Histogram":
        """Sibling histogram via parent - child."""
        return Histogram(self.sum_g - other.sum_g, self.sum_h - other.sum_h,
                         self.count - other.count)

    def feature_totals(self, fi: int) -> NodeStats:
        return NodeStats(float(self.sum_g[fi].sum()), float(self.sum_h[fi].sum()),
                         int(self.count[fi].sum()))


def _hist_width(binned: BinnedDataset) -> int:
    return max(binned.n_bins(n) for n in binned.feature_names) + 1


def build_histogram(indices: np.ndarray, binned: BinnedDataset,
                    g: np.ndarray, h: np.ndarray) -> Histogram:
    """Accumulate the node's gradient histogram (ascending instance order)."""
    width = _hist_width(binned)
    m = len(binned.feature_names)
    sg = np.zeros((m, width))
    sh = np.zeros((m, width))
    cnt = np.zeros((m, width), dtype=np.int64)
    gi = g[indices]
    hi = h[indices]
    for fi, name in enumerate(binned.feature_names):
        codes = binned.bins[name][indices]
        nb = binned.n_bins(name) + 1
        sg[fi, :nb] = np.bincount(codes, weights=gi, minlength=nb)
        sh[fi, :nb] = np.bincount(codes, weights=hi, minlength=nb)
        cnt[fi, :nb] = np.bincount(codes, minlength=nb)
    return Histogram(sg, sh, cnt)


class HistogramBuilder:
    """build_histogram with a flattened-bincount fast path for small nodes.

    Large nodes pay one bincount per feature over the node's instances; small
    nodes fold all features into a single bin space so the per-call overhead
    is paid three times instead of 3m times. Both paths accumulate in
    ascending instance order and produce identical histograms.
    """

    FLAT_LIMIT = 32768  # node_size * n_features below this uses the flat path

    def __init__(self, binned: BinnedDataset):
        self.width = _hist_width(binned)
        self.m = len(binned.feature_names)
        self.n_rows = binned.n_rows
        offsets = (np.arange(self.m, dtype=np.int64) * self.width)[None, :]
        self.flat = np.column_stack(
            [binned.bins[n].astype(np.int64) for n in binned.feature_names]) + offsets
        self.codes64 = [binned.bins[n].astype(np.int64) for n in binned.feature_names]

    def __call__(self, indices, binned, g, h) -> Histogram:
        if len(indices) * self.m > self.FLAT_LIMIT:
            return build_histogram(indices, binned, g, h)
        size = self.m * self.width
        fc = self.flat[indices].ravel()
        gi = np.repeat(g[indices], self.m)
        hi = np.repeat(h[indices], self.m)
        sg = np.bincount(fc, weights=gi, minlength=size).reshape(self.m, self.width)
        sh = np.bincount(fc, weights=hi, minlength=size).reshape(self.m, self.width)
        cnt = np.bincount(fc, minlength=size).reshape(self.m, self.width)
        return Histogram(sg, sh, cnt)

    def level_histograms(self, indices, leaf_pos, n_leaves, binned, g, h):
        """Stacked (n_leaves, m, width) histograms of one level in bulk."""
        m, width = self.m, self.width
        plane = m * width
        if len(indices) * m <= self.FLAT_LIMIT:
            fc = (self.flat[indices] + (leaf_pos.astype(np.int64) * plane)[:, None]).ravel()
            size = n_leaves * plane
            sg = np.bincount(fc, weights=np.repeat(g[indices], m), minlength=size)
            sh = np.bincount(fc, weights=np.repeat(h[indices], m), minlength=size)
            cnt = np.bincount(fc, minlength=size)
            return (sg.reshape(n_leaves, m, width), sh.reshape(n_leaves, m, width),
                    cnt.reshape(n_leaves, m, width).astype(np.float64))
        full = len(indices) == self.n_rows
        gv = g if full else g[indices]
        hv = h if full else h[indices]
        sg = np.zeros((n_leaves, m, width))
        sh = np.zeros((n_leaves, m, width))
        cnt = np.zeros((n_leaves, m, width))
        base = leaf_pos.astype(np.int64) * width
        size = n_leaves * width
        for fi in range(m):
            fc = self.codes64[fi] if full else self.codes64[fi][indices]
            codes = base + fc
            sg[:, fi, :] = np.bincount(codes, weights=gv, minlength=size).reshape(n_leaves, width)
            sh[:, fi, :] = np.bincount(codes, weights=hv, minlength=size).reshape(n_leaves, width)
            cnt[:, fi, :] = np.bincount(codes, minlength=size).reshape(n_leaves, width)
        return sg, sh, cnt


def _scan_prefixes(GL, HL, CL, GR, HR, CR, gm, hm, cm, parent_term, lam, gamma,
                   min_child_hessian):
    """Best (gain, position, default_left) over candidate prefixes, trying the
    missing-value block on both sides. Requires >= 1 non-missing instance per
    side; ties between routings keep missing on the left."""
    best = (-np.inf, -1, True)
    base_valid = (CL >= 1) & (CR >= 1)
    for missing_left in (True, False):
        if missing_left:
            gl, hl, cl = GL + gm, HL + hm, CL + cm
            gr, hr, cr = GR, HR, CR
        else:
            gl, hl, cl = GL, HL, CL
            gr, hr, cr = GR + gm, HR + hm, CR + cm
        dl = hl + lam
        dr = hr + lam
        valid = base_valid & (dl > 0) & (dr > 0) \
            & (hl >= min_child_hessian) & (hr >= min_child_hessian)
        with np.errstate(divide="ignore", invalid="ignore"):
            gains = 0.5 * (gl * gl / dl + gr * gr / dr - parent_term) - gamma
        gains = np.where(valid, gains, -np.inf)
        if not gains.size:
            continue
        pos = int(np.argmax(gains))  # first max -> lowest threshold
        gain = float(gains[pos])
        # strict inequality keeps the left routing on ties
        if gain > best[0]:
            best = (gain, pos, missing_left)
    return best


def _feature_bin_meta(binned: BinnedDataset):
    """Cached per-feature bin counts and a (m, W-1) valid-threshold mask."""
    cached = getattr(binned, "_split_meta", None)
    if cached is not None:
        return cached
    nb = np.array([binned.n_bins(n) for n in binned.feature_names], dtype=np.int64)
    width = _hist_width(binned)
    valid = np.arange(width - 1)[None, :] < (nb - 1)[:, None]
    meta = (nb, valid)
    binned._split_meta = meta
    return meta


def _prefix_tables(hist: Histogram, nb: np.ndarray):
    """Cumulative non-missing prefixes per (feature, bin) plus missing stats."""
    m, width = hist.sum_g.shape
    rows = np.arange(m)
    gm = hist.sum_g[rows, nb]
    hm = hist.sum_h[rows, nb]
    cm = hist.count[rows, nb]
    ag = hist.sum_g.copy()
    ah = hist.sum_h.copy()
    ac = hist.count.astype(np.float64)
    ag[rows, nb] = 0.0
    ah[rows, nb] = 0.0
    ac[rows, nb] = 0.0
    GL = np.cumsum(ag, axis=1)[:, :-1]
    HL = np.cumsum(ah, axis=1)[:, :-1]
    CL = np.cumsum(ac, axis=1)[:, :-1]
    return GL, HL, CL, gm, hm, cm


def _routed_gains(GL, HL, CL, GR, HR, CR, gm, hm, cm, parent_term, lam, gamma,
                  min_child_hessian, valid):
    """Elementwise best gain over the two missing routings (ties keep left).

    Inputs are (..., n_thresholds) arrays; gm/hm/cm broadcast per feature or
    leaf. Returns (gains, missing_left) arrays of the same shape.
    """
    out_gain = None
    out_left = None
    for missing_left in (True, False):
        if missing_left:
            gl, hl, cl = GL + gm, HL + hm, CL + cm
            gr, hr, cr = GR, HR, CR
        else:
            gl, hl, cl = GL, HL, CL
            gr, hr, cr = GR + gm, HR + hm, CR + cm
        dl = hl + lam
        dr = hr + lam
        ok = valid & (dl > 0) & (dr > 0) & (hl >= min_child_hessian) & (hr >= min_child_hessian)
        with np.errstate(divide="ignore", invalid="ignore"):
            gains = 0.5 * (gl * gl / dl + gr * gr / dr - parent_term) - gamma
        gains = np.where(ok, gains, -np.inf)
        if out_gain is None:
            out_gain = gains
            out_left = np.ones(gains.shape, dtype=bool)
        else:
            better = gains > out_gain  # strict: ties keep the left routing
            out_gain = np.where(better, gains, out_gain)
            out_left = ~better & out_left
    return out_gain, out_left


def find_best_split_histogram(hist: Histogram, parent: NodeStats, binned: BinnedDataset,
                              lam: float, gamma: float,
                              min_child_hessian: float = 0.0) -> SplitCandidate | None:
    """Scan cumulative bin prefixes of every feature for the max-gain split.

    The missing-value bin is tried on both sides. Ties break toward the lowest
    feature index, then the lowest threshold. Returns None when no candidate
    has positive gain. Requires at least one non-missing instance per side.
    """
    nb, valid = _feature_bin_meta(binned)
    dparent = parent.sum_h + lam
    parent_term = parent.sum_g ** 2 / dparent if dparent > 0 else 0.0
    GL, HL, CL, gm, hm, cm = _prefix_tables(hist, nb)
    tg = parent.sum_g - gm
    th = parent.sum_h - hm
    tc = parent.count - cm
    GR = tg[:, None] - GL
    HR = th[:, None] - HL
    CR = tc[:, None] - CL
    base_valid = valid & (CL >= 1) & (CR >= 1)
    gains, missing_left = _routed_gains(
        GL, HL, CL, GR, HR, CR, gm[:, None], hm[:, None], cm[:, None],
        parent_term, lam, gamma, min_child_hessian, base_valid)
    flat = int(np.argmax(gains))  # row-major: lowest feature, then lowest bin
    fi, pos = divmod(flat, gains.shape[1])
    gain = float(gains[fi, pos])
    if not np.isfinite(gain) or gain <= 0.0:
        return None
    left = NodeStats(float(GL[fi, pos]), float(HL[fi, pos]), int(CL[fi, pos]))
    right = NodeStats(float(GR[fi, pos]), float(HR[fi, pos]), int(CR[fi, pos]))
    miss = NodeStats(float(gm[fi]), float(hm[fi]), int(cm[fi]))
    default_left = bool(missing_left[fi, pos])
    if default_left:
        left = left + miss
    else:
        right = right + miss
    name = binned.feature_names[fi]
    return SplitCandidate(fi, float(binned.boundaries[name][pos]), gain,
                          left, right, default_left, bin_threshold=pos)


def find_best_split_presorted(indices: np.ndarray, ds, g: np.ndarray, h: np.ndarray,
                              lam: float, gamma: float,
                              min_child_hessian: float = 0.0,
                              feature_names: list[str] | None = None) -> SplitCandidate | None:
    """Exact enumeration over all midpoints between consecutive distinct sorted
    feature values. Same tie-breaking and rejection rules as the histogram
    finder."""
    names = feature_names if feature_names is not None else ds.numeric_feature_names()
    stats = node_stats(indices, g, h)
    dparent = stats.sum_h + lam
    parent_term = stats.sum_g ** 2 / dparent if dparent > 0 else 0.0
    best: SplitCandidate | None = None
    for fi, name in enumerate(names):
        v = ds.column(name)[indices]
        miss = np.isnan(v)
        vv = v[~miss]
        if len(vv) < 2:
            continue
        order = np.argsort(vv, kind="stable")
        sv = vv[order]
        gg = g[indices][~miss][order]
        hh = h[indices][~miss][order]
        cut = np.flatnonzero(sv[:-1] != sv[1:])  # prefix lengths cut+1
        if not cut.size:
            continue
        cg = np.cumsum(gg)
        ch = np.cumsum(hh)
        GL = cg[cut]
        HL = ch[cut]
        CL = (cut + 1).astype(np.int64)
        GR = cg[-1] - GL
        HR = ch[-1] - HL
        CR = len(sv) - CL
        gm = float(g[indices][miss].sum())
        hm = float(h[indices][miss].sum())
        cm = int(miss.sum())
        gain, pos, missing_left = _scan_prefixes(
            GL, HL, CL, GR, HR, CR, gm, hm, cm, parent_term, lam, gamma,
            min_child_hessian)
        if pos < 0 or not np.isfinite(gain):
            continue
        if best is None or gain > best.gain:
            thr = float((sv[cut[pos]] + sv[cut[pos] + 1]) / 2.0)
            left = NodeStats(float(GL[pos]), float(HL[pos]), int(CL[pos]))
            right = NodeStats(float(GR[pos]), float(HR[pos]), int(CR[pos]))
            missing = NodeStats(gm, hm, cm)
            if missing_left:
                left = left + missing
            else:
                right = right + missing
            best = SplitCandidate(fi, thr, gain, left, right, missing_left)
    if best is None or best.gain <= 0.0:
        return None
    return best


@dataclass
class TreeNode:
    is_leaf: bool
    weight: float = 0.0
    feature: int = -1
    threshold: float = 0.0
    default_left: bool = True
    left: int = -1
    right: int = -1
    gain: float = 0.0


@dataclass
class DecisionTree:
    """Binary regression tree over feature indices; node 0 is the root.

    Oblivious trees additionally carry level_splits, one
    (feature, threshold, default_left) per depth level.
    """

    nodes: list[TreeNode] = field(default_factory=list)
    level_splits: list[tuple[int, float, bool]] | None = None

    @property
    def n_leaves(self) -> int:
        return sum(1 for n in self.nodes if n.is_leaf)

    def depth(self) -> int:
        def walk(nid, d):
            node = self.nodes[nid]
            if node.is_leaf:
                return d
            return max(walk(node.left, d + 1), walk(node.right, d + 1))
        return walk(0, 0)

    def predict_matrix(self, X: np.ndarray) -> np.ndarray:
        """Leaf weight reached by each row of X (NaN follows default_left)."""
        if self.level_splits is not None:
            # balanced tree: route all rows by bit arithmetic, no partitioning
            pos = np.zeros(len(X), dtype=np.int64)
            for fi, thr, default_left in self.level_splits:
                v = X[:, fi]
                go_left = v <= thr
                if default_left:
                    go_left |= np.isnan(v)
                pos = 2 * pos + (~go_left)
            return self.leaf_weight_vector()[pos]
        out = np.empty(len(X))
        stack = [(0, np.arange(len(X)))]
        while stack:
            nid, idx = stack.pop()
            node = self.nodes[nid]
            if node.is_leaf:
                out[idx] = node.weight
                continue
            v = X[idx, node.feature]
            nan = np.isnan(v)
            go_left = (v <= node.threshold)
            if node.default_left:
                go_left |= nan
            stack.append((node.left, idx[go_left]))
            stack.append((node.right, idx[~go_left]))
        return out

    def leaf_weight_vector(self) -> np.ndarray:
        """Leaf weights in routing order (balanced trees only)."""
        depth = len(self.level_splits)
        first = 2 ** depth - 1
        return np.array([self.nodes[first + p].weight for p in range(2 ** depth)])

    def split_records(self) -> list[tuple[int, float]]:
        """(feature, gain) of every internal node, in node order."""
        return [(n.feature, n.gain) for n in self.nodes if not n.is_leaf]


def _partition(indices: np.ndarray, binned: BinnedDataset, cand: SplitCandidate):
    """Split a node's instances by bin index (missing bin follows default_left)."""
    name = binned.feature_names[cand.feature]
    codes = binned.bins[name][indices]
    if cand.bin_threshold is not None:
        go_left = codes <= cand.bin_threshold
        missing = codes == binned.missing_bin(name)
    else:
        v = binned.source.column(name)[indices]
        missing = np.isnan(v)
        go_left = v <= cand.threshold
    if cand.default_left:
        go_left = go_left | missing
    else:
        go_left = go_left & ~missing
    return indices[go_left], indices[~go_left]


class _Builder:
    """Accumulates TreeNode records with deterministic ids."""

    def __init__(self):
        self.nodes: list[TreeNode] = [TreeNode(is_leaf=True)]

    def make_leaf(self, nid: int, stats: NodeStats, lam: float) -> None:
        n = self.nodes[nid]
        n.is_leaf = True
        n.weight = leaf_weight(stats, lam)

    def make_split(self, nid: int, cand: SplitCandidate, binned: BinnedDataset) -> tuple[int, int]:
        lid = len(self.nodes)
        self.nodes.append(TreeNode(is_leaf=True))
        rid = len(self.nodes)
        self.nodes.append(TreeNode(is_leaf=True))
        n = self.nodes[nid]
        n.is_leaf = False
        n.feature = cand.feature
        n.threshold = cand.threshold
        n.default_left = cand.default_left
        n.left = lid
        n.right = rid
        n.gain = cand.gain
        return lid, rid


def _child_histograms(parent_hist, left_idx, right_idx, binned, g, h, hist_fn):
    """Build the smaller child directly and get the sibling by subtraction."""
    if len(left_idx) <= len(right_idx):
        hl = hist_fn(left_idx, binned, g, h)
        return hl, parent_hist.subtract(hl)
    hr = hist_fn(right_idx, binned, g, h)
    return parent_hist.subtract(hr), hr


def grow_level_wise(indices: np.ndarray, binned: BinnedDataset, g: np.ndarray,
                    h: np.ndarray, config, exact: bool = False,
                    hist_fn=build_histogram) -> DecisionTree:
    """Expand every splittable node of the current depth before descending."""
    lam, gamma = config.lambda_, config.gamma
    mch = config.min_child_hessian
    b = _Builder()
    root_hist = None if exact else hist_fn(indices, binned, g, h)
    frontier = [(0, indices, root_hist)]
    for _ in range(config.max_depth):
        nxt = []
        for nid, idx, hist in frontier:
            stats = node_stats(idx, g, h)
            if exact:
                cand = find_best_split_presorted(idx, binned.source, g, h, lam, gamma,
                                                 mch, binned.feature_names)
            else:
                cand = find_best_split_histogram(hist, stats, binned, lam, gamma, mch)
            if cand is None:
                b.make_leaf(nid, stats, lam)
                continue
            left_idx, right_idx = _partition(idx, binned, cand)
            lid, rid = b.make_split(nid, cand, binned)
            if exact:
                hl = hr = None
            else:
                hl, hr = _child_histograms(hist, left_idx, right_idx, binned, g, h, hist_fn)
            nxt.append((lid, left_idx, hl))
            nxt.append((rid, right_idx, hr))
        frontier = nxt
        if not frontier:
            break
    for nid, idx, _ in frontier:
        b.make_leaf(nid, node_stats(idx, g, h), lam)
    return DecisionTree(b.nodes)


def grow_leaf_wise(indices: np.ndarray, binned: BinnedDataset, g: np.ndarray,
                   h: np.ndarray, config, hist_fn=build_histogram) -> DecisionTree:
    """Always split the leaf with the largest gain next (ties: earliest leaf)."""
    lam, gamma = config.lambda_, config.gamma
    mch = config.min_child_hessian
    max_leaves = config.max_leaves if config.max_leaves else 2 ** config.max_depth
    b = _Builder()
    seq = 0
    heap = []

    def consider(nid, idx, depth, hist):
        nonlocal seq
        stats = node_stats(idx, g, h)
        cand = None
        if depth < config.max_depth:
            cand = find_best_split_histogram(hist, stats, binned, lam, gamma, mch)
        if cand is None:
            b.make_leaf(nid, stats, lam)
            return
        heapq.heappush(heap, (-cand.gain, seq, nid, idx, depth, hist, cand, stats))
        seq += 1

    root_hist = hist_fn(indices, binned, g, h)
    consider(0, indices, 0, root_hist)
    n_leaves = 1
    while heap and n_leaves < max_leaves:
        _, _, nid, idx, depth, hist, cand, stats = heapq.heappop(heap)
        left_idx, right_idx = _partition(idx, binned, cand)
        lid, rid = b.make_split(nid, cand, binned)
        hl, hr = _child_histograms(hist, left_idx, right_idx, binned, g, h, hist_fn)
        consider(lid, left_idx, depth + 1, hl)
        consider(rid, right_idx, depth + 1, hr)
        n_leaves += 1
    while heap:
        _, _, nid, idx, _, _, _, stats = heapq.heappop(heap)
        b.make_leaf(nid, stats, lam)
    return DecisionTree(b.nodes)


def _oblivious_candidates(stacked, leaf_stats, binned, lam, gamma):
    """Total gain across all leaves for every (feature, bin, routing).

    A leaf whose split is degenerate at some threshold (an empty side, or a
    nonpositive denominator) still contributes 0.5 * 0 - gamma there: the same
    formula with the offending squared terms forced to zero. Takes freshly
    stacked (L, m, W) arrays (consumed in place); returns per-routing
    (totals, per_leaf_gains) arrays of shape (m, n_thr) and (L, m, n_thr).
    """
    nb, valid = _feature_bin_meta(binned)
    SG, SH, CN = stacked
    L, m, width = SG.shape
    rows = np.arange(m)
    gm = SG[:, rows, nb].copy()                # (L, m)
    hm = SH[:, rows, nb].copy()
    cm = CN[:, rows, nb].copy()
    SG[:, rows, nb] = 0.0
    SH[:, rows, nb] = 0.0
    CN[:, rows, nb] = 0.0
    GL = np.cumsum(SG, axis=2)[:, :, :-1]      # (L, m, W-1)
    HL = np.cumsum(SH, axis=2)[:, :, :-1]
    CL = np.cumsum(CN, axis=2)[:, :, :-1]
    SG[:, rows, nb] = gm                       # restore; callers keep the stack
    SH[:, rows, nb] = hm
    CN[:, rows, nb] = cm
    pg = np.array([s.sum_g for s in leaf_stats])
    ph = np.array([s.sum_h for s in leaf_stats])
    pc = np.array([s.count for s in leaf_stats], dtype=np.float64)
    dpar = ph + lam
    with np.errstate(divide="ignore", invalid="ignore"):
        parent_term = np.where((dpar > 0) & (pc > 0), pg * pg / dpar, 0.0)  # (L,)
    GR = (pg[:, None] - gm)[:, :, None] - GL
    HR = (ph[:, None] - hm)[:, :, None] - HL
    CR = (pc[:, None] - cm)[:, :, None] - CL
    out = []
    for missing_left in (True, False):
        if missing_left:
            gl, hl, cl = GL + gm[:, :, None], HL + hm[:, :, None], CL + cm[:, :, None]
            gr, hr, cr = GR, HR, CR
        else:
            gl, hl, cl = GL, HL, CL
            gr, hr, cr = GR + gm[:, :, None], HR + hm[:, :, None], CR + cm[:, :, None]
        dl = hl + lam
        dr = hr + lam
        with np.errstate(divide="ignore", invalid="ignore"):
            tl = np.where((cl > 0) & (dl > 0), gl * gl / dl, 0.0)
            tr = np.where((cr > 0) & (dr > 0), gr * gr / dr, 0.0)
        gains = 0.5 * (tl + tr - parent_term[:, None, None]) - gamma
        gains = np.where(valid[None, :, :], gains, 0.0)
        totals = gains.sum(axis=0)
        totals = np.where(valid, totals, -np.inf)
        out.append((totals, gains))
    return out


def _level_histograms(hist_fn, indices, leaf_pos, n_leaves, binned, g, h):
    """Stacked (L, m, W) histogram arrays for every leaf of one level."""
    if hasattr(hist_fn, "level_histograms"):
        return hist_fn.level_histograms(indices, leaf_pos, n_leaves, binned, g, h)
    hists = [hist_fn(indices[leaf_pos == p], binned, g, h) for p in range(n_leaves)]
    return (np.stack([hs.sum_g for hs in hists]),
            np.stack([hs.sum_h for hs in hists]),
            np.stack([hs.count for hs in hists]).astype(np.float64))


def grow_oblivious(indices: np.ndarray, binned: BinnedDataset, g: np.ndarray,
                   h: np.ndarray, config, hist_fn=build_histogram) -> DecisionTree:
    """One shared (feature, threshold) per level, chosen to maximize the sum of
    split gains over all current leaves; every leaf is split by it, so the tree
    has exactly 2^depth leaves (empty leaves get weight 0)."""
    lam, gamma = config.lambda_, config.gamma
    leaf_pos = np.zeros(len(indices), dtype=np.int64)
    n_leaves = 1
    gi = g[indices]
    hi = h[indices]
    level_splits: list[tuple[int, float, bool]] = []
    level_gains: list[list[float]] = []
    stacked = _level_histograms(hist_fn, indices, leaf_pos, n_leaves, binned, g, h)
    for _ in range(config.max_depth):
        sum_g = np.bincount(leaf_pos, weights=gi, minlength=n_leaves)
        sum_h = np.bincount(leaf_pos, weights=hi, minlength=n_leaves)
        counts = np.bincount(leaf_pos, minlength=n_leaves)
        leaf_stats = [NodeStats(float(sum_g[p]), float(sum_h[p]), int(counts[p]))
                      for p in range(n_leaves)]
        best = None  # (total, fi, pos, missing_left, per_leaf_gains)
        scans = _oblivious_candidates(stacked, leaf_stats, binned, lam, gamma)
        for missing_left, (totals, gains) in zip((True, False), scans):
            flat = int(np.argmax(totals))  # row-major: lowest feature, lowest bin
            fi, pos = divmod(flat, totals.shape[1])
            total = float(totals[fi, pos])
            if not np.isfinite(total):
                continue
            if best is None or total > best[0]:
                best = (total, fi, pos, missing_left,
                        [float(x) for x in gains[:, fi, pos]])
        if best is None or best[0] <= 0.0:
            break
        total, fi, pos, missing_left, gains_here = best
        name = binned.feature_names[fi]
        thr = float(binned.boundaries[name][pos])
        codes = binned.bins[name][indices]
        go_left = codes <= pos
        is_missing = codes == binned.missing_bin(name)
        if missing_left:
            go_left = go_left | is_missing
        else:
            go_left = go_left & ~is_missing
        new_leaf_pos = 2 * leaf_pos + (~go_left).astype(np.int64)
        level_splits.append((fi, thr, missing_left))
        level_gains.append(gains_here)
        if len(level_splits) == config.max_depth:
            leaf_pos = new_leaf_pos
            n_leaves *= 2
            break
        # build only the globally smaller side; siblings come by subtraction
        n_right = int(np.count_nonzero(~go_left))
        build_right = n_right * 2 <= len(indices)
        side = ~go_left if build_right else go_left
        built = _level_histograms(hist_fn, indices[side], leaf_pos[side], n_leaves,
                                  binned, g, h)
        sibling = tuple(parent - b for parent, b in zip(stacked, built))
        nxt = tuple(np.empty((2 * n_leaves,) + arr.shape[1:]) for arr in built)
        for out, b, s in zip(nxt, built, sibling):
            if build_right:
                out[1::2] = b
                out[::2] = s
            else:
                out[::2] = b
                out[1::2] = s
        stacked = nxt
        leaf_pos = new_leaf_pos
        n_leaves *= 2

    tree = _assemble_oblivious(indices, leaf_pos, n_leaves, level_splits, level_gains,
                               gi, hi, lam)
    tree._train_leaf_pos = leaf_pos  # lets the boosting loop skip re-routing
    return tree


def _assemble_oblivious(indices, leaf_pos, n_leaves, level_splits, level_gains,
                        gi, hi, lam) -> DecisionTree:
    """Heap-indexed full binary tree: node (level l, position p) has id 2^l-1+p.

    gi/hi are the gradient values of the node's instances, aligned with
    leaf_pos; empty leaves get weight 0.
    """
    depth = len(level_splits)
    sum_g = np.bincount(leaf_pos, weights=gi, minlength=n_leaves)
    sum_h = np.bincount(leaf_pos, weights=hi, minlength=n_leaves)
    counts = np.bincount(leaf_pos, minlength=n_leaves)
    denom = sum_h + lam
    occupied = counts > 0
    if np.any(occupied & (denom <= 0.0)):
        raise ValueError("nonpositive leaf denominator")
    with np.errstate(divide="ignore", invalid="ignore"):
        weights = np.where(occupied, -sum_g / np.where(denom > 0, denom, 1.0), 0.0)
    nodes: list[TreeNode] = []
    for level in range(depth):
        fi, thr, missing_left = level_splits[level]
        for p in range(2 ** level):
            left = 2 ** (level + 1) - 1 + 2 * p
            nodes.append(TreeNode(is_leaf=False, feature=fi, threshold=thr,
                                  default_left=missing_left, left=left, right=left + 1,
                                  gain=level_gains[level][p]))
    for p in range(n_leaves):
        nodes.append(TreeNode(is_leaf=True, weight=float(weights[p])))
    return DecisionTree(nodes, level_splits=[(f, t, d) for f, t, d in level_splits])
