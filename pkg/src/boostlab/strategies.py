"""Instance sampling (GOSS), exclusive feature bundling (EFB), and the
permutation-driven out-of-prefix gradient schedule used by oblivious training.

GOSS keeps every large-|gradient| instance, samples the remainder, and
amplifies the sampled part by (1-a)/b. EFB merges features that are (almost)
never nonzero together; here bundling accelerates histogram accumulation while
per-feature histograms are extracted back exactly, so conflict-free bundling
changes nothing about the trained trees. The ordered schedule assigns every
instance a prediction from a model that never saw its block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import BinnedDataset, Dataset
from .growers import Histogram, _hist_width


@dataclass
class GossSample:
    """Kept instances for one boosting iteration.

    top_set holds the ceil(a*n) largest-|g| instances; sampled_set is a
    uniform draw of round(b * remainder) others, reweighted by amplification.
    """

    a: float
    b: float
    top_set: np.ndarray
    sampled_set: np.ndarray
    amplification: float

    @property
    def kept(self) -> np.ndarray:
        return np.sort(np.concatenate([self.top_set, self.sampled_set])).astype(np.int64)

    def weights(self, n: int) -> np.ndarray:
        w = np.zeros(n)
        w[self.top_set] = 1.0
        w[self.sampled_set] = self.amplification
        return w


def goss_select(g: np.ndarray, a: float, b: float, seed) -> GossSample:
    """Pick the top a*100% instances by |g| plus a b-rate sample of the rest."""
    if not 0.0 < a <= 1.0:
        raise ValueError(f"a must be in (0, 1], got {a}")
    if not 0.0 <= b <= 1.0:
        raise ValueError(f"b must be in [0, 1], got {b}")
    if a < 1.0 and b == 0.0:
        raise ValueError("a < 1 requires b > 0")
    n = len(g)
    k = int(math.ceil(a * n))
    order = np.argsort(-np.abs(g), kind="stable")  # ties -> lower index first
    top = np.sort(order[:k])
    rest = np.sort(order[k:])
    n_b = int(math.floor(b * len(rest) + 0.5))
    if a < 1.0 and n_b == 0:
        raise ValueError("sample of small-gradient instances is empty; amplification undefined")
    if n_b:
        rng = np.random.default_rng(seed)
        sampled = np.sort(rng.choice(rest, size=n_b, replace=False))
    else:
        sampled = np.empty(0, dtype=np.int64)
    amplification = (1.0 - a) / b if b > 0 else 0.0
    return GossSample(a, b, top.astype(np.int64), sampled.astype(np.int64), amplification)


def goss_variance_gain(sample: GossSample, g: np.ndarray, feature: int, d: float,
                       binned: BinnedDataset) -> float:
    """Estimated variance gain of splitting `feature` at threshold d.

    Uses the amplified small-gradient sums and normalizes each side by its
    instance count over the kept set, with a leading 1/n over the full data.
    """
    name = binned.feature_names[feature]
    values = binned.source.column(name)
    n = len(g)
    a_left = values[sample.top_set] <= d
    b_left = values[sample.sampled_set] <= d
    n_l = int(a_left.sum() + b_left.sum())
    n_r = len(sample.top_set) + len(sample.sampled_set) - n_l
    if n_l == 0 or n_r == 0:
        raise ValueError(f"threshold {d} leaves an empty side; candidate skipped")
    amp = sample.amplification
    g_top = g[sample.top_set]
    g_smp = g[sample.sampled_set]
    left = g_top[a_left].sum() + amp * g_smp[b_left].sum()
    right = g_top[~a_left].sum() + amp * g_smp[~b_left].sum()
    return float((left * left / n_l + right * right / n_r) / n)


@dataclass
class FeatureBundle:
    """Features merged into one encoded column with disjoint value ranges.

    Member k's nonzero values occupy (offsets[k], offsets[k] + widths[k]];
    the encoded value 0 is reserved for rows where every member is zero.
    """

    members: list[int]
    offsets: list[float]
    widths: list[float]


def _nonzero_masks(data) -> tuple[list[str], Dataset, list[np.ndarray]]:
    if isinstance(data, BinnedDataset):
        source, names = data.source, data.feature_names
    else:
        source, names = data, data.numeric_feature_names()
    masks = []
    for name in names:
        v = source.column(name)
        masks.append(np.isnan(v) | (v != 0.0))
    return names, source, masks


def efb_bundle(data, max_conflicts: int = 0) -> list[FeatureBundle]:
    """Greedy bundling of (nearly) mutually exclusive features.

    Features are visited by descending nonzero count and join the first bundle
    whose running conflict total stays within max_conflicts. Features with
    missing or negative values never share a bundle (the offset encoding needs
    nonnegative values), so they end up in singletons.
    """
    if max_conflicts < 0:
        raise ValueError("max_conflicts must be >= 0")
    names, source, masks = _nonzero_masks(data)
    bundleable = []
    for fi, name in enumerate(names):
        v = source.column(name)
        bundleable.append(not np.isnan(v).any() and not (v < 0).any())
    counts = np.array([m.sum() for m in masks])
    order = np.argsort(-counts, kind="stable")
    groups: list[dict] = []  # members, member masks, conflict total, open flag
    for fi in order:
        fi = int(fi)
        placed = False
        if bundleable[fi]:
            for grp in groups:
                if not grp["open"]:
                    continue
                added = sum(int((masks[fi] & m).sum()) for m in grp["masks"])
                if grp["conflicts"] + added <= max_conflicts:
                    grp["members"].append(fi)
                    grp["masks"].append(masks[fi])
                    grp["conflicts"] += added
                    placed = True
                    break
        if not placed:
            groups.append({"members": [fi], "masks": [masks[fi]],
                           "conflicts": 0, "open": bundleable[fi]})
    out = []
    for grp in groups:
        offsets, widths = [], []
        off = 0.0
        for fi in grp["members"]:
            v = source.column(names[fi])
            finite = v[~np.isnan(v)]
            width = float(finite.max()) if finite.size else 0.0
            width = max(width, 0.0)
            offsets.append(off)
            widths.append(width)
            off += width
        out.append(FeatureBundle(grp["members"], offsets, widths))
    return out


def efb_encode(ds: Dataset, bundles: list[FeatureBundle]) -> Dataset:
    """Materialize bundles as shifted-value columns (singletons pass through).

    On a row where several members are nonzero (possible when max_conflicts>0)
    the first member in bundle order wins.
    """
    from .dataset import ColumnSchema, NUMERIC

    names = ds.numeric_feature_names()
    member_cols = {names[fi] for bd in bundles for fi in bd.members if len(bd.members) > 1}
    schema = [c for c in ds.schema if c.name not in member_cols]
    cols = {c.name: ds.columns[c.name] for c in schema}
    labels = {n: t for n, t in ds.labels.items() if n not in member_cols}
    for bd in bundles:
        if len(bd.members) < 2:
            continue
        name = "+".join(names[fi] for fi in bd.members)
        enc = np.zeros(ds.n_rows)
        for k in reversed(range(len(bd.members))):  # earlier members overwrite
            v = ds.column(names[bd.members[k]])
            nz = v != 0.0
            enc[nz] = bd.offsets[k] + v[nz]
        schema.append(ColumnSchema(name, NUMERIC))
        cols[name] = enc
    return Dataset(schema, cols, labels)


def efb_decode(value: float, bundle: FeatureBundle) -> tuple[int | None, float]:
    """Invert the offset encoding: which member held the value, and what it was.

    The reserved 0 decodes to (None, 0.0): every member was zero.
    """
    if value == 0.0:
        return None, 0.0
    for fi, off, width in zip(bundle.members, bundle.offsets, bundle.widths):
        if width > 0.0 and off < value <= off + width:
            return fi, value - off
    raise ValueError(f"encoded value {value} lies outside every member range")


class BundledHistograms:
    """Histogram accumulation over bundle bins with exact per-feature extraction.

    Each multi-member bundle gets one code array: bin 0 collects rows where
    every member sits in its own zero bin, the rest are the members' nonzero
    bins laid out consecutively. A node histogram is accumulated per bundle
    and unpacked back to per-feature histograms, recovering each member's zero
    bin as node total minus its nonzero bins. For conflict-free bundles this
    reproduces direct per-feature accumulation exactly.

    Accumulation units (singleton features and bundles) share one flat bin
    space; small nodes fold all units into a single bincount.
    """

    FLAT_LIMIT = 32768

    def __init__(self, binned: BinnedDataset, bundles: list[FeatureBundle]):
        self.binned = binned
        self.singles = []  # (fi, name, offset, nb_with_missing)
        self.plans = []    # (offset, bwidth, segments); segment = (fi, default_bin, nb, base)
        self.unit_spans = []  # (offset, width) per accumulation unit
        columns = []
        offset = 0
        for bd in bundles:
            if len(bd.members) < 2:
                for fi in bd.members:
                    name = binned.feature_names[fi]
                    nb = binned.n_bins(name) + 1
                    self.singles.append((fi, name, offset, nb))
                    self.unit_spans.append((offset, nb))
                    columns.append(binned.bins[name].astype(np.int64) + offset)
                    offset += nb
                continue
            segments = []
            bwidth = 1
            codes = np.zeros(binned.n_rows, dtype=np.int64)
            unassigned = np.ones(binned.n_rows, dtype=bool)
            for fi in bd.members:
                name = binned.feature_names[fi]
                nb = binned.n_bins(name)
                default_bin = int(np.searchsorted(binned.boundaries[name], 0.0, side="left"))
                default_bin = min(default_bin, nb - 1)
                fc = binned.bins[name].astype(np.int64)
                local = np.where(fc > default_bin, fc - 1, fc)
                take = unassigned & (fc != default_bin)
                codes[take] = bwidth + local[take]
                unassigned &= ~take
                segments.append((fi, default_bin, nb, bwidth))
                bwidth += nb - 1
            self.plans.append((offset, bwidth, segments))
            self.unit_spans.append((offset, bwidth))
            columns.append(codes + offset)
            offset += bwidth
        self.total_width = offset
        self.n_units = len(columns)
        self.n_rows = binned.n_rows
        self.unit_codes = [np.ascontiguousarray(c) for c in columns]
        self.flat = np.column_stack(columns) if columns else np.zeros((binned.n_rows, 0),
                                                                      dtype=np.int64)

    def _accumulate(self, indices, g, h):
        gi = g[indices]
        hi = h[indices]
        if len(indices) * self.n_units <= self.FLAT_LIMIT:
            fc = self.flat[indices].ravel()
            gr = np.repeat(gi, self.n_units)
            hr = np.repeat(hi, self.n_units)
            acc_g = np.bincount(fc, weights=gr, minlength=self.total_width)
            acc_h = np.bincount(fc, weights=hr, minlength=self.total_width)
            acc_c = np.bincount(fc, minlength=self.total_width)
            return acc_g, acc_h, acc_c
        acc_g = np.zeros(self.total_width)
        acc_h = np.zeros(self.total_width)
        acc_c = np.zeros(self.total_width, dtype=np.int64)
        for u, (offset, uw) in enumerate(self.unit_spans):
            codes = self.flat[indices, u] - offset
            acc_g[offset:offset + uw] = np.bincount(codes, weights=gi, minlength=uw)
            acc_h[offset:offset + uw] = np.bincount(codes, weights=hi, minlength=uw)
            acc_c[offset:offset + uw] = np.bincount(codes, minlength=uw)
        return acc_g, acc_h, acc_c

    def level_histograms(self, indices, leaf_pos, n_leaves, binned, g, h):
        """Stacked (n_leaves, m, width) extracted histograms for one level."""
        full = len(indices) == self.n_rows  # growers keep indices sorted unique
        gi = g if full else g[indices]
        hi = h if full else h[indices]
        tw = self.total_width
        base = leaf_pos.astype(np.int64) * tw
        size = n_leaves * tw
        if len(indices) * self.n_units <= self.FLAT_LIMIT:
            fc = (self.flat[indices] + base[:, None]).ravel()
            acc_g = np.bincount(fc, weights=np.repeat(gi, self.n_units), minlength=size)
            acc_h = np.bincount(fc, weights=np.repeat(hi, self.n_units), minlength=size)
            acc_c = np.bincount(fc, minlength=size).astype(np.float64)
        else:
            acc_g = np.zeros(size)
            acc_h = np.zeros(size)
            acc_c = np.zeros(size)
            for u in range(self.n_units):
                uc = self.unit_codes[u] if full else self.unit_codes[u][indices]
                codes = base + uc
                acc_g += np.bincount(codes, weights=gi, minlength=size)
                acc_h += np.bincount(codes, weights=hi, minlength=size)
                acc_c += np.bincount(codes, minlength=size)
        acc_g = acc_g.reshape(n_leaves, tw)
        acc_h = acc_h.reshape(n_leaves, tw)
        acc_c = acc_c.reshape(n_leaves, tw)
        tot_g = np.bincount(leaf_pos, weights=gi, minlength=n_leaves)
        tot_h = np.bincount(leaf_pos, weights=hi, minlength=n_leaves)
        tot_c = np.bincount(leaf_pos, minlength=n_leaves).astype(np.float64)
        width = _hist_width(self.binned)
        m = len(self.binned.feature_names)
        sg = np.zeros((n_leaves, m, width))
        sh = np.zeros((n_leaves, m, width))
        cnt = np.zeros((n_leaves, m, width))
        self._extract_into(sg, sh, cnt, acc_g, acc_h, acc_c, tot_g, tot_h, tot_c)
        return sg, sh, cnt

    def __call__(self, indices, binned, g, h) -> Histogram:
        acc_g, acc_h, acc_c = self._accumulate(indices, g, h)
        total_g = float(g[indices].sum())
        total_h = float(h[indices].sum())
        total_c = len(indices)
        width = _hist_width(self.binned)
        m = len(self.binned.feature_names)
        sg = np.zeros((1, m, width))
        sh = np.zeros((1, m, width))
        cnt = np.zeros((1, m, width))
        self._extract_into(sg, sh, cnt, acc_g[None, :], acc_h[None, :],
                           np.asarray(acc_c, dtype=np.float64)[None, :],
                           np.array([total_g]), np.array([total_h]),
                           np.array([float(total_c)]))
        return Histogram(sg[0], sh[0], cnt[0].astype(np.int64))

    def _extract_into(self, sg, sh, cnt, acc_g, acc_h, acc_c, tot_g, tot_h, tot_c):
        """Unpack unit accumulators (L, total_width) into per-feature layout.

        Member zero bins are recovered by subtraction from the leaf totals;
        for conflict-free bundles this equals direct accumulation.
        """
        for fi, name, offset, nb in self.singles:
            sg[:, fi, :nb] = acc_g[:, offset:offset + nb]
            sh[:, fi, :nb] = acc_h[:, offset:offset + nb]
            cnt[:, fi, :nb] = acc_c[:, offset:offset + nb]
        for offset, bwidth, segments in self.plans:
            bg = acc_g[:, offset:offset + bwidth]
            bh = acc_h[:, offset:offset + bwidth]
            bc = acc_c[:, offset:offset + bwidth]
            for fi, default_bin, nb, base in segments:
                seg_g = bg[:, base:base + nb - 1]
                seg_h = bh[:, base:base + nb - 1]
                seg_c = bc[:, base:base + nb - 1]
                sg[:, fi, :default_bin] = seg_g[:, :default_bin]
                sg[:, fi, default_bin + 1:nb] = seg_g[:, default_bin:]
                sh[:, fi, :default_bin] = seg_h[:, :default_bin]
                sh[:, fi, default_bin + 1:nb] = seg_h[:, default_bin:]
                cnt[:, fi, :default_bin] = seg_c[:, :default_bin]
                cnt[:, fi, default_bin + 1:nb] = seg_c[:, default_bin:]
                sg[:, fi, default_bin] = tot_g - seg_g.sum(axis=1)
                sh[:, fi, default_bin] = tot_h - seg_h.sum(axis=1)
                cnt[:, fi, default_bin] = tot_c - seg_c.sum(axis=1)


@dataclass
class OrderedSchedule:
    """Per-permutation block assignment for out-of-prefix gradients."""

    n: int
    n_blocks: int
    permutations: list[np.ndarray]
    block_of: list[np.ndarray]  # per permutation, instance -> block index

    def prefix_indices(self, perm: int, block: int) -> np.ndarray:
        """Instances in blocks strictly before `block` of one permutation."""
        return np.flatnonzero(self.block_of[perm] < block)


def ordered_schedule(n: int, n_permutations: int, n_blocks: int, seed) -> OrderedSchedule:
    """Partition seeded permutations of [0, n) into contiguous blocks."""
    if n_blocks < 1:
        raise ValueError("n_blocks must be >= 1")
    if n_blocks > n:
        raise ValueError(f"n_blocks={n_blocks} exceeds n={n}")
    if n_permutations < 1:
        raise ValueError("n_permutations must be >= 1")
    rng = np.random.default_rng(seed)
    perms, blocks = [], []
    for _ in range(n_permutations):
        sigma = rng.permutation(n)
        block_of = np.empty(n, dtype=np.int64)
        for j, chunk in enumerate(np.array_split(np.arange(n), n_blocks)):
            block_of[sigma[chunk]] = j
        perms.append(sigma)
        blocks.append(block_of)
    return OrderedSchedule(n, n_blocks, perms, blocks)


def ordered_gradients(schedule: OrderedSchedule, gradient_fn, targets: np.ndarray,
                      block_preds: list[np.ndarray]):
    """Gradients evaluated at each instance's own prefix-model prediction.

    block_preds[p] is (n_blocks, n): row j holds the prefix model trained on
    blocks < j of permutation p, evaluated on every instance (row 0 is the
    base score). Returns the permutation-averaged (g, h) plus the per-
    permutation pairs used to advance each permutation's prefix models.
    """
    n = schedule.n
    rows = np.arange(n)
    per_perm = []
    for p in range(len(schedule.permutations)):
        preds = block_preds[p][schedule.block_of[p], rows]
        per_perm.append(gradient_fn(targets, preds))
    g = np.mean([gp for gp, _ in per_perm], axis=0)
    h = np.mean([hp for _, hp in per_perm], axis=0)
    return g, h, per_perm
