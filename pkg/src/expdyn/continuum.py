"""Pullback curves, glued preimage sets, and the convergence experiments.

Each curve is the half-plane pullback of the previous one as a polyline:
gamma_0 is t |-> a - e^t over an adaptive grid, gamma_1 the exact line
t + i*sigma*pi, and gamma_{k+1} starts from the pullback of gamma_k's
samples and refines by inserting pullbacks of parameter midpoints, the
midpoint value read off gamma_k's polyline.  Iterating on the sampled set
rather than on a fixed global parametrization matters: the window-scale
structure of a deep curve corresponds to astronomically large parameters of
the first curve (forward orbits grow as exponential towers), which no float
grid can reach, while the previous curve's polyline carries that structure
directly.

Tails: every curve tends to infinity in both directions, but the pullback
of a bounded sample set is bounded, so from generation 3 on the raw pulled
tails stall at a finite point while the true curve crawls on along the
positive real axis at heights far below float resolution.  The builder
therefore extends stalled tails explicitly along that asymptote (heights
decaying like e^-x) until they are chordally within delta of infinity; ends
that still stall are reported honestly in the truncation field.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import ExpMap, _sign, inv_halfplane_values, inv_strip_values
from .numerics import (
    INFINITY,
    TWO_PI,
    PointSet,
    Window,
    chordal_dist_values,
    chordal_to_infinity,
    eps_components,
    hausdorff_discrete,
)

# parameter ladder: geometric from LADDER_T_MIN to LADDER_T_CAP on both sides
# of 0.  The cap keeps ln|t| below the overflow ledge with margin.
LADDER_T_CAP = 1e299
LADDER_RATIO = 1.05
REFINEMENT_BUDGET = 10_000_000

# segments near the window are refined to euclidean delta as well (the
# connectivity probe is euclidean); this is how far "near" reaches.
WINDOW_PAD = 1.0

# gamma_0 evaluation must not overflow exp; its infinity tail is cut long
# before this anyway.
_GAMMA0_T_MAX = 700.0


class RefinementBudgetError(RuntimeError):
    """Raised when a curve would need more than REFINEMENT_BUDGET samples;
    carries the partial curve built so far."""

    def __init__(self, message, partial):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class SampledCurve:
    """One curve gamma_k^sigma as ordered (param, value) samples.

    resolution is the guaranteed bound on consecutive chordal gaps;
    truncation records the chordal distance of the two endpoint samples to
    infinity (small when the tail genuinely reached the cut rule, large when
    the parametrization saturated first).
    """

    params: np.ndarray
    values: np.ndarray
    generation: int
    sign: int
    resolution: float
    truncation: tuple

    def __post_init__(self):
        self.params.setflags(write=False)
        self.values.setflags(write=False)

    def __len__(self) -> int:
        return self.params.size

    @property
    def samples(self):
        return list(zip(self.params.tolist(), self.values.tolist()))

    def point_set(self, with_infinity: bool = False) -> PointSet:
        values = self.values
        inf_mask = np.zeros(values.size, dtype=bool)
        if with_infinity:
            values = np.concatenate([values, [0j]])
            inf_mask = np.concatenate([inf_mask, [True]])
        return PointSet.from_values(values, inf_mask)

    def write_csv_rows(self, writer) -> None:
        sign = "+" if self.sign > 0 else "-"
        for t, z in zip(self.params, self.values):
            writer.writerow([self.generation, sign, repr(float(t)),
                             repr(float(z.real)), repr(float(z.imag))])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["generation", "sign", "param", "re", "im"])
            self.write_csv_rows(w)


@dataclass(frozen=True)
class ContinuumApprox:
    """Curves gamma_0 ... gamma_K of one sign: the sampled stand-in for X^sigma."""

    curves: list
    sign: int
    window: Window
    delta: float

    @property
    def K(self) -> int:
        return len(self.curves) - 1

    def union_values(self) -> np.ndarray:
        return np.concatenate([c.values for c in self.curves])

    def union_point_set(self, with_infinity: bool = False) -> PointSet:
        values = self.union_values()
        inf_mask = np.zeros(values.size, dtype=bool)
        if with_infinity:
            values = np.concatenate([values, [0j]])
            inf_mask = np.concatenate([inf_mask, [True]])
        return PointSet.from_values(values, inf_mask)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["generation", "sign", "param", "re", "im"])
            for c in self.curves:
                c.write_csv_rows(w)


def base_ladder(delta: float) -> np.ndarray:
    """The shared parameter grid: 0 and +-geometric from delta/4 to the cap."""
    t0 = delta / 4.0
    n = int(math.ceil(math.log(LADDER_T_CAP / t0) / math.log(LADDER_RATIO)))
    pos = t0 * LADDER_RATIO ** np.arange(n + 1)
    pos[-1] = LADDER_T_CAP
    return np.concatenate([-pos[::-1], [0.0], pos])


def _gamma0_values(f: ExpMap, t: np.ndarray) -> np.ndarray:
    return (f.a - np.exp(t)).astype(np.complex128)


def _nudged_pullback(f: ExpMap, sigma: int, w: np.ndarray) -> np.ndarray:
    bad = w == f.a
    if bad.any():
        # a float fluke put a point exactly on the asymptotic value; nudge
        # by one ulp rather than abort the curve
        w = np.where(bad, w + np.spacing(abs(f.a)), w)
    return inv_halfplane_values(f, sigma, w)


def _polyline(params: np.ndarray, values: np.ndarray):
    """Linear interpolant through the samples: the curve as the numerics
    know it.  Pullback evaluators read parameter midpoints off this."""
    re = np.ascontiguousarray(values.real)
    im = np.ascontiguousarray(values.imag)

    def at(t):
        return np.interp(t, params, re) + 1j * np.interp(t, params, im)

    return at


def _pullback_evaluator(f: ExpMap, sigma: int, prev_params: np.ndarray,
                        prev_values: np.ndarray):
    interp = _polyline(prev_params, prev_values)

    def evaluate(t):
        return _nudged_pullback(f, sigma, interp(t))

    return evaluate


# an end counts as stalled on an axis or line crawl when its asymptote
# offset is below this many deltas (offsets decay like e^-x, so they are
# tiny long before any end can stall)
_CRAWL_HEIGHT_FACTOR = 10.0


def _axis_ladder(x0: float, x_max: float, delta: float,
                 pad_x1: float) -> np.ndarray:
    """Strictly increasing abscissas from x0 (exclusive) to x_max with
    consecutive chordal gaps below 0.9*delta, euclidean near the window."""
    xs = []
    cur = x0
    while cur < x_max:
        step = 0.45 * delta * (1.0 + cur * cur)
        if cur <= pad_x1:
            step = min(step, 0.9 * delta)
        cur = min(cur + step, x_max)
        xs.append(cur)
    return np.asarray(xs)


# float-invisible structure (asymptote offsets far below 1e-300) is
# materialized out to this abscissa.  Pullbacks of a continuation reach ln
# of it, and matching hands over from those hugs to the axis crawl well
# inside |re| = 50, so nothing past the cut is needed at sane resolutions.
_ASYMPTOTE_REACH = math.exp(50.0)

# a hairpin whose turn is sharper than this many radians between adjacent
# samples is an unresolved crossing, not a sampled turn
_DIVE_IM_JUMP = 0.5 * math.pi

_DIVE_RE_START = -8.0


def _dive_flank(x0: float, delta: float) -> np.ndarray:
    """Decreasing real parts from -x0 down to -_ASYMPTOTE_REACH, geometric
    with a ratio cap so linear interpolation along the flank stays below
    delta."""
    xs = []
    cur = x0
    while cur < _ASYMPTOTE_REACH:
        cur = min(cur * (1.0 + min(0.12, 0.45 * delta * cur)), _ASYMPTOTE_REACH)
        xs.append(cur)
    return np.asarray(xs)


def _extend_dives(f: ExpMap, params: np.ndarray, values: np.ndarray,
                  delta: float, sigma: int) -> tuple:
    """Continue unresolved near-a dives along their asymptotes.

    Where the previous curve crosses the real axis near a at a height below
    float resolution, the pullback dives toward -infinity along a hairpin:
    one flank hugs the line im = sigma*pi, the other hugs gamma_0, and the
    turn happens at ln of the crossing height.  Refinement resolves genuine
    (representable) turns, but a float-invisible crossing leaves a segment
    that jumps across the strip at the refinement's stopping depth.  The
    true hairpin continues far deeper, and its flanks seed the next
    generation's hugs of the line and of the earlier curves, so cutting it
    short starves every later generation.  This splices the continuation in:
    down the pi-side flank, around a turn at depth _ASYMPTOTE_REACH, and back up
    the axis-side flank, with heights following the 1/|x| asymptote matched
    to the sampled endpoints.
    """
    re = values.real
    im = values.imag
    deep = (re[:-1] <= _DIVE_RE_START) & (re[1:] <= _DIVE_RE_START)
    jump = np.abs(im[:-1] - im[1:]) >= _DIVE_IM_JUMP
    hits = np.flatnonzero(deep & jump)
    if not hits.size:
        return params, values
    inserts = []
    for i in hits:
        vl, vr = complex(values[i]), complex(values[i + 1])
        pi_first = abs(vl.imag) > abs(vr.imag)
        v_pi, v_ax = (vl, vr) if pi_first else (vr, vl)
        c_pi = (math.pi - abs(v_pi.imag)) * abs(v_pi.real)
        c_ax = abs(v_ax.imag) * abs(v_ax.real)
        xs_down = _dive_flank(abs(v_pi.real), delta)
        xs_up = _dive_flank(abs(v_ax.real), delta)
        flank_pi = -xs_down + 1j * (sigma * (math.pi - c_pi / xs_down))
        flank_ax = -xs_up[::-1] + 1j * (sigma * (c_ax / xs_up[::-1]))
        turn = -_ASYMPTOTE_REACH + 1j * (sigma * math.pi * np.array([0.75, 0.5, 0.25]))
        block = np.concatenate([flank_pi, turn, flank_ax])
        if not pi_first:
            block = block[::-1]
        tl, tr = float(params[i]), float(params[i + 1])
        ts = tl + (tr - tl) * (np.arange(1, block.size + 1) / (block.size + 1.0))
        if not (ts[0] > tl and ts[-1] < tr and np.all(np.diff(ts) > 0)):
            continue  # no parameter room; leave the hairpin unresolved
        inserts.append((i, ts, block))
    if not inserts:
        return params, values
    out_p, out_v, pos = [], [], 0
    for i, ts, block in inserts:
        out_p.append(params[pos:i + 1])
        out_v.append(values[pos:i + 1])
        out_p.append(ts)
        out_v.append(block)
        pos = i + 1
    out_p.append(params[pos:])
    out_v.append(values[pos:])
    return np.concatenate(out_p), np.concatenate(out_v)


def _extend_tails(f: ExpMap, params: np.ndarray, values: np.ndarray,
                  delta: float, window: Window) -> tuple:
    """Continue stalled ends along their asymptote out to _ASYMPTOTE_REACH.

    The pullback of a bounded sample set is bounded, so a tail whose true
    continuation crawls rightward along the real axis (heights ~ e^-x) or
    along the line im = +-pi (offsets ~ e^-x) stops at ln of the previous
    curve's extent.  The appended samples follow the asymptote exactly.
    As output they are nearly redundant (the end is chordally close to
    infinity long before the cut), but as pullback source they are load
    bearing: a strand of the next curve at re <= X needs values out to e^X
    here, and starving the tail starves every later generation.  Ends that
    stall anywhere else are left alone and stay visible in the truncation
    field.
    """
    pad = window.padded(WINDOW_PAD)

    def asymptote(v_end: complex):
        """(offset, line_sign) of the crawl this end rides, or None."""
        if not (f.a + 1.0 < v_end.real < _ASYMPTOTE_REACH):
            return None
        if abs(v_end.imag) <= _CRAWL_HEIGHT_FACTOR * delta:
            return v_end.imag, 0
        off = math.pi - abs(v_end.imag)
        if 0.0 <= off <= _CRAWL_HEIGHT_FACTOR * delta:
            return off, int(math.copysign(1.0, v_end.imag))
        return None

    def continuation(v_end: complex, off: float, line: int) -> np.ndarray:
        xs = _axis_ladder(v_end.real, _ASYMPTOTE_REACH, delta, pad.x1)
        decay = off * np.exp(v_end.real - xs)
        if line == 0:
            return xs + 1j * decay
        return xs + 1j * (line * (math.pi - decay))

    out_p, out_v = params, values
    kind = asymptote(complex(out_v[-1]))
    if kind is not None:
        zs = continuation(complex(out_v[-1]), *kind)
        if zs.size:
            t_end = float(out_p[-1])
            spacing = 1.0 + abs(t_end) * 2.0 ** -20
            ts = t_end + spacing * np.arange(1, zs.size + 1)
            out_p = np.concatenate([out_p, ts])
            out_v = np.concatenate([out_v, zs])
    kind = asymptote(complex(out_v[0]))
    if kind is not None:
        # the left tail also crawls rightward; parameters keep decreasing
        zs = continuation(complex(out_v[0]), *kind)
        if zs.size:
            t_end = float(out_p[0])
            spacing = 1.0 + abs(t_end) * 2.0 ** -20
            ts = t_end - spacing * np.arange(1, zs.size + 1)
            out_p = np.concatenate([ts[::-1], out_p])
            out_v = np.concatenate([zs[::-1], out_v])
    return out_p, out_v


def _needs_split(vl: np.ndarray, vr: np.ndarray, delta: float,
                 pad: Window) -> np.ndarray:
    gap_c = chordal_dist_values(vl, vr)
    need = gap_c > delta
    # near the window the euclidean gap matters too (connectivity probes are
    # euclidean there); a segment counts as near if its bounding box meets
    # the padded window
    near = ((np.minimum(vl.real, vr.real) <= pad.x1)
            & (np.maximum(vl.real, vr.real) >= pad.x0)
            & (np.minimum(vl.imag, vr.imag) <= pad.y1)
            & (np.maximum(vl.imag, vr.imag) >= pad.y0))
    return need | (near & (np.abs(vl - vr) > delta))


def _refine(evaluate, params: np.ndarray, values: np.ndarray, delta: float,
            window: Window, budget: int, curve_meta) -> tuple:
    """Adaptive bisection in parameter space until every segment passes
    _needs_split; returns the full sorted (params, values)."""
    pad = window.padded(WINDOW_PAD)
    done_p = [params[-1:]]
    done_v = [values[-1:]]
    n_done = 1
    seg_l, seg_r = params[:-1], params[1:]
    val_l, val_r = values[:-1], values[1:]
    while seg_l.size:
        split = _needs_split(val_l, val_r, delta, pad)
        mid = 0.5 * (seg_l + seg_r)
        # a midpoint that collides with an endpoint cannot refine anything
        split &= (mid > seg_l) & (mid < seg_r)
        done_p.append(seg_l[~split])
        done_v.append(val_l[~split])
        n_done += int((~split).sum())
        if not split.any():
            break
        sl, sr = seg_l[split], seg_r[split]
        vl, vr = val_l[split], val_r[split]
        m = mid[split]
        if n_done + 2 * m.size > budget:
            p = np.concatenate(done_p + [sl, m])
            v = np.concatenate(done_v + [vl, evaluate(m)])
            order = np.argsort(p, kind="stable")
            partial = SampledCurve(p[order], v[order], curve_meta[0],
                                   curve_meta[1], delta, (math.nan, math.nan))
            raise RefinementBudgetError(
                f"refinement budget exceeded ({budget} samples)", partial)
        vm = evaluate(m)
        seg_l = np.concatenate([sl, m])
        seg_r = np.concatenate([m, sr])
        val_l = np.concatenate([vl, vm])
        val_r = np.concatenate([vm, vr])
    p = np.concatenate(done_p)
    v = np.concatenate(done_v)
    order = np.argsort(p, kind="stable")
    return p[order], v[order]


def _truncate(params: np.ndarray, values: np.ndarray, window: Window,
              delta: float) -> tuple:
    """Cut each tail, outside the window, at the first sample chordally
    within delta of infinity.  Saturated tails (never reaching the cut) are
    kept whole; the truncation field exposes that."""
    cinf = chordal_to_infinity(values)
    in_win = window.contains_mask(values)
    n = values.size
    if in_win.any():
        lo_w = int(np.argmax(in_win))
        hi_w = n - 1 - int(np.argmax(in_win[::-1]))
    else:
        lo_w = hi_w = n // 2
    right = np.flatnonzero(cinf[hi_w:] <= delta)
    hi = hi_w + (int(right[0]) if right.size else n - 1 - hi_w)
    left = np.flatnonzero(cinf[:lo_w + 1] <= delta)
    lo = int(left[-1]) if left.size else 0
    return params[lo:hi + 1], values[lo:hi + 1]


def _build_family(f: ExpMap, sigma: int, K: int, delta: float,
                  window: Window, budget: int) -> list:
    """gamma_0 ... gamma_K of one sign, each generation pulled back from the
    previous one's full polyline (refined and extended, before truncation)."""
    curves = []
    prev_v = None
    for k in range(K + 1):
        if k == 0:
            t = base_ladder(delta)
            t = t[t <= _GAMMA0_T_MAX]

            def evaluate(tt):
                return _gamma0_values(f, tt)

            v = evaluate(t)
            keep = v.real < f.a
            t, v = t[keep], v[keep]
        elif k == 1:
            # the pullback of gamma_0 in closed form: the line t + i*sigma*pi
            # over the whole ladder, far past gamma_0's own overflow cap
            t = base_ladder(delta)

            def evaluate(tt, _off=1j * (sigma * math.pi)):
                return tt + _off

            v = evaluate(t)
        else:
            # fresh index parametrization per generation: repeated bisection
            # of inherited params exhausts float resolution near hairpins
            # (the base ladder tops out near 1e299 where ulp is ~1e283)
            t = np.arange(prev_v.size, dtype=float)
            evaluate = _pullback_evaluator(f, sigma, t, prev_v)
            v = _nudged_pullback(f, sigma, prev_v)
        t, v = _refine(evaluate, t, v, delta, window, budget, (k, sigma))
        if k >= 2:
            t, v = _extend_dives(f, t, v, delta, sigma)
            t, v = _extend_tails(f, t, v, delta, window)
        out_p, out_v = _truncate(t, v, window, delta)
        cinf = chordal_to_infinity(out_v)
        curves.append(SampledCurve(out_p, out_v, k, sigma, delta,
                                   (float(cinf[0]), float(cinf[-1]))))
        prev_v = v
    return curves


def build_gamma(f: ExpMap, sigma, k: int, delta: float, window: Window,
                budget: int = REFINEMENT_BUDGET) -> SampledCurve:
    """Sample gamma_k^sigma adaptively to resolution delta.

    Consecutive samples are within chordal delta everywhere, and within
    euclidean delta as well near the window.  Tails are cut once chordally
    within delta of infinity; gamma_0's samples additionally satisfy the
    defining constraint of being real and strictly below a.  The whole chain
    gamma_0 ... gamma_k is built, so asking for generation k costs as much
    as asking for the family.
    """
    s = _sign(sigma)
    if k < 0:
        raise ValueError("generation k must be nonnegative")
    if not delta > 0:
        raise ValueError("delta must be positive")
    return _build_family(f, s, k, delta, window, budget)[-1]


def build_continuum(f: ExpMap, sigma, K: int, delta: float,
                    window: Window) -> ContinuumApprox:
    """The curve family gamma_0 ... gamma_K at shared delta and window."""
    if K < 1:
        raise ValueError("K must be at least 1")
    if not delta > 0:
        raise ValueError("delta must be positive")
    s = _sign(sigma)
    curves = _build_family(f, s, K, delta, window, REFINEMENT_BUDGET)
    return ContinuumApprox(curves, s, window, delta)


# ---------------------------------------------------------------------------
# Hausdorff convergence report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HausdorffReport:
    """d_k = Hausdorff distance of gamma_k + {inf} to the whole sampled
    family + {inf}; delta bounds the discretization error of each d_k."""

    entries: list  # (k, d_k)
    delta: float

    def to_json_obj(self) -> dict:
        return {"delta": self.delta,
                "entries": [{"k": k, "d_k": d} for k, d in self.entries]}


def hausdorff_report(approx: ContinuumApprox) -> HausdorffReport:
    if approx.K < 3:
        raise ValueError("hausdorff report needs K >= 3")
    union = approx.union_point_set(with_infinity=True)
    union_embedded = union.embedded()
    entries = []
    for curve in approx.curves:
        pts = curve.point_set(with_infinity=True)
        # curve samples are literal members of the union, so the directed
        # curve-to-union term is zero; the union-to-curve term is the story
        tree = pts.tree("chordal")
        d, _ = tree.query(union_embedded, k=1)
        entries.append((curve.generation, float(np.max(d))))
    return HausdorffReport(entries, approx.delta)


# ---------------------------------------------------------------------------
# the glued set Y and its preimage forest
# ---------------------------------------------------------------------------

def build_Y(f: ExpMap, K: int, delta: float, window: Window,
            m_translates: int) -> PointSet:
    """Sampled Y: both signed families plus their 2*pi*i*k translates,
    restricted to the window."""
    if m_translates < 0:
        raise ValueError("m_translates must be nonnegative")
    parts = []
    for sigma in (1, -1):
        values = build_continuum(f, sigma, K, delta, window).union_values()
        for k in range(-m_translates, m_translates + 1):
            shifted = values + (1j * (TWO_PI * k)) if k else values
            parts.append(shifted[window.contains_mask(shifted)])
    return PointSet.from_values(np.concatenate(parts))


@dataclass(frozen=True)
class PreimageForest:
    """Cumulative preimage sets Y_0 ... Y_j with full provenance.

    Entry i carries its depth, the index of its parent (-1 for the depth-0
    roots), and the strip branch applied to the parent; following parents
    reconstructs the branch word k_0 ... k_{d-1} back to the root.
    """

    values: np.ndarray
    depths: np.ndarray
    parents: np.ndarray
    branches: np.ndarray
    depth: int
    k_max: int
    window: Window
    dropped_roots: int

    def __len__(self) -> int:
        return self.values.size

    def point_set(self) -> PointSet:
        return PointSet.from_values(self.values)

    def at_depth(self, d: int) -> np.ndarray:
        return self.values[self.depths == d]

    def branch_word(self, i: int) -> list:
        word = []
        while self.parents[i] >= 0:
            word.append(int(self.branches[i]))
            i = int(self.parents[i])
        word.reverse()
        return word

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["depth", "branch_word", "re", "im"])
            for i in range(len(self)):
                word = ".".join(str(b) for b in self.branch_word(i))
                z = self.values[i]
                w.writerow([int(self.depths[i]), word,
                            repr(float(z.real)), repr(float(z.imag))])


def build_preimage_forest(f: ExpMap, Y0: PointSet, j: int, k_max: int,
                          window: Window) -> PreimageForest:
    """Expand Y0 through j rounds of strip pullbacks L_k, |k| <= k_max.

    Each round applies every branch to the previous round's points that lie
    inside the window.  Roots sitting exactly on the slit [a, inf) cannot be
    pulled back and are dropped (counted).  The gluing points (2k+1)*pi*i
    are appended exactly whenever their parent a-1 is present: sampled
    pullbacks land within an ulp of them, but the connectivity argument
    routes through the exact points.
    """
    if j < 0:
        raise ValueError("depth j must be nonnegative")
    if k_max < 0:
        raise ValueError("k_max must be nonnegative")
    if Y0.n_infinite:
        raise ValueError("Y0 must be a finite point set")
    roots = Y0.values
    on_slit = (roots.imag == 0.0) & (roots.real >= f.a)
    dropped = int(on_slit.sum())
    roots = roots[~on_slit]
    all_values = [roots]
    all_depths = [np.zeros(roots.size, dtype=np.int16)]
    all_parents = [np.full(roots.size, -1, dtype=np.int64)]
    all_branches = [np.zeros(roots.size, dtype=np.int16)]
    level_values = roots
    level_start = 0
    a_minus_1 = complex(f.a - 1.0, 0.0)
    for depth in range(1, j + 1):
        inside = window.contains_mask(level_values)
        parents_global = level_start + np.flatnonzero(inside)
        parent_vals = level_values[inside]
        level_start = level_start + level_values.size
        if parent_vals.size == 0:
            break
        vals, pars, brs = [], [], []
        for k in range(-k_max, k_max + 1):
            vals.append(inv_strip_values(f, k, parent_vals))
            pars.append(parents_global)
            brs.append(np.full(parent_vals.size, k, dtype=np.int16))
        vals = np.concatenate(vals)
        pars = np.concatenate(pars)
        brs = np.concatenate(brs)
        # exact gluing points, one per branch, childed to an exact a-1 parent
        glue = np.flatnonzero(parent_vals == a_minus_1)
        if glue.size:
            parent = parents_global[glue[0]]
            extra = np.array([complex(0.0, (2 * k + 1) * math.pi)
                              for k in range(-k_max, k_max + 1)])
            new = ~np.isin(extra, vals)
            vals = np.concatenate([vals, extra[new]])
            pars = np.concatenate([pars, np.full(int(new.sum()), parent,
                                                 dtype=np.int64)])
            brs = np.concatenate([brs, np.arange(-k_max, k_max + 1,
                                                 dtype=np.int16)[new]])
        all_values.append(vals)
        all_depths.append(np.full(vals.size, depth, dtype=np.int16))
        all_parents.append(pars)
        all_branches.append(brs)
        level_values = vals
    return PreimageForest(
        np.concatenate(all_values), np.concatenate(all_depths),
        np.concatenate(all_parents), np.concatenate(all_branches),
        j, k_max, window, dropped)


# ---------------------------------------------------------------------------
# connectivity and density probes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConnectivityReport:
    rows: list          # (eps, n_components, largest_share)
    n_points: int
    window: Window
    resolution: float | None = None

    @property
    def connectivity_constant(self) -> float | None:
        """Smallest probed eps with a single component, in units of the
        sampling resolution."""
        if self.resolution is None:
            return None
        ones = [eps for eps, n, _ in self.rows if n == 1]
        return min(ones) / self.resolution if ones else None

    def to_json_obj(self) -> dict:
        obj = {"n_points": self.n_points,
               "rows": [{"eps": e, "components": n, "largest_share": s}
                        for e, n, s in self.rows]}
        if self.resolution is not None:
            obj["resolution"] = self.resolution
            obj["connectivity_constant"] = self.connectivity_constant
        return obj


def connectivity_probe(P: PointSet, eps_list, window: Window,
                       resolution: float | None = None) -> ConnectivityReport:
    """Euclidean epsilon-component counts of the windowed points, for each
    eps in a decreasing list."""
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    inside = P.restricted(window)
    rows = []
    for eps in eps_list:
        parts = eps_components(inside, eps, metric="euclidean")
        largest = max((len(g) for g in parts), default=0)
        share = largest / len(inside) if len(inside) else 0.0
        rows.append((eps, len(parts), share))
    return ConnectivityReport(rows, len(inside), window, resolution)


@dataclass(frozen=True)
class DensityReport:
    fraction: float
    cells_hit: int
    grid_n: int
    n_points: int
    depth: int
    k_max: int

    def to_json_obj(self) -> dict:
        return {"fraction": self.fraction, "cells_hit": self.cells_hit,
                "grid_n": self.grid_n, "n_points": self.n_points,
                "depth": self.depth, "k_max": self.k_max}


DENSITY_POINT_BUDGET = 30_000_000


def density_probe(f: ExpMap, j: int, window: Window, grid_n: int,
                  k_max: int = 8, seed: float = -1.0) -> DensityReport:
    """Backward-orbit coverage: pull the seed back through every branch word
    of length <= j and report the fraction of grid cells hit.

    The seed must be real and left of a (it then lies on gamma_0, inside the
    escaping set, and off the slit of every branch).
    """
    if not 0 <= j <= 8:
        raise ValueError("depth j must be between 0 and 8")
    if not 1 <= grid_n <= 512:
        raise ValueError("grid_n must be between 1 and 512")
    seed = float(seed)
    if not seed < f.a:
        raise ValueError("seed must satisfy re(seed) < a")
    grid = np.zeros((grid_n, grid_n), dtype=bool)
    n_points = 0

    def mark(values):
        nonlocal n_points
        n_points += values.size
        inside = window.contains_mask(values)
        vals = values[inside]
        ix = np.clip(((vals.real - window.x0) / window.width * grid_n)
                     .astype(np.int64), 0, grid_n - 1)
        iy = np.clip(((vals.imag - window.y0) / window.height * grid_n)
                     .astype(np.int64), 0, grid_n - 1)
        grid[iy, ix] = True

    level = np.array([complex(seed, 0.0)])
    mark(level)
    for _ in range(j):
        width = 2 * k_max + 1
        if level.size * width + n_points > DENSITY_POINT_BUDGET:
            raise ValueError("density tree exceeds the point budget; "
                             "lower j or k_max")
        level = np.concatenate([inv_strip_values(f, k, level)
                                for k in range(-k_max, k_max + 1)])
        mark(level)
    frac = float(grid.sum()) / (grid_n * grid_n)
    return DensityReport(frac, int(grid.sum()), grid_n, n_points, j, k_max)
