"""Dynamic rays g_s traced by backward iteration.

A bounded address s picks the strip each iterate must visit.  The tracer
transports the potential t forward, seeds far to the right inside the strip
of the last entry, and pulls back with the odd-centered logarithm branches.
Depth is chosen per point: the pullback contracts hard, so the chordal gap
between consecutive depths is a certificate, and deepening continues until
it clears ray_tol.  The forward potentials stop one step past the overflow
ledge (at most exp(690) + a, still a double); seeds any deeper collapse
onto that last entry to full double precision, so the chain is all any
depth ever needs.
"""

from __future__ import annotations

import csv
import math
import operator
from dataclasses import dataclass

import numpy as np

from .continuum import SampledCurve
from .dynamics import ExpMap, apply
from .numerics import EXP_LEDGE, TWO_PI, LogMagnitude, chordal_dist

T_MIN = 0.05          # landing behavior at t -> 0 is out of scope
RAY_TOL = 1e-10
REAL_AXIS_TOL = 1e-9

# hard cap on pullback depth; contraction is about 1/690 per extra level once
# the potential is pinned at the ledge, so a healthy trace never gets close
_DEPTH_CAP = 512


class RayDepthError(RuntimeError):
    """Ray depth insufficient: the depth certificate stalled above ray_tol."""

    def __init__(self, t, depth, gap, tol):
        super().__init__(
            f"ray depth insufficient: gap {gap:.3e} > tol {tol:g} "
            f"at t = {t:g}, depth {depth}")
        self.t = t
        self.depth = depth
        self.gap = gap
        self.tol = tol


@dataclass(frozen=True)
class Address:
    """A bounded strip address: finite head, then all zeros or a periodic block.

    tail is the string "zeros" or a nonempty tuple of integers repeated
    forever.  Every representable address is bounded by construction; bound
    reports max |entry| over the whole sequence.
    """

    head: tuple = ()
    tail: tuple | str = "zeros"

    def __post_init__(self):
        object.__setattr__(self, "head",
                           tuple(operator.index(e) for e in self.head))
        if self.tail != "zeros":
            block = tuple(operator.index(e) for e in self.tail)
            if not block:
                raise ValueError("periodic tail must be nonempty")
            object.__setattr__(self, "tail", block)

    @property
    def bound(self) -> int:
        block = () if self.tail == "zeros" else self.tail
        return max((abs(e) for e in self.head + block), default=0)

    def entry(self, n: int) -> int:
        """s_n."""
        if n < 0:
            raise IndexError("address entries start at n = 0")
        if n < len(self.head):
            return self.head[n]
        if self.tail == "zeros":
            return 0
        return self.tail[(n - len(self.head)) % len(self.tail)]

    def entries(self, n: int) -> tuple:
        return tuple(self.entry(j) for j in range(n))

    def shifted(self) -> "Address":
        """The address of f(g_s(t)): drop s_0."""
        if self.head:
            return Address(self.head[1:], self.tail)
        if self.tail == "zeros":
            return self
        return Address((), self.tail[1:] + self.tail[:1])

    def conjugate(self) -> "Address":
        tail = "zeros" if self.tail == "zeros" else tuple(-e for e in self.tail)
        return Address(tuple(-e for e in self.head), tail)

    @classmethod
    def parse(cls, text: str) -> "Address":
        """Parse "1,0,-2|periodic:1,0" or "0|zeros"; a bare head means zeros."""
        text = text.strip()
        head_part, _, tail_part = text.partition("|")
        try:
            head = tuple(int(tok) for tok in head_part.split(",") if tok.strip())
        except ValueError:
            raise ValueError(f"bad address head {head_part!r}") from None
        tail_part = tail_part.strip()
        if tail_part in ("", "zeros"):
            return cls(head, "zeros")
        if tail_part.startswith("periodic:"):
            body = tail_part[len("periodic:"):]
            try:
                block = tuple(int(tok) for tok in body.split(",") if tok.strip())
            except ValueError:
                raise ValueError(f"bad periodic block {body!r}") from None
            return cls(head, block)
        raise ValueError(
            f"unrecognized tail {tail_part!r}; expected 'zeros' or 'periodic:...'")

    def __str__(self) -> str:
        head = ",".join(str(e) for e in self.head)
        if self.tail == "zeros":
            return f"{head}|zeros"
        return f"{head}|periodic:{','.join(str(e) for e in self.tail)}"


@dataclass(frozen=True)
class RayTrace:
    """Certified points of g_s over a potential grid.

    points reuses SampledCurve with generation -1 and sign 0 (not part of
    any gamma family); its params are the potentials.  depth_used and
    convergence_gap are per point, and every gap is at or below the ray_tol
    the trace was built with.
    """

    address: Address
    potential_grid: np.ndarray
    points: SampledCurve
    depth_used: np.ndarray
    convergence_gap: np.ndarray

    def __post_init__(self):
        self.potential_grid.setflags(write=False)
        self.depth_used.setflags(write=False)
        self.convergence_gap.setflags(write=False)

    def __len__(self) -> int:
        return self.potential_grid.size

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "re", "im", "depth", "gap"])
            for t, z, d, g in zip(self.potential_grid, self.points.values,
                                  self.depth_used, self.convergence_gap):
                w.writerow([repr(float(t)), repr(float(z.real)),
                            repr(float(z.imag)), int(d), repr(float(g))])

    def to_json_obj(self) -> dict:
        return {
            "address": str(self.address),
            "points": [
                {"t": float(t), "re": float(z.real), "im": float(z.imag),
                 "depth": int(d), "gap": float(g)}
                for t, z, d, g in zip(self.potential_grid, self.points.values,
                                      self.depth_used, self.convergence_gap)],
        }


def _potential_step(a: float, t: float) -> float:
    """E(t) = exp(t) + a, clamped below by t + 1 + a so the potential grows
    even for a near -1.  Only ever evaluated at t <= EXP_LEDGE."""
    return max(math.exp(t) + a, t + 1.0 + a)


def _potential_chain(a: float, t: float) -> list:
    """Forward potentials t_0, E(t_0), ... up to the first value past the
    ledge (at most exp(690) + a, comfortably inside double range).

    A seed at any potential beyond the last entry pulls back onto the last
    entry's seed with corrections below e^-690, so deeper approximations
    are identical in doubles and the chain never needs to continue.
    """
    ts = [float(t)]
    while ts[-1] <= EXP_LEDGE and len(ts) <= _DEPTH_CAP:
        ts.append(_potential_step(a, ts[-1]))
    return ts


def _pull_to_base(f: ExpMap, s: Address, ts: list, depth: int) -> complex:
    """The depth-n approximation of g_s(t) from the forward potential chain.

    Seed z_n = t_n + 2*pi*i*s_n, then pull back through the odd-centered
    strip branches Log(w - a) + 2*pi*i*s_j, whose imaginary parts live in
    ((2s_j - 1)pi, (2s_j + 1)pi).  Depths past the end of the chain clamp
    to its last entry (see _potential_chain).
    """
    a = f.a
    n = min(depth, len(ts) - 1)
    re = ts[n]
    im = TWO_PI * s.entry(n)
    for j in range(n - 1, -1, -1):
        x = re - a
        re = math.log(math.hypot(x, im))
        im = math.atan2(im, x) + TWO_PI * s.entry(j)
    return complex(re, im)


def trace_ray(f: ExpMap, s: Address, t_grid, ray_tol: float = RAY_TOL) -> RayTrace:
    """Trace g_s at the given potentials, certifying each point.

    For each t the starting depth puts the seed one step past the ledge,
    where its asymptotic error is below double resolution; the trace then
    deepens one level at a time until the chordal gap between consecutive
    depths is at or below ray_tol.  Starting shallower is unsafe: a zero
    address entry at a = 0 makes consecutive unconverged approximations
    coincide exactly, which would fool any gap rule.  A stalled certificate
    raises RayDepthError with diagnostics.
    """
    tg = np.atleast_1d(np.asarray(t_grid, dtype=float))
    if tg.size == 0:
        raise ValueError("t_grid is empty")
    if not np.all(np.isfinite(tg)):
        raise ValueError("t_grid entries must be finite")
    if float(tg.min()) < T_MIN:
        raise ValueError(f"potentials below t_min = {T_MIN} are not traced")
    if tg.size > 1 and not np.all(np.diff(tg) > 0.0):
        raise ValueError("t_grid must be strictly increasing")

    values = np.empty(tg.size, dtype=complex)
    depths = np.empty(tg.size, dtype=int)
    gaps = np.empty(tg.size, dtype=float)
    for i, ti in enumerate(tg):
        t = float(ti)
        ts = _potential_chain(f.a, t)
        if len(ts) > 1 and ts[-1] <= EXP_LEDGE:
            # potential growth stalled below the ledge (a <= -1 territory);
            # no seed is trustworthy, so there is nothing to certify against
            raise RayDepthError(t, len(ts) - 1, math.inf, ray_tol)
        n = max(1, len(ts) - 1)
        prev = _pull_to_base(f, s, ts, n - 1)
        z = _pull_to_base(f, s, ts, n)
        gap = chordal_dist(z, prev)
        while gap > ray_tol and n < _DEPTH_CAP:
            n += 1
            prev, z = z, _pull_to_base(f, s, ts, n)
            gap = chordal_dist(z, prev)
        if gap > ray_tol:
            raise RayDepthError(t, n, gap, ray_tol)
        values[i] = z
        depths[i] = n
        gaps[i] = gap

    if tg.size > 1:
        steps = np.abs(np.diff(values))
        scale = np.sqrt((1.0 + np.abs(values[:-1]) ** 2)
                        * (1.0 + np.abs(values[1:]) ** 2))
        resolution = float(np.max(2.0 * steps / scale))
    else:
        resolution = 0.0
    trunc = (2.0 / math.hypot(1.0, abs(values[0])),
             2.0 / math.hypot(1.0, abs(values[-1])))
    curve = SampledCurve(params=tg.copy(), values=values, generation=-1,
                         sign=0, resolution=resolution, truncation=trunc)
    return RayTrace(address=s, potential_grid=tg, points=curve,
                    depth_used=depths, convergence_gap=gaps)


def default_t_grid(t_max: float = 4.0, n: int = 64) -> np.ndarray:
    return np.linspace(T_MIN, float(t_max), int(n))


@dataclass(frozen=True)
class PathClass:
    """Finite-horizon path-component evidence for one starting point.

    kind "real_preimage" with n means some iterate landed within
    REAL_AXIS_TOL of the real axis at step n; "hair_candidate" carries the
    itinerary prefix observed before escape (whether the tail has the
    infinitely many nonzero entries a hair needs is not decidable at a
    finite horizon); "bounded_orbit" means neither happened within n_max.
    """

    kind: str
    n: int | None = None
    prefix: tuple = ()

    def to_json_obj(self) -> dict:
        obj = {"kind": self.kind}
        if self.kind == "real_preimage":
            obj["n"] = self.n
        if self.kind == "hair_candidate":
            obj["prefix"] = list(self.prefix)
        return obj


def classify_path_component(f: ExpMap, z, n_max: int = 64) -> PathClass:
    """Sort z into the path-component alternatives visible at finite depth.

    Components of f^-n(R) are path components of the escaping set, so a
    real landing settles the question; an escape without one only yields a
    candidate address prefix.
    """
    cur = complex(z)
    entries = []
    for n in range(n_max + 1):
        if abs(cur.imag) <= REAL_AXIS_TOL:
            return PathClass("real_preimage", n=n)
        if cur.real > f.r_escape:
            return PathClass("hair_candidate", prefix=tuple(entries))
        entries.append(round(cur.imag / TWO_PI))
        w = apply(f, cur)
        if isinstance(w, LogMagnitude):
            return PathClass("hair_candidate", prefix=tuple(entries))
        cur = w
    return PathClass("bounded_orbit")
