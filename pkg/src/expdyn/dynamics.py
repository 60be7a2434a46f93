"""The exponential family f(z) = exp(z) + a.

Forward orbits with escape and overflow accounting, the two half-plane
inverse branches, the strip branches of the logarithm, and symbolic
itineraries.  Everything here is scalar and exact about its branch
conventions; bulk pullbacks for curve construction use the vectorized
helpers at the bottom.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import EXP_LEDGE, TWO_PI, LogMagnitude, safe_exp

ASYMPTOTIC_VALUE_ERROR = "asymptotic value has no preimage under this branch"
BRANCH_CUT_ERROR = "branch-cut point"

TOL_BOUNDARY = 1e-9


@dataclass(frozen=True)
class ExpMap:
    """f(z) = exp(z) + a with numerical escape bookkeeping.

    strict mode (the default) enforces a > -1, the regime where every real
    orbit escapes; passing allow_attracting=True lifts that check for
    exploratory use, and with it every real-escape guarantee.
    """

    a: float
    r_escape: float = 50.0
    n_max_default: int = 64
    allow_attracting: bool = False

    def __post_init__(self):
        if math.isnan(self.a) or math.isinf(self.a):
            raise ValueError("parameter a must be a finite real")
        if self.a <= -1.0 and not self.allow_attracting:
            raise ValueError(
                "a <= -1 needs allow_attracting=True; real orbits may then stay bounded")
        if not self.r_escape >= 10.0:
            raise ValueError("r_escape must be at least 10")
        if self.n_max_default < 1:
            raise ValueError("n_max_default must be positive")


@dataclass(frozen=True)
class EscapeResult:
    """Outcome of a finite forward orbit.

    tag is one of "escaped" (real part exceeded r_escape at step n),
    "overflowed" (applying f at step n left floating-point range; the value
    survives in log form), or "bounded" (n applications stayed below both
    thresholds).  orbit_prefix holds the finite iterates actually computed,
    starting with the input point.
    """

    tag: str
    n: int
    orbit_prefix: tuple
    last: complex | None = None
    log_value: LogMagnitude | None = None

    def to_json_obj(self) -> dict:
        obj = {
            "input": {"re": self.orbit_prefix[0].real,
                      "im": self.orbit_prefix[0].imag},
            "tag": self.tag,
            "n": self.n,
            "steps": [{"re": z.real, "im": z.imag} for z in self.orbit_prefix],
        }
        if self.tag == "bounded":
            obj["last"] = {"re": self.last.real, "im": self.last.imag}
        if self.tag == "overflowed":
            obj["log_value"] = {"log_abs": self.log_value.log_abs,
                                "arg": self.log_value.arg}
        return obj


@dataclass(frozen=True)
class Itinerary:
    """Strip addresses s_n = round(im f^n(z) / 2pi) of an orbit.

    Recording stops at the iteration cap, at overflow, or as soon as an
    imaginary part comes within TOL_BOUNDARY of an odd multiple of pi
    (boundary_index then says which iterate); entries always satisfy the
    strict containment im f^n(z) in ((2s_n - 1)pi, (2s_n + 1)pi).
    """

    entries: tuple
    terminated_by: str  # "cap_reached" | "overflow" | "boundary_hit"
    boundary_index: int | None = None

    def to_json_obj(self) -> dict:
        obj = {"entries": list(self.entries), "terminated_by": self.terminated_by}
        if self.terminated_by == "boundary_hit":
            obj["boundary_index"] = self.boundary_index
        return obj


def apply(f: ExpMap, z: complex) -> complex | LogMagnitude:
    """One step of the map: exp(z) + a, or its log form past the ledge.

    In log form the addition of a is skipped: it would change the value by
    a relative |a| * e^-690 at most, far below double rounding.
    """
    w = safe_exp(z)
    if isinstance(w, LogMagnitude):
        return w
    return w + f.a


def orbit(f: ExpMap, z: complex, n_max: int | None = None) -> EscapeResult:
    """Iterate f from z, reporting escape, overflow, or boundedness.

    The thresholds are checked before each application: step n examines
    the iterate f^(n-1)(z), so the reported index counts applications of f,
    and the prefix never contains a non-finite value.  Escape (re > r_escape)
    certifies divergence only on the real axis; elsewhere it marks an escape
    candidate.
    """
    if n_max is None:
        n_max = f.n_max_default
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    z = complex(z)
    prefix = [z]
    for n in range(1, n_max + 1):
        cur = prefix[-1]
        if cur.real > f.r_escape:
            return EscapeResult("escaped", n, tuple(prefix))
        w = apply(f, cur)
        if isinstance(w, LogMagnitude):
            return EscapeResult("overflowed", n, tuple(prefix), log_value=w)
        prefix.append(w)
    return EscapeResult("bounded", n_max, tuple(prefix), last=prefix[-1])


def _sign(sigma) -> int:
    if sigma in (1, +1, "+", "plus"):
        return 1
    if sigma in (-1, "-", "minus"):
        return -1
    raise ValueError(f"sign must be + or -, got {sigma!r}")


def inv_halfplane(f: ExpMap, sigma, w: complex) -> complex:
    """The half-plane inverse branch: log(w - a) with argument in [0, pi]
    for sigma = +, in [-pi, 0] for sigma = -.

    Defined on the closed half-plane im(w) >= 0 (resp. <= 0) minus the
    asymptotic value a itself; real w on either side of a are fine, which
    is the closure extension that makes the pullback curves reach their
    endpoints.
    """
    s = _sign(sigma)
    w = complex(w)
    x = w.real - f.a
    y = w.imag
    if x == 0.0 and y == 0.0:
        raise ValueError(ASYMPTOTIC_VALUE_ERROR)
    if s > 0 and y < 0.0:
        raise ValueError("point lies in the lower half-plane; branch + needs im(w) >= 0")
    if s < 0 and y > 0.0:
        raise ValueError("point lies in the upper half-plane; branch - needs im(w) <= 0")
    theta = math.atan2(y, x)
    if s < 0 and theta == math.pi:
        # im(w) is +0.0 on the cut; the - branch takes the lower lip
        theta = -math.pi
    return complex(math.log(math.hypot(x, y)), theta)


def inv_strip(f: ExpMap, k: int, w: complex) -> complex:
    """The strip inverse branch: log(w - a) with imaginary part strictly
    between 2*pi*k and 2*pi*(k+1).

    Defined off the slit [a, infinity); points with im(w) = 0 and
    re(w) >= a are rejected exactly.
    """
    w = complex(w)
    x = w.real - f.a
    y = w.imag
    if y == 0.0 and x >= 0.0:
        raise ValueError(BRANCH_CUT_ERROR)
    theta = math.atan2(y, x)
    if theta <= 0.0:
        theta += TWO_PI
        if theta == TWO_PI:
            # y was a tiny negative; keep strictly inside the open strip
            theta = math.nextafter(TWO_PI, 0.0)
    return complex(math.log(math.hypot(x, y)), theta + TWO_PI * k)


def itinerary(f: ExpMap, z: complex, n_max: int | None = None) -> Itinerary:
    """Record strip indices s_n of the orbit of z.

    Stops recording at n_max entries (cap_reached), when the next iterate
    leaves floating-point range (overflow), or when an imaginary part is
    within TOL_BOUNDARY of an odd multiple of pi (boundary_hit; that index
    gets no entry since its strip is ambiguous at this precision).
    """
    if n_max is None:
        n_max = f.n_max_default
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    z = complex(z)
    entries = []
    n = 0
    while True:
        if abs(math.remainder(z.imag - math.pi, TWO_PI)) <= TOL_BOUNDARY:
            return Itinerary(tuple(entries), "boundary_hit", n)
        entries.append(round(z.imag / TWO_PI))
        if len(entries) == n_max:
            return Itinerary(tuple(entries), "cap_reached")
        w = apply(f, z)
        if isinstance(w, LogMagnitude):
            return Itinerary(tuple(entries), "overflow")
        z = w
        n += 1


# ---------------------------------------------------------------------------
# vectorized pullbacks (bulk curve and forest construction)
# ---------------------------------------------------------------------------

def apply_values(f: ExpMap, z: np.ndarray) -> np.ndarray:
    """exp(z) + a elementwise; caller guarantees re(z) <= EXP_LEDGE."""
    if np.any(z.real > EXP_LEDGE):
        raise ValueError("apply_values input crosses the overflow ledge")
    return np.exp(z) + f.a


def inv_halfplane_values(f: ExpMap, sigma, w: np.ndarray) -> np.ndarray:
    """inv_halfplane over an array (no per-point half-plane validation)."""
    s = _sign(sigma)
    x = w.real - f.a
    y = w.imag
    r = np.hypot(x, y)
    if np.any(r == 0.0):
        raise ValueError(ASYMPTOTIC_VALUE_ERROR)
    theta = np.arctan2(y, x)
    if s < 0:
        np.copyto(theta, -math.pi, where=(theta == math.pi))
    return np.log(r) + 1j * theta


def inv_strip_values(f: ExpMap, k: int, w: np.ndarray) -> np.ndarray:
    """inv_strip over an array; raises on any slit point."""
    x = w.real - f.a
    y = w.imag
    if np.any((y == 0.0) & (x >= 0.0)):
        raise ValueError(BRANCH_CUT_ERROR)
    r = np.hypot(x, y)
    theta = np.arctan2(y, x)
    pos = theta > 0.0
    theta = np.where(pos, theta, theta + TWO_PI)
    np.copyto(theta, math.nextafter(TWO_PI, 0.0), where=(theta == TWO_PI))
    return np.log(r) + 1j * (theta + TWO_PI * k)
