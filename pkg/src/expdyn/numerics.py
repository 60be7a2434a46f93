"""Numerics on the Riemann sphere.

Finite complex values are kept as ordinary floats; the single point at
infinity is represented explicitly so that sets of points, distances and
nearest-neighbour queries can treat it like any other point.  Values whose
modulus would overflow a double are carried in log form (``LogMagnitude``)
instead of being collapsed to ``inf``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

TWO_PI = 2.0 * math.pi

# exp(x) for x <= EXP_LEDGE stays a finite double (overflow starts near 709.78);
# the margin keeps downstream products like exp(x)*sin(theta) finite as well.
EXP_LEDGE = 690.0


class SpherePoint:
    """A point of the Riemann sphere: a finite complex number or infinity.

    There is exactly one point at infinity (the module constant
    ``INFINITY``); constructing from any non-finite component returns it,
    so signed or directional infinities never leak out.  NaN components are
    rejected outright.
    """

    __slots__ = ("re", "im", "is_inf")

    def __new__(cls, re: float = 0.0, im: float = 0.0):
        re = float(re)
        im = float(im)
        if math.isnan(re) or math.isnan(im):
            raise ValueError("SpherePoint components must not be NaN")
        if math.isinf(re) or math.isinf(im):
            return INFINITY
        self = object.__new__(cls)
        object.__setattr__(self, "re", re)
        object.__setattr__(self, "im", im)
        object.__setattr__(self, "is_inf", False)
        return self

    @staticmethod
    def _make_infinity() -> "SpherePoint":
        self = object.__new__(SpherePoint)
        object.__setattr__(self, "re", math.inf)
        object.__setattr__(self, "im", math.inf)
        object.__setattr__(self, "is_inf", True)
        return self

    @classmethod
    def from_complex(cls, z: complex) -> "SpherePoint":
        return cls(z.real, z.imag)

    @classmethod
    def infinity(cls) -> "SpherePoint":
        return INFINITY

    def __setattr__(self, name, value):
        raise AttributeError("SpherePoint is immutable")

    def to_complex(self) -> complex:
        if self.is_inf:
            raise ValueError("the point at infinity has no complex value")
        return complex(self.re, self.im)

    __complex__ = to_complex

    def __eq__(self, other) -> bool:
        if isinstance(other, SpherePoint):
            if self.is_inf or other.is_inf:
                return self.is_inf and other.is_inf
            return self.re == other.re and self.im == other.im
        if isinstance(other, (int, float, complex)):
            return not self.is_inf and self.to_complex() == complex(other)
        return NotImplemented

    def __hash__(self) -> int:
        if self.is_inf:
            return hash("sphere-infinity")
        return hash(complex(self.re, self.im))

    def __repr__(self) -> str:
        if self.is_inf:
            return "SpherePoint(inf)"
        return f"SpherePoint({self.re!r}, {self.im!r})"


INFINITY = SpherePoint._make_infinity()


def normalize_angle(theta: float) -> float:
    """Reduce an angle to the interval (-pi, pi]."""
    r = math.remainder(theta, TWO_PI)
    if r <= -math.pi:
        r += TWO_PI
    return r


@dataclass(frozen=True)
class Window:
    """A closed axis-aligned rectangle [x0, x1] x [y0, y1] in the plane."""

    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError("window must satisfy x0 < x1 and y0 < y1")

    @classmethod
    def parse(cls, text: str) -> "Window":
        parts = [float(p) for p in text.split(",")]
        if len(parts) != 4:
            raise ValueError("window must be four comma-separated numbers x0,x1,y0,y1")
        return cls(*parts)

    def contains(self, z: complex) -> bool:
        return (self.x0 <= z.real <= self.x1) and (self.y0 <= z.imag <= self.y1)

    def contains_mask(self, values: np.ndarray) -> np.ndarray:
        re = values.real
        im = values.imag
        return (re >= self.x0) & (re <= self.x1) & (im >= self.y0) & (im <= self.y1)

    def padded(self, margin: float) -> "Window":
        return Window(self.x0 - margin, self.x1 + margin,
                      self.y0 - margin, self.y1 + margin)

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0


@dataclass(frozen=True)
class LogMagnitude:
    """A complex value known only as log|w| and arg(w).

    Produced when exp would overflow a double: log_abs is then the real part
    of the exponent (> EXP_LEDGE) and arg its imaginary part reduced to
    (-pi, pi].
    """

    log_abs: float
    arg: float

    def __post_init__(self):
        if math.isnan(self.log_abs) or math.isnan(self.arg):
            raise ValueError("LogMagnitude components must not be NaN")
        if not -math.pi < self.arg <= math.pi:
            object.__setattr__(self, "arg", normalize_angle(self.arg))


def safe_exp(z: complex) -> complex | LogMagnitude:
    """exp(z) as a finite complex number, or a LogMagnitude past the ledge."""
    z = complex(z)
    if math.isnan(z.real) or math.isnan(z.imag):
        raise ValueError("safe_exp input must not be NaN")
    if z.real <= EXP_LEDGE:
        return complex(math.exp(z.real) * math.cos(z.imag),
                       math.exp(z.real) * math.sin(z.imag))
    return LogMagnitude(z.real, normalize_angle(z.imag))


# ---------------------------------------------------------------------------
# chordal metric
# ---------------------------------------------------------------------------

def _as_point(p) -> SpherePoint:
    if isinstance(p, SpherePoint):
        return p
    if isinstance(p, LogMagnitude):
        # modulus exceeds exp(EXP_LEDGE); chordally indistinguishable from inf
        return INFINITY
    return SpherePoint(complex(p).real, complex(p).imag)


def chordal_dist(p, q) -> float:
    """Chordal distance on the sphere: 2|p-q| / sqrt((1+|p|^2)(1+|q|^2)).

    Accepts SpherePoint, complex, real, or LogMagnitude values; the distance
    to infinity is 2/sqrt(1+|p|^2) and antipodal pairs realise the maximum 2.
    Divisions are ordered so moduli up to about 1e300 cannot overflow.
    """
    p = _as_point(p)
    q = _as_point(q)
    if p.is_inf and q.is_inf:
        return 0.0
    if p.is_inf or q.is_inf:
        fin = q if p.is_inf else p
        return 2.0 / math.hypot(1.0, fin.re, fin.im)
    d = math.hypot(p.re - q.re, p.im - q.im)
    sp = math.hypot(1.0, p.re, p.im)
    sq = math.hypot(1.0, q.re, q.im)
    if math.isinf(d) or math.isinf(sp) or math.isinf(sq):
        # moduli near float max; the stereographic images stay stable
        e = sphere_embed(np.array([complex(p.re, p.im), complex(q.re, q.im)]))
        return float(np.linalg.norm(e[0] - e[1]))
    return 2.0 * (d / sp) / sq


def chordal_dist_values(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Vectorised chordal distance for arrays of finite complex values."""
    d = np.abs(p - q)
    sp = np.hypot(1.0, np.abs(p))
    sq = np.hypot(1.0, np.abs(q))
    return 2.0 * (d / sp) / sq


def chordal_to_infinity(p: np.ndarray) -> np.ndarray:
    return 2.0 / np.hypot(1.0, np.abs(p))


def sphere_embed(values: np.ndarray, inf_mask: np.ndarray | None = None) -> np.ndarray:
    """Embed complex values into R^3 so that euclidean distance = chordal.

    The image is the round sphere of diameter 2; infinity maps to (0, 0, 1).
    Written to avoid overflow for |z| up to 1e300 (squares may hit inf, the
    final coordinates stay finite).
    """
    values = np.asarray(values, dtype=np.complex128)
    re = values.real
    im = values.imag
    with np.errstate(over="ignore"):
        n2 = re * re + im * im
        t = 1.0 / (1.0 + n2)
    out = np.empty(values.shape + (3,), dtype=np.float64)
    # multiply by (2t) <= 2 first so components near float max cannot overflow
    out[..., 0] = re * (2.0 * t)
    out[..., 1] = im * (2.0 * t)
    out[..., 2] = 1.0 - 2.0 * t
    if inf_mask is not None and np.any(inf_mask):
        out[inf_mask, 0] = 0.0
        out[inf_mask, 1] = 0.0
        out[inf_mask, 2] = 1.0
    return out


# ---------------------------------------------------------------------------
# point sets
# ---------------------------------------------------------------------------

class PointSet:
    """An ordered, immutable collection of sphere points.

    Finite entries live in a complex array; the point at infinity is flagged
    per entry.  KD-trees for neighbour queries are built lazily: a planar
    tree over (re, im) for the euclidean metric and a tree over the sphere
    embedding for the chordal one.
    """

    def __init__(self, points):
        values = []
        inf_mask = []
        for p in points:
            p = _as_point(p)
            if p.is_inf:
                values.append(0j)
                inf_mask.append(True)
            else:
                values.append(complex(p.re, p.im))
                inf_mask.append(False)
        self._init_arrays(np.asarray(values, dtype=np.complex128),
                          np.asarray(inf_mask, dtype=bool))

    def _init_arrays(self, values: np.ndarray, inf_mask: np.ndarray):
        if values.ndim != 1 or inf_mask.shape != values.shape:
            raise ValueError("PointSet arrays must be 1-d and congruent")
        if np.any(np.isnan(values.real)) or np.any(np.isnan(values.imag)):
            raise ValueError("PointSet entries must not be NaN")
        finite = values[~inf_mask] if inf_mask.any() else values
        if finite.size and not np.all(np.isfinite(finite)):
            raise ValueError("non-finite entry without the infinity flag")
        values = values.copy()
        values[inf_mask] = 0j
        values.setflags(write=False)
        inf_mask = inf_mask.copy()
        inf_mask.setflags(write=False)
        self.values = values
        self.inf_mask = inf_mask
        self._trees: dict[str, cKDTree] = {}
        self._embedded: np.ndarray | None = None

    @classmethod
    def from_values(cls, values: np.ndarray,
                    inf_mask: np.ndarray | None = None) -> "PointSet":
        self = object.__new__(cls)
        values = np.asarray(values, dtype=np.complex128)
        if inf_mask is None:
            inf_mask = np.zeros(values.shape, dtype=bool)
        self._init_arrays(values, np.asarray(inf_mask, dtype=bool))
        return self

    def __len__(self) -> int:
        return self.values.size

    def __getitem__(self, i: int) -> SpherePoint:
        if self.inf_mask[i]:
            return INFINITY
        z = self.values[i]
        return SpherePoint(z.real, z.imag)

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @property
    def n_infinite(self) -> int:
        return int(self.inf_mask.sum())

    def finite_values(self) -> np.ndarray:
        return self.values[~self.inf_mask]

    def embedded(self) -> np.ndarray:
        if self._embedded is None:
            self._embedded = sphere_embed(self.values, self.inf_mask)
        return self._embedded

    def tree(self, metric: str = "euclidean") -> cKDTree:
        """KD-tree over the set; cached, consistent with the entry order."""
        if metric not in ("euclidean", "chordal"):
            raise ValueError(f"unknown metric {metric!r}")
        if metric == "euclidean" and self.n_infinite:
            raise ValueError("euclidean metric does not cover the point at infinity")
        if metric not in self._trees:
            if metric == "euclidean":
                data = np.column_stack([self.values.real, self.values.imag])
            else:
                data = self.embedded()
            self._trees[metric] = cKDTree(data)
        return self._trees[metric]

    def restricted(self, window) -> "PointSet":
        """The subset lying in `window` (an object with a contains_mask)."""
        keep = window.contains_mask(self.values) & ~self.inf_mask
        return PointSet.from_values(self.values[keep])

    def union(self, other: "PointSet") -> "PointSet":
        return PointSet.from_values(
            np.concatenate([self.values, other.values]),
            np.concatenate([self.inf_mask, other.inf_mask]))

    def __eq__(self, other) -> bool:
        if not isinstance(other, PointSet):
            return NotImplemented
        return (len(self) == len(other)
                and bool(np.array_equal(self.inf_mask, other.inf_mask))
                and bool(np.array_equal(self.values, other.values)))

    def __repr__(self) -> str:
        return f"PointSet({len(self)} points, {self.n_infinite} at infinity)"

    # -- serialisation ------------------------------------------------------

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["re", "im"])
            for z, isinf in zip(self.values, self.inf_mask):
                if isinf:
                    w.writerow(["inf"])
                else:
                    w.writerow([repr(float(z.real)), repr(float(z.imag))])

    @classmethod
    def from_csv(cls, path) -> "PointSet":
        pts = []
        with open(path, newline="") as fh:
            r = csv.reader(fh)
            header = next(r, None)
            if header is None or header[0].strip() != "re":
                raise ValueError("point-set CSV must start with a re,im header")
            for row in r:
                if not row:
                    continue
                if row[0].strip() == "inf":
                    pts.append(INFINITY)
                else:
                    pts.append(complex(float(row[0]), float(row[1])))
        return cls(pts)

    def to_json_obj(self) -> list:
        out = []
        for z, isinf in zip(self.values, self.inf_mask):
            out.append("inf" if isinf
                       else {"re": float(z.real), "im": float(z.imag)})
        return out

    @classmethod
    def from_json_obj(cls, obj) -> "PointSet":
        pts = []
        for item in obj:
            if item == "inf":
                pts.append(INFINITY)
            else:
                pts.append(complex(item["re"], item["im"]))
        return cls(pts)

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_obj(), fh)

    @classmethod
    def from_json(cls, path) -> "PointSet":
        with open(path) as fh:
            return cls.from_json_obj(json.load(fh))


# ---------------------------------------------------------------------------
# discrete Hausdorff distance and epsilon-chain components
# ---------------------------------------------------------------------------

def _directed_hausdorff(a: PointSet, b: PointSet) -> float:
    tree = b.tree("chordal")
    dists, _ = tree.query(a.embedded(), k=1)
    return float(np.max(dists))


def hausdorff_discrete(a: PointSet, b: PointSet) -> float:
    """Symmetric Hausdorff distance between finite point sets, chordal metric.

    max(sup_a inf_b d, sup_b inf_a d), computed exactly via nearest-neighbour
    queries in the sphere embedding (euclidean there equals chordal here).
    """
    if len(a) == 0 or len(b) == 0:
        raise ValueError("empty point set")
    return max(_directed_hausdorff(a, b), _directed_hausdorff(b, a))


def _neighbor_pairs(points: PointSet, eps: float, metric: str) -> np.ndarray:
    tree = points.tree(metric)
    pairs = tree.query_pairs(eps, output_type="ndarray")
    return pairs


def eps_components(points: PointSet, eps: float,
                   metric: str = "euclidean") -> list[np.ndarray]:
    """Partition a point set into epsilon-chain components.

    Two points are chained when their distance is <= eps; components are the
    transitive closure.  Neighbour pairs come from a KD-tree (near-linear for
    well-distributed data), the closure from a sparse connected-components
    pass.  Returns index arrays, sorted by their smallest member.
    """
    if not eps > 0:
        raise ValueError("eps must be a positive real")
    n = len(points)
    if n == 0:
        return []
    pairs = _neighbor_pairs(points, eps, metric)
    if pairs.size:
        data = np.ones(len(pairs), dtype=np.int8)
        graph = sparse.coo_matrix((data, (pairs[:, 0], pairs[:, 1])), shape=(n, n))
        _, labels = connected_components(graph, directed=False)
    else:
        labels = np.arange(n)
    order = np.argsort(labels, kind="stable")
    sorted_labels = labels[order]
    boundaries = np.flatnonzero(np.diff(sorted_labels)) + 1
    groups = np.split(order, boundaries)
    groups = [np.sort(g) for g in groups]
    groups.sort(key=lambda g: int(g[0]))
    return groups
