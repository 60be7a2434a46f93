import json
import math

import numpy as np
import pytest

from expdyn.numerics import (
    EXP_LEDGE,
    INFINITY,
    LogMagnitude,
    PointSet,
    SpherePoint,
    Window,
    chordal_dist,
    eps_components,
    hausdorff_discrete,
    normalize_angle,
    safe_exp,
    sphere_embed,
)

SQRT2 = math.sqrt(2.0)


# ---------------------------------------------------------------------------
# SpherePoint / LogMagnitude
# ---------------------------------------------------------------------------

def test_sphere_point_nan_rejected():
    with pytest.raises(ValueError):
        SpherePoint(math.nan, 0.0)
    with pytest.raises(ValueError):
        SpherePoint(0.0, math.nan)


def test_infinity_is_canonical():
    assert SpherePoint(math.inf, 0.0) is INFINITY
    assert SpherePoint(3.0, -math.inf) is INFINITY
    assert SpherePoint.infinity() is INFINITY
    assert INFINITY.is_inf
    assert SpherePoint(1.0, 2.0) == complex(1, 2)
    assert SpherePoint(1.0, 2.0) != INFINITY
    assert hash(SpherePoint(1.0, 2.0)) == hash(SpherePoint(1.0, 2.0))
    with pytest.raises(ValueError):
        INFINITY.to_complex()


def test_sphere_point_immutable():
    p = SpherePoint(1.0, 2.0)
    with pytest.raises(AttributeError):
        p.re = 5.0


def test_log_magnitude_normalizes_arg():
    lm = LogMagnitude(700.0, 7.0)
    assert -math.pi < lm.arg <= math.pi
    assert lm.arg == pytest.approx(7.0 - 2 * math.pi, abs=1e-15)
    # -pi maps to the +pi end of the half-open interval
    assert LogMagnitude(700.0, -math.pi).arg == math.pi
    assert LogMagnitude(700.0, math.pi).arg == math.pi
    with pytest.raises(ValueError):
        LogMagnitude(math.nan, 0.0)


def test_normalize_angle_range():
    for theta in [0.0, 1.0, -1.0, 3.2, -3.2, 100.0, -100.0, math.pi, -math.pi]:
        r = normalize_angle(theta)
        assert -math.pi < r <= math.pi
        # same angle mod 2*pi
        assert abs(math.remainder(r - theta, 2 * math.pi)) < 1e-9


# ---------------------------------------------------------------------------
# safe_exp
# ---------------------------------------------------------------------------

def test_safe_exp_basic_values():
    assert safe_exp(0j) == 1.0
    w = safe_exp(1j * math.pi)
    assert abs(w - (-1.0)) <= 1e-15


def test_safe_exp_past_ledge_is_log_form():
    w = safe_exp(complex(710.0, 0.0))
    assert isinstance(w, LogMagnitude)
    assert w.log_abs == 710.0
    assert w.arg == 0.0


def test_safe_exp_ledge_boundary():
    # exp(690) = 4.60460640478299e+299 still fits a double
    w = safe_exp(complex(EXP_LEDGE, 0.0))
    assert isinstance(w, complex)
    assert w.real == pytest.approx(4.60460640478299e299, rel=1e-14)
    w2 = safe_exp(complex(math.nextafter(EXP_LEDGE, math.inf), 0.0))
    assert isinstance(w2, LogMagnitude)


def test_safe_exp_nan_rejected():
    with pytest.raises(ValueError):
        safe_exp(complex(math.nan, 0.0))


def test_safe_exp_against_arbitrary_precision():
    mp = pytest.importorskip("mpmath")
    mp.mp.dps = 40
    rng = np.random.default_rng(20240301)
    re = rng.uniform(-300.0, 300.0, size=10_000)
    im = rng.uniform(-50.0, 50.0, size=10_000)
    worst = 0.0
    for x, y in zip(re[:10_000], im[:10_000]):
        got = safe_exp(complex(x, y))
        want = mp.exp(mp.mpc(x, y))
        err = abs(mp.mpc(got.real, got.imag) - want) / abs(want)
        worst = max(worst, float(err))
    assert worst <= 1e-13


# ---------------------------------------------------------------------------
# chordal distance
# ---------------------------------------------------------------------------

def test_chordal_examples():
    assert chordal_dist(complex(0.3, -2.0), complex(0.3, -2.0)) == 0.0
    assert chordal_dist(INFINITY, INFINITY) == 0.0
    assert chordal_dist(0j, INFINITY) == 2.0
    assert chordal_dist(1 + 0j, -1 + 0j) == pytest.approx(2.0, abs=1e-12)
    assert chordal_dist(0j, 1 + 0j) == pytest.approx(SQRT2, abs=1e-12)
    # frozen closed-form values
    assert chordal_dist(complex(3, 4), INFINITY) == pytest.approx(
        0.3922322702763681, abs=1e-15)
    assert chordal_dist(0j, complex(3, 4)) == pytest.approx(
        1.9611613513818404, abs=1e-15)


def test_chordal_accepts_log_magnitude():
    # anything past the ledge is chordally a hair's width from infinity
    lm = LogMagnitude(695.0, 1.0)
    assert chordal_dist(lm, INFINITY) == 0.0
    assert chordal_dist(lm, 0j) == 2.0


def test_chordal_symmetry_and_triangle_sampled():
    rng = np.random.default_rng(987654321)
    n = 1_000_000
    # moduli spread over many scales, including far outside any window
    mod = np.exp(rng.uniform(-8.0, 14.0, size=(3, n)))
    ang = rng.uniform(-math.pi, math.pi, size=(3, n))
    p, q, r = (mod * np.exp(1j * ang))

    def cd(u, v):
        d = np.abs(u - v)
        su = np.hypot(1.0, np.abs(u))
        sv = np.hypot(1.0, np.abs(v))
        return 2.0 * (d / su) / sv

    dpq = cd(p, q)
    dqp = cd(q, p)
    dpr = cd(p, r)
    drq = cd(r, q)
    assert float(np.max(np.abs(dpq - dqp))) <= 1e-12
    assert float(np.max(dpq - (dpr + drq))) <= 1e-12
    assert float(np.max(dpq)) <= 2.0 + 1e-12
    # spot-check the scalar function against the vector form
    for i in range(0, n, 200_000):
        assert chordal_dist(complex(p[i]), complex(q[i])) == pytest.approx(
            float(dpq[i]), rel=1e-13, abs=1e-15)


def test_chordal_antipodal_pairs_reach_two():
    rng = np.random.default_rng(13)
    for _ in range(50):
        z = complex(rng.normal(), rng.normal())
        if z == 0:
            continue
        w = -1.0 / z.conjugate()
        assert chordal_dist(z, w) == pytest.approx(2.0, abs=1e-12)
    assert chordal_dist(0j, INFINITY) == pytest.approx(2.0, abs=1e-12)


def test_chordal_huge_moduli_stay_stable():
    a = complex(1e300, 0.0)
    b = complex(0.0, 1e300)
    d = chordal_dist(a, b)
    assert 0.0 <= d <= 2.0
    assert d == pytest.approx(2.0 * math.sqrt(2.0) * 1e-300, rel=1e-10)
    assert chordal_dist(complex(1e308, 0), complex(-1e308, 0)) <= 1e-300


def test_sphere_embed_is_isometric_to_chordal():
    rng = np.random.default_rng(7)
    z = rng.normal(size=50) + 1j * rng.normal(size=50)
    z *= np.exp(rng.uniform(-3, 8, size=50))
    e = sphere_embed(z)
    assert np.allclose(np.linalg.norm(e, axis=-1), 1.0, atol=1e-12)
    for i in range(0, 50, 7):
        for j in range(0, 50, 11):
            want = chordal_dist(complex(z[i]), complex(z[j]))
            got = float(np.linalg.norm(e[i] - e[j]))
            assert got == pytest.approx(want, abs=1e-12)


# ---------------------------------------------------------------------------
# PointSet
# ---------------------------------------------------------------------------

def test_point_set_rejects_nan():
    with pytest.raises(ValueError):
        PointSet([complex(math.nan, 0.0)])
    with pytest.raises(ValueError):
        PointSet.from_values(np.array([complex(0, math.nan)]))


def test_point_set_order_and_infinity():
    ps = PointSet([1 + 2j, INFINITY, 0j])
    assert len(ps) == 3
    assert ps.n_infinite == 1
    assert ps[0] == 1 + 2j
    assert ps[1] is INFINITY
    assert list(ps.finite_values()) == [1 + 2j, 0j]


def test_point_set_csv_roundtrip(tmp_path):
    pts = [complex(0.1, -2.5e-17), INFINITY, complex(-3.25, 4.0), 0j]
    ps = PointSet(pts)
    path = tmp_path / "pts.csv"
    ps.to_csv(path)
    back = PointSet.from_csv(path)
    assert back == ps
    text = path.read_text().splitlines()
    assert text[0] == "re,im"
    assert text[2] == "inf"


def test_point_set_json_roundtrip(tmp_path):
    pts = [complex(1e-300, 2.0), INFINITY]
    ps = PointSet(pts)
    path = tmp_path / "pts.json"
    ps.to_json(path)
    back = PointSet.from_json(path)
    assert back == ps
    obj = json.loads(path.read_text())
    assert obj[1] == "inf"
    assert obj[0]["im"] == 2.0


def test_point_set_union_and_restrict():
    w = Window(-1.0, 1.0, -1.0, 1.0)
    ps = PointSet([0j, 2 + 0j, 0.5 - 0.5j, INFINITY])
    inside = ps.restricted(w)
    assert len(inside) == 2
    u = ps.union(PointSet([5j]))
    assert len(u) == 5
    assert u[4] == 5j


# ---------------------------------------------------------------------------
# hausdorff_discrete
# ---------------------------------------------------------------------------

def test_hausdorff_identity_and_antipodal():
    a = PointSet([0j, 1 + 1j, INFINITY])
    assert hausdorff_discrete(a, a) == 0.0
    assert hausdorff_discrete(PointSet([0j]), PointSet([INFINITY])) == 2.0


def test_hausdorff_one_sided_gap():
    got = hausdorff_discrete(PointSet([0j, 1 + 0j]), PointSet([0j]))
    assert got == pytest.approx(SQRT2, abs=1e-12)


def test_hausdorff_symmetric_and_order_free():
    rng = np.random.default_rng(5150)
    z = rng.normal(size=300) + 1j * rng.normal(size=300)
    w = rng.normal(size=200) + 1j * rng.normal(size=200)
    a = PointSet.from_values(z)
    b = PointSet.from_values(w)
    d1 = hausdorff_discrete(a, b)
    d2 = hausdorff_discrete(b, a)
    assert d1 == d2
    perm = rng.permutation(300)
    a_shuffled = PointSet.from_values(z[perm])
    assert hausdorff_discrete(a_shuffled, b) == d1
    assert hausdorff_discrete(a, a_shuffled) == 0.0


def test_hausdorff_empty_is_an_error():
    with pytest.raises(ValueError, match="empty point set"):
        hausdorff_discrete(PointSet([]), PointSet([0j]))
    with pytest.raises(ValueError, match="empty point set"):
        hausdorff_discrete(PointSet([0j]), PointSet([]))


def test_hausdorff_matches_quadratic_scan():
    rng = np.random.default_rng(777)
    z = rng.normal(size=80) + 1j * rng.normal(size=80)
    w = rng.normal(size=60) + 1j * rng.normal(size=60)
    a = PointSet.from_values(z)
    b = PointSet.from_values(w)

    def brute(xs, ys):
        return max(min(chordal_dist(complex(x), complex(y)) for y in ys)
                   for x in xs)

    want = max(brute(z, w), brute(w, z))
    assert hausdorff_discrete(a, b) == pytest.approx(want, abs=1e-12)


# ---------------------------------------------------------------------------
# eps_components
# ---------------------------------------------------------------------------

def _as_value_sets(points: PointSet, parts):
    return {frozenset(idx.tolist()) for idx in parts}


def test_eps_components_examples():
    p = PointSet([0j, 1 + 0j, 2.5 + 0j])
    parts = eps_components(p, 1.2, metric="euclidean")
    assert _as_value_sets(p, parts) == {frozenset({0, 1}), frozenset({2})}
    parts = eps_components(p, 1.6, metric="euclidean")
    assert _as_value_sets(p, parts) == {frozenset({0, 1, 2})}
    single = eps_components(PointSet([5 + 5j]), 0.001)
    assert _as_value_sets(p, single) == {frozenset({0})}


def test_eps_components_threshold_is_inclusive():
    p = PointSet([0j, 1 + 0j])
    assert len(eps_components(p, 1.0)) == 1
    assert len(eps_components(p, math.nextafter(1.0, 0.0))) == 2


def test_eps_components_euclidean_rejects_infinity():
    p = PointSet([0j, INFINITY])
    with pytest.raises(ValueError):
        eps_components(p, 1.0, metric="euclidean")
    # chordal is fine with it: far points chain through infinity
    parts = eps_components(PointSet([1e8 + 0j, INFINITY, -1e8 + 0j]), 1e-7,
                           metric="chordal")
    assert len(parts) == 1


def test_eps_components_bad_args():
    p = PointSet([0j])
    with pytest.raises(ValueError):
        eps_components(p, 0.0)
    with pytest.raises(ValueError):
        eps_components(p, -1.0)
    with pytest.raises(ValueError):
        eps_components(p, 1.0, metric="manhattan")
    assert eps_components(PointSet([]), 1.0) == []


def _brute_distance_table(values, inf_mask, metric):
    """Full O(n^2) distance matrix, straight from the closed forms."""
    if metric == "euclidean":
        return np.abs(values[:, None] - values[None, :])
    s = np.hypot(1.0, np.abs(values))
    d = 2.0 * np.abs(values[:, None] - values[None, :]) / s[:, None] / s[None, :]
    for k in np.flatnonzero(inf_mask):
        d[k, :] = 2.0 / s
        d[:, k] = 2.0 / s
        d[k, inf_mask] = 0.0
        d[inf_mask, k] = 0.0
    return d


def _brute_components(dist, eps):
    """Union-find over every pair of the distance table."""
    n = dist.shape[0]
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    ii, jj = np.nonzero(np.triu(dist <= eps, k=1))
    for i, j in zip(ii.tolist(), jj.tolist()):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[rj] = ri
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return {frozenset(g) for g in groups.values()}


def _eps_in_a_gap(dist, rng):
    """An eps with clear air on both sides, so routes that differ by a few
    ulps in the metric cannot disagree about any single pair."""
    pos = np.unique(dist[np.triu_indices(dist.shape[0], k=1)])
    pos = pos[pos > 0]
    if pos.size == 0:
        return 1.0
    if pos.size == 1:
        return float(pos[0]) * 1.5
    k = max(1, int(0.02 * pos.size))
    lo = pos[:-1]
    hi = pos[1:]
    rel_gap = (hi - lo) / hi
    ok = np.flatnonzero(rel_gap > 1e-9)
    if ok.size == 0:
        return float(pos[0]) / 2.0
    pick = ok[np.argmin(np.abs(ok - k))]
    return float(0.5 * (lo[pick] + hi[pick]))


def test_eps_components_agree_with_brute_force():
    rng = np.random.default_rng(424242)
    for trial in range(100):
        n = int(rng.integers(1, 2001))
        scale = 10.0 ** rng.uniform(-2, 2)
        values = scale * (rng.normal(size=n) + 1j * rng.normal(size=n))
        metric = "euclidean" if trial % 2 == 0 else "chordal"
        inf_mask = np.zeros(n, dtype=bool)
        if metric == "chordal" and n > 3 and trial % 4 == 1:
            inf_mask[rng.integers(0, n)] = True
            values[inf_mask] = 0j
        ps = PointSet.from_values(values, inf_mask)
        dist = _brute_distance_table(values, inf_mask, metric)
        eps = _eps_in_a_gap(dist, rng)
        got = {frozenset(g.tolist())
               for g in eps_components(ps, eps, metric=metric)}
        want = _brute_components(dist, eps)
        assert got == want, f"trial {trial}: partition mismatch"


def test_eps_components_canonical_order():
    p = PointSet([10 + 0j, 0j, 10.1 + 0j, 0.1 + 0j])
    parts = eps_components(p, 0.5)
    assert [g.tolist() for g in parts] == [[0, 2], [1, 3]]


# ---------------------------------------------------------------------------
# Window
# ---------------------------------------------------------------------------

def test_window_parse_and_contains():
    w = Window.parse("-4,4,-1,4")
    assert w == Window(-4.0, 4.0, -1.0, 4.0)
    assert w.contains(0j)
    assert w.contains(complex(4, 4))
    assert not w.contains(complex(4.0001, 0))
    mask = w.contains_mask(np.array([0j, 5 + 0j, -4 - 1j]))
    assert mask.tolist() == [True, False, True]
    assert w.padded(1.0) == Window(-5.0, 5.0, -2.0, 5.0)
    with pytest.raises(ValueError):
        Window(1.0, -1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        Window.parse("1,2,3")
