"""Geometry and effective-pathloss tests.

The penetration oracle used here is an independent reimplementation: it
densely samples points along the segment and classifies them with a
vectorized even-odd test, instead of the library's crossing-parameter
interval logic.
"""

import math

import numpy as np
import pytest

from ris_lab.geometry import (
    Point2,
    Polygon,
    Scene,
    attenuation_factor,
    cascade_pathloss,
    effective_pathloss_ru,
    effective_pathloss_tr,
    effective_pathloss_tu,
    penetration_length,
    scene_from_dict,
    scene_to_dict,
    select_ris,
    total_penetration,
)

TWO_PI = 2.0 * math.pi


def _inside_mask(px, py, verts):
    """Vectorized even-odd point-in-polygon (boundary handling irrelevant at
    random sample points); independent of the library implementation."""
    inside = np.zeros(px.shape, dtype=bool)
    n = len(verts)
    for i in range(n):
        x1, y1 = verts[i]
        x2, y2 = verts[(i + 1) % n]
        cond = (y1 > py) != (y2 > py)
        if y1 == y2:
            continue
        xc = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
        inside ^= cond & (xc > px)
    return inside


def oracle_penetration(a, b, poly, samples=100_000):
    """Dense-sampling penetration oracle: inside fraction times |ab|."""
    ts = (np.arange(samples) + 0.5) / samples
    px = a.x + ts * (b.x - a.x)
    py = a.y + ts * (b.y - a.y)
    verts = [(v.x, v.y) for v in poly.vertices]
    frac = _inside_mask(px, py, verts).mean()
    return frac * math.hypot(b.x - a.x, b.y - a.y)


def _square(x0, y0, x1, y1):
    return Polygon((Point2(x0, y0), Point2(x1, y0), Point2(x1, y1), Point2(x0, y1)))


def _random_convex(rng, center, radius, sides):
    angles = TWO_PI * (np.arange(sides) + 0.5) / sides
    rot = rng.uniform(0.0, TWO_PI)
    sy = rng.uniform(0.7, 1.0)
    pts = []
    for ang in angles:
        x, y = radius * math.cos(ang), radius * sy * math.sin(ang)
        xr = x * math.cos(rot) - y * math.sin(rot)
        yr = x * math.sin(rot) + y * math.cos(rot)
        pts.append(Point2(center[0] + xr, center[1] + yr))
    return Polygon(tuple(pts))


# --- penetration_length -----------------------------------------------------

def test_penetration_chord_through_square():
    poly = _square(4, -1, 6, 1)
    assert penetration_length(Point2(0, 0), Point2(10, 0), poly) == pytest.approx(2.0, abs=1e-12)


def test_penetration_no_crossing():
    poly = _square(4, 2, 6, 4)
    assert penetration_length(Point2(0, 0), Point2(10, 0), poly) == 0.0


def test_penetration_endpoint_inside_matches_oracle():
    # frozen from the dense-sampling oracle: exit at x=6 gives exactly 1.0
    poly = _square(4, -1, 6, 1)
    a, b = Point2(5, 0), Point2(10, 0)
    got = penetration_length(a, b, poly)
    assert got == pytest.approx(1.0, abs=1e-9)
    assert got == pytest.approx(oracle_penetration(a, b, poly), abs=1e-3)


def test_penetration_grazing_edge_contributes_zero():
    poly = _square(4, 0, 6, 2)  # segment runs along the bottom edge y=0
    assert penetration_length(Point2(0, 0), Point2(10, 0), poly) == 0.0


def test_penetration_through_vertex_contributes_zero():
    # diamond touched exactly at its left vertex
    poly = Polygon((Point2(5, 0), Point2(6, 1), Point2(7, 0), Point2(6, -1)))
    assert penetration_length(Point2(0, 0), Point2(5, -5), poly) == pytest.approx(0.0, abs=1e-9)


def test_penetration_symmetric_and_bounded():
    rng = np.random.default_rng(7)
    for _ in range(50):
        poly = _random_convex(rng, rng.uniform(-5, 5, 2), rng.uniform(0.5, 3.0), int(rng.integers(3, 8)))
        a = Point2(*rng.uniform(-10, 10, 2))
        b = Point2(*rng.uniform(-10, 10, 2))
        fwd = penetration_length(a, b, poly)
        bwd = penetration_length(b, a, poly)
        assert fwd == pytest.approx(bwd, abs=1e-9)
        assert -1e-12 <= fwd <= a.dist(b) + 1e-9


def test_penetration_matches_sampling_oracle_random():
    rng = np.random.default_rng(123)
    for _ in range(25):
        poly = _random_convex(rng, rng.uniform(-4, 4, 2), rng.uniform(0.5, 3.0), int(rng.integers(3, 8)))
        a = Point2(*rng.uniform(-8, 8, 2))
        b = Point2(*rng.uniform(-8, 8, 2))
        expect = oracle_penetration(a, b, poly)
        got = penetration_length(a, b, poly)
        assert got == pytest.approx(expect, abs=2e-3 * max(1.0, a.dist(b)))


def test_penetration_additive_over_disjoint_obstacles():
    p1 = _square(1, -1, 2, 1)
    p2 = _square(4, -1, 7, 1)
    a, b = Point2(0, 0), Point2(10, 0)
    scene = Scene(ris_positions=(Point2(0, 9),), users=(Point2(9, 9),), obstacles=(p1, p2))
    assert total_penetration(scene, a, b) == pytest.approx(
        penetration_length(a, b, p1) + penetration_length(a, b, p2), abs=1e-12
    )
    assert total_penetration(scene, a, b) == pytest.approx(4.0, abs=1e-9)


def test_penetration_degenerate_polygon_rejected():
    with pytest.raises(ValueError):
        Polygon((Point2(0, 0), Point2(1, 0), Point2(2, 0)))  # zero area
    with pytest.raises(ValueError):
        Polygon((Point2(0, 0), Point2(1, 0)))
    with pytest.raises(ValueError):  # bowtie
        Polygon((Point2(0, 0), Point2(1, 1), Point2(1, 0), Point2(0, 1)))


# --- attenuation_factor -----------------------------------------------------

def test_attenuation_values():
    assert attenuation_factor(0.0, 0.7) == 1.0
    assert attenuation_factor(2.0, 0.5) == 2.0
    assert attenuation_factor(3.0, 0.0) == 1.0


def test_attenuation_rejects_negative():
    with pytest.raises(ValueError):
        attenuation_factor(-1.0, 0.5)
    with pytest.raises(ValueError):
        attenuation_factor(1.0, -0.5)


def test_attenuation_monotone():
    rng = np.random.default_rng(3)
    for _ in range(100):
        d1, d2 = sorted(rng.uniform(0, 10, 2))
        k1, k2 = sorted(rng.uniform(0, 2, 2))
        assert attenuation_factor(d2, k1) >= attenuation_factor(d1, k1)
        assert attenuation_factor(d1, k2) >= attenuation_factor(d1, k1)


# --- effective pathlosses ---------------------------------------------------

def test_pathloss_tr_los():
    scene = Scene(ris_positions=(Point2(3, 4),), users=(Point2(1, 1),))
    assert effective_pathloss_tr(scene, 0) == pytest.approx(5.0, abs=1e-12)


def test_pathloss_tr_with_penetration():
    # rectangle spanning x in [0.6, 1.8] cuts the (0,0)->(3,4) segment from
    # arclength 1 to arclength 3: penetration exactly 2, alpha = 1 + 0.5*2 = 2
    rect = _square(0.6, 0.0, 1.8, 5.0)
    scene = Scene(ris_positions=(Point2(3, 4),), users=(Point2(9, -5),), obstacles=(rect,), kappa=0.5)
    assert effective_pathloss_tr(scene, 0) == pytest.approx(10.0, abs=1e-9)


def test_pathloss_ru_los_and_attenuated():
    scene = Scene(ris_positions=(Point2(6, 0),), users=(Point2(9, 4),))
    assert effective_pathloss_ru(scene, 0, 0) == pytest.approx(5.0, abs=1e-12)
    rect = _square(6.6, -1.0, 7.8, 9.0)
    scene2 = Scene(ris_positions=(Point2(6, 0),), users=(Point2(9, 4),), obstacles=(rect,), kappa=0.5)
    assert effective_pathloss_ru(scene2, 0, 0) == pytest.approx(10.0, abs=1e-9)


def test_pathloss_matches_sampling_oracle_random_scene():
    rng = np.random.default_rng(11)
    for _ in range(10):
        obstacles = []
        centers = [(-6, 5), (6, 5), (0, -7)]
        for c in centers:
            obstacles.append(_random_convex(rng, np.array(c) + rng.uniform(-1, 1, 2), 2.0, int(rng.integers(3, 7))))
        scene = Scene(
            ris_positions=(Point2(12, 0), Point2(-12, 3)),
            users=(Point2(2, 11), Point2(-3, 12)),
            obstacles=tuple(obstacles),
            kappa=0.8,
        )
        for l in range(scene.num_ris):
            r = scene.ris_positions[l]
            pen = sum(oracle_penetration(scene.transmitter, r, ob) for ob in scene.obstacles)
            expect = (1.0 + scene.kappa * pen) * math.hypot(r.x, r.y)
            assert effective_pathloss_tr(scene, l) == pytest.approx(expect, rel=1e-3)
            for k in range(scene.num_users):
                u = scene.users[k]
                pen = sum(oracle_penetration(r, u, ob) for ob in scene.obstacles)
                expect = (1.0 + scene.kappa * pen) * r.dist(u)
                assert effective_pathloss_ru(scene, l, k) == pytest.approx(expect, rel=1e-3)


def test_pathloss_tu_direct_link():
    scene = Scene(ris_positions=(Point2(0, 9),), users=(Point2(3, 4),))
    assert effective_pathloss_tu(scene, 0) == pytest.approx(5.0, abs=1e-12)
    rect = _square(0.6, 0.0, 1.8, 5.0)
    scene2 = Scene(ris_positions=(Point2(0, 9),), users=(Point2(3, 4),), obstacles=(rect,), kappa=0.5)
    assert effective_pathloss_tu(scene2, 0) == pytest.approx(10.0, abs=1e-9)


# --- select_ris --------------------------------------------------------------

def test_select_single_ris():
    scene = Scene(ris_positions=(Point2(5, 5),), users=(Point2(1, 1),))
    assert select_ris(scene) == 0


def test_select_dominant_ris():
    scene = Scene(
        ris_positions=(Point2(2, 0), Point2(20, 0)),
        users=(Point2(3, 1), Point2(1, -2)),
    )
    assert select_ris(scene) == 0


def test_select_empty_ris_errors():
    scene = Scene(ris_positions=(), users=(Point2(1, 1),))
    with pytest.raises(ValueError):
        select_ris(scene)


def test_select_matches_independent_bruteforce():
    rng = np.random.default_rng(42)
    for _ in range(10):
        obstacles = []
        for c in ((-7, 0), (7, 2), (0, 8), (2, -8)):
            if rng.uniform() < 0.8:
                obstacles.append(_random_convex(rng, np.array(c, float) + rng.uniform(-1, 1, 2), rng.uniform(1.0, 2.5), int(rng.integers(3, 7))))
        ris = tuple(Point2(14 * math.cos(a), 14 * math.sin(a)) for a in TWO_PI * (np.arange(6) + 0.3) / 6)
        users = tuple(Point2(*rng.uniform(-11, 11, 2)) for _ in range(4))
        try:
            scene = Scene(ris_positions=ris, users=users, obstacles=tuple(obstacles), kappa=0.6)
        except ValueError:
            continue  # rare: a random user landed inside an obstacle
        # independent brute force on sampled penetrations
        metrics = []
        for l in range(6):
            r = scene.ris_positions[l]
            pen = sum(oracle_penetration(scene.transmitter, r, ob) for ob in scene.obstacles)
            e_tr = (1 + scene.kappa * pen) * math.hypot(r.x, r.y)
            m = 0.0
            for u in scene.users:
                pen = sum(oracle_penetration(r, u, ob) for ob in scene.obstacles)
                m += e_tr * (1 + scene.kappa * pen) * r.dist(u)
            metrics.append(m)
        assert select_ris(scene) == int(np.argmin(metrics))


def test_select_scale_invariance_of_argmin():
    rng = np.random.default_rng(5)
    ris = tuple(Point2(*rng.uniform(-12, 12, 2)) for _ in range(5))
    scene = Scene(ris_positions=ris, users=tuple(Point2(*rng.uniform(-10, 10, 2)) for _ in range(3)))
    metrics = np.array([cascade_pathloss(scene, l) for l in range(5)])
    for c in (0.1, 3.0, 1e6):
        assert int(np.argmin(metrics * c)) == select_ris(scene)


def test_select_without_obstacles_reduces_to_distances():
    rng = np.random.default_rng(9)
    for _ in range(20):
        ris = tuple(Point2(*rng.uniform(-12, 12, 2)) for _ in range(4))
        users = tuple(Point2(*rng.uniform(-10, 10, 2)) for _ in range(3))
        scene = Scene(ris_positions=ris, users=users, kappa=1.3)
        dist_metric = [
            math.hypot(r.x, r.y) * sum(r.dist(u) for u in users) for r in ris
        ]
        assert select_ris(scene) == int(np.argmin(dist_metric))


# --- Scene validation & JSON -------------------------------------------------

def test_scene_rejects_user_inside_obstacle():
    with pytest.raises(ValueError):
        Scene(ris_positions=(Point2(9, 9),), users=(Point2(5, 0),), obstacles=(_square(4, -1, 6, 1),))


def test_scene_rejects_overlapping_obstacles():
    with pytest.raises(ValueError):
        Scene(
            ris_positions=(Point2(9, 9),),
            users=(Point2(-9, -9),),
            obstacles=(_square(0, 0, 2, 2), _square(1, 1, 3, 3)),
        )


def test_scene_rejects_negative_kappa():
    with pytest.raises(ValueError):
        Scene(ris_positions=(Point2(1, 1),), users=(Point2(2, 2),), kappa=-0.1)


def test_scene_json_round_trip():
    scene = Scene(
        ris_positions=(Point2(3, 4), Point2(-5, 2)),
        users=(Point2(1, -1),),
        obstacles=(_square(6, 6, 8, 8),),
        kappa=0.25,
    )
    doc = scene_to_dict(scene)
    back = scene_from_dict(doc)
    assert back == scene
    assert scene_to_dict(back) == doc
