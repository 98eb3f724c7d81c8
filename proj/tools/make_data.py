#!/usr/bin/env python3
"""Regenerates the bundled networks, histograms and scenario files under data/.

Demand files are produced afterwards with `idmgym build-demand` (see README).
"""
import json
import math
import os
import sys

ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "data")
LANE_WIDTH = 3.5


def dump(path, obj):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w") as f:
        json.dump(obj, f, indent=2)
        f.write("\n")


def lane(lid, pts, successors=(), left=None, right=None):
    return {"id": lid, "centerline": [[round(x, 9), round(y, 9)] for x, y in pts],
            "width": LANE_WIDTH, "successors": list(successors), "left": left, "right": right}


def offset_polyline(pts, d):
    """Parallel polyline at lateral offset d (left positive), mitred at vertices."""
    out = []
    for i, (x, y) in enumerate(pts):
        tangents = []
        if i > 0:
            tangents.append((x - pts[i - 1][0], y - pts[i - 1][1]))
        if i + 1 < len(pts):
            tangents.append((pts[i + 1][0] - x, pts[i + 1][1] - y))
        units = [(tx / math.hypot(tx, ty), ty / math.hypot(tx, ty)) for tx, ty in tangents]
        nx = sum(-u[1] for u in units)
        ny = sum(u[0] for u in units)
        norm = math.hypot(nx, ny)
        nx, ny = nx / norm, ny / norm
        # Keep the offset distance exact along both adjoining segments.
        scale = d / (nx * -units[0][1] + ny * units[0][0])
        out.append((x + nx * scale, y + ny * scale))
    return out


def highway(name, centre):
    ids = [f"{name}_r", f"{name}_m", f"{name}_l"]
    lanes = []
    for k, lid in enumerate(ids):
        pts = offset_polyline(centre, (k - 1) * LANE_WIDTH)
        lanes.append(lane(lid, pts, left=ids[k + 1] if k < 2 else None, right=ids[k - 1] if k > 0 else None))
    return {"lanes": lanes, "sources": ids, "sinks": ids}


def urban_grid(n=3, spacing=200.0, stub=100.0):
    """n x n node grid of one-way pairs, two lanes per direction, with entry and
    exit stubs at the mid-boundary nodes."""
    nodes = {(i, j): (i * spacing, j * spacing) for i in range(n) for j in range(n)}
    edges = []
    for (i, j) in nodes:
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            if (i + di, j + dj) in nodes:
                edges.append(((i, j), (i + di, j + dj)))
    mid = n // 2
    stubs = {(mid, 0): (0, -1), (mid, n - 1): (0, 1), (0, mid): (-1, 0), (n - 1, mid): (1, 0)}
    for node, (di, dj) in stubs.items():
        outer = ("stub", node)
        x, y = nodes[node]
        nodes[outer] = (x + di * stub, y + dj * stub)
        edges.append((outer, node))
        edges.append((node, outer))

    def name(node):
        return f"s{node[1][0]}{node[1][1]}" if node[0] == "stub" else f"n{node[0]}{node[1]}"

    def edge_lanes(u, v):
        return [f"{name(u)}_{name(v)}_{k}" for k in range(2)]

    lanes, sources, sinks = [], [], []
    for u, v in edges:
        (x0, y0), (x1, y1) = nodes[u], nodes[v]
        ids = edge_lanes(u, v)
        for k in range(2):
            # k = 0 outer (rightmost), k = 1 inner; both right of the road centre.
            d = -(1.5 - k) * LANE_WIDTH
            pts = offset_polyline([(x0, y0), (x1, y1)], d)
            succ = [edge_lanes(a, b)[k] for a, b in edges if a == v and b != u]
            lanes.append(lane(ids[k], pts, succ, left=ids[1] if k == 0 else None, right=ids[0] if k == 1 else None))
        if u[0] == "stub":
            sources += ids
        if v[0] == "stub":
            sinks += ids
    return {"lanes": lanes, "sources": sources, "sinks": sinks}


def symmetric_hist(mean, half_width, n_bins=10):
    """Triangular masses on equal-width bins centred on `mean`."""
    edges = [mean - half_width + 2 * half_width * i / n_bins for i in range(n_bins + 1)]
    weights = [min(i + 1, n_bins - i) for i in range(n_bins)]
    total = sum(weights)
    return [{"lo": edges[i], "hi": edges[i + 1], "mass": weights[i] / total} for i in range(n_bins)]


def bimodal_hist(lo, hi, peaks, spread, n_bins):
    edges = [lo + (hi - lo) * i / n_bins for i in range(n_bins + 1)]
    weights = []
    for i in range(n_bins):
        c = 0.5 * (edges[i] + edges[i + 1])
        weights.append(sum(math.exp(-0.5 * ((c - p) / spread) ** 2) for p in peaks))
    total = sum(weights)
    return [{"lo": edges[i], "hi": edges[i + 1], "mass": weights[i] / total} for i in range(n_bins)]


def main():
    hw_straight = highway("hw", [(0.0, 0.0), (4000.0, 0.0)])
    bend = [(0.0, 0.0), (1500.0, 0.0), (1500.0 + 2500.0 * math.cos(math.radians(20)), 2500.0 * math.sin(math.radians(20)))]
    hw_bend = highway("hb", bend)
    grid = urban_grid()
    dump(os.path.join(ROOT, "networks", "highway_straight.json"), hw_straight)
    dump(os.path.join(ROOT, "networks", "highway_bend.json"), hw_bend)
    dump(os.path.join(ROOT, "networks", "urban_grid.json"), grid)

    highway_hist = {
        "a_max": symmetric_hist(1.2, 0.4),
        "a_comf": symmetric_hist(2.0, 0.6),
        "v_des": symmetric_hist(29.7, 3.0),
        "d_min": symmetric_hist(63.9, 8.0),
        "T": symmetric_hist(2.0, 0.4),
        "delta": symmetric_hist(4.0, 0.4),
    }
    urban_hist = dict(highway_hist)
    urban_hist["v_des"] = bimodal_hist(16.0, 22.0, (18.0, 20.0), 0.5, 12)
    urban_hist["d_min"] = symmetric_hist(30.0, 15.0)
    dump(os.path.join(ROOT, "histograms", "highway.json"), highway_hist)
    dump(os.path.join(ROOT, "histograms", "urban.json"), urban_hist)

    def scenario(kind, net, demand, seed, ego, max_steps):
        return {"kind": kind, "network_file": f"../networks/{net}.json", "demand_file": f"../demands/{demand}.json",
                "dt": 0.1, "max_steps": max_steps, "seed": seed, "ego": ego}

    scen = os.path.join(ROOT, "scenarios")
    dump(os.path.join(scen, "highway_straight.json"),
         scenario("highway", "highway_straight", "highway_straight", 11, {"lane": "hw_m", "s": 50.0, "speed": 25.0}, 1000))
    dump(os.path.join(scen, "highway_bend.json"),
         scenario("highway", "highway_bend", "highway_bend", 12, {"lane": "hb_m", "s": 50.0, "speed": 25.0}, 1000))
    dump(os.path.join(scen, "urban_light.json"),
         scenario("urban", "urban_grid", "urban_light", 21, {"lane": "s10_n10_0", "s": 20.0, "speed": 10.0}, 600))
    dump(os.path.join(scen, "urban_dense.json"),
         scenario("urban", "urban_grid", "urban_dense", 22, {"lane": "s10_n10_0", "s": 20.0, "speed": 10.0}, 600))
    print(f"urban grid lanes: {len(grid['lanes'])}", file=sys.stderr)


if __name__ == "__main__":
    main()
