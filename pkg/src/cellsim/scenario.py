"""Static world model: lane graph, areas of interest, buildings, sites, grids.

A Scenario can be synthesized from counts (perturbed Manhattan street grid
with block buildings) or loaded from the versioned JSON schema. All
geometry is in meters; powers in dBm; frequencies in MHz.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import polygon_contains, polygon_is_simple
from .rngstream import substream

SCHEMA_VERSION = 1

DEFAULT_MAX_TX_POWER_OUTDOOR_DBM = 30.0
DEFAULT_MAX_TX_POWER_INDOOR_DBM = 24.0


class ScenarioError(ValueError):
    pass


class ParseError(ScenarioError):
    """Raised when a scenario file is not syntactically valid."""


class ValidationError(ScenarioError):
    """Raised when a parsed scenario violates a structural invariant."""


class InfeasibleSpecError(ScenarioError):
    """Raised when generation counts cannot fit the extent."""


@dataclass
class LaneEdge:
    src: int
    dst: int
    length_m: float
    speed_limit_mps: float


@dataclass
class LaneGraph:
    nodes: dict  # node id -> (x, y)
    edges: dict  # lane id -> LaneEdge

    def adjacency(self):
        """Undirected adjacency: node -> list of (neighbor, lane id)."""
        adj = {n: [] for n in self.nodes}
        for lid, e in self.edges.items():
            adj[e.src].append((e.dst, lid))
            adj[e.dst].append((e.src, lid))
        return adj


@dataclass
class AoI:
    footprint: list  # [(x, y), ...]
    entrances: list  # [(x, y), ...]
    obstacles: list = field(default_factory=list)  # [[(x, y), ...], ...]


@dataclass
class Building:
    footprint: list
    height_m: float


@dataclass
class BaseStationSite:
    id: int
    position: tuple
    indoor: bool
    max_tx_power_dbm: float
    antenna_height_m: float
    azimuth_deg: float
    elevation_deg: float
    carrier_freq_mhz: float
    n_channels: int
    rb_bandwidth_hz: float

    def max_tx_power_w(self):
        return 10.0 ** (self.max_tx_power_dbm / 10.0) / 1000.0


@dataclass
class Scenario:
    area_extent: tuple  # (xmin, ymin, xmax, ymax)
    lanes: LaneGraph
    aois: list
    buildings: list
    sites: list

    @property
    def width(self):
        return self.area_extent[2] - self.area_extent[0]

    @property
    def height(self):
        return self.area_extent[3] - self.area_extent[1]


@dataclass
class GridPartition:
    cell_size_m: float
    rects: dict  # grid id -> (x0, y0, x1, y1), clipped to the extent
    site_to_grid: dict  # site id -> grid id
    shape: tuple  # (nx, ny)

    def grid_of_position(self, xy):
        nx, _ = self.shape
        gx = int(xy[0] // self.cell_size_m)
        gy = int(xy[1] // self.cell_size_m)
        return gy * nx + gx


@dataclass
class GenerationSpec:
    """Counts and knobs for synthetic scenario generation."""

    extent_m: tuple = (2000.0, 2000.0)
    n_lanes: int = 1850
    n_aois: int = 1417
    n_sites_indoor: int = 145
    n_sites_outdoor: int = 39
    street_width_m: float = 14.0
    node_jitter_frac: float = 0.05
    building_style: str = "solid"  # solid | perimeter (courtyard walls)
    site_placement: str = "mid_block"  # mid_block | intersection
    building_height_range: tuple = (12.0, 30.0)
    n_channels: int = 45
    rb_bandwidth_hz: float = 1.8e5
    carrier_freq_mhz: float = 2600.0
    outdoor_antenna_height_m: float = 8.0
    indoor_antenna_height_m: float = 3.0

    @classmethod
    def table1(cls):
        return cls()

    @classmethod
    def desk(cls):
        # Small world sized so the whole test pipeline runs in seconds.
        # Outdoor-only sites: users in the allocation experiment are street
        # movers and indoor sites would sit behind a 20 dB wall for all of
        # them.
        return cls(
            extent_m=(500.0, 500.0),
            n_lanes=50,
            n_aois=16,
            n_sites_indoor=0,
            n_sites_outdoor=10,
            street_width_m=12.0,
            node_jitter_frac=0.0,
            building_height_range=(18.0, 30.0),
            n_channels=5,
        )


PRESETS = {"table1": GenerationSpec.table1, "desk": GenerationSpec.desk}


# ---------------------------------------------------------------------------
# generation

def _choose_grid_dims(n_lanes):
    """Pick node grid dims (m, n) whose Manhattan edge count covers n_lanes.

    Requires V - 1 <= n_lanes so the trimmed graph can stay connected.
    Prefers near-square grids with small edge surplus.
    """
    best = None
    for m in range(1, 200):
        # smallest n with m*(n-1) + n*(m-1) >= n_lanes
        if m == 1:
            n = n_lanes + 1
        else:
            n = max(m, math.ceil((n_lanes + m) / (2 * m - 1)))
        while m * (n - 1) + n * (m - 1) < n_lanes:
            n += 1
        edges = m * (n - 1) + n * (m - 1)
        nodes = m * n
        if nodes - 1 > n_lanes:
            continue
        score = (edges - n_lanes) + abs(m - n)
        if best is None or score < best[0]:
            best = (score, m, n)
        if m > n:
            break
    if best is None:
        raise InfeasibleSpecError(f"no lane grid fits {n_lanes} lanes")
    return best[1], best[2]


def _spanning_tree_lane_ids(nodes, edges):
    adj = {n: [] for n in nodes}
    for lid, (a, b) in edges.items():
        adj[a].append((b, lid))
        adj[b].append((a, lid))
    seen = {next(iter(nodes))}
    tree = set()
    stack = [next(iter(nodes))]
    while stack:
        u = stack.pop()
        for v, lid in adj[u]:
            if v not in seen:
                seen.add(v)
                tree.add(lid)
                stack.append(v)
    return tree


# spread pattern for several sites sharing one street line
_LINE_FRACTIONS = (0.5, 0.2, 0.8, 0.35, 0.65, 0.1, 0.9, 0.28, 0.72, 0.45)


def _place_outdoor_sites(spec, rng, nodes, raw_edges, m, n, mid_block):
    """Pick node ids for outdoor sites, balanced across street lines.

    mid_block splits a lane near the chosen line position and puts the
    site on the inserted node, so each site faces a single street canyon;
    otherwise sites go on existing intersection nodes.
    """
    k = spec.n_sites_outdoor
    if k == 0:
        return [], raw_edges, nodes
    if not mid_block:
        if k > len(nodes):
            raise InfeasibleSpecError("more outdoor sites than lane nodes")
        order = [int(v) for v in np.array(sorted(nodes))[rng.permutation(len(nodes))]]
        row_uses = np.zeros(n, dtype=int)
        col_uses = np.zeros(m, dtype=int)
        chosen = []
        level = 0
        while len(chosen) < k:
            progressed = False
            for nid in order:
                if len(chosen) == k:
                    break
                if nid in chosen:
                    continue
                r, c = nid // m, nid % m
                if row_uses[r] <= level and col_uses[c] <= level:
                    chosen.append(nid)
                    row_uses[r] += 1
                    col_uses[c] += 1
                    progressed = True
            if not progressed:
                level += 1
        return chosen, raw_edges, nodes

    line_edges = {}
    for lid, (_, _, line, along) in raw_edges.items():
        line_edges.setdefault(line, []).append((along, lid))
    lines = sorted(line_edges)
    lines = [lines[i] for i in rng.permutation(len(lines))]
    line_uses = {ln: 0 for ln in lines}
    split_done = set()
    next_node = max(nodes) + 1
    next_edge = max(raw_edges) + 1
    chosen = []
    for _ in range(k):
        ln = min(lines, key=lambda l: line_uses[l])
        span = m - 1 if ln[0] == "row" else n - 1
        frac = _LINE_FRACTIONS[line_uses[ln] % len(_LINE_FRACTIONS)]
        target = frac * span
        cands = [(abs(along + 0.5 - target), along, lid)
                 for along, lid in line_edges[ln] if lid not in split_done]
        if not cands:
            # line exhausted; fall back to the least-used remaining line
            line_uses[ln] += 100
            ln = min(lines, key=lambda l: line_uses[l])
            cands = [(abs(along + 0.5 - frac * span), along, lid)
                     for along, lid in line_edges[ln] if lid not in split_done]
            if not cands:
                raise InfeasibleSpecError("not enough lanes to host mid-block sites")
        _, along, lid = min(cands)
        a, b, line, _ = raw_edges[lid]
        ax, ay = nodes[a]
        bx, by = nodes[b]
        w_id = next_node
        next_node += 1
        nodes[w_id] = ((ax + bx) / 2.0, (ay + by) / 2.0)
        del raw_edges[lid]
        line_edges[line].remove((along, lid))
        raw_edges[next_edge] = (a, w_id, line, along)
        split_done.add(next_edge)
        next_edge += 1
        raw_edges[next_edge] = (w_id, b, line, along)
        split_done.add(next_edge)
        next_edge += 1
        chosen.append(w_id)
        line_uses[ln] += 1
    return chosen, raw_edges, nodes


def _inset_rect(x0, y0, x1, y1, inset):
    return [(x0 + inset, y0 + inset), (x1 - inset, y0 + inset),
            (x1 - inset, y1 - inset), (x0 + inset, y1 - inset)]


def _split_rect(rect, k):
    """Split an axis-aligned rect polygon into k in {1,2,3,4} sub-rects."""
    (x0, y0), _, (x1, y1), _ = rect
    xm, ym = (x0 + x1) / 2, (y0 + y1) / 2
    if k == 1:
        return [rect]
    if k == 2:
        if (x1 - x0) >= (y1 - y0):
            return [[(x0, y0), (xm, y0), (xm, y1), (x0, y1)],
                    [(xm, y0), (x1, y0), (x1, y1), (xm, y1)]]
        return [[(x0, y0), (x1, y0), (x1, ym), (x0, ym)],
                [(x0, ym), (x1, ym), (x1, y1), (x0, y1)]]
    quads = [[(x0, y0), (xm, y0), (xm, ym), (x0, ym)],
             [(xm, y0), (x1, y0), (x1, ym), (xm, ym)],
             [(x0, ym), (xm, ym), (xm, y1), (x0, y1)],
             [(xm, ym), (x1, ym), (x1, y1), (xm, y1)]]
    if k == 3:
        return [[(x0, y0), (x1, y0), (x1, ym), (x0, ym)]] + quads[2:]
    return quads


def generate_scenario(seed, spec=None):
    """Synthesize a Scenario from counts; pure function of (seed, spec)."""
    spec = spec or GenerationSpec()
    w, h = spec.extent_m
    if w <= 0 or h <= 0:
        raise InfeasibleSpecError("extent must have positive area")
    if spec.n_lanes < 1 or spec.n_aois < 1 or (spec.n_sites_indoor + spec.n_sites_outdoor) < 1:
        raise InfeasibleSpecError("lane, AoI and site counts must be positive")

    rng = substream(seed, "scenario")
    mid_block = spec.site_placement == "mid_block" and spec.n_sites_outdoor > 0
    base_lanes = spec.n_lanes - (spec.n_sites_outdoor if mid_block else 0)
    if base_lanes < 1:
        raise InfeasibleSpecError("too few lanes for mid-block site placement")
    m, n = _choose_grid_dims(base_lanes)
    if mid_block and (m < 3 or n < 3):
        mid_block = False
        base_lanes = spec.n_lanes
        m, n = _choose_grid_dims(base_lanes)

    # node lattice (m columns, n rows), mild interior jitter
    sx = w / max(m - 1, 1)
    sy = h / max(n - 1, 1)
    nodes = {}
    for j in range(n):
        for i in range(m):
            x = i * sx if m > 1 else w / 2
            y = j * sy if n > 1 else h / 2
            if spec.node_jitter_frac > 0 and 0 < i < m - 1 and 0 < j < n - 1:
                x += rng.uniform(-spec.node_jitter_frac, spec.node_jitter_frac) * sx
                y += rng.uniform(-spec.node_jitter_frac, spec.node_jitter_frac) * sy
            nodes[j * m + i] = (float(x), float(y))

    # raw edge -> (endpoints, street line, position along the line)
    raw_edges = {}
    lid = 0
    for j in range(n):
        for i in range(m):
            u = j * m + i
            if i + 1 < m:
                raw_edges[lid] = (u, u + 1, ("row", j), i)
                lid += 1
            if j + 1 < n:
                raw_edges[lid] = (u, u + m, ("col", i), j)
                lid += 1
    surplus = len(raw_edges) - base_lanes
    if surplus > 0:
        tree = _spanning_tree_lane_ids(nodes, {k: v[:2] for k, v in raw_edges.items()})
        removable = np.array(sorted(set(raw_edges) - tree))
        drop = set(rng.choice(removable, size=surplus, replace=False).tolist())
        raw_edges = {k: v for k, v in raw_edges.items() if k not in drop}

    outdoor_nodes, raw_edges, nodes = _place_outdoor_sites(
        spec, rng, nodes, raw_edges, m, n, mid_block)

    edges = {}
    for new_id, old_id in enumerate(sorted(raw_edges)):
        a, b = raw_edges[old_id][:2]
        ax, ay = nodes[a]
        bx, by = nodes[b]
        edges[new_id] = LaneEdge(a, b, float(math.hypot(bx - ax, by - ay)),
                                 float(rng.uniform(8.3, 16.7)))
    lanes = LaneGraph(nodes=nodes, edges=edges)

    # blocks between street centerlines host the AoIs / buildings
    blocks = []
    if m > 1 and n > 1:
        for j in range(n - 1):
            for i in range(m - 1):
                blocks.append((i * sx, j * sy, (i + 1) * sx, (j + 1) * sy))
    if not blocks:
        raise InfeasibleSpecError("lane grid too small to host AoIs")
    if spec.n_aois > 4 * len(blocks):
        raise InfeasibleSpecError(
            f"{spec.n_aois} AoIs cannot fit {len(blocks)} blocks (max 4 per block)")

    per_block = np.full(len(blocks), spec.n_aois // len(blocks), dtype=int)
    per_block[: spec.n_aois % len(blocks)] += 1
    inset = spec.street_width_m / 2.0
    aois = []
    buildings = []
    hmin, hmax = spec.building_height_range
    for (bx0, by0, bx1, by1), k in zip(blocks, per_block):
        if k == 0:
            continue
        outer = _inset_rect(bx0, by0, bx1, by1, inset)
        if outer[1][0] - outer[0][0] < 4 or outer[2][1] - outer[1][1] < 4:
            raise InfeasibleSpecError("street width leaves no room for AoIs in a block")
        for rect in _split_rect(outer, int(k)):
            (x0, y0), _, (x1, y1), _ = rect
            entrances = [((x0 + x1) / 2, y0), (x1, (y0 + y1) / 2)]
            obstacles = []
            if (x1 - x0) > 12 and (y1 - y0) > 12:
                cx, cy = (x0 + x1) / 2, (y0 + y1) / 2
                ox, oy = (x1 - x0) / 8, (y1 - y0) / 8
                obstacles = [[(cx - ox, cy - oy), (cx + ox, cy - oy),
                              (cx + ox, cy + oy), (cx - ox, cy + oy)]]
            aois.append(AoI(footprint=rect, entrances=entrances, obstacles=obstacles))
            h_b = float(rng.uniform(hmin, hmax))
            if spec.building_style == "perimeter":
                # courtyard morphology: four wall slabs on the AoI boundary
                wall = min(6.0, 0.2 * min(x1 - x0, y1 - y0))
                buildings.extend(Building(footprint=fp, height_m=h_b) for fp in (
                    [(x0, y1 - wall), (x1, y1 - wall), (x1, y1), (x0, y1)],
                    [(x0, y0), (x1, y0), (x1, y0 + wall), (x0, y0 + wall)],
                    [(x0, y0 + wall), (x0 + wall, y0 + wall), (x0 + wall, y1 - wall), (x0, y1 - wall)],
                    [(x1 - wall, y0 + wall), (x1, y0 + wall), (x1, y1 - wall), (x1 - wall, y1 - wall)],
                ))
            else:
                buildings.append(Building(footprint=rect, height_m=h_b))

    sites = []
    site_id = 0
    for nid in outdoor_nodes:
        sites.append(BaseStationSite(
            id=site_id, position=nodes[nid], indoor=False,
            max_tx_power_dbm=DEFAULT_MAX_TX_POWER_OUTDOOR_DBM,
            antenna_height_m=spec.outdoor_antenna_height_m,
            azimuth_deg=float(rng.uniform(0, 360)), elevation_deg=0.0,
            carrier_freq_mhz=spec.carrier_freq_mhz,
            n_channels=spec.n_channels, rb_bandwidth_hz=spec.rb_bandwidth_hz))
        site_id += 1

    if spec.n_sites_indoor > len(aois):
        raise InfeasibleSpecError("more indoor sites than AoIs")
    for ai in rng.permutation(len(aois))[: spec.n_sites_indoor]:
        fp = aois[int(ai)].footprint
        cx = sum(p[0] for p in fp) / len(fp)
        cy = sum(p[1] for p in fp) / len(fp)
        sites.append(BaseStationSite(
            id=site_id, position=(cx, cy), indoor=True,
            max_tx_power_dbm=DEFAULT_MAX_TX_POWER_INDOOR_DBM,
            antenna_height_m=spec.indoor_antenna_height_m,
            azimuth_deg=float(rng.uniform(0, 360)), elevation_deg=0.0,
            carrier_freq_mhz=spec.carrier_freq_mhz,
            n_channels=spec.n_channels, rb_bandwidth_hz=spec.rb_bandwidth_hz))
        site_id += 1

    scen = Scenario(area_extent=(0.0, 0.0, float(w), float(h)),
                    lanes=lanes, aois=aois, buildings=buildings, sites=sites)
    validate_scenario(scen)
    return scen


# ---------------------------------------------------------------------------
# validation

def _in_extent(extent, xy, tol=1e-6):
    x0, y0, x1, y1 = extent
    return x0 - tol <= xy[0] <= x1 + tol and y0 - tol <= xy[1] <= y1 + tol


def validate_scenario(scen):
    """Check every structural invariant; raise naming the first violation."""
    x0, y0, x1, y1 = scen.area_extent
    if not (x1 > x0 and y1 > y0):
        raise ValidationError("extent: area_extent must have positive area")
    if len(scen.lanes.edges) < 1:
        raise ValidationError("counts: lane count must be positive")
    if len(scen.aois) < 1:
        raise ValidationError("counts: AoI count must be positive")
    if len(scen.sites) < 1:
        raise ValidationError("counts: site count must be positive")

    ids = [s.id for s in scen.sites]
    if len(set(ids)) != len(ids):
        raise ValidationError("sites: site identifiers must be unique")

    for nid, pos in scen.lanes.nodes.items():
        if not _in_extent(scen.area_extent, pos):
            raise ValidationError(f"extent: lane node {nid} outside area_extent")
    for lid, e in scen.lanes.edges.items():
        if e.src not in scen.lanes.nodes or e.dst not in scen.lanes.nodes:
            raise ValidationError(f"lanes: lane {lid} references unknown node")
        ax, ay = scen.lanes.nodes[e.src]
        bx, by = scen.lanes.nodes[e.dst]
        if e.length_m < math.hypot(bx - ax, by - ay) - 1e-6:
            raise ValidationError(f"lanes: lane {lid} shorter than endpoint distance")
        if e.speed_limit_mps <= 0:
            raise ValidationError(f"lanes: lane {lid} speed limit must be positive")

    # connectivity of the largest component
    adj = scen.lanes.adjacency()
    seen = set()
    best = 0
    for start in scen.lanes.nodes:
        if start in seen:
            continue
        comp = {start}
        stack = [start]
        seen.add(start)
        while stack:
            u = stack.pop()
            for v, _ in adj[u]:
                if v not in seen:
                    seen.add(v)
                    comp.add(v)
                    stack.append(v)
        best = max(best, len(comp))
    if best < 0.9 * len(scen.lanes.nodes):
        raise ValidationError("lanes: largest connected component covers <90% of nodes")

    for i, aoi in enumerate(scen.aois):
        if not polygon_is_simple(aoi.footprint):
            raise ValidationError(f"aois: AoI {i} footprint is not a simple polygon")
        if len(aoi.entrances) < 1:
            raise ValidationError(f"aois: AoI {i} has no entrance")
        for j, obs in enumerate(aoi.obstacles):
            if not polygon_contains(aoi.footprint, obs):
                raise ValidationError(
                    f"aois: AoI {i} obstacle {j} not contained in footprint")
        for pt in aoi.footprint:
            if not _in_extent(scen.area_extent, pt):
                raise ValidationError(f"extent: AoI {i} footprint outside area_extent")

    for i, b in enumerate(scen.buildings):
        if not polygon_is_simple(b.footprint):
            raise ValidationError(f"buildings: building {i} footprint not simple")
        if b.height_m <= 0:
            raise ValidationError(f"buildings: building {i} height must be positive")

    for s in scen.sites:
        if not _in_extent(scen.area_extent, s.position):
            raise ValidationError(f"extent: site {s.id} outside area_extent")
        if s.n_channels < 1:
            raise ValidationError(f"sites: site {s.id} must have >= 1 channel")
        if s.carrier_freq_mhz <= 0:
            raise ValidationError(f"sites: site {s.id} carrier frequency must be positive")
        if s.rb_bandwidth_hz <= 0:
            raise ValidationError(f"sites: site {s.id} RB bandwidth must be positive")
    return scen


# ---------------------------------------------------------------------------
# JSON schema (version 1)

def scenario_to_dict(scen):
    return {
        "schema_version": SCHEMA_VERSION,
        "extent": list(scen.area_extent),
        "lanes": {
            "nodes": [{"id": nid, "x": p[0], "y": p[1]}
                      for nid, p in sorted(scen.lanes.nodes.items())],
            "edges": [{"id": lid, "from": e.src, "to": e.dst,
                       "length_m": e.length_m, "speed_limit_mps": e.speed_limit_mps}
                      for lid, e in sorted(scen.lanes.edges.items())],
        },
        "aois": [{"footprint": [list(p) for p in a.footprint],
                  "entrances": [list(p) for p in a.entrances],
                  "obstacles": [[list(p) for p in o] for o in a.obstacles]}
                 for a in scen.aois],
        "buildings": [{"footprint": [list(p) for p in b.footprint],
                       "height_m": b.height_m} for b in scen.buildings],
        "sites": [{"id": s.id, "position": list(s.position), "indoor": s.indoor,
                   "max_tx_power_dbm": s.max_tx_power_dbm,
                   "antenna_height_m": s.antenna_height_m,
                   "azimuth_deg": s.azimuth_deg, "elevation_deg": s.elevation_deg,
                   "carrier_freq_mhz": s.carrier_freq_mhz,
                   "n_channels": s.n_channels,
                   "rb_bandwidth_hz": s.rb_bandwidth_hz} for s in scen.sites],
    }


def scenario_from_dict(doc):
    try:
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise ParseError(f"unsupported schema_version {doc.get('schema_version')!r}")
        extent = tuple(float(v) for v in doc["extent"])
        nodes = {int(nd["id"]): (float(nd["x"]), float(nd["y"]))
                 for nd in doc["lanes"]["nodes"]}
        edges = {int(ed["id"]): LaneEdge(int(ed["from"]), int(ed["to"]),
                                         float(ed["length_m"]), float(ed["speed_limit_mps"]))
                 for ed in doc["lanes"]["edges"]}
        aois = [AoI(footprint=[tuple(map(float, p)) for p in a["footprint"]],
                    entrances=[tuple(map(float, p)) for p in a["entrances"]],
                    obstacles=[[tuple(map(float, p)) for p in o] for o in a.get("obstacles", [])])
                for a in doc["aois"]]
        buildings = [Building(footprint=[tuple(map(float, p)) for p in b["footprint"]],
                              height_m=float(b["height_m"])) for b in doc["buildings"]]
        sites = [BaseStationSite(
            id=int(s["id"]), position=tuple(map(float, s["position"])),
            indoor=bool(s["indoor"]), max_tx_power_dbm=float(s["max_tx_power_dbm"]),
            antenna_height_m=float(s["antenna_height_m"]),
            azimuth_deg=float(s["azimuth_deg"]), elevation_deg=float(s["elevation_deg"]),
            carrier_freq_mhz=float(s["carrier_freq_mhz"]),
            n_channels=int(s["n_channels"]), rb_bandwidth_hz=float(s["rb_bandwidth_hz"]))
            for s in doc["sites"]]
    except ParseError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed scenario document: {exc}") from exc
    scen = Scenario(area_extent=extent, lanes=LaneGraph(nodes, edges),
                    aois=aois, buildings=buildings, sites=sites)
    validate_scenario(scen)
    return scen


def save_scenario(scen, path):
    """Write canonical (byte-stable) schema-version-1 JSON."""
    data = json.dumps(scenario_to_dict(scen), sort_keys=True, separators=(",", ":"))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(data)
        fh.write("\n")


def load_scenario(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot parse scenario file {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError("scenario document must be a JSON object")
    return scenario_from_dict(doc)


# ---------------------------------------------------------------------------
# grid partition

def build_grid(scen, cell_size_m=500.0):
    """Tile the extent with cell_size_m squares and assign sites to grids.

    Boundary grids are clipped so the union of rectangles equals the extent
    exactly.
    """
    if cell_size_m <= 0:
        raise ValueError("cell_size_m must be positive")
    x0, y0, x1, y1 = scen.area_extent
    nx = int(math.ceil((x1 - x0) / cell_size_m))
    ny = int(math.ceil((y1 - y0) / cell_size_m))
    rects = {}
    for gy in range(ny):
        for gx in range(nx):
            rects[gy * nx + gx] = (
                x0 + gx * cell_size_m, y0 + gy * cell_size_m,
                min(x0 + (gx + 1) * cell_size_m, x1),
                min(y0 + (gy + 1) * cell_size_m, y1))
    site_to_grid = {}
    for s in scen.sites:
        gx = min(int((s.position[0] - x0) // cell_size_m), nx - 1)
        gy = min(int((s.position[1] - y0) // cell_size_m), ny - 1)
        site_to_grid[s.id] = gy * nx + gx
    return GridPartition(cell_size_m=float(cell_size_m), rects=rects,
                         site_to_grid=site_to_grid, shape=(nx, ny))
