import json
import math

import numpy as np
import pytest

from cellsim.scenario import (GenerationSpec, InfeasibleSpecError, ParseError,
                              ValidationError, build_grid, generate_scenario,
                              load_scenario, save_scenario, scenario_from_dict)

MINIMAL_DOC = {
    "schema_version": 1,
    "extent": [0.0, 0.0, 100.0, 100.0],
    "lanes": {
        "nodes": [{"id": 0, "x": 0.0, "y": 0.0}, {"id": 1, "x": 100.0, "y": 0.0}],
        "edges": [{"id": 0, "from": 0, "to": 1, "length_m": 100.0,
                   "speed_limit_mps": 10.0}],
    },
    "aois": [{"footprint": [[10, 10], [40, 10], [40, 40], [10, 40]],
              "entrances": [[25, 10]],
              "obstacles": [[[20, 20], [30, 20], [30, 30], [20, 30]]]}],
    "buildings": [{"footprint": [[10, 10], [40, 10], [40, 40], [10, 40]],
                   "height_m": 12.0}],
    "sites": [{"id": 0, "position": [50.0, 50.0], "indoor": False,
               "max_tx_power_dbm": 30.0, "antenna_height_m": 8.0,
               "azimuth_deg": 0.0, "elevation_deg": 0.0,
               "carrier_freq_mhz": 2600.0, "n_channels": 3,
               "rb_bandwidth_hz": 1.8e5}],
}


def test_minimal_document_roundtrip_counts():
    scen = scenario_from_dict(MINIMAL_DOC)
    assert len(scen.lanes.edges) == 1
    assert len(scen.aois) == 1
    assert len(scen.sites) == 1


def test_obstacle_outside_footprint_rejected():
    doc = json.loads(json.dumps(MINIMAL_DOC))
    doc["aois"][0]["obstacles"] = [[[90, 90], [99, 90], [99, 99], [90, 99]]]
    with pytest.raises(ValidationError, match="contained"):
        scenario_from_dict(doc)


def test_malformed_file_is_parse_error(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ParseError):
        load_scenario(path)


def test_missing_key_is_parse_error():
    doc = json.loads(json.dumps(MINIMAL_DOC))
    del doc["sites"]
    with pytest.raises(ParseError):
        scenario_from_dict(doc)


def test_save_load_roundtrip_field_for_field(tmp_path, desk_scenario):
    path = tmp_path / "scenario.json"
    save_scenario(desk_scenario, path)
    again = load_scenario(path)
    assert again == desk_scenario


def test_save_is_byte_stable(tmp_path, desk_scenario):
    p1 = tmp_path / "a.json"
    p2 = tmp_path / "b.json"
    save_scenario(desk_scenario, p1)
    save_scenario(desk_scenario, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_generate_table1_counts():
    scen = generate_scenario(1, GenerationSpec.table1())
    assert len(scen.lanes.edges) == 1850
    assert len(scen.aois) == 1417
    assert len(scen.sites) == 184
    assert sum(s.indoor for s in scen.sites) == 145
    assert sum(not s.indoor for s in scen.sites) == 39


def test_generate_is_pure_function_of_seed():
    a = generate_scenario(5, GenerationSpec.desk())
    b = generate_scenario(5, GenerationSpec.desk())
    assert a == b
    c = generate_scenario(6, GenerationSpec.desk())
    assert c != a


def test_generate_zero_area_extent_infeasible():
    with pytest.raises(InfeasibleSpecError):
        generate_scenario(1, GenerationSpec(extent_m=(0.0, 1000.0)))


def test_generate_too_many_aois_infeasible():
    spec = GenerationSpec.desk()
    spec.n_aois = 10000
    with pytest.raises(InfeasibleSpecError):
        generate_scenario(1, spec)


def test_default_power_levels(desk_scenario):
    scen = generate_scenario(1, GenerationSpec.table1())
    for s in scen.sites:
        assert s.max_tx_power_dbm == (24.0 if s.indoor else 30.0)


def test_lane_lengths_at_least_euclidean():
    scen = generate_scenario(2, GenerationSpec.table1())
    for e in scen.lanes.edges.values():
        ax, ay = scen.lanes.nodes[e.src]
        bx, by = scen.lanes.nodes[e.dst]
        assert e.length_m >= math.hypot(bx - ax, by - ay) - 1e-6
        assert 8.3 <= e.speed_limit_mps <= 16.7


def test_build_grid_counts(desk_scenario):
    scen = generate_scenario(1, GenerationSpec.table1())
    assert len(build_grid(scen, 500.0).rects) == 16
    assert len(build_grid(scen, 300.0).rects) == 49  # ceil(2000/300)^2 = 7^2


def test_build_grid_site_containment(desk_scenario):
    grid = build_grid(desk_scenario, 100.0)
    for s in desk_scenario.sites:
        x0, y0, x1, y1 = grid.rects[grid.site_to_grid[s.id]]
        assert x0 <= s.position[0] <= x1
        assert y0 <= s.position[1] <= y1
    # a site at (10, 10) belongs to the corner grid
    assert grid.grid_of_position((10.0, 10.0)) == 0


def test_grid_tiles_extent_exactly(desk_scenario):
    for cell in (90.0, 125.0, 500.0):
        grid = build_grid(desk_scenario, cell)
        area = sum((x1 - x0) * (y1 - y0) for x0, y0, x1, y1 in grid.rects.values())
        ex = desk_scenario.area_extent
        assert area == pytest.approx((ex[2] - ex[0]) * (ex[3] - ex[1]), rel=1e-12)
        rects = list(grid.rects.values())
        for i in range(len(rects)):
            for j in range(i + 1, len(rects)):
                a, b = rects[i], rects[j]
                ox = max(0.0, min(a[2], b[2]) - max(a[0], b[0]))
                oy = max(0.0, min(a[3], b[3]) - max(a[1], b[1]))
                assert ox * oy == 0.0


def test_build_grid_rejects_nonpositive_cell(desk_scenario):
    with pytest.raises(ValueError):
        build_grid(desk_scenario, 0.0)
