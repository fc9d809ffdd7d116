import pytest

from cellsim.engine import EpisodeConfig
from cellsim.scenario import GenerationSpec, generate_scenario


@pytest.fixture(scope="session")
def desk_scenario():
    return generate_scenario(1, GenerationSpec.desk())


@pytest.fixture(scope="session")
def desk_config():
    return EpisodeConfig.desk()


@pytest.fixture(scope="session")
def tiny_scenario():
    # small but non-trivial: 2 outdoor sites, a handful of lanes
    spec = GenerationSpec(extent_m=(200.0, 200.0), n_lanes=14, n_aois=4,
                          n_sites_indoor=1, n_sites_outdoor=2,
                          street_width_m=10.0, node_jitter_frac=0.0,
                          n_channels=3)
    return generate_scenario(3, spec)
