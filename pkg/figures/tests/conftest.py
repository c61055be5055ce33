import pytest

SPECTRUM_CSV = """\
# wgbragg 0.1.0
# generator: "wgbragg"
# subcommand: "spectrum"
# seed: 7
# config: {"a":1.0,"neff":1.2,"omega":0.01,"n":60}
# theta_radians: 0.6435011087932843
# gamma_tilde_0: 2.828e-05
delta,rate_r
-2,0.00014569693727796409
-1,0.00024170942410134633
0,0.0014144271561744291
1,0.00024170942410131181
2,0.00014569693727798517
"""

MAP_CSV = """\
# wgbragg 0.1.0
# subcommand: "map"
# theta_gb: 0.6435011087932843
# gamma_tilde_0: 2.828e-05
theta,delta,rate_r
0.62,-1,0.0001
0.62,0,0.0002
0.62,1,0.0004
0.64,-1,0.0002
0.64,0,0.0009
0.64,1,0.0012
0.66,-1,0.0001
0.66,0,0.0003
0.66,1,0.0005
"""

MAP_OVERLAY_CSV = """\
# wgbragg 0.1.0
# subcommand: "map-overlay"
delta,theta_mb
-1,0.641
0,0.6435
1,0.646
"""

SCALING_CSV = """\
# wgbragg 0.1.0
# subcommand: "scaling"
# gamma_tilde_0: 2.828e-05
# fit_delta_max: {"exponent":0.53,"prefactor":0.13,"r_squared":0.999}
# fit_rate_max: {"exponent":1.0,"prefactor":8.8e-05,"r_squared":0.9999}
n,delta_max,rate_max,boundary_flag
50,1.04,0.0044,0
100,1.55,0.0088,0
150,1.92,0.0131,0
200,2.24,0.0175,1
"""

VOIDS_CSV = """\
# wgbragg 0.1.0
# subcommand: "voids"
# config: {"sweep":"beta"}
# gamma_tilde_0: 2.828e-05
beta_or_n,mean_rate,std_rate,robustness_r
0.05,0.00256,6.0e-06,0.996
0.475,0.00418,0.00027,0.898
0.9,0.00844,0.0047,0.345
"""


@pytest.fixture
def write_fixture(tmp_path):
    def _write(name, text):
        path = tmp_path / name
        path.write_text(text)
        return path

    return _write


@pytest.fixture
def spectrum_csv(write_fixture):
    return write_fixture("spectrum.csv", SPECTRUM_CSV)


@pytest.fixture
def map_csv(write_fixture):
    write_fixture("map_overlay.csv", MAP_OVERLAY_CSV)
    return write_fixture("map.csv", MAP_CSV)


@pytest.fixture
def scaling_csv(write_fixture):
    return write_fixture("scaling.csv", SCALING_CSV)


@pytest.fixture
def voids_csv(write_fixture):
    return write_fixture("voids.csv", VOIDS_CSV)
