import pytest
from hypothesis import given, settings, strategies as st

from mtflock.config import RunConfig, load_config, parse_config, shipped_config
from mtflock.errors import ConfigError, ParseError, UnknownKey, ValidationError

MINIMAL = """
# only what differs from the defaults
[kernel]
r = 0.2
"""


def test_minimal_file_fills_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.kernel.r == 0.2
    d = RunConfig()
    assert cfg.grid == d.grid and cfg.time == d.time and cfg.particles == d.particles
    assert cfg.kernel.profile == "triangle" and cfg.kernel.lam == 1.0
    assert cfg.init.name == "two_bumps"
    # an empty file is valid too
    assert parse_config("") == RunConfig()


def test_negative_r_is_rejected_with_key_and_reason():
    with pytest.raises(ValidationError) as info:
        parse_config("[kernel]\nr = -0.1\n")
    exc = info.value
    assert exc.key == "kernel.r"
    assert exc.reason == "must be > 0 or 0 for local mode"
    assert exc.line == 2


def test_duplicate_key_names_both_lines():
    text = "[grid]\nNx = 64\n# again\nNx = 128\n"
    with pytest.raises(ParseError) as info:
        parse_config(text)
    msg = str(info.value)
    assert info.value.line == 4
    assert "line 2" in msg and "line 4" in msg


def test_unknown_keys_and_sections():
    with pytest.raises(UnknownKey) as info:
        parse_config("[grid]\nNx = 64\nNy = 64\n")
    assert info.value.key == "grid.ny" and info.value.line == 3
    with pytest.raises(UnknownKey):
        parse_config("[gird]\nNx = 64\n")
    with pytest.raises(UnknownKey):
        parse_config("[init]\nname = riemann\nx1 = 0.1\n")


@pytest.mark.parametrize("text,key", [
    ("[grid]\nNx = 12.5\n", "grid.Nx"),
    ("[grid]\nLx = -1\n", "grid.Lx"),
    ("[time]\ncfl = 1.5\n", "time.cfl"),
    ("[time]\nlimiter = superbee\n", "time.limiter"),
    ("[kernel]\nprofile = gauss\n", "kernel.profile"),
    ("[kernel]\nalignment = maybe\n", "kernel.alignment"),
    ("[sweep]\nq = 2\n", "sweep.q"),
    ("[sweep]\nr_list = 0.1, x\n", "sweep.r_list"),
    ("[particles]\ndim = 3\n", "particles.dim"),
    ("[diagnostics]\np = 1\n", "diagnostics.p"),
])
def test_range_checks(text, key):
    with pytest.raises(ValidationError) as info:
        parse_config(text)
    assert info.value.key == key
    assert info.value.line == 2


def test_malformed_lines():
    with pytest.raises(ParseError):
        parse_config("Nx = 3\n")
    with pytest.raises(ParseError) as info:
        parse_config("[grid]\nthis is not a key\n")
    assert info.value.line == 2
    assert issubclass(ParseError, ConfigError) and ConfigError.exit_code == 2


def test_lambda_and_inline_comments():
    cfg = parse_config("[kernel]\nlambda = 0.25  # weaker coupling\nbeta = 0\n")
    assert cfg.kernel.lam == 0.25
    # beta = 0 selects the flat influence
    assert cfg.influence()(3.0) == 0.25


@pytest.mark.parametrize("name", ["two_bumps", "sweep", "cross_validation", "local",
                                  "free_transport"])
def test_shipped_configs_round_trip(name):
    cfg = load_config(shipped_config(name))
    again = parse_config(cfg.to_text())
    assert again == cfg
    assert again.digest() == cfg.digest()


def test_digest_tracks_content():
    a = parse_config(MINIMAL)
    b = parse_config("[kernel]\nr = 0.2000001\n")
    assert a.digest() != b.digest()
    assert a.digest() == parse_config(MINIMAL + "\n# trailing comment\n").digest()


def test_builders_follow_the_mode():
    local = load_config(shipped_config("local"))
    assert local.mollifier() is None and local.scheme().mode == "local"
    free = load_config(shipped_config("free_transport"))
    assert free.scheme().mode == "off"
    mt = load_config(shipped_config("two_bumps"))
    assert mt.scheme().mode == "mt" and mt.scheme(r=0.0).mode == "local"


@settings(max_examples=40, deadline=None)
@given(r=st.floats(0.05, 1.0), lam=st.floats(0, 10), beta=st.floats(0, 4),
       nx=st.integers(8, 512), cfl=st.floats(0.01, 0.99), seed=st.integers(0, 2 ** 31),
       r_list=st.lists(st.floats(0, 1), min_size=1, max_size=6),
       policy=st.sampled_from(["adaptive", "bound"]), align=st.booleans())
def test_round_trip_property(r, lam, beta, nx, cfl, seed, r_list, policy, align):
    cfg = RunConfig()
    cfg.kernel.r, cfg.kernel.lam, cfg.kernel.beta, cfg.kernel.alignment = r, lam, beta, align
    cfg.grid.Nx, cfg.time.cfl, cfg.time.dt_policy = nx, cfl, policy
    cfg.particles.seed = seed
    cfg.sweep.r_list = tuple(r_list)
    assert parse_config(cfg.to_text()) == cfg
