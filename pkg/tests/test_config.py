import pytest
from hypothesis import given, strategies as st

from viscophase.config import ConfigError, RunConfig, load_config, parse_config, serialize_config

SAMPLE = """
[grid]
nx = 32
ny = 48
lx = 1.0
ly = 1.5

[model]
variant = "reduced"
c0 = 0.002
penalty_margin = 0.25

[model.coefficients]
n = [1.0, 0.2]
A = {coefficients = [1.0, 0.1], interval = [0.0, 1.0], smoothing = 0.1}
eta = 1.2

[model.potential]
family = "polynomial"
coefficients = [0.0, 0.0, 1.0, -2.0, 1.0]

[scheme]
dt = 0.0002
t_end = 0.05
cadence = 5
dealias = false
max_steps = 1000

[experiment]
kind = "taylor_green_mix"
seed = 4
amplitudes = [0.1, 0.01]

[output]
directory = "runs/a"
formats = ["csv", "snapshot"]
"""


def test_empty_document_gives_defaults():
    cfg = parse_config("")
    assert cfg == RunConfig()
    assert cfg.grid.nx == 64 and cfg.scheme.dt == 1e-4 and cfg.model.variant == "full"
    assert cfg.penalty() == pytest.approx(1.0)


def test_sample_is_parsed():
    cfg = parse_config(SAMPLE)
    assert cfg.model.reduced and not cfg.build_grid().dealias_enabled
    assert cfg.model.coefficients["n"].coefficients == (1.0, 0.2)
    assert cfg.model.coefficients["A"].interval == (0.0, 1.0)
    assert cfg.experiment.amplitudes == (0.1, 0.01)
    assert cfg.scheme_config().max_steps == 1000
    assert cfg.penalty() == pytest.approx(0.75)
    assert cfg.build_model().c0 == 0.002


def test_round_trip():
    cfg = parse_config(SAMPLE)
    text = serialize_config(cfg)
    assert parse_config(text) == cfg
    assert serialize_config(parse_config(text)) == text


@given(nx=st.sampled_from([8, 16, 64]), dt=st.floats(1e-6, 1e-2), seed=st.integers(0, 10**6),
       eta=st.floats(0.5, 2.0), variant=st.sampled_from(["full", "reduced"]))
def test_round_trip_property(nx, dt, seed, eta, variant):
    cfg = parse_config(f"""
[grid]
nx = {nx}
[scheme]
dt = {dt!r}
[experiment]
seed = {seed}
[model]
variant = "{variant}"
[model.coefficients]
eta = {eta!r}
""")
    assert parse_config(serialize_config(cfg)) == cfg


@pytest.mark.parametrize("text, path", [
    ("grid.nx = 7", "grid.nx"),
    ("[grid]\nnx = 10.0", "grid.nx"),
    ("[grid]\nwidth = 3", "grid.width"),
    ("[colour]\nx = 1", "colour"),
    ("[scheme]\nt_end = 0.0", "scheme.t_end"),
    ("[scheme]\ndt = -1.0", "scheme.dt"),
    ("[model]\nvariant = \"huge\"", "model.variant"),
    ("[model.coefficients]\nmu = 1.0", "model.coefficients.mu"),
    ("[model.coefficients]\nn = [1, 2, 3, 4, 5]", "model.coefficients.n"),
    ("[model.coefficients]\nn = 0.1", "model"),
    ("[experiment]\namplitudes = [0.001, 0.01]", "experiment.amplitudes"),
    ("[experiment]\nkind = \"vortex\"", "experiment.kind"),
    ("[output]\nformats = [\"png\"]", "output.formats"),
    ("[model.potential]\nfamily = \"ginzburg_landau\"\ncoefficients = [1.0]", "model.potential.coefficients"),
])
def test_schema_errors_name_the_key(text, path):
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert err.value.path == path
    assert str(err.value).startswith(path)


def test_syntax_error_has_line_number():
    with pytest.raises(ConfigError) as err:
        parse_config("[grid]\nnx = 16\n\n[scheme]\ndt = = 1\n")
    assert err.value.line == 5
    assert "line 5" in str(err.value)


def test_test_mode_skips_assumptions():
    text = "[model]\ntest_mode = true\n[model.coefficients]\nn = 0.0\nm = 1.0\n"
    cfg = parse_config(text)
    assert cfg.coefficient_set().test_mode
    assert not cfg.validate().passed
    with pytest.raises(ConfigError):
        parse_config(text.replace("true", "false"))
    assert not parse_config(text.replace("true", "false"), check_assumptions=False).validate().passed


def test_replace_rechecks():
    cfg = RunConfig()
    assert cfg.replace("scheme", dt=1e-3).scheme.dt == 1e-3
    with pytest.raises(ConfigError):
        cfg.replace("grid", nx=9)


def test_load_config(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text(SAMPLE)
    assert load_config(p) == parse_config(SAMPLE)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.toml")
    (tmp_path / "bin.toml").write_bytes(b"\xff\xfe")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "bin.toml")


def test_readme_config_round_trips():
    import re
    from pathlib import Path
    readme = Path(__file__).resolve().parents[1] / "README.md"
    block = re.search(r"```toml\n(.*?)```", readme.read_text(), re.S).group(1)
    cfg = parse_config(block)
    assert cfg.model.coefficients["A"].coefficients == (1.0, 0.1)
    assert parse_config(serialize_config(cfg)) == cfg
