import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fogmimo.config import (KEYS, REQUIRED, SystemConfig, emit_config, load_config,
                            parse_config)
from fogmimo.errors import ConfigError

DEFAULTS = """
# system defaults for the comparison figures
lambda_a = 31.8
eta = 3.75
q_count = 40
qprime = 20
l_pilots = 60
n_p = 60
epsilon = 0
load_ratio = 0.1
r_in = 0.08
"""


def test_defaults_load():
    cfg = parse_config(DEFAULTS)
    assert cfg.lambda_a == 31.8 and cfg.q_count == 40 and cfg.n_p == 60
    assert cfg.user_density == pytest.approx(40 * 0.1 * 31.8)
    assert cfg.ratio == pytest.approx(0.1)
    assert cfg.disks.r_out == cfg.disks.r_in


def test_empty_file_lists_required_keys():
    with pytest.raises(ConfigError) as exc:
        parse_config("")
    for key in REQUIRED:
        assert key in str(exc.value)


def test_negative_epsilon_rejected_with_line():
    with pytest.raises(ConfigError) as exc:
        parse_config(DEFAULTS + "epsilon_dup = 1\n")
    assert "unknown key" in str(exc.value)
    text = DEFAULTS.replace("epsilon = 0", "epsilon = -0.1")
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.line == 9


@pytest.mark.parametrize("line,needle", [
    ("lambda_a = -1", "non-negative"),
    ("n_p = 70", "N_p"),
    ("q_count = 2.5", "integer"),
    ("boundary = sphere", "one of"),
    ("m_antennas = 0", "M must"),
    ("eta = nan", "number"),
])
def test_invalid_values(line, needle):
    key = line.split("=")[0].strip()
    text = "\n".join(l for l in DEFAULTS.splitlines() if not l.startswith(key + " ")) + "\n"
    with pytest.raises(ConfigError) as exc:
        parse_config(text + line + "\n")
    assert needle in str(exc.value)


def test_duplicates_and_malformed():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config(DEFAULTS + "eta = 3\n")
    with pytest.raises(ConfigError, match="key = value"):
        parse_config(DEFAULTS + "just words\n")
    with pytest.raises(ConfigError, match="exactly one"):
        parse_config(DEFAULTS + "lambda_u = 10\n")


def test_sweep_syntax():
    cfg = parse_config(DEFAULTS + "sweep.r_in = 0.08, 0.1\nsweep.load_ratio = 0.1, 1\n")
    assert cfg.sweep == (("r_in", (0.08, 0.1)), ("load_ratio", (0.1, 1.0)))
    with pytest.raises(ConfigError, match="cannot sweep"):
        parse_config(DEFAULTS + "sweep.boundary = torus\n")
    with pytest.raises(ConfigError, match="no values"):
        parse_config(DEFAULTS + "sweep.r_in = ,\n")


def test_set_swaps_density_form():
    cfg = parse_config(DEFAULTS).set("lambda_u", "100")
    assert cfg.load_ratio is None and cfg.user_density == 100.0
    with pytest.raises(ConfigError):
        cfg.set("nonsense", "1")


def test_infinite_antennas_allowed():
    assert math.isinf(parse_config(DEFAULTS + "m_antennas = inf\n").m_antennas)


def test_load_config(tmp_path):
    path = tmp_path / "a.cfg"
    path.write_text(DEFAULTS)
    assert load_config(path) == parse_config(DEFAULTS)


finite = st.floats(1e-6, 1e6, allow_nan=False, allow_infinity=False)


@st.composite
def configs(draw):
    l_pilots = draw(st.integers(1, 200))
    cfg = SystemConfig(
        lambda_a=draw(finite), eta=draw(st.floats(1.01, 8)),
        lambda_u=draw(st.one_of(st.none(), finite)),
        q_count=draw(st.integers(1, 100)), qprime=2 * draw(st.integers(1, 20)),
        l_pilots=l_pilots, n_p=draw(st.integers(1, l_pilots)),
        r_in=draw(st.one_of(st.none(), finite)), epsilon=draw(st.floats(0, 5)),
        m_antennas=draw(st.sampled_from([math.inf, 1.0, 64.0])),
        sigma2_n=draw(st.floats(0, 10)), seed=draw(st.integers(0, 2**31)),
        half_width=draw(st.one_of(st.none(), finite)),
        trust_mode=draw(st.sampled_from(["geometric", "signal_level"])),
        theta_source=draw(st.sampled_from(["auto", "closed_form", "semi_analytic"])),
        outputs=tuple(draw(st.lists(st.sampled_from(["fog_sim", "copilot", "cell_sim"]),
                                    unique=True))),
        sweep=tuple(draw(st.lists(st.tuples(st.sampled_from(["r_in", "trials", "eta"]),
                                            st.just((2.0, 3.0))),
                                  unique_by=lambda t: t[0], max_size=2))),
    )
    if cfg.lambda_u is None:
        cfg = cfg.set("load_ratio", draw(finite))
    return cfg


def fix_sweep_types(cfg):
    return cfg.sweep if all(a != "trials" for a, _ in cfg.sweep) else tuple(
        (a, (2, 3) if a == "trials" else v) for a, v in cfg.sweep)


@given(configs())
def test_round_trip(cfg):
    from dataclasses import replace
    cfg = replace(cfg, sweep=fix_sweep_types(cfg))
    assert parse_config(emit_config(cfg)) == cfg


def test_every_key_is_emitted():
    text = emit_config(parse_config(DEFAULTS))
    emitted = {line.split(" = ")[0] for line in text.splitlines()}
    assert emitted == set(KEYS) - {"lambda_u"}
