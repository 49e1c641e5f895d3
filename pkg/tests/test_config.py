import math

import pytest

from bohmlab.cli import default_config_path
from bohmlab.errors import ConfigParseError, ValidationError
from bohmlab.scenarios import (SCENARIO_IDS, apply_overrides, config_from_dict, default_config, format_config,
                               load_config, parse_config, validate)

MINIMAL = """\
[scenario]
scenario = crossing

[packets]
sigma = 1.5
wavevector = 3.0
"""


def test_minimal_file_fills_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.sigma == 1.5 and cfg.wavevector == 3.0
    assert cfg.x_points == default_config("crossing").x_points


@pytest.mark.parametrize("scenario", SCENARIO_IDS)
def test_format_round_trip(scenario):
    cfg = default_config(scenario)
    assert parse_config(format_config(cfg)) == cfg
    assert config_from_dict(cfg.as_dict()) == cfg


@pytest.mark.parametrize("scenario", SCENARIO_IDS)
def test_shipped_configs_are_the_defaults(scenario):
    assert load_config(default_config_path(scenario)) == default_config(scenario)
    validate(default_config(scenario))


def test_dump_times_list():
    cfg = parse_config(MINIMAL + "\n[time]\ndump_times = 0, 1.5 3\n")
    assert cfg.dump_times == (0.0, 1.5, 3.0)


def test_inline_comments():
    cfg = parse_config(MINIMAL.replace("sigma = 1.5", "sigma = 2.0  # wider"))
    assert cfg.sigma == 2.0


class TestParseErrors:
    def test_bad_value_reports_line_and_field(self):
        with pytest.raises(ConfigParseError) as err:
            parse_config(MINIMAL.replace("1.5", "abc"))
        assert err.value.line == 5 and err.value.field == "sigma"
        assert err.value.category == "parse"

    def test_unknown_key(self):
        with pytest.raises(ConfigParseError) as err:
            parse_config(MINIMAL + "colour = red\n")
        assert err.value.field == "colour" and err.value.line == 7

    def test_key_in_wrong_section(self):
        with pytest.raises(ConfigParseError) as err:
            parse_config(MINIMAL + "dt = 0.1\n")
        assert "[time]" in str(err.value)

    def test_unknown_section(self):
        with pytest.raises(ConfigParseError) as err:
            parse_config(MINIMAL + "\n[extras]\nfoo = 1\n")
        assert err.value.line == 8

    def test_missing_scenario(self):
        with pytest.raises(ConfigParseError):
            parse_config("[packets]\nsigma = 1\n")

    def test_duplicate_key(self):
        with pytest.raises(ConfigParseError) as err:
            parse_config(MINIMAL + "sigma = 2\n")
        assert err.value.line == 7

    def test_unknown_scenario(self):
        with pytest.raises(ValidationError):
            parse_config("[scenario]\nscenario = tunnelling\n")


class TestOverrides:
    def test_typed_values(self):
        cfg = apply_overrides(default_config("crossing"), ["sigma=2", "n_trajectories=10", "dump_times=1,2"])
        assert cfg.sigma == 2.0 and cfg.n_trajectories == 10 and cfg.dump_times == (1.0, 2.0)

    def test_scenario_cannot_change(self):
        with pytest.raises(ConfigParseError) as err:
            apply_overrides(default_config("crossing"), ["scenario=protective"])
        assert err.value.field == "scenario"

    @pytest.mark.parametrize("item", ["sigma", "nosuchkey=1", "seed=1.5"])
    def test_malformed(self, item):
        with pytest.raises(ConfigParseError):
            apply_overrides(default_config("crossing"), [item])

    def test_unknown_dict_key(self):
        with pytest.raises(ConfigParseError):
            config_from_dict({**default_config("crossing").as_dict(), "extra": 1})


class TestValidation:
    @pytest.mark.parametrize("field,value", [
        ("sigma", -1.0), ("dt", 0.0), ("t_final", math.inf), ("pointer_mass", -2.0), ("n_trajectories", 0),
        ("report_every", 0), ("n_equilibrium", -1), ("sample_from", "middle"), ("coupling", math.nan),
    ])
    def test_field_is_named(self, field, value):
        with pytest.raises(ValidationError) as err:
            validate(default_config("spin_recorder").updated(**{field: value}))
        assert err.value.field == field

    def test_crossing_has_no_coupling(self):
        with pytest.raises(ValidationError) as err:
            validate(default_config("crossing").updated(coupling=1.0))
        assert err.value.field == "coupling"

    def test_pointer_scenarios_need_y_axis(self):
        for s in ("fast_recorder", "protective"):
            with pytest.raises(ValidationError) as err:
                validate(default_config(s).updated(y_points=0))
            assert err.value.field == "y_points"

    def test_transverse_offset_needs_y_axis(self):
        with pytest.raises(ValidationError) as err:
            validate(default_config("crossing").updated(transverse_offset=2.0))
        assert err.value.field == "transverse_offset"

    def test_protective_points_inside_box(self):
        with pytest.raises(ValidationError) as err:
            validate(default_config("protective").updated(point_a=1.2))
        assert err.value.field == "point_a"

    def test_window_times_ordered(self):
        with pytest.raises(ValidationError) as err:
            validate(default_config("spin_recorder").updated(window_t_off=0.0))
        assert err.value.field == "window_t_off"
