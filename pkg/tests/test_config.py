import pytest

from softvox.config import (
    Config,
    ConstraintViolation,
    TypeMismatch,
    UnknownKey,
    environment_schedule,
    evolution_config,
    parse_config,
    render_config,
)


class TestParsing:
    def test_empty_text_gives_defaults(self):
        assert parse_config("") == Config()

    def test_comments_and_blanks_ignored(self):
        cfg = parse_config("# a comment\n\nexperiment.generations = 7\n")
        assert cfg.generations == 7

    def test_stiffness_shorthand(self):
        cfg = parse_config("material.stiffness = S3\n")
        assert cfg.elastic_modulus == pytest.approx(0.1e6)
        for grade, mpa in (("S1", 0.001), ("S2", 0.01), ("S4", 1.0), ("S5", 10.0)):
            cfg = parse_config(f"material.stiffness = {grade}\n")
            assert cfg.elastic_modulus == pytest.approx(mpa * 1e6)

    def test_unknown_key_named(self):
        with pytest.raises(UnknownKey) as err:
            parse_config("evolution.poplation_size = 16\n")
        assert "poplation_size" in str(err.value)

    def test_type_mismatch_named(self):
        with pytest.raises(TypeMismatch) as err:
            parse_config("experiment.generations = soon\n")
        assert "experiment.generations" in str(err.value)

    def test_constraint_violation_named(self):
        with pytest.raises(ConstraintViolation) as err:
            parse_config("material.actuation_amplitude = 0.7\n")
        assert "material.actuation_amplitude" in str(err.value)

    def test_stiffness_and_modulus_conflict(self):
        with pytest.raises(ConstraintViolation):
            parse_config(
                "material.stiffness = S2\nmaterial.elastic_modulus = 5.0\n"
            )

    def test_unknown_grade_rejected(self):
        with pytest.raises(ConstraintViolation):
            parse_config("material.stiffness = S9\n")

    def test_bool_parsing(self):
        assert parse_config("simulation.self_collision = true\n").self_collision
        assert not parse_config("simulation.self_collision = off\n").self_collision
        with pytest.raises(TypeMismatch):
            parse_config("simulation.self_collision = maybe\n")

    def test_friction_ordering_enforced(self):
        with pytest.raises(ConstraintViolation):
            parse_config(
                "material.friction_static = 0.2\nmaterial.friction_kinetic = 0.5\n"
            )


class TestRoundTrip:
    def test_render_reloads_identically(self):
        cfg = parse_config(
            "experiment.environment = water_land_halfway\n"
            "experiment.generations = 42\n"
            "material.stiffness = S4\n"
            "simulation.self_collision = true\n"
        )
        assert parse_config(render_config(cfg)) == cfg

    def test_defaults_round_trip(self):
        assert parse_config(render_config(Config())) == Config()


class TestSchedules:
    def test_static_land(self):
        schedule = environment_schedule(parse_config("experiment.environment = land\n"))
        assert len(schedule) == 1
        assert schedule[0][0] == 0
        assert schedule[0][1].mode.value == "land"

    def test_halfway_transition_point(self):
        cfg = parse_config(
            "experiment.environment = water_land_halfway\nexperiment.generations = 200\n"
        )
        schedule = environment_schedule(cfg)
        assert [s[0] for s in schedule] == [0, 100]
        assert [s[1].mode.value for s in schedule] == ["water", "land"]

    def test_water_forces_zero_gravity(self):
        cfg = parse_config("experiment.environment = water\nenvironment.gravity = 9.81\n")
        schedule = environment_schedule(cfg)
        assert schedule[0][1].gravity == 0.0

    def test_evolution_config_carries_overrides(self):
        cfg = parse_config(
            "evolution.population_size = 9\n"
            "body.grid_x = 5\n"
            "mutation.weight_sigma = 0.25\n"
        )
        evo = evolution_config(cfg, run_seed=123)
        assert evo.population_size == 9
        assert evo.dims == (5, 8, 7)
        assert evo.rates.weight_sigma == 0.25
        assert evo.master_seed == 123
