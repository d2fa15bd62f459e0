"""Command-line surface: config handling, determinism, and exit codes."""

import json

import pytest

from tdlcw import cli


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    rows = [json.loads(line) for line in out.out.splitlines()]
    return code, rows, out.err


class TestRunConfig:
    def test_defaults_validate(self):
        cfg = cli.RunConfig().validate()
        assert cfg.p == 2 and cfg.seed == 0

    def test_range_enforcement(self):
        with pytest.raises(ValueError):
            cli.RunConfig(p=11).validate()
        with pytest.raises(ValueError):
            cli.RunConfig(resolution=99).validate()
        with pytest.raises(ValueError):
            cli.RunConfig(model="other").validate()

    def test_config_file_merging(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"p": 3, "seed": 5, "samples": 7}))

        class Args:
            config = str(path)
            p = None
            seed = 9  # flag wins over the file

        cfg = cli.RunConfig.from_args(Args())
        assert cfg.p == 3 and cfg.seed == 9 and cfg.samples == 7

    def test_unknown_config_keys_rejected(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"primes": [2, 3]}))

        class Args:
            config = str(path)

        with pytest.raises(ValueError, match="unknown config keys"):
            cli.RunConfig.from_args(Args())


class TestElementParsing:
    def test_subgroup_roundtrip_shift(self):
        model = cli.ShiftModel(2)
        U = cli.parse_subgroup(model, "W:2")
        assert cli.format_subgroup(model, U) == "W:2"

    def test_subgroup_roundtrip_linear(self):
        model = cli.LinearModel(2, 2)
        U = cli.parse_subgroup(model, "0,1;0,0")
        assert cli.format_subgroup(model, U) == "0,1;0,0"
        inf_shape = cli.parse_subgroup(model, "0,inf;inf,0")
        assert cli.format_subgroup(model, inf_shape) == "0,inf;inf,0"

    def test_bad_subgroup_text(self):
        with pytest.raises(ValueError):
            cli.parse_subgroup(cli.ShiftModel(2), "whatever")


class TestCommands:
    def test_scale_default_battery(self, capsys):
        code, rows, _ = run(["scale"], capsys)
        assert code == 0
        assert {row["model"] for row in rows} == {"shift", "linear"}
        assert all(row["scale"] == row["formula"] for row in rows)

    def test_scale_explicit_element(self, capsys):
        code, rows, _ = run(
            ["scale", "--model", "linear", "--g", "2,0;0,1/2"], capsys
        )
        assert code == 0
        assert rows[0]["scale"] == 4

    def test_tidy_command(self, capsys):
        code, rows, _ = run(["tidy", "--model", "shift"], capsys)
        assert code == 0
        assert rows[0]["k"] == 0 and rows[0]["tidy_below"] is False

    def test_con_test_command(self, capsys):
        code, rows, _ = run(
            ["con-test", "--model", "shift", "--x", "lamp:4"], capsys
        )
        assert code == 0
        assert rows[0]["in_con"] is True and rows[0]["in_par"] is True

    def test_nub_command(self, capsys):
        code, rows, _ = run(["nub", "--model", "linear"], capsys)
        assert code == 0
        assert rows[0]["order"] == 1

    def test_conjugator_command(self, capsys):
        code, rows, _ = run(
            ["conjugator", "--model", "shift", "--two-sided", "--horizon", "8"],
            capsys,
        )
        assert code == 0
        assert rows[0]["replay"] and rows[0]["replay_two_sided"]

    def test_experiment_limits(self, capsys):
        code, rows, _ = run(
            ["experiment", "limits", "--model", "shift", "--n-max", "4",
             "--resolution", "4"],
            capsys,
        )
        assert code == 0
        assert [row["n"] for row in rows] == [1, 2, 3, 4]

    def test_out_file_matches_stdout(self, capsys, tmp_path):
        path = tmp_path / "rows.jsonl"
        code, _, _ = run(
            ["scale", "--model", "shift", "--out", str(path)], capsys
        )
        assert code == 0
        assert path.read_text().count("\n") == 1


class TestTheoremCheck:
    def test_unknown_check_exits_2(self, capsys):
        code, rows, err = run(["theorem-check", "--which", "nonsense"], capsys)
        assert code == 2 and not rows
        assert "valid names" in err

    def test_single_battery(self, capsys):
        code, rows, _ = run(
            ["theorem-check", "--which", "normal-closure"], capsys
        )
        assert code == 0
        assert all(row["check"] == "normal-closure" for row in rows)
        assert {row["params"]["p"] for row in rows} == {2, 3}

    def test_determinism_byte_identical(self, capsys):
        argv = ["theorem-check", "--which", "transport", "--seed", "3"]
        cli.main(argv)
        first = capsys.readouterr().out
        cli.main(argv)
        second = capsys.readouterr().out
        assert first == second and first

    def test_model_filter(self, capsys):
        code, rows, _ = run(
            ["theorem-check", "--which", "scale", "--model", "shift"], capsys
        )
        assert code == 0
        assert {row["model"] for row in rows} == {"shift"}


def test_invalid_flag_value_exits_2(capsys):
    code, rows, err = run(["scale", "--p", "9"], capsys)
    assert code == 2 and not rows and "error:" in err
