import subprocess
import sys

import pytest

from encoded_registers.cli import COMMANDS, ConfigError, main, resolve_config


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def data_rows(text):
    return [line for line in text.splitlines() if line and not line.startswith("#")]


@pytest.mark.parametrize("command", sorted(COMMANDS))
def test_every_command_runs(capsys, command):
    code, out, err = run(capsys, command)
    assert code == 0, err
    assert f"# command = {command}" in out
    for key in COMMANDS[command][1]:
        assert f"# {key} = " in out


def test_table_shapes(capsys):
    _, out, _ = run(capsys, "fig-reduction", "--param", "points=11", "--param", "check=false")
    rows = data_rows(out)
    assert rows[0] == "p,gamma1_over_gamma0"
    assert len(rows) == 12
    assert rows[1] == "0,0"
    _, out, _ = run(capsys, "fig-fidelity-examples", "--param", "points=5")
    rows = data_rows(out)
    assert rows[0].split(",")[0] == "kappa" and len(rows) == 6


def test_headline_values(capsys):
    _, out, _ = run(capsys, "headline")
    vals = dict(line.split(" = ") for line in data_rows(out))
    assert abs(float(vals["one_minus_F1_inf"]) - 0.0062) < 1e-4
    assert float(vals["gamma1_over_gamma0"]) == pytest.approx(125.0)


def test_config_file_and_override_precedence(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nn = 10\ngamma_a = 1e-3  # trailing\n")
    _, out, _ = run(capsys, "headline", "--config", str(cfg))
    assert "# n = 10" in out and "# gamma_a = 0.001" in out
    _, out, _ = run(capsys, "headline", "--config", str(cfg), "--param", "n=20")
    assert "# n = 20" in out


def test_output_file(capsys, tmp_path):
    path = tmp_path / "out.csv"
    code, out, _ = run(capsys, "fig-knull-T", "--out", str(path), "--param", "points=3")
    assert code == 0 and out == ""
    assert len(data_rows(path.read_text())) == 4


@pytest.mark.parametrize("argv", [
    ["headline", "--param", "n=-3"],
    ["headline", "--param", "bogus=1"],
    ["headline", "--param", "noequals"],
    ["headline", "--seed", "3"],
    ["fig-reduction", "--param", "p_min=5", "--param", "p_max=1"],
    ["fig-knull", "--param", "points=1"],
    ["fig-foft", "--param", "check=maybe"],
    ["not-a-command"],
    ["headline", "--config", "/nonexistent/file"],
])
def test_config_errors_exit_2(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == 2
    assert out == "" and err


def test_bad_config_line(capsys, tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("n 10\n")
    assert run(capsys, "headline", "--config", str(cfg))[0] == 2


def test_numeric_failure_exit_1(capsys):
    # the exact-sum cross-check refuses registers above 14 qubits
    code, _, err = run(capsys, "fig-foft", "--samples", "1", "--param", "check_n=20")
    assert code == 1 and "numerical failure" in err


def test_seed_and_samples_apply_to_mc(capsys):
    a = run(capsys, "fig-foft", "--seed", "1", "--samples", "20000", "--param", "points=2")[1]
    b = run(capsys, "fig-foft", "--seed", "2", "--samples", "20000", "--param", "points=2")[1]
    assert a != b
    assert "# seed = 1" in a and "# samples = 20000" in a


def test_resolve_config_types():
    defaults = COMMANDS["fig-temperature"][1]
    cfg = resolve_config(defaults, {"Ta": "1, 2"}, {"n": "12"})
    assert cfg["Ta"] == (1.0, 2.0) and cfg["n"] == 12 and isinstance(cfg["n"], int)
    with pytest.raises(ConfigError):
        resolve_config(defaults, {}, {"n": "1.5"})


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "encoded_registers", "headline"], capture_output=True, text=True,
                          check=False)
    assert proc.returncode == 0
    assert "F1_inf = 0.99376964" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "encoded_registers", "headline", "--param", "q=x"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 2
