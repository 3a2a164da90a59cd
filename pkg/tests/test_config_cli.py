import json
import subprocess
import sys

import pytest

from poisson_concentration.cli import main
from poisson_concentration.config import load_config, parse_text
from poisson_concentration.errors import ConfigurationError
from poisson_concentration.experiments import RECIPES, recipe_text

CYL = """kind = "cylinder"
master_seed = 3
d = 2
k = 1
n_reps = 5
[base]
kind = "ball"
size = 0.2
[window]
kind = "ball"
radius = 1.0
"""

TAIL = """kind = "tail-verify"
master_seed = 5
function = "k"
lam = 2.0
n_reps = 2000
t_grid = [5.0, 6.0]
"""


def test_missing_key_is_named():
    with pytest.raises(ConfigurationError) as info:
        parse_text(CYL)
    assert "missing required key: gamma" in str(info.value)
    # an absent top-level key has no line to point at
    assert info.value.line is None


def test_missing_nested_key_points_at_section():
    with pytest.raises(ConfigurationError) as info:
        parse_text(CYL.replace("n_reps = 5", "n_reps = 5\ngamma = 1.0").replace("size = 0.2\n", ""))
    assert "size in [base]" in str(info.value) and info.value.line == 8


def test_unknown_key_reports_line():
    text = CYL.replace("n_reps = 5", "n_reps = 5\ngamma = 1.0\nwidth = 3")
    with pytest.raises(ConfigurationError) as info:
        parse_text(text)
    assert "unknown key: width" in str(info.value)
    assert info.value.line == 7 and "(line 7)" in str(info.value)


def test_nested_errors():
    text = CYL.replace("n_reps = 5", "n_reps = 5\ngamma = 1.0").replace('kind = "ball"\nsize', 'kind = "ball"\nsise')
    with pytest.raises(ConfigurationError) as info:
        parse_text(text)
    assert "unknown key: sise in [base]" in str(info.value)


@pytest.mark.parametrize("edit,fragment", [
    (("lam = 2.0", "lam = -2.0"), "lam must be positive"),
    (("lam = 2.0", 'lam = "two"'), "must be of type float"),
    (('function = "k"', 'function = "k"\ntail = "sideways"'), "must be one of"),
    (("master_seed = 5", "master_seed = -5"), "unsigned 64-bit"),
])
def test_value_errors(edit, fragment):
    with pytest.raises(ConfigurationError) as info:
        parse_text(TAIL.replace(*edit))
    assert fragment in str(info.value)


def test_defaults_are_filled():
    cfg = parse_text(TAIL)
    assert cfg["tail"] == "upper_tail" and cfg["L"] is None and cfg["output_dir"] == "results"


def test_cross_checks():
    text = CYL.replace("k = 1", "k = 2").replace("n_reps = 5", "n_reps = 5\ngamma = 1.0")
    with pytest.raises(ConfigurationError, match="k must lie"):
        parse_text(text)


def test_invalid_toml(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("kind = \n")
    with pytest.raises(ConfigurationError, match="invalid TOML"):
        load_config(p)
    with pytest.raises(ConfigurationError, match="cannot read"):
        load_config(tmp_path / "missing.toml")


def test_all_recipes_validate():
    for name in RECIPES:
        parse_text(recipe_text(name))


def test_cli_list(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out
    assert all(name in out for name in RECIPES)


def test_cli_validate(tmp_path, capsys):
    good = tmp_path / "good.toml"
    good.write_text(TAIL)
    assert main(["validate", str(good)]) == 0
    bad = tmp_path / "bad.toml"
    bad.write_text(CYL)
    assert main(["validate", str(bad)]) == 2
    assert "missing required key: gamma" in capsys.readouterr().err


def test_cli_run_writes_outputs(tmp_path):
    cfg = tmp_path / "tail.toml"
    cfg.write_text(TAIL + "plot = true\n")
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["passed"] is True
    assert {"tail.csv", "tail.svg"} <= set(summary["files"])
    assert (out / "tail.svg").read_text().startswith("<svg")
    assert json.loads((out / "resolved_config.json").read_text())["lam"] == 2.0


def test_cli_run_is_deterministic(tmp_path):
    cfg = tmp_path / "cyl.toml"
    cfg.write_text(CYL.replace("n_reps = 5", "n_reps = 20\ngamma = 1.0\nn_points = 2000\nn_cert = 2"))
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert main(["run", str(cfg), "--out", str(a)]) == 0
    assert main(["run", str(cfg), "--out", str(b), "--threads", "3"]) == 0
    assert main(["run", str(cfg), "--out", str(c), "--seed", "99"]) == 0
    names = sorted(p.name for p in a.glob("*.csv"))
    assert names
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert any((a / n).read_bytes() != (c / n).read_bytes() for n in names)


def test_cli_small_L_fails(tmp_path, capsys):
    cfg = tmp_path / "tail.toml"
    cfg.write_text(TAIL + "L = 0.5\n")
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "FAIL  configured L dominates" in capsys.readouterr().out


def test_cli_recipe_by_name(tmp_path):
    assert main(["run", "kappa-constants", "--out", str(tmp_path)]) == 0


def test_console_module_entry(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "poisson_concentration.cli", "list"],
                          capture_output=True, text=True, check=True)
    assert "kappa-constants" in proc.stdout
