import xml.etree.ElementTree as ET

import pytest

from poisson_concentration.config import parse_text
from poisson_concentration.experiments import (
    RECIPES,
    body_from_config,
    recipe_config,
    rows_to_csv,
    run_experiment,
)
from poisson_concentration.svg import line_plot


def test_rows_to_csv_format():
    text = rows_to_csv([{"t": 0.1, "pass": True, "name": "a"}, {"t": 2.0, "pass": False, "name": "b"}])
    assert text == "t,pass,name\n0.1,true,a\n2.0,false,b\n"


def test_svg_is_well_formed():
    svg = line_plot([("empirical", [1.0, 2.0, 3.0], [0.5, 0.1, 0.0]),
                     ("bound", [1.0, 2.0, 3.0], [0.9, 0.5, 0.2])], title="a < b & c")
    root = ET.fromstring(svg)
    assert root.tag.endswith("svg")


def test_body_from_config():
    cfg = parse_text('kind = "polytope"\nmaster_seed = 1\ngamma = 10.0\nn_reps = 2\n'
                     '[body]\nkind = "polytope"\nvertices = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]\n')
    body = body_from_config(cfg["body"])
    assert body.kind == "polytope" and body.volume == pytest.approx(0.5)


@pytest.mark.parametrize("name", ["kappa-constants", "sobolev-family", "recursive-lp", "moment-bounds",
                                  "proxy-tail-bound"])
def test_fast_recipes_pass(name):
    res = run_experiment(recipe_config(name))
    assert res.passed, [a for a in res.assertions if not a.passed]
    assert res.tables


@pytest.mark.parametrize("name", ["polytope-volume", "polytope-intrinsic", "cylinder-volume", "boolean-volume"])
def test_geometric_recipes_pass_small(name):
    cfg = recipe_config(name)
    cfg.update(n_reps=40, n_cert=5)
    res = run_experiment(cfg, seed=2)
    assert res.passed, [a for a in res.assertions if not a.passed]


def test_recipe_names_cover_all_kinds():
    kinds = {recipe_config(n)["kind"] for n in RECIPES}
    assert kinds == {"constants", "inequality-suite", "tail-verify", "polytope", "cylinder"}
