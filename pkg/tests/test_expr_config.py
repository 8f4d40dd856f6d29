import json
import math
import pickle

import numpy as np
import pytest

from cusplab.config import RunConfig, load_config
from cusplab.cusp_core import StatePoint, eval_fast, stock_flat_system
from cusplab.errors import ConfigError, EvaluationError
from cusplab.expr import parse_expression, read_expression_file, system_from_expressions


@pytest.mark.parametrize(
    "text, args, value",
    [
        ("a + 2*b - z", (1, 2, 3, 0), 2.0),
        ("z^3 + b*z + a", (1, -2, 1, 0), 0.0),
        ("-eps^2", (0, 0, 0, 0.5), -0.25),
        ("exp(-1/eps)", (0, 0, 0, 0.1), math.exp(-10)),
        ("2.5e-1 * (a + 1)", (1, 0, 0, 0), 0.5),
    ],
)
def test_expression_values(text, args, value):
    assert parse_expression(text)(*args) == pytest.approx(value, rel=1e-15, abs=1e-300)


@pytest.mark.parametrize(
    "text",
    ["__import__('os')", "a.real", "sin(a)", "lambda: 1", "x + 1", "a if b else z", "[a]",
     "'s'", "a // 2", "exp(a, b)", "a +"],
)
def test_expression_rejects(text):
    with pytest.raises(ConfigError):
        parse_expression(text)


def test_expression_pickles():
    e = parse_expression("a*z + eps")
    f = pickle.loads(pickle.dumps(e))
    assert f(1, 0, 2, 3) == 5


def test_division_by_zero_surfaces_as_evaluation_error():
    system = system_from_expressions(f1="1/a")
    with pytest.raises(EvaluationError, match="f1"):
        eval_fast(system, StatePoint(0.0, 0.0, 0.0, 0.1))


def test_expression_system_matches_stock_bump():
    text = "exp(-0.06/eps - (a^2 + b^2 + z^2)/2)"
    system = system_from_expressions(text, text, text)
    stock = stock_flat_system("eps", 1.0)
    y = np.array([0.3, -0.1, 0.8, 0.02])
    assert np.allclose(system.fast_rhs(y), stock.fast_rhs(y), rtol=1e-14)


def test_empty_expressions_give_principal():
    assert system_from_expressions(None, "", "0").principal


def test_expression_file(tmp_path):
    path = tmp_path / "f.txt"
    path.write_text("# perturbation\nf1 = a*eps\n\nf3 = z^2  # trailing\n", encoding="utf-8")
    assert read_expression_file(path) == {"f1": "a*eps", "f3": "z^2"}
    path.write_text("g = 1\n", encoding="utf-8")
    with pytest.raises(ConfigError, match=":1"):
        read_expression_file(path)
    with pytest.raises(ConfigError):
        read_expression_file(tmp_path / "missing.txt")


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


def test_defaults():
    cfg = load_config(None)
    assert cfg == RunConfig()
    assert cfg.rtol == 1e-10 and cfg.atol == 1e-12
    assert cfg.L == 0.5 and cfg.M == 1.0
    assert len(cfg.fold_eps) == 7
    assert cfg.fold_eps[0] == pytest.approx(1e-5) and cfg.fold_eps[-1] == pytest.approx(1e-3)


def test_file_and_overrides(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"b": 0.3, "eps": 5e-3, "system": "eps-flat"}), encoding="utf-8")
    cfg = load_config(path, {"eps": 2e-3, "rtol": None})
    assert cfg.b == 0.3 and cfg.eps == 2e-3 and cfg.rtol == 1e-10
    assert cfg.build_system().name.startswith("eps-flat")


@pytest.mark.parametrize(
    "content",
    ["{not json", "[1, 2]", json.dumps({"bogus": 1}), json.dumps({"L": 1.0, "M": 1.0}),
     json.dumps({"rtol": -1}), json.dumps({"system": "other"}), json.dumps({"a_minus": 0})],
)
def test_invalid_configs(tmp_path, content):
    path = tmp_path / "c.json"
    path.write_text(content, encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(path)


def test_missing_config():
    with pytest.raises(ConfigError, match="not found"):
        load_config("/nonexistent/config.json")


def test_expression_system_from_config(tmp_path):
    f = tmp_path / "f.txt"
    f.write_text("f2 = eps*z\n", encoding="utf-8")
    cfg = load_config(None, {"system": "expr", "expr": {"f1": "a"}, "expr_file": str(f)})
    system = cfg.build_system()
    y = np.array([0.5, 0.0, 2.0, 0.1])
    assert np.allclose(system.fast_rhs(y), [0.1 * 1.5, 0.1 * 0.2, -(8 + 0.5), 0.0])
    bad = load_config(None, {"system": "expr", "expr": {"f4": "a"}})
    with pytest.raises(ConfigError):
        bad.build_system()


def test_config_round_trips_through_dict():
    cfg = RunConfig(b=0.2, eps_list=[1e-2, 1e-3])
    assert RunConfig(**cfg.to_dict()) == cfg
