import json

import numpy as np
import pytest

import flipcoop


def test_transition_kernel():
    assert flipcoop.transition("A", True, False, 0.4) == (0.4, 0.6)
    assert flipcoop.transition("H", True, True, 0.4) == (0.0, 1.0)
    with pytest.raises(ValueError):
        flipcoop.transition("A", True, False, 1.5)


def test_matrix_game():
    xi = flipcoop.build_xi_a(1, 2, 0.35, 0.2, 0.4)
    np.testing.assert_allclose(xi, [[2, 2.2], [1.95, 1.55]], rtol=0, atol=1e-15)
    eq = flipcoop.ne_select_a(1, 2, 0.35, 0.2, 0.9)
    assert (eq["beta"], eq["gamma"], eq["branch"]) == (1, 0, "human_takeover")
    assert eq["continuation"] == pytest.approx(1.45)


def test_scalar_recursion():
    r = flipcoop.solve_scalar_lti(0.4)
    assert len(r["P_H"]) == 31
    assert len(r["branch_A"]) == 30
    assert r["P_H"][29] == pytest.approx(2.19372, rel=1e-12)
    assert r["P_A"][29] == pytest.approx(1.8836, rel=1e-12)


def test_monte_carlo_is_reproducible():
    a = flipcoop.simulate_scalar_lti(0.55, 500, seed=3)
    b = flipcoop.simulate_scalar_lti(0.55, 500, seed=3, threads=2)
    assert a == b
    assert abs(a["mean_cost"] - a["exact_expectation"]) <= 3 * a["std_error"] + 1e-12


def test_config_round_trip_and_run(tmp_path):
    text = json.dumps({"mode": "solve-lq", "scenario": "scalar-lti", "p": 0.4})
    canonical = flipcoop.normalize_config(text)
    assert flipcoop.normalize_config(canonical) == canonical
    code, diag = flipcoop.run_config(text, str(tmp_path))
    assert code == 0, diag
    assert len((tmp_path / "values.csv").read_text().splitlines()) == 32
    with pytest.raises(ValueError, match="p"):
        flipcoop.normalize_config(json.dumps({"mode": "solve-lq", "scenario": "scalar-lti", "p": 1.3}))


def test_presets():
    assert "scalar-lti" in flipcoop.presets()
