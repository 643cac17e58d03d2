import math

import pytest

import nclsolve


def test_version():
    assert nclsolve.__version__


def test_instances_listing():
    infos = nclsolve.instances()
    names = {i["name"] for i in infos}
    assert "hs35" in names
    assert "opf-toy-1000" in names
    hs35 = next(i for i in infos if i["name"] == "hs35")
    assert hs35["n"] == 3
    assert hs35["known_objective"] == pytest.approx(1.0 / 9.0)
    infeas = next(i for i in infos if i["name"] == "infeas-circle")
    assert infeas["expect_infeasible"]
    assert infeas["known_objective"] is None


def test_solve_known_optimum():
    rep = nclsolve.solve("hs35")
    assert rep["status"] == "optimal"
    assert rep["objective"] == pytest.approx(1.0 / 9.0, abs=1e-5)
    assert rep["kkt_residual"] <= 1e-6
    assert len(rep["x"]) == 4  # three variables plus one slack
    assert rep["solve_seconds"] >= 0.0


def test_kkt_forms_agree():
    objs = [nclsolve.solve("hs7", kkt=k)["objective"] for k in ("k2", "k2r", "k1s")]
    for o in objs:
        assert o == pytest.approx(-math.sqrt(3.0), abs=1e-6)


def test_infeasible_detected():
    rep = nclsolve.solve("infeas-qp")
    assert rep["status"] == "infeasible"
    assert rep["rho_final"] == pytest.approx(1e14)


def test_unknown_instance_raises():
    with pytest.raises(Exception, match="unknown instance"):
        nclsolve.solve("no-such-problem")
