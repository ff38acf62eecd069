import math

import numpy as np
import pytest

from cfmodel import HdvParams, KinematicContext, sample_hdv_prior
from fvdmmodel import fvdm_accel
from gfmmodel import gfm_accel
from idmmodel import IDMModel, idm_accel
from models import AV_MODELS, HDV_MODELS, MODELS, get_model, make_params, model_code
from ovmmodel import ovm_accel
from priors import ConfigError, PriorBounds, default_priors

OVM = {"kappa": 1.0, "v1": 6.0, "v2": 22.0, "c1": 0.1, "c2": 1.6}
GFM = {"k": 0.8, "lam": 0.5, "v1": 6.0, "v2": 22.0, "c1": 0.1, "c2": 1.6}
FVDM = {"tau": 1.2, "lam": 0.4, "V1": 10.0, "V2": 12.0, "l_int": 8.0, "beta": 1.5}
IDM = {"v_max": 30.0, "T": 1.5, "s0": 2.0, "a": 1.0, "b": 2.0, "delta": 4.0}


def test_registry_order_and_families():
    assert list(MODELS) == ["OVM", "GFM", "FVDM", "IDM", "LLCTG", "LLCS", "HL", "MPC"]
    assert HDV_MODELS == ["OVM", "GFM", "FVDM", "IDM"]
    assert AV_MODELS == ["LLCTG", "LLCS", "HL", "MPC"]
    assert model_code("IDM") == 3
    with pytest.raises(KeyError, match="one of"):
        get_model("ACC")


def test_ovm_accel():
    ctx = KinematicContext(10.0, 12.0, 30.0, 5.0)
    expected = 1.0 * (6.0 + 22.0 * math.tanh(0.1 * 25.0 - 1.6) - 10.0)
    assert ovm_accel(ctx, make_params("OVM", OVM)) == pytest.approx(expected)


def test_gfm_brakes_only_when_closing_in():
    params = make_params("GFM", GFM)
    relaxation = 0.8 * (6.0 + 22.0 * math.tanh(0.1 * 25.0 - 1.6) - 10.0)
    opening = KinematicContext(10.0, 12.0, 30.0, 5.0)
    closing = KinematicContext(10.0, 7.0, 30.0, 5.0)
    assert gfm_accel(opening, params) == pytest.approx(relaxation)
    assert gfm_accel(closing, params) == pytest.approx(relaxation + 0.5 * (7.0 - 10.0))


def test_gfm_without_braking_is_ovm():
    gfm = make_params("GFM", dict(GFM, lam=0.0))
    ovm = make_params("OVM", {"kappa": GFM["k"], "v1": 6.0, "v2": 22.0, "c1": 0.1, "c2": 1.6})
    follower, leader, spacing = np.meshgrid(np.linspace(0.0, 30.0, 13), np.linspace(0.0, 30.0, 13),
                                            np.linspace(6.0, 80.0, 11))
    ctx = KinematicContext(follower, leader, spacing, 5.0)
    np.testing.assert_array_equal(gfm_accel(ctx, gfm), ovm_accel(ctx, ovm))


def test_fvdm_accel():
    ctx = KinematicContext(10.0, 11.0, 30.0, 5.0)
    desired = 10.0 + 12.0 * math.tanh(25.0 / 8.0 - 1.5)
    expected = (desired - 10.0) / 1.2 + 0.4 * (11.0 - 10.0)
    assert fvdm_accel(ctx, make_params("FVDM", FVDM)) == pytest.approx(expected)


def test_idm_accel():
    params = make_params("IDM", IDM)
    ctx = KinematicContext(10.0, 10.0, 30.0, 5.0)
    expected = 1.0 * (1 - (10.0 / 30.0) ** 4 - ((2.0 + 15.0) / 30.0) ** 2)
    assert idm_accel(ctx, params) == pytest.approx(expected)
    approaching = KinematicContext(12.0, 10.0, 30.0, 5.0)
    desired = 2.0 + 12.0 * 1.5 + 12.0 * 2.0 / (2 * math.sqrt(2.0))
    assert idm_accel(approaching, params) == pytest.approx(
        1 - (12.0 / 30.0) ** 4 - (desired / 30.0) ** 2)


def test_idm_floor_for_non_positive_spacing():
    params = make_params("IDM", IDM)
    assert idm_accel(KinematicContext(10.0, 10.0, 0.0, 5.0), params) == IDMModel.braking_floor
    batch = idm_accel(KinematicContext(np.array([10.0, 10.0]), 10.0, np.array([-1.0, 30.0])),
                      {name: np.full(2, value) for name, value in IDM.items()})
    assert batch[0] == -10.0 and np.isfinite(batch[1])


@pytest.mark.parametrize("model_id", ["OVM", "GFM", "FVDM", "IDM"])
@pytest.mark.parametrize("speed", [8.0, 15.0])
def test_equilibrium_spacing_zeroes_accel(model_id, speed, midpoint_params):
    params = midpoint_params(model_id)
    model = get_model(model_id)
    spacing = model.equilibrium_spacing(speed, params, 5.0)
    assert spacing is not None
    assert model.accel(KinematicContext(speed, speed, spacing, 5.0), params) == pytest.approx(0.0, abs=1e-12)


def test_equilibrium_missing_outside_ovm_range():
    assert get_model("OVM").equilibrium_spacing(40.0, make_params("OVM", OVM), 5.0) is None


def test_params_reorder_and_validate():
    shuffled = dict(reversed(list(IDM.items())))
    params = make_params("IDM", shuffled)
    assert tuple(params.values) == get_model("IDM").parameter_names
    np.testing.assert_array_equal(params.vector(), list(IDM.values()))
    assert make_params("IDM", params.vector()) == params
    with pytest.raises(ValueError):
        make_params("IDM", dict(IDM, a=-1.0))
    with pytest.raises(ValueError):
        make_params("OVM", {"kappa": 1.0})
    with pytest.raises(ValueError):
        HdvParams("LLCS", {"s0": 10.0, "k_s": 1.0, "k_v": 1.0})


def test_prior_sampling_is_reproducible_and_in_bounds():
    rng = np.random.default_rng(5)
    params = sample_hdv_prior("FVDM", rng)
    assert params.within_prior()
    assert 0.6 <= params["tau"] <= 2.0
    assert sample_hdv_prior("FVDM", np.random.default_rng(5)) == params
    with pytest.raises(ValueError):
        sample_hdv_prior("MPC", rng)


def test_prior_bounds_reorder_by_name():
    priors = default_priors()
    lower, upper = priors.bounds("GFM", ("v1", "k"))
    np.testing.assert_array_equal(lower, [0.0, 0.0])
    np.testing.assert_array_equal(upper, [10.0, 2.0])
    matrix = priors.sample("IDM", np.random.default_rng(0), size=100,
                           names=get_model("IDM").parameter_names)
    assert matrix.shape == (100, 6)
    assert np.all(matrix[:, 0] >= 20) and np.all(matrix[:, 0] <= 40)


def test_prior_file_errors(tmp_path):
    bad = tmp_path / "priors.yaml"
    bad.write_text("OVM:\n  kappa: [2, 1]\n")
    with pytest.raises(ConfigError):
        PriorBounds.from_file(bad)
    with pytest.raises(ConfigError):
        default_priors().bounds("ACC")
    custom = tmp_path / "custom.yaml"
    custom.write_text("IDM:\n  a: [1, 1]\n")
    assert PriorBounds.from_file(custom).contains("IDM", [1.0])


@pytest.mark.parametrize("model_id", list(MODELS))
def test_prior_draws_are_valid_params(model_id):
    priors = default_priors()
    names = get_model(model_id).parameter_names
    matrix = priors.sample(model_id, np.random.default_rng(6), size=10000, names=names)
    for row in matrix:
        params = make_params(model_id, row)
        assert params.within_prior(priors)
