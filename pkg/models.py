"""Registry of the candidate car-following models and controllers"""
from fvdmmodel import FVDMModel
from gfmmodel import GFMModel
from hlcontroller import HLController
from idmmodel import IDMModel
from llcscontroller import LLCSController
from llctgcontroller import LLCTGController
from mpccontroller import MPCController
from ovmmodel import OVMModel

MODELS = {
    "OVM": OVMModel,
    "GFM": GFMModel,
    "FVDM": FVDMModel,
    "IDM": IDMModel,
    "LLCTG": LLCTGController,
    "LLCS": LLCSController,
    "HL": HLController,
    "MPC": MPCController,
}

HDV_MODELS = [key for key, val in MODELS.items() if val.family == "HDV"]
AV_MODELS = [key for key, val in MODELS.items() if val.family == "AV"]


def get_model(model_id):
    """Return the implementation registered under model_id"""
    try:
        return MODELS[model_id]
    except KeyError:
        raise KeyError("Unknown model %s, one of: %s" % (model_id, ", ".join(MODELS)))


def model_code(model_id):
    """Stable integer of a model, used to key its random streams"""
    get_model(model_id)
    return list(MODELS).index(model_id)


def make_params(model_id, values):
    """Build HdvParams or AvParams from a mapping or a vector"""
    model = get_model(model_id)
    if isinstance(values, dict):
        return model.params_class(model_id, {name: float(value) for name, value in values.items()})
    return model.params_class.from_vector(model_id, values)
