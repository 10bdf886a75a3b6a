import json
import os

from proxybounds.dgp import DGPSpec, build_joint, sample_dgp_spec
from proxybounds.pmf import JointPMF

FIXTURES_DIR = os.path.join(os.path.dirname(__file__), 'fixtures')
DATA_DIR = os.path.join(os.path.dirname(os.path.dirname(__file__)), 'proxybounds', 'data')

CONFOUNDER_CARDS = {'U': 3, 'X': 2, 'W': 3, 'Z': 3, 'A': 2, 'Y': 3}


def fixture_path(name):
    return os.path.join(FIXTURES_DIR, name)


def load_fixture(name):
    with open(fixture_path(name)) as in_json:
        return json.load(in_json)


def fixture_joint(name):
    """
    Joint of a fixture holding either a DGP spec or a joint table
    """
    data = load_fixture(name)
    if 'family' in data:
        return build_joint(DGPSpec.from_dict(data))
    return JointPMF.from_dict(data)


def random_joint(seed, family='confounder', cardinalities=None, overrides=None):
    cardinalities = cardinalities or CONFOUNDER_CARDS
    return build_joint(sample_dgp_spec(cardinalities, family, seed=seed, overrides=overrides))


def print_report(report, description):
    print('***' + description + '***')
    print(report.to_dict())
