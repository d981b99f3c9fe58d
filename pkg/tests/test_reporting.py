import json
import math
from fractions import Fraction

import numpy as np

from whframe.reporting import dumps, fmt


def test_floats_seventeen_digits():
    assert dumps(0.1, None) == "0.10000000000000001"
    assert dumps(1.0, None) == "1.0"
    assert fmt(1 / 3) == "0.33333333333333331"


def test_special_values_and_types():
    out = json.loads(dumps({"c": 1 + 2j, "fr": Fraction(1, 3), "inf": math.inf, "arr": np.arange(3),
                            "b": np.bool_(True), "n": None}))
    assert out == {"c": [1.0, 2.0], "fr": "1/3", "inf": "inf", "arr": [0, 1, 2], "b": True, "n": None}


def test_round_trip_exact():
    x = np.random.default_rng(0).standard_normal(50)
    assert json.loads(dumps(list(x))) == list(x)


def test_deterministic_layout():
    obj = {"b": [1.5, {"x": []}], "a": {}}
    assert dumps(obj) == dumps(obj)
    assert json.loads(dumps(obj)) == obj
