import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from erwlab import io

cells = st.one_of(st.integers(-2**53, 2**53), st.floats(allow_nan=False, allow_infinity=False),
                  st.booleans(), st.none())


@settings(max_examples=100, deadline=None)
@given(rows=st.lists(st.tuples(cells, cells, cells), min_size=1, max_size=8))
def test_csv_round_trip(rows):
    records = [{"a": a, "b": b, "c": c} for a, b, c in rows]
    cfg = {"p": 0.3, "t": [0.5, 1.0], "killed": True}
    summary = {"mean": 1.25}
    back = io.loads(io.dumps(cfg, records, summary, "csv"), "csv")
    assert back[0] == cfg and back[2] == summary
    for got, want in zip(back[1], records):
        for key in want:
            w, g = want[key], got[key]
            if isinstance(w, float):
                assert isinstance(g, float) and g == w
            else:
                assert g == w and type(g) is type(w)


def test_json_round_trip_with_numpy():
    rows = [{"n": np.int64(4), "s": np.float64(0.181), "ok": np.bool_(True)}]
    cfg, back, summary = io.loads(io.dumps({"p": 0.3}, rows, {"x": np.array([1.0, 2.0])},
                                           "json"), "json")
    assert back == [{"n": 4, "s": 0.181, "ok": True}]
    assert summary == {"x": [1.0, 2.0]}


def test_non_finite_values():
    text = io.dumps({}, [{"v": math.inf}], {"v": math.nan}, "json")
    assert io.loads(text, "json")[2] == {"v": None}


def test_unknown_format():
    with pytest.raises(ValueError):
        io.dumps({}, [], {}, "xml")
