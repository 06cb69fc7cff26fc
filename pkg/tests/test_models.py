import numpy as np
import pytest
from pydantic import BaseModel

from twostop.models import Comparison, RecordList


class Point(BaseModel):
    n: int
    x: float


PointList = RecordList[Point]


@pytest.fixture
def points():
    return PointList(root=[Point(n=1, x=0.5), Point(n=2, x=0.25), Point(n=3, x=0.125)])


@pytest.mark.parametrize(
    "key, expected",
    [
        ("n__gte", ("n", Comparison.GTE)),
        ("b_n__lt", ("b_n", Comparison.LT)),
        ("W_n", ("W_n", Comparison.EXACT)),
        ("foo__bar", ("foo__bar", Comparison.EXACT)),
        ("n__range", ("n", Comparison.RANGE)),
    ],
)
def test_comparison_split(key, expected):
    assert Comparison.split(key) == expected


def test_comparison_range_is_inclusive():
    assert Comparison.RANGE.evaluate(1, (1, 10))
    assert Comparison.RANGE.evaluate(10, (1, 10))
    assert not Comparison.RANGE.evaluate(11, (1, 10))


def test_where(points: PointList):
    filtered = points.where(n__gte=2)
    assert len(filtered) == 2
    assert filtered[0].n == 2
    assert isinstance(filtered, PointList)
    assert len(points.where(n__range=(2, 2), x__lt=1.0)) == 1
    assert len(points.where(n=4)) == 0


def test_column(points: PointList):
    np.testing.assert_array_equal(points.column("x"), [0.5, 0.25, 0.125])


def test_append_and_slice(points: PointList):
    points.append(Point(n=4, x=0.0625))
    assert len(points) == 4
    assert [p.n for p in points[1:3]] == [2, 3]
    assert [p.n for p in points] == [1, 2, 3, 4]


def test_records(points: PointList):
    assert points.records()[0] == {"n": 1, "x": 0.5}


def test_empty():
    empty = PointList.empty()
    assert len(empty) == 0
    assert repr(empty).endswith("(<0 records>)")
