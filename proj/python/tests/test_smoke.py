import json
import math
from fractions import Fraction

import pytest

import digitfrac as df


def test_cantor_basics():
    c = df.cantor()
    assert c.base == 3 and c.dim == 1 and len(c) == 2
    assert df.is_proper(c)
    assert df.hausdorff_dimension(c) == pytest.approx(math.log(2) / math.log(3))
    assert df.contains(c, [Fraction(1, 4)])
    assert not df.contains(c, [Fraction(1, 2)])
    assert df.contains(c, ["3/4"])


def test_json_round_trip():
    c = df.cantor()
    back = df.DigitSystem.from_json(c.to_json())
    assert back == c
    assert back.hash() == c.hash()
    assert json.loads(json.dumps(c.to_json()))["base"] == 3


def test_box_measure_exact():
    lo, hi, exact = df.box_measure(df.cantor(), [0], [Fraction(1, 4)])
    assert exact
    assert lo == hi == Fraction(1, 3)
    lo, hi, _ = df.box_measure(df.lebesgue(2, 2), [0, 0], [Fraction(1, 3), Fraction(1, 2)])
    assert lo == Fraction(1, 6)


def test_weighted_system():
    w = df.DigitSystem(3, 1, [[0], [2]], [Fraction(1, 4), Fraction(3, 4)])
    lo, _, _ = df.box_measure(w, [0], [Fraction(1, 3)])
    assert lo == Fraction(1, 4)
    with pytest.raises(df.DigitfracError) as info:
        df.DigitSystem(3, 1, [[0], [2]], [Fraction(1, 4), Fraction(1, 4)])
    assert info.value.code == "WeightsNotNormalized"


def test_fourier():
    value, err = df.mu_hat(df.cantor(), [0])
    assert value == 1 and err <= 1e-12
    total, _ = df.l1_partial_sum(df.cantor(), 0)
    assert total == pytest.approx(1.0)


def test_counting():
    r = df.count_near(df.cantor(), 3, "0")
    assert r["count"] == 8
    assert r["per_q"] == [2, 2, 4]
    assert df.count_on(df.lebesgue(2, 1), 2) == 5


def test_approx_and_cli():
    s = df.khinchin_sum(df.lebesgue(3, 2), "power_t:2", 10, [Fraction(1, 5), Fraction(2, 7)])
    assert s["exact"]
    assert s["term_lo"][0] == 4 * Fraction(1, 4) ** 2
    code, out, _ = df.run_cli(["--system", "cantor", "dim"])
    assert code == 0
    assert json.loads(out)["hausdorff_dimension"] == pytest.approx(0.6309297535714574)
    code, _, _ = df.run_cli(["--system", "cantor", "frobnicate"])
    assert code == 2
