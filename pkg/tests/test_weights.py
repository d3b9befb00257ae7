import math

import mpmath
import pytest
from hypothesis import given, strategies as st

from speechblend.manifest import CorpusStats
from speechblend.weights import (
    WeightError,
    WeightMap,
    hierarchical_weights,
    marginalize,
    natural_weights,
    temperature_weights,
)

PUBLISHED_HOURS = {"en": 63.4, "de": 6.1, "es": 6.6, "fr": 5.1, "ns": 0.3}


def mp_temperature(hours, alpha, dps=50):
    """Independent evaluation at ``dps`` decimal digits."""
    with mpmath.workdps(dps):
        total = mpmath.fsum(mpmath.mpf(str(h)) for h in hours.values())
        raw = {k: (mpmath.mpf(str(h)) / total) ** mpmath.mpf(str(alpha)) if h > 0 else mpmath.mpf(0)
               for k, h in hours.items()}
        z = mpmath.fsum(raw.values())
        return {k: v / z for k, v in raw.items()}


def test_natural_simple():
    assert dict(natural_weights({"A": 1, "B": 3})) == {"A": 0.25, "B": 0.75}
    assert dict(natural_weights({"A": 5})) == {"A": 1.0}


def test_natural_published_hours():
    w = natural_weights(CorpusStats.from_hours(PUBLISHED_HOURS))
    for k, h in PUBLISHED_HOURS.items():
        assert w[k] == pytest.approx(h / 81.5, rel=1e-12)


def test_degenerate():
    with pytest.raises(WeightError, match="degenerate"):
        natural_weights({"A": 0, "B": 0})


def test_alpha_half_two_strata():
    w = temperature_weights({"A": 0.2, "B": 0.8}, 0.5)
    assert w["A"] == pytest.approx(1 / 3, abs=1e-15)
    assert w["B"] == pytest.approx(2 / 3, abs=1e-15)


def test_published_hours_alpha_half_matches_high_precision():
    w = temperature_weights(PUBLISHED_HOURS, 0.5)
    ref = mp_temperature(PUBLISHED_HOURS, 0.5)
    for k in PUBLISHED_HOURS:
        assert abs(w[k] - float(ref[k])) < 1e-12
    # rounded values quoted alongside the table
    for k, v in {"en": 0.5037, "de": 0.1562, "es": 0.1625, "fr": 0.1429, "ns": 0.0346}.items():
        assert round(w[k], 4) == pytest.approx(v, abs=1e-4)


def test_alpha_one_is_natural_alpha_zero_uniform():
    assert dict(temperature_weights(PUBLISHED_HOURS, 1.0)) == dict(natural_weights(PUBLISHED_HOURS))
    w0 = temperature_weights({**PUBLISHED_HOURS, "empty": 0.0}, 0.0)
    assert w0["empty"] == 0.0
    for k in PUBLISHED_HOURS:
        assert w0[k] == pytest.approx(0.2, abs=1e-15)


@pytest.mark.parametrize("alpha", [-0.1, 1.5])
def test_alpha_range(alpha):
    with pytest.raises(WeightError):
        temperature_weights(PUBLISHED_HOURS, alpha)


def test_zero_hour_strata_retained():
    w = temperature_weights({"a": 1.0, "b": 0.0}, 0.5)
    assert list(w) == ["a", "b"] and w["b"] == 0.0


def test_weightmap_validation():
    with pytest.raises(WeightError):
        WeightMap({"a": 0.5, "b": 0.6})
    with pytest.raises(WeightError):
        WeightMap({"a": -0.1, "b": 1.1})
    assert len(WeightMap({})) == 0


hours_maps = st.dictionaries(
    st.text(min_size=1, max_size=4),
    st.floats(min_value=1e-3, max_value=1e5, allow_nan=False),
    min_size=1,
    max_size=40,
)


@given(hours_maps, st.floats(min_value=0, max_value=1))
def test_properties(hours, alpha):
    w = temperature_weights(hours, alpha)
    assert abs(math.fsum(w.values()) - 1.0) <= 1e-12
    assert all(v >= 0 for v in w.values())
    keys = list(hours)
    for a in keys:
        for b in keys:
            if hours[a] >= hours[b]:
                assert w[a] >= w[b] * (1 - 1e-12)
    if alpha > 0:
        big = max(keys, key=lambda k: hours[k])
        assert w[big] == pytest.approx(max(w.values()), rel=1e-12)


@given(hours_maps, st.floats(min_value=0, max_value=1), st.floats(min_value=0, max_value=1))
def test_flattening(hours, a1, a2):
    lo, hi = sorted((a1, a2))
    w_lo, w_hi = temperature_weights(hours, lo), temperature_weights(hours, hi)
    ratio = lambda w: max(w.values()) / min(w.values())
    assert ratio(w_lo) <= ratio(w_hi) * (1 + 1e-9)


def test_hierarchical_degenerate_and_hand_example():
    w = hierarchical_weights({("en", "mls"): 7.0}, 0.5, 0.5)
    assert dict(w) == {("en", "mls"): 1.0}
    w = hierarchical_weights({("X", "a"): 1.0, ("Y", "b"): 0.5, ("Y", "c"): 0.5}, 1.0, 1.0)
    assert w[("X", "a")] == pytest.approx(0.5)
    assert w[("Y", "b")] == pytest.approx(0.25)
    assert w[("Y", "c")] == pytest.approx(0.25)


def test_hierarchical_ambiguous():
    with pytest.raises(WeightError, match="ambiguous"):
        hierarchical_weights({("en", "vox"): 1.0, ("de", "vox"): 1.0})


def test_hierarchical_with_nonspeech_language():
    pairs = {
        ("en", "ls"): 30.0, ("en", "mls"): 33.4,
        ("de", "mcv"): 0.8, ("de", "mls_de"): 1.5, ("de", "inhouse_de"): 3.8,
        ("ns", "audioset"): 0.3,
    }
    w = hierarchical_weights(pairs, 0.5, 0.5)
    lang_hours = {"en": 63.4, "de": 6.1, "ns": 0.3}
    lang_w = temperature_weights(lang_hours, 0.5)
    assert w[("ns", "audioset")] == pytest.approx(lang_w["ns"], rel=1e-15)
    marg = marginalize(w)
    for lang, v in lang_w.items():
        assert abs(marg[lang] - v) <= 1e-15
    assert abs(math.fsum(w.values()) - 1) <= 1e-12
