import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vpop.preprocess import (DegenerateScale, MissingMedium, NonPositiveValue,
                             RawRecord, TargetScaler, TooFewSamples,
                             UnknownUnit, aggregate_duplicates,
                             build_molecule_table, fit_meanstd, fit_medianmad,
                             harmonize_op, harmonize_vp, uncertainty_weight,
                             winsorize, MMHG_PA)


def vp(value, unit, t=298.15):
    return RawRecord("CCO", "vp", value, unit, temperature_k=t)


def op(value, unit, medium):
    return RawRecord("CCO", "op", value, unit, medium=medium)


def test_vp_unit_conversions():
    assert MMHG_PA == 133.322
    _, log_pa = harmonize_vp(vp(1.0, "atm"))
    assert log_pa == pytest.approx(5.00572, abs=1e-5)
    _, log_pa = harmonize_vp(vp(1.0, "mmHg"))
    assert 10 ** log_pa == pytest.approx(133.322, rel=1e-12)
    _, log_pa = harmonize_vp(vp(2.5, "kPa"))
    assert 10 ** log_pa == pytest.approx(2500.0)
    _, log_pa = harmonize_vp(vp(1.0, "bar"))
    assert 10 ** log_pa == pytest.approx(1.0e5)
    t, _ = harmonize_vp(vp(1.0, "Pa", t=310.0))
    assert t == 310.0


def test_vp_errors():
    with pytest.raises(UnknownUnit):
        harmonize_vp(vp(1.0, "torr"))
    with pytest.raises(NonPositiveValue):
        harmonize_vp(vp(0.0, "Pa"))
    with pytest.raises(ValueError):
        harmonize_vp(RawRecord("CCO", "vp", 1.0, "Pa"))


def test_op_air_ppm_uses_molar_mass():
    # 1 ppm of a 92.14 g/mol vapor is 92.14/24.45 = 3.768 mg/m3
    log_c = harmonize_op(op(1.0, "ppm", "air"), molar_mass=92.14)
    assert 10 ** log_c == pytest.approx(92.14 / 24.45, rel=1e-12)
    log_b = harmonize_op(op(1.0, "ppb", "air"), molar_mass=92.14)
    assert 10 ** log_b == pytest.approx(92.14 / 24.45 / 1000.0, rel=1e-9)


def test_op_air_mass_units():
    assert 10 ** harmonize_op(op(5.0, "mg/m3", "air"), 100.0) == pytest.approx(5.0)
    assert 10 ** harmonize_op(op(5.0, "ug/m3", "air"), 100.0) == pytest.approx(5e-3)
    assert 10 ** harmonize_op(op(5.0, "g/m3", "air"), 100.0) == pytest.approx(5e3)


def test_op_water_units():
    assert 10 ** harmonize_op(op(2.0, "ug/L", "water"), 100.0) == pytest.approx(2.0)
    assert 10 ** harmonize_op(op(2.0, "mg/L", "water"), 100.0) == pytest.approx(2e3)
    assert 10 ** harmonize_op(op(2.0, "ppb", "water"), 100.0) == pytest.approx(2.0)
    assert 10 ** harmonize_op(op(2.0, "ppm", "water"), 100.0) == pytest.approx(2e3)


def test_op_errors():
    with pytest.raises(MissingMedium):
        harmonize_op(RawRecord("C", "op", 1.0, "ppm"), 100.0)
    with pytest.raises(UnknownUnit):
        harmonize_op(op(1.0, "mol/L", "water"), 100.0)
    with pytest.raises(NonPositiveValue):
        harmonize_op(op(-1.0, "ppm", "air"), 100.0)


def test_aggregate_median_and_iqr():
    med, n, iqr = aggregate_duplicates([1.0, 2.0, 10.0])
    assert med == 2.0
    assert n == 3
    assert iqr == pytest.approx(4.5)
    med, n, iqr = aggregate_duplicates([3.0])
    assert (med, n, iqr) == (3.0, 1, 0.0)


def test_winsorize_bounds():
    values = np.arange(1.0, 101.0)
    clipped, (lo, hi) = winsorize(values, alpha=0.02)
    assert lo == pytest.approx(np.percentile(values, 2))
    assert hi == pytest.approx(np.percentile(values, 98))
    assert clipped.min() == pytest.approx(lo)
    assert clipped.max() == pytest.approx(hi)
    assert np.all(clipped[10:90] == values[10:90])


def test_winsorize_too_few():
    with pytest.raises(TooFewSamples):
        winsorize(np.arange(10.0), alpha=0.02)


@given(st.lists(st.floats(-50, 50), min_size=50, max_size=200),
       st.floats(0.02, 0.025))
@settings(max_examples=30)
def test_winsorize_clip_property(values, alpha):
    clipped, (lo, hi) = winsorize(values, alpha=alpha)
    assert np.all(clipped >= lo - 1e-12)
    assert np.all(clipped <= hi + 1e-12)
    assert clipped.shape == (len(values),)


def test_meanstd_scaler_round_trip():
    values = [1.0, 2.0, 3.0, 4.0]
    scaler = fit_meanstd(values)
    z = scaler.transform(values)
    assert z.mean() == pytest.approx(0.0, abs=1e-12)
    assert z.std() == pytest.approx(1.0)
    assert scaler.inverse(z) == pytest.approx(values)


def test_meanstd_degenerate():
    with pytest.raises(DegenerateScale):
        fit_meanstd([2.0, 2.0, 2.0])


def test_medianmad_floor():
    scaler = fit_medianmad([5.0, 5.0, 5.0])
    assert scaler.scale == 1e-8
    assert np.all(scaler.transform([5.0, 5.0]) == 0.0)
    scaler = fit_medianmad([1.0, 2.0, 3.0, 100.0])
    assert scaler.center == 2.5
    assert scaler.scale == pytest.approx(1.0)


def test_scaler_serialization():
    scaler = fit_medianmad([1.0, 2.0, 9.0])
    back = TargetScaler.from_dict(scaler.to_dict())
    assert back == scaler


def test_uncertainty_weight():
    assert uncertainty_weight(0.0) == pytest.approx(1.0)
    assert uncertainty_weight(0.1, alpha=0.1) == pytest.approx(0.5)
    w = uncertainty_weight([0.0, 0.1, 0.9], alpha=0.1)
    assert w == pytest.approx([1.0, 0.5, 0.1])
    with pytest.raises(ValueError):
        uncertainty_weight(-0.5)


def test_build_molecule_table_dedupes_and_aggregates():
    records = [
        RawRecord("CCO", "vp", 1000.0, "Pa", temperature_k=298.15),
        RawRecord("OCC", "vp", 10000.0, "Pa", temperature_k=298.15),
        RawRecord("CCO", "vp", 500.0, "Pa", temperature_k=310.0),
        RawRecord("CCO", "op", 1.0, "ppm", medium="air"),
        RawRecord("OCC", "op", 100.0, "ppm", medium="air"),
        RawRecord("CCC", "vp", 2.0, "atm", temperature_k=298.15),
    ]
    table = build_molecule_table(records)
    assert len(table) == 2
    ethanol = next(r for r in table.values() if r.smiles == "CCO")
    assert len(ethanol.vp) == 2
    # replicate at 298.15 K aggregated to the log-space median
    t0, log0 = ethanol.vp[0]
    assert t0 == 298.15
    assert log0 == pytest.approx((3.0 + 4.0) / 2)
    assert ethanol.op_air is not None
    med, n, _ = ethanol.op_air
    assert n == 2
    assert ethanol.op_water is None


def test_build_molecule_table_bad_endpoint():
    with pytest.raises(ValueError):
        build_molecule_table([RawRecord("C", "boiling", 1.0, "Pa")])
