import numpy as np
import pytest

from aerialmanip.config import ConfigError, load_key_values
from aerialmanip.identify import (IdentificationError, calibration_from_fits, fit_bench_data, fit_line,
                                  fit_rotor, format_fits, read_bench_csv)
from aerialmanip.rotor import DEFAULT_KF, DEFAULT_KM, BENCH_FIT, calibration_from_keys, bench_calibration

PWM = np.linspace(1100.0, 1900.0, 17)


def synthetic_rows(rotors=(1, 2, 3, 4)):
    rows = []
    for r in rotors:
        j = r - 1
        sq = BENCH_FIT["a"][j] * PWM + BENCH_FIT["b"][j]
        thrust = BENCH_FIT["c"][j] * PWM + BENCH_FIT["d"][j]
        moment = BENCH_FIT["e"][j] * PWM + BENCH_FIT["h"][j]
        power = moment * np.sqrt(sq)
        rows += [(r, u, s, f, p) for u, s, f, p in zip(PWM, sq, thrust, power)]
    return rows


def write_csv(path, rows, header="rotor,pwm,omega_sq,thrust,power"):
    path.write_text(header + "\n" + "\n".join(",".join(repr(float(v)) if i else str(v)
                                                       for i, v in enumerate(r)) for r in rows) + "\n")


def test_recovers_table_coefficients(tmp_path):
    path = tmp_path / "bench.csv"
    write_csv(path, synthetic_rows())
    fits = fit_bench_data(read_bench_csv(path))
    for f in fits:
        j = f.rotor - 1
        got = {"a": f.speed_sq.slope, "b": f.speed_sq.intercept, "c": f.thrust.slope,
               "d": f.thrust.intercept, "e": f.moment.slope, "h": f.moment.intercept}
        for k, v in got.items():
            assert abs(v - BENCH_FIT[k][j]) <= 1e-9 * abs(BENCH_FIT[k][j]), (f.rotor, k)


def test_two_points_give_exact_line():
    fit = fit_line([1000.0, 2000.0], [3.0, 5.0])
    assert fit.slope == pytest.approx(2e-3, rel=1e-15) and fit.intercept == pytest.approx(1.0, rel=1e-14)
    assert fit.rms == pytest.approx(0.0, abs=1e-13) and fit.n == 2
    assert fit(1500.0) == pytest.approx(4.0, rel=1e-15)


def test_noisy_rms_matches_direct_computation():
    rng = np.random.default_rng(11)
    y = 0.65 * PWM - 730.0 + rng.normal(0.0, 3.0, PWM.size)
    fit = fit_line(PWM, y)
    resid = y - (fit.slope * PWM + fit.intercept)
    assert fit.rms == pytest.approx(np.sqrt(np.mean(resid ** 2)), rel=1e-9)
    ref = np.polyfit(PWM, y, 1)
    assert fit.slope == pytest.approx(ref[0], rel=1e-9) and fit.intercept == pytest.approx(ref[1], rel=1e-9)


def test_rank_deficient_rejected():
    with pytest.raises(IdentificationError):
        fit_line([1500.0, 1500.0, 1500.0], [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        fit_line([1.0, np.nan], [1.0, 2.0])
    with pytest.raises(IdentificationError):
        fit_rotor(PWM[:2], [0.0, 1.0], [1.0, 2.0], [1.0, 2.0])


def test_default_rotor_and_bad_files(tmp_path):
    path = tmp_path / "one.csv"
    rows = [r[1:] for r in synthetic_rows((1,))]
    path.write_text("pwm,omega_sq,thrust,power\n" + "\n".join(",".join(repr(float(v)) for v in r) for r in rows) + "\n")
    assert list(read_bench_csv(path)) == [1]
    bad = tmp_path / "bad.csv"
    bad.write_text("pwm,omega_sq,thrust\n1,2,3\n")
    with pytest.raises(ConfigError):
        read_bench_csv(bad)
    bad.write_text("pwm,omega_sq,thrust,power\n1,x,3,4\n")
    with pytest.raises(ConfigError):
        read_bench_csv(bad)
    with pytest.raises(ConfigError):
        read_bench_csv(tmp_path / "missing.csv")


def test_report_loads_as_calibration(tmp_path):
    path = tmp_path / "bench.csv"
    write_csv(path, synthetic_rows())
    fits = fit_bench_data(read_bench_csv(path))
    text = format_fits(fits) + f"KF = {', '.join([repr(DEFAULT_KF)] * 4)}\nKM = {', '.join([repr(DEFAULT_KM)] * 4)}\n"
    (tmp_path / "cal.txt").write_text(text)
    cal = calibration_from_keys(load_key_values(tmp_path / "cal.txt"))
    ref = bench_calibration(uniform=True)
    for name in ("a", "b", "c", "d", "e", "h"):
        np.testing.assert_allclose(getattr(cal, name), getattr(ref, name), rtol=1e-9)
    direct = calibration_from_fits(fits, [DEFAULT_KF] * 4, [DEFAULT_KM] * 4)
    np.testing.assert_allclose(direct.c, ref.c, rtol=1e-9)
    with pytest.raises(IdentificationError):
        calibration_from_fits(fits[:3], [DEFAULT_KF] * 4, [DEFAULT_KM] * 4)
