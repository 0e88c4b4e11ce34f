import math

import pytest

from tsboson.advantage import (ADVANTAGE_STEPS, BENCHMARK_ETA, BENCHMARK_N, DEFAULT_PUMP_RATE,
                               TABLE_COLUMNS, advantage_crossing, advantage_table,
                               computational_steps, efficiency_curve, equivalent_photon_number,
                               required_efficiency, sampling_rate, write_table)
from tsboson.errors import UnattainableEfficiencyError


def _pascal_row(n):
    row = [1]
    for _ in range(n):
        row = [a + b for a, b in zip([0] + row, row + [0])]
    return row


def test_single_photon_rate_is_pump_rate():
    assert sampling_rate(1, 1, 1.0, 5e6) == 5e6


def test_benchmark_rate_formula():
    R = DEFAULT_PUMP_RATE
    assert sampling_rate(15, 30, 0.6) == pytest.approx(R / 15 * 0.6 ** 15 / 155117520, rel=1e-15)


def test_eta_squared_scaling():
    assert sampling_rate(2, 5, 0.4) == pytest.approx(sampling_rate(2, 5, 0.8) / 4, rel=1e-14)


def test_domain_errors():
    for args in [(0, 1, 0.5), (3, 2, 0.5), (2, 4, 0.0), (2, 4, 1.1)]:
        with pytest.raises(ValueError):
            sampling_rate(*args)
    with pytest.raises(ValueError):
        sampling_rate(2, 4, 0.5, -1.0)


@pytest.mark.parametrize("n", range(1, 41))
@pytest.mark.parametrize("eta", [0.05, 0.3, 0.6, 0.9, 1.0])
def test_round_trip(n, eta):
    sr = sampling_rate(n, 2 * n, eta)
    assert abs(required_efficiency(n, 2 * n, sr) - eta) <= 1e-12


def test_unattainable():
    with pytest.raises(UnattainableEfficiencyError):
        required_efficiency(30, 60, sampling_rate(15, 30, 0.6))
    assert required_efficiency(30, 60, sampling_rate(15, 30, 0.6), allow_above_one=True) > 1


def test_steps_exact():
    assert computational_steps(1, 1) == 2
    assert ADVANTAGE_STEPS == 50 * 2 ** 50 == 56_294_995_342_131_200
    assert computational_steps(15, 30) == 15 * 32768 * 155117520


def test_steps_increase_along_m_2n():
    steps = [computational_steps(n, 2 * n) for n in range(1, 61)]
    assert all(b > a for a, b in zip(steps, steps[1:]))
    assert all(isinstance(s, int) for s in steps)


def test_binomials_exact_against_pascal():
    assert math.comb(100, 50) == _pascal_row(100)[50]
    row = _pascal_row(120)
    n = 60
    assert computational_steps(n, 120) == n * 2 ** n * row[n]


def test_speedup_one_is_identity():
    eq = equivalent_photon_number(15, 0.6, speedup=1)
    assert eq.n_prime == 15 and eq.step_gain == 1
    assert eq.n_prime_continuous == 15 and eq.step_gain_continuous == pytest.approx(1)


def test_benchmark_gain_orders_of_magnitude():
    eq = equivalent_photon_number(BENCHMARK_N, BENCHMARK_ETA, speedup=100)
    assert 100 <= eq.step_gain_continuous <= 1000
    assert eq.n_prime == 17 and eq.step_gain == pytest.approx(68.2, abs=0.05)


def test_n_prime_monotone_in_speedup():
    prev = None
    for s in [1, 2, 5, 10, 30, 100, 300, 1000, 10 ** 4]:
        eq = equivalent_photon_number(15, 0.6, speedup=s)
        if prev:
            assert eq.n_prime >= prev.n_prime
            assert eq.n_prime_continuous >= prev.n_prime_continuous
        prev = eq


def test_integer_n_prime_definition():
    eq = equivalent_photon_number(15, 0.6, speedup=100)
    target = sampling_rate(15, 30, 0.6) / 100
    assert sampling_rate(eq.n_prime, 2 * eq.n_prime, 0.6) >= target
    assert sampling_rate(eq.n_prime + 1, 2 * eq.n_prime + 2, 0.6) < target


def test_table_flags():
    rows = advantage_table(range(15, 31), [0.6, 0.9], speedup=100)
    assert len(rows) == 16 * 2 * 2
    for r in rows:
        assert r.advantage == (r.steps >= ADVANTAGE_STEPS)
    assert any(r.advantage for r in rows) and not all(r.advantage for r in rows)


def test_efficiency_curve_shape():
    curve = efficiency_curve(range(15, 31))
    std = [p.eta_standard for p in curve]
    ts = [p.eta_timestamp for p in curve]
    assert all(b > a for a, b in zip(std, std[1:]))
    assert all(b > a for a, b in zip(ts, ts[1:]))
    assert all(t < s for s, t in zip(std, ts))
    assert curve[0].eta_standard == pytest.approx(0.6, rel=1e-12)


def test_crossing():
    c = advantage_crossing(efficiency_curve(range(15, 31)))
    assert c.n == 19 and c.steps >= ADVANTAGE_STEPS
    assert computational_steps(18, 36) < ADVANTAGE_STEPS
    assert c.eta_standard == pytest.approx(0.9, abs=0.05)
    assert c.eta_timestamp == pytest.approx(0.68, abs=0.05)
    assert advantage_crossing(efficiency_curve(range(15, 18))) is None


def test_write_table(tmp_path):
    rows = advantage_table([15, 16], [0.6])
    write_table(rows, tmp_path / "a.tsv")
    lines = (tmp_path / "a.tsv").read_text().splitlines()
    assert lines[0].split("\t") == list(TABLE_COLUMNS)
    assert len(lines) == 1 + len(rows)
    first = lines[1].split("\t")
    assert first[0] == "15" and first[-1] == "standard" and int(first[4]) == computational_steps(15, 30)
