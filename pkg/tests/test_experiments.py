import numpy as np
import pytest

from src.core.errors import FamilyError, InsufficientDataError, RangeError
from src.core.experiments import (
    ExperimentReport,
    ReplicateResult,
    aggregate,
    bernstein_constants,
    bernstein_envelope,
    consistency_run,
    envelope_check,
    euclid_vs_wasserstein,
    rate_fit,
    records_checksum,
    replicate_seed,
    verify_aggregates,
)
from src.core.models import sample_theta


def _report(values_by_n):
    records = [ReplicateResult(n, rep, rep, float(v)) for n, values in values_by_n.items()
               for rep, v in enumerate(values)]
    return ExperimentReport({"family": "shift"}, records, aggregate(records), records_checksum(records))


# ==========================================
# Aggregates and seeds
# ==========================================
def test_aggregate_rows():
    rows = aggregate(_report({4: [1.0, 2.0, 3.0], 2: [5.0]}).records)
    assert [r.n for r in rows] == [2, 4]
    assert rows[1].count == 3
    assert rows[1].mean == pytest.approx(2.0)
    assert rows[1].median == pytest.approx(2.0)


def test_checksum_ignores_wall_time():
    a = [ReplicateResult(8, 0, 1, 0.5, wall_time=0.1)]
    b = [ReplicateResult(8, 0, 1, 0.5, wall_time=9.0)]
    assert records_checksum(a) == records_checksum(b)
    assert records_checksum(a) != records_checksum([ReplicateResult(8, 0, 1, 0.25)])


def test_replicate_seed_depends_on_every_coordinate():
    seeds = {replicate_seed(s, n, r) for s in (0, 1) for n in (8, 16) for r in (0, 1)}
    assert len(seeds) == 8
    assert replicate_seed(3, 8, 1) == replicate_seed(3, 8, 1)


# ==========================================
# Consistency runs
# ==========================================
def test_shift_family_distance_is_squared_mean_shift(shift_family):
    report = consistency_run(shift_family, [5], 3, seed=11, threads=1)
    for record in report.records:
        theta_bar = sample_theta(shift_family, record.seed, 5).mean()
        assert record.d2 == pytest.approx(theta_bar ** 2, rel=1e-9, abs=1e-14)


def test_consistency_run_is_reproducible(shift_family):
    a = consistency_run(shift_family, [4, 8], 6, seed=5, threads=1)
    b = consistency_run(shift_family, [4, 8], 6, seed=5, threads=4)
    assert a.checksum == b.checksum
    assert [r.d2 for r in a.records] == [r.d2 for r in b.records]
    assert verify_aggregates(a)
    assert consistency_run(shift_family, [4, 8], 6, seed=6, threads=1).checksum != a.checksum


def test_consistency_run_rejects_bad_grid(shift_family):
    with pytest.raises(RangeError):
        consistency_run(shift_family, [0, 4], 2, seed=0)
    with pytest.raises(RangeError):
        consistency_run(shift_family, [4], 0, seed=0)


# ==========================================
# Rate fit
# ==========================================
def test_rate_fit_needs_four_n_values():
    with pytest.raises(InsufficientDataError):
        rate_fit(_report({n: np.ones(60) for n in (8, 16, 32)}))


def test_rate_fit_needs_enough_replicates():
    with pytest.raises(InsufficientDataError):
        rate_fit(_report({n: np.ones(10) for n in (8, 16, 32, 64)}))


def test_rate_fit_of_exact_power_law():
    report = _report({n: np.full(50, 3.0 / n) for n in (8, 16, 32, 64)})
    fit = rate_fit(report, resamples=100, seed=0)
    assert fit.slope == pytest.approx(-1.0)
    assert fit.intercept == pytest.approx(np.log(3.0))
    assert fit.ci_low == pytest.approx(-1.0)
    assert fit.ci_high == pytest.approx(-1.0)


def test_rate_fit_on_shift_family(shift_family):
    report = consistency_run(shift_family, [8, 16, 32, 64], 80, seed=2024)
    fit = rate_fit(report, resamples=200, seed=1)
    assert -1.4 <= fit.slope <= -0.6
    assert fit.ci_low <= fit.slope <= fit.ci_high


# ==========================================
# Bernstein envelope
# ==========================================
def test_bernstein_constants_of_shift_family(shift_family):
    quad = shift_family.quadrature(9)
    c = bernstein_constants(shift_family, quad)
    assert c.var_A == 0.0
    assert c.B1 == 0.0
    assert c.var_b == pytest.approx(0.4 ** 2 / 12 * (1 - 1 / 81))
    assert c.B2 == pytest.approx(0.2)
    assert c.eps0_sq == pytest.approx(shift_family.template.second_moment())


def test_envelope_is_one_for_nonpositive_t(shift_family):
    assert bernstein_envelope(shift_family, 0.0, 10) == 1.0
    assert bernstein_envelope(shift_family, -1.0, 10) == 1.0


def test_envelope_is_clipped_and_decreasing(shift_family):
    values = [bernstein_envelope(shift_family, 1e-3, n) for n in (1, 10, 100, 1000)]
    assert all(0.0 <= v <= 1.0 for v in values)
    assert values == sorted(values, reverse=True)
    assert values[-1] < 1e-3


def test_envelope_needs_positive_n(shift_family):
    with pytest.raises(RangeError):
        bernstein_envelope(shift_family, 0.1, 0)


def test_envelope_check_holds_on_shift_run(shift_family):
    report = consistency_run(shift_family, [8, 32], 60, seed=3)
    rows = envelope_check(report, [1e-4, 1e-3, 1e-2])
    assert len(rows) == 6
    assert all(row.ok for row in rows)


def test_envelope_check_needs_constants():
    with pytest.raises(FamilyError):
        envelope_check(_report({4: [0.1]}), [0.1])


# ==========================================
# Euclidean vs Wasserstein
# ==========================================
def test_compare_means_fields(shift_family):
    record = euclid_vs_wasserstein(shift_family, 200, seed=4)
    assert record.n == 200
    assert record.w2_to_template == pytest.approx(record.mean_shift, abs=1e-9)
    assert record.l1_convolution_template > 0.02
    assert record.l1_to_convolution < record.l1_to_template


def test_compare_means_needs_shift_family(location_scale_family):
    with pytest.raises(FamilyError):
        euclid_vs_wasserstein(location_scale_family, 10, seed=0)
