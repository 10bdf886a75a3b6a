import io
import math
import unittest

import pytest

from proxybounds import ProxyboundsError
from proxybounds.bootstrap import BootstrapFailure, bootstrap_ci, nearest_rank, write_replicates_csv
from proxybounds.bounds import estimate_bounds
from proxybounds.codebook import Codebook, Variable, load_codebook
from proxybounds.dgp import RNG_ALGORITHM
from proxybounds.frequency import Dataset, fit_frequencies, read_dataset_csv
from tests import fixture_path


def small_dataset():
    with open(fixture_path('small_codebook.json')) as in_json:
        codebook = load_codebook(in_json)
    with open(fixture_path('small.csv')) as in_csv:
        return read_dataset_csv(in_csv, codebook)


class NearestRankTestCase(unittest.TestCase):

    def test_ranks(self):
        values = list(range(200, 0, -1))
        self.assertEqual(nearest_rank(values, 0.025), 5)
        self.assertEqual(nearest_rank(values, 0.975), 195)
        self.assertEqual(nearest_rank(values, 0.5), 100)
        self.assertEqual(nearest_rank(values, 0.0), 1)
        self.assertEqual(nearest_rank(values, 1.0), 200)

    def test_small_sample(self):
        self.assertEqual(nearest_rank([3.0, 1.0], 0.025), 1.0)
        self.assertEqual(nearest_rank([3.0, 1.0], 0.975), 3.0)
        with self.assertRaises(ValueError):
            nearest_rank([], 0.5)


class BootstrapTestCase(unittest.TestCase):

    def test_constant_dataset_gives_point(self):
        codebook = Codebook((Variable('W', 2, 'W'), Variable('A', 2, 'A'), Variable('Y', 2, 'Y')), (0, 1))
        data = Dataset(codebook, [[0, 0, 1]] * 30)
        report = bootstrap_ci(data, 'ETT-mean', 'W', a=0, replicates=20, smoothing=1.0)
        self.assertEqual(report.ci, report.point)
        self.assertFalse(report.inverted)
        self.assertEqual(report.retries, 0)

    def test_point_is_full_sample_smoothed_bounds(self):
        data = small_dataset()
        report = bootstrap_ci(data, 'ETT-mean', 'Z', a=1, replicates=30, alpha=20, seed=4)
        expected = estimate_bounds(fit_frequencies(data), 'ETT-mean', 'Z', 20, 1)
        self.assertEqual(report.point, expected.smoothed)
        self.assertEqual(report.label, 'ETT-mean(1)')
        self.assertEqual(len(report.replicate_bounds), 30)

    def test_raw_interval_and_hull(self):
        report = bootstrap_ci(small_dataset(), 'ETT-mean', 'Z', a=0, replicates=40, alpha=20, seed=7)
        lowers = [lower for lower, _ in report.replicate_bounds]
        uppers = [upper for _, upper in report.replicate_bounds]
        raw_lower = 2 * report.point.lower - sorted(lowers)[39 - 1]
        raw_upper = 2 * report.point.upper - sorted(uppers)[1 - 1]
        self.assertAlmostEqual(report.raw_ci[0], raw_lower)
        self.assertAlmostEqual(report.raw_ci[1], raw_upper)
        self.assertAlmostEqual(report.ci.lower, min(raw_lower, raw_upper, report.point.lower))
        self.assertAlmostEqual(report.ci.upper, max(raw_lower, raw_upper, report.point.upper))
        self.assertTrue(report.ci.covers(report.point))

    def test_reproducible_across_workers(self):
        data = small_dataset()
        serial = bootstrap_ci(data, 'PO-mean', 'W', a=1, replicates=16, seed=11, smoothing=0.5)
        parallel = bootstrap_ci(data, 'PO-mean', 'W', a=1, replicates=16, seed=11, smoothing=0.5, n_jobs=2)
        self.assertEqual(serial.replicate_bounds, parallel.replicate_bounds)
        self.assertEqual(serial.ci, parallel.ci)
        other = bootstrap_ci(data, 'PO-mean', 'W', a=1, replicates=16, seed=12, smoothing=0.5)
        self.assertNotEqual(serial.replicate_bounds, other.replicate_bounds)

    def test_effect_estimand(self):
        report = bootstrap_ci(small_dataset(), 'ATE', 'Z', replicates=10, smoothing=0.5)
        self.assertIsNone(report.a)
        self.assertEqual(report.label, 'ATE')

    def test_invalid_arguments(self):
        data = small_dataset()
        with self.assertRaises(ValueError):
            bootstrap_ci(data, replicates=1)
        with self.assertRaises(ValueError):
            bootstrap_ci(data, replicates=10, level=-0.1)
        with self.assertRaises(ValueError):
            bootstrap_ci(data, replicates=10, level=1.5)

    def test_report_output(self):
        report = bootstrap_ci(small_dataset(), 'ETT-mean', 'W', a=0, replicates=12, smoothing=0.5, seed=3)
        data = report.to_dict()
        self.assertEqual(data['rng'], RNG_ALGORITHM)
        self.assertEqual(data['replicates'], 12)
        summary = data['replicate_summary']
        self.assertLessEqual(summary['lower']['min'], summary['lower']['median'])
        self.assertLessEqual(summary['upper']['median'], summary['upper']['max'])

        out_csv = io.StringIO()
        write_replicates_csv(report, out_csv)
        lines = out_csv.getvalue().splitlines()
        self.assertEqual(lines[0], 'replicate,lower,upper')
        self.assertEqual(len(lines), 13)
        self.assertTrue(lines[1].startswith('0,'))

    def test_hard_only_report(self):
        report = bootstrap_ci(small_dataset(), 'ETT-mean', 'Z', replicates=5, alpha=math.inf, smoothing=0.5)
        self.assertIsNone(report.to_dict()['alpha'])


def fixed_replicates(mocker, lower_offsets, upper_offsets):
    """
    Replace the resampling with replicate bounds at fixed offsets from the point bounds

    :return: (dataset, point smoothed interval)
    """
    data = small_dataset()
    point = estimate_bounds(fit_frequencies(data), 'ETT-mean', 'Z', 20, 0).smoothed

    def replicate(data, index, seed, max_retries, bounds_args):
        return point.lower + lower_offsets[index], point.upper + upper_offsets[index], []

    mocker.patch('proxybounds.bootstrap._replicate', side_effect=replicate)
    return data, point


SPREAD = [(b - 19.5) / 1000 for b in range(40)]


def test_basic_interval_formula(mocker):
    data, point = fixed_replicates(mocker, SPREAD, SPREAD)
    report = bootstrap_ci(data, 'ETT-mean', 'Z', a=0, replicates=40, alpha=20)
    # ranks 39 and 1 of 40
    assert not report.widened
    assert not report.inverted
    assert report.ci.lower == pytest.approx(point.lower - 0.0185)
    assert report.ci.upper == pytest.approx(point.upper + 0.0195)
    assert report.ci.lower == report.raw_ci[0]


def test_full_level_uses_extremes(mocker):
    data, point = fixed_replicates(mocker, SPREAD, SPREAD)
    report = bootstrap_ci(data, 'ETT-mean', 'Z', a=0, replicates=40, alpha=20, level=1.0)
    assert not report.widened
    assert report.ci.lower == pytest.approx(point.lower - 0.0195)
    assert report.ci.upper == pytest.approx(point.upper + 0.0195)


def test_zero_level_uses_medians(mocker):
    data, point = fixed_replicates(mocker, SPREAD, SPREAD)
    report = bootstrap_ci(data, 'ETT-mean', 'Z', a=0, replicates=40, alpha=20, level=0.0)
    # rank 20 of 40 on both sides
    assert report.raw_ci[0] == pytest.approx(point.lower + 0.0005)
    assert report.raw_ci[1] == pytest.approx(point.upper + 0.0005)
    assert report.widened
    assert not report.inverted
    assert report.ci.lower == point.lower
    assert report.ci.upper == pytest.approx(point.upper + 0.0005)
    assert report.to_dict()['level'] == 0.0


def test_biased_replicates_widen_to_point(mocker):
    # replicate lower bounds all below the point lower bound
    data, point = fixed_replicates(mocker, [offset - 0.05 for offset in SPREAD], SPREAD)
    report = bootstrap_ci(data, 'ETT-mean', 'Z', a=0, replicates=40, alpha=20)
    assert report.raw_ci[0] == pytest.approx(point.lower + 0.05 - 0.0185)
    assert report.widened
    assert report.ci.lower == point.lower
    assert report.ci.covers(point)
    assert report.to_dict()['widened'] is True


def test_inverted_interval(mocker):
    data, point = fixed_replicates(mocker, [-2.0] * 40, [2.0] * 40)
    report = bootstrap_ci(data, 'ETT-mean', 'Z', a=0, replicates=40, alpha=20)
    assert report.inverted
    assert report.widened
    assert report.ci.lower == pytest.approx(min(point.upper - 2.0, point.lower))
    assert report.ci.upper == pytest.approx(max(point.lower + 2.0, point.upper))
    assert report.ci.covers(point)


def test_replicate_retried(mocker):
    data = small_dataset()
    real = estimate_bounds
    calls = {'count': 0}

    def flaky(*args, **kwargs):
        calls['count'] += 1
        # the full sample estimate and the first replicate attempt
        if calls['count'] == 2:
            raise ProxyboundsError('empty cell')
        return real(*args, **kwargs)

    mocker.patch('proxybounds.bootstrap.estimate_bounds', side_effect=flaky)
    report = bootstrap_ci(data, 'ETT-mean', 'Z', replicates=4, smoothing=0.5)
    assert report.retries == 1
    assert len(report.replicate_bounds) == 4


def test_replicate_failure(mocker):
    data = small_dataset()
    real = estimate_bounds
    calls = {'count': 0}

    def failing(*args, **kwargs):
        calls['count'] += 1
        if calls['count'] > 1:
            raise ProxyboundsError('empty cell')
        return real(*args, **kwargs)

    mocker.patch('proxybounds.bootstrap.estimate_bounds', side_effect=failing)
    with pytest.raises(BootstrapFailure) as ctx:
        bootstrap_ci(data, 'ETT-mean', 'Z', replicates=3, max_retries=2, smoothing=0.5)
    assert len(ctx.value.diagnostics) == 3
    assert 'replicate 0 attempt 2' in ctx.value.diagnostics[-1]


if __name__ == '__main__':
    unittest.main()
