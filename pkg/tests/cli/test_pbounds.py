import json
import os
import tempfile
import unittest

import pandas as pd

from proxybounds.bootstrap import bootstrap_ci
from proxybounds.bounds import EmptyIntersection, estimate_bounds, intersect_reports
from proxybounds.cli import pbounds
from proxybounds.codebook import load_codebook
from proxybounds.frequency import FrequencyModel, fit_frequencies, read_dataset_csv
from proxybounds.study import SUMMARY_COLUMNS
from tests import fixture_joint, fixture_path

SMALL_CSV = fixture_path('small.csv')
SMALL_CODEBOOK = fixture_path('small_codebook.json')

STUDY_CONFIG = {
    "name": "tiny",
    "kind": "population",
    "family": "confounder",
    "grid": [{"U": 2, "X": 2, "W": 2, "Z": 2, "A": 2, "Y": 3}],
    "replications": 2,
    "methods": ["W", "Z"],
    "estimands": ["ETT-mean"]
}


def small_dataset():
    with open(SMALL_CODEBOOK) as in_json:
        codebook = load_codebook(in_json)
    with open(SMALL_CSV) as in_csv:
        return read_dataset_csv(in_csv, codebook)


def read_json(filename):
    with open(filename) as in_json:
        return json.load(in_json)


class PboundsTestCase(unittest.TestCase):

    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory()
        self.out_dir = self.temp_dir.name

    def tearDown(self):
        self.temp_dir.cleanup()

    def out(self, name):
        return os.path.join(self.out_dir, name)

    def test_no_params(self):
        self.assertEqual(pbounds.cli_run(), 2)

    def test_help(self):
        with self.assertRaises(SystemExit) as ex:
            pbounds.cli_entry(['--help'])
        self.assertEqual(ex.exception.code, 0)

    def test_simulate(self):
        result = pbounds.cli_entry([
            'simulate', '--cardinalities', 'U=2,X=2,W=2,Z=2,A=2,Y=3', '-n', '50', '80',
            '--replications', '2', '--seed', '7', '-o', self.out_dir])
        self.assertEqual(result, 0)
        for stem in ('r0000', 'r0001'):
            for suffix in ('_spec.json', '_truth.json', '_codebook.json', '_n50.csv', '_n80.csv'):
                self.assertTrue(os.path.isfile(self.out(stem + suffix)), stem + suffix)
        spec = read_json(self.out('r0000_spec.json'))
        self.assertEqual(spec['config'], {'seed': 7, 'replication': 0})
        self.assertEqual(spec['family'], 'confounder')
        truth = read_json(self.out('r0001_truth.json'))
        self.assertEqual(len(truth['ett_mean']), 2)
        frame = pd.read_csv(self.out('r0000_n80.csv'))
        self.assertEqual(list(frame.columns), ['X', 'W', 'Z', 'A', 'Y'])
        self.assertEqual(len(frame), 80)

        # same seed, same files
        again = os.path.join(self.out_dir, 'again')
        pbounds.cli_entry([
            'simulate', '--cardinalities', 'U=2,X=2,W=2,Z=2,A=2,Y=3', '-n', '50', '80',
            '--replications', '2', '--seed', '7', '-o', again])
        with open(self.out('r0001_n50.csv')) as first, open(os.path.join(again, 'r0001_n50.csv')) as second:
            self.assertEqual(first.read(), second.read())

    def test_simulate_then_bounds(self):
        pbounds.cli_entry(['simulate', '--preset', 'study1', '-n', '300', '-o', self.out_dir])
        result = pbounds.cli_entry([
            'bounds', self.out('r0000_n300.csv'), '--codebook', self.out('r0000_codebook.json'),
            '--method', 'Z', '--smoothing', '0.5'])
        self.assertEqual(result, 0)
        report = read_json(self.out('r0000_n300.csv.bounds.json'))
        self.assertEqual(report['method'], 'Z')
        self.assertEqual(report['config']['smoothing'], 0.5)

    def test_simulate_errors(self):
        self.assertEqual(pbounds.cli_entry(['simulate', '-o', self.out_dir]), 2)
        self.assertEqual(pbounds.cli_entry(['simulate', '--cardinalities', 'U4', '-o', self.out_dir]), 2)
        self.assertEqual(pbounds.cli_entry(['simulate', '--cardinalities', 'U=2,A=3,Y=2', '-o', self.out_dir]), 2)
        self.assertEqual(pbounds.cli_entry(['simulate', '--preset', 'nope', '-o', self.out_dir]), 2)

    def test_bounds_matches_library(self):
        output = self.out('bounds.json')
        result = pbounds.cli_entry([
            'bounds', SMALL_CSV, '--codebook', SMALL_CODEBOOK, '--method', 'W', '--estimand', 'PO-mean',
            '-a', '1', '--alpha', '20', '-o', output])
        self.assertEqual(result, 0)
        report = read_json(output)
        expected = estimate_bounds(fit_frequencies(small_dataset()), 'PO-mean', 'W', 20.0, 1)
        self.assertEqual(report['hard'], expected.hard.to_dict())
        self.assertEqual(report['smoothed'], expected.smoothed.to_dict())
        self.assertEqual(report['estimand'], 'PO-mean(1)')
        self.assertEqual(report['config'], {
            'alpha': 20.0, 'smoothing': 0.0, 'a': 1, 'strict': False, 'rng': 'numpy.PCG64/SeedSequence'})

    def test_bounds_default_output_and_config_file(self):
        config_name = self.out('config.json')
        with open(config_name, 'w') as config_file:
            json.dump({'bounds': {'alpha': 10.0}}, config_file)
        result = pbounds.cli_entry(['bounds', SMALL_CSV, '--codebook', SMALL_CODEBOOK, '--config-file', config_name,
                                    '-o', self.out('b.json')])
        self.assertEqual(result, 0)
        report = read_json(self.out('b.json'))
        self.assertEqual(report['alpha'], 10.0)
        self.assertEqual(report['estimand'], 'ETT-mean(0)')

    def test_bounds_hard_only(self):
        output = self.out('hard.json')
        pbounds.cli_entry(['bounds', SMALL_CSV, '--codebook', SMALL_CODEBOOK, '--hard-only', '-o', output])
        report = read_json(output)
        self.assertIsNone(report['alpha'])
        self.assertIsNone(report['config']['alpha'])
        self.assertEqual(report['hard'], report['smoothed'])

    def test_bounds_population(self):
        output = self.out('population.json')
        result = pbounds.cli_entry([
            'bounds', fixture_path('conf_small.json'), '--population', '--method', 'W', 'Z',
            '--hard-only', '-o', output])
        reports = [
            estimate_bounds(FrequencyModel.from_joint(fixture_joint('conf_small.json')), 'ETT-mean', method,
                            float('inf'), 0)
            for method in ('W', 'Z')]
        try:
            expected = intersect_reports(reports)
        except EmptyIntersection:
            self.assertEqual(result, 3)
            return
        self.assertEqual(result, 0)
        report = read_json(output)
        self.assertEqual(report['method'], 'W+Z')
        self.assertEqual(report['hard'], expected.hard.to_dict())

    def test_bounds_effect(self):
        output = self.out('effect.json')
        result = pbounds.cli_entry([
            'bounds', fixture_path('med_small.json'), '--population', '--method', 'mediation',
            '--estimand', 'NIE', '-o', output])
        self.assertEqual(result, 0)
        report = read_json(output)
        self.assertEqual(report['estimand'], 'NIE')
        self.assertIn('mediation-cross-world', report['ratio_details'])

    def test_bounds_errors(self):
        # no codebook
        self.assertEqual(pbounds.cli_entry(['bounds', SMALL_CSV]), 2)
        # missing input file
        self.assertEqual(pbounds.cli_entry(['bounds', self.out('missing.csv'), '--codebook', SMALL_CODEBOOK]), 4)
        # frontdoor estimand with the W method
        self.assertEqual(pbounds.cli_entry([
            'bounds', SMALL_CSV, '--codebook', SMALL_CODEBOOK, '--estimand', 'frontdoor-PO-mean']), 2)
        # invalid JSON config file
        bad_config = self.out('bad.json')
        with open(bad_config, 'w') as config_file:
            config_file.write('{"bounds": ')
        self.assertEqual(pbounds.cli_entry([
            'bounds', SMALL_CSV, '--codebook', SMALL_CODEBOOK, '--config-file', bad_config]), 2)

    def test_bounds_negative_outcome(self):
        codebook_name = self.out('negative.json')
        codebook = read_json(SMALL_CODEBOOK)
        codebook['y_values'] = [-1, 0, 1]
        with open(codebook_name, 'w') as out_json:
            json.dump(codebook, out_json)
        self.assertEqual(pbounds.cli_entry(['bounds', SMALL_CSV, '--codebook', codebook_name]), 2)

    def test_bounds_empty_cell(self):
        data_name = self.out('empty_cell.csv')
        with open(data_name, 'w') as out_csv:
            # no treated record at X=1
            out_csv.write('X,W,Z,A,Y\n0,0,0,0,0\n0,1,1,1,2\n1,0,1,0,1\n1,1,0,0,2\n')
        self.assertEqual(pbounds.cli_entry([
            'bounds', data_name, '--codebook', SMALL_CODEBOOK, '-a', '1', '-o', self.out('e.json')]), 3)
        self.assertEqual(pbounds.cli_entry([
            'bounds', data_name, '--codebook', SMALL_CODEBOOK, '-a', '1', '--smoothing', '0.5',
            '-o', self.out('e.json')]), 0)

    def test_ci_matches_library(self):
        output = self.out('ci.json')
        replicates_csv = self.out('replicates.csv')
        result = pbounds.cli_entry([
            'ci', SMALL_CSV, '--codebook', SMALL_CODEBOOK, '--method', 'Z', '--replicates', '15',
            '--smoothing', '0.5', '--seed', '5', '-o', output, '--replicates-csv', replicates_csv])
        self.assertEqual(result, 0)
        report = read_json(output)
        expected = bootstrap_ci(small_dataset(), 'ETT-mean', 'Z', 0, replicates=15, seed=5, smoothing=0.5)
        self.assertEqual(report['ci'], expected.ci.to_dict())
        self.assertEqual(report['point'], expected.point.to_dict())
        self.assertEqual(report['config']['replicates'], 15)
        self.assertEqual(report['config']['level'], 0.95)
        frame = pd.read_csv(replicates_csv)
        self.assertEqual(list(frame.columns), ['replicate', 'lower', 'upper'])
        self.assertEqual(len(frame), 15)

    def test_ci_errors(self):
        self.assertEqual(pbounds.cli_entry([
            'ci', SMALL_CSV, '--codebook', SMALL_CODEBOOK, '--method', 'W', 'Z']), 2)
        self.assertEqual(pbounds.cli_entry([
            'ci', SMALL_CSV, '--codebook', SMALL_CODEBOOK, '--replicates', '1']), 2)

    def test_bridge_check(self):
        output = self.out('bridge.json')
        cells_csv = self.out('cells.csv')
        result = pbounds.cli_entry([
            'bridge-check', fixture_path('spec_small.json'), '-o', output, '--cells-csv', cells_csv])
        self.assertEqual(result, 0)
        report = read_json(output)
        self.assertEqual([item['bridge'] for item in report['results']], ['outcome', 'treatment'])
        self.assertEqual(report['config']['variant'], 'confounder')
        self.assertEqual(report['feasible'], all(item['feasible'] for item in report['results']))
        frame = pd.read_csv(cells_csv)
        self.assertEqual(len(frame), 8)
        self.assertIn('normalization_gap', frame.columns)

    def test_bridge_check_variants(self):
        output = self.out('bridge.json')
        pbounds.cli_entry(['bridge-check', fixture_path('med_small.json'), '-o', output])
        report = read_json(output)
        self.assertEqual(report['config']['variant'], 'mediation')
        self.assertEqual(len(report['results']), 1)
        pbounds.cli_entry(['bridge-check', fixture_path('conf_small.json'), '--tolerance', '1e-6', '-o', output])
        report = read_json(output)
        self.assertEqual(report['config'], {'tolerance': 1e-6, 'clip': 1e-10, 'variant': 'confounder'})
        # no outcome proxy in the joint
        self.assertEqual(pbounds.cli_entry(['bridge-check', fixture_path('tiny.json'), '-o', output]), 2)

    def test_study(self):
        config_name = self.out('tiny_study.json')
        with open(config_name, 'w') as config_file:
            json.dump(STUDY_CONFIG, config_file)
        output = self.out('tiny_summary.csv')
        records_csv = self.out('records.csv')
        result = pbounds.cli_entry([
            'study', config_name, '-o', output, '--seed', '3', '--jobs', '2', '--records-csv', records_csv])
        self.assertEqual(result, 0)
        summary = pd.read_csv(output)
        self.assertEqual(list(summary.columns), SUMMARY_COLUMNS)
        self.assertEqual(list(summary['method']), ['W', 'Z'])
        report = read_json(self.out('tiny_summary.json'))
        self.assertEqual(report['config']['seed'], 3)
        self.assertNotIn('n_jobs', report['config'])
        self.assertEqual(len(report['rows']), 2)
        self.assertEqual(len(pd.read_csv(records_csv)), 4)

    def test_study_errors(self):
        self.assertEqual(pbounds.cli_entry(['study', 'no_such_study', '-o', self.out('s.csv')]), 2)
        config_name = self.out('bad_study.json')
        with open(config_name, 'w') as config_file:
            json.dump(dict(STUDY_CONFIG, methods=['frontdoor']), config_file)
        self.assertEqual(pbounds.cli_entry(['study', config_name, '-o', self.out('s.csv')]), 2)


if __name__ == '__main__':
    unittest.main()
