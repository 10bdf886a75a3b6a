import io
import itertools
import unittest

import numpy as np

from proxybounds.codebook import Codebook, CodebookError, Variable, load_codebook
from proxybounds.frequency import CANONICAL_AXES, Dataset, FrequencyModel, fit_frequencies, read_dataset_csv, \
    write_dataset_csv
from proxybounds.pmf import JointPMF, ZeroConditioningMass, conditional, cond_mean_y
from tests import DATA_DIR, fixture_joint, fixture_path


def small_dataset():
    with open(fixture_path('small_codebook.json')) as in_json:
        codebook = load_codebook(in_json)
    with open(fixture_path('small.csv')) as in_csv:
        return read_dataset_csv(in_csv, codebook)


class DatasetTestCase(unittest.TestCase):

    def test_read_small(self):
        data = small_dataset()
        self.assertEqual(data.n, 40)
        self.assertEqual(data.codebook.names, ('X', 'W', 'Z', 'A', 'Y'))
        self.assertEqual(data.column('A')[:4].tolist(), [0, 0, 1, 1])

    def test_read_reorders_columns(self):
        codebook = Codebook((Variable('A', 2, 'A'), Variable('Y', 2, 'Y')), (0, 1))
        data = read_dataset_csv(io.StringIO('Y,A\n1,0\n0,1\n'), codebook)
        self.assertEqual(data.records.tolist(), [[0, 1], [1, 0]])

    def test_read_errors(self):
        codebook = Codebook((Variable('A', 2, 'A'), Variable('Y', 2, 'Y')), (0, 1))
        with self.assertRaises(CodebookError):
            read_dataset_csv(io.StringIO('A,B\n1,0\n'), codebook)
        with self.assertRaises(CodebookError):
            read_dataset_csv(io.StringIO('A,Y\n1,0.5\n'), codebook)
        with self.assertRaises(CodebookError):
            read_dataset_csv(io.StringIO('A,Y\n1,\n0,1\n'), codebook)
        with self.assertRaises(CodebookError):
            read_dataset_csv(io.StringIO('A,Y\n1,2\n'), codebook)

    def test_latent_variables_ignored(self):
        codebook = Codebook((Variable('U', 3, 'U'), Variable('A', 2, 'A'), Variable('Y', 2, 'Y')), (0, 1))
        data = Dataset(codebook, [[0, 1], [1, 1]])
        self.assertEqual(data.codebook.names, ('A', 'Y'))

    def test_write_then_read(self):
        data = small_dataset()
        out_csv = io.StringIO()
        write_dataset_csv(data, out_csv)
        self.assertTrue(out_csv.getvalue().startswith('X,W,Z,A,Y\n0,0,0,0,0\n'))
        out_csv.seek(0)
        self.assertEqual(read_dataset_csv(out_csv, data.codebook).records.tolist(), data.records.tolist())

    def test_shipped_sample(self):
        with open(f'{DATA_DIR}/rhc_pafi_codebook.json') as in_json:
            codebook = load_codebook(in_json)
        with open(f'{DATA_DIR}/rhc_pafi_sample.csv') as in_csv:
            data = read_dataset_csv(in_csv, codebook)
        self.assertEqual(data.n, 2000)
        canonical = data.canonical_records()
        self.assertEqual(canonical[:, 0].max(), 31)
        self.assertEqual(canonical[:, 1].max(), 0)


class FitFrequenciesTestCase(unittest.TestCase):

    def test_counts_by_enumeration(self):
        data = small_dataset()
        model = fit_frequencies(data)
        records = data.records.tolist()
        y_values = [1, 2, 3]
        for a, x in itertools.product(range(2), range(2)):
            cell = [r for r in records if r[3] == a and r[0] == x]
            self.assertAlmostEqual(model.p_ax[a, x], len(cell) / len(records))
            self.assertAlmostEqual(model.ey_ax[a, x], sum(y_values[r[4]] for r in cell) / len(cell))
            for w in range(2):
                self.assertAlmostEqual(
                    model.p_w_given_ax[a, x, w], sum(1 for r in cell if r[1] == w) / len(cell))
        self.assertEqual(model.n, 40)
        self.assertEqual(model.cardinalities, dict(zip(CANONICAL_AXES, (2, 2, 2, 2, 3))))

    def test_smoothing_keeps_tower_property(self):
        model = fit_frequencies(small_dataset(), smoothing=0.5)
        tower = np.einsum('axz,axz->ax', model.p_z_given_ax, model.ey_axz)
        np.testing.assert_allclose(tower, model.ey_ax, atol=1e-12)
        np.testing.assert_allclose(model.p_wz_given_ax.sum(axis=3), model.p_w_given_ax, atol=1e-12)
        np.testing.assert_allclose((model.p_x_given_a * model.p_a[:, None]).sum(axis=0), model.p_x, atol=1e-12)
        self.assertTrue(np.all(model.p_wz_given_ax > 0))

    def test_smoothing_counts(self):
        codebook = Codebook((Variable('A', 2, 'A'), Variable('Y', 2, 'Y')), (0, 1))
        data = Dataset(codebook, [[0, 0], [0, 1], [1, 1]])
        model = fit_frequencies(data, smoothing=1.0)
        # (1+1) + (1+1) over 3 + 4
        self.assertAlmostEqual(model.p_a[0], 4 / 7)
        self.assertAlmostEqual(model.ey_a[1], 2 / 3)
        with self.assertRaises(ValueError):
            fit_frequencies(data, smoothing=-1)

    def test_positivity_audit(self):
        codebook = Codebook((Variable('X', 2, 'X'), Variable('A', 2, 'A'), Variable('Y', 2, 'Y')), (0, 1))
        data = Dataset(codebook, [[0, 0, 0], [0, 1, 1], [1, 0, 1]])
        model = fit_frequencies(data)
        cells = [entry.cell for entry in model.positivity_audit if entry.conditional == 'p(.|a,x)']
        self.assertEqual(cells, [{'a': 1, 'x': 1}])
        self.assertTrue(np.isnan(model.ey_ax[1, 1]))
        with self.assertRaises(ZeroConditioningMass) as ctx:
            model.require_cell(1, 1, 'test')
        self.assertEqual(ctx.exception.cell, {'a': 1, 'x': 1})
        smoothed = fit_frequencies(data, smoothing=0.1)
        self.assertTrue(smoothed.positivity_audit)
        smoothed.require_cell(1, 1, 'test')

    def test_constant_proxy_column(self):
        codebook = Codebook((Variable('Z', 3, 'Z'), Variable('A', 2, 'A'), Variable('Y', 2, 'Y')), (0, 1))
        data = Dataset(codebook, [[1, 0, 0], [1, 1, 1], [1, 0, 1]])
        model = fit_frequencies(data)
        self.assertEqual(np.count_nonzero(~np.isnan(model.ey_axz[0, 0])), 1)


class PopulationModelTestCase(unittest.TestCase):

    def test_from_joint_matches_conditionals(self):
        joint = fixture_joint('conf_small.json')
        model = FrequencyModel.from_joint(joint)
        for a, x in itertools.product(range(2), range(2)):
            expected = conditional(joint, {'W'}, {'A': a, 'X': x}).table
            np.testing.assert_allclose(model.p_w_given_ax[a, x], expected, atol=1e-12)
            self.assertAlmostEqual(model.ey_ax[a, x], cond_mean_y(joint, {'A': a, 'X': x}))
            for z in range(2):
                self.assertAlmostEqual(model.ey_axz[a, x, z], cond_mean_y(joint, {'A': a, 'X': x, 'Z': z}))
        self.assertEqual(model.positivity_audit, [])
        self.assertIsNone(model.n)

    def test_from_joint_flattens_covariates_and_adds_unit_proxy(self):
        codebook = Codebook((
            Variable('A', 2, 'A'), Variable('c1', 2, 'X'), Variable('W', 2, 'W'), Variable('c2', 3, 'X'),
            Variable('Y', 2, 'Y')), (0, 1))
        rng = np.random.default_rng(3)
        joint = JointPMF(codebook, rng.uniform(0.1, 1.0, size=(2, 2, 2, 3, 2)))
        model = FrequencyModel.from_joint(joint)
        self.assertEqual(model.cardinalities, {'X': 6, 'W': 2, 'Z': 1, 'A': 2, 'Y': 2})
        # composite x = c1 * 3 + c2
        expected = cond_mean_y(joint, {'A': 1, 'c1': 1, 'c2': 2})
        self.assertAlmostEqual(model.ey_ax[1, 5], expected)
        self.assertAlmostEqual(model.p_x[4], float(joint.table[:, 1, :, 1, :].sum()))


if __name__ == '__main__':
    unittest.main()
