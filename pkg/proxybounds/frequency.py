"""
Observed datasets and the frequency models the bound estimators consume.

A :py:class:`Dataset` holds n records of 0-based category indexes over the
observed variables of a codebook. :py:func:`fit_frequencies` tabulates the
records into a smoothed joint count table over the canonical observed axes
``(X, W, Z, A, Y)`` and derives every conditional from that single table.
Covariates are flattened into the composite X axis; a missing proxy becomes an
axis with one level.

Dataset CSV: a header row of variable names followed by one integer category
index per column per record::

    X,W,Z,A,Y
    0,1,3,1,2
    2,0,0,0,1

Population mode uses the same model built from an exact joint::

    model = FrequencyModel.from_joint(joint)

"""
import logging
import typing
from dataclasses import dataclass

import numpy as np
import pandas as pd

from proxybounds.codebook import Codebook, CodebookError, Variable
from proxybounds.pmf import JointPMF, ZeroConditioningMass, marginal

LOGGER = logging.getLogger(__name__)

CANONICAL_AXES = ('X', 'W', 'Z', 'A', 'Y')
_X, _W, _Z, _A, _Y = range(5)


class Dataset(object):
    """
    Observed records.

    :param codebook: codebook of the data; latent variables are ignored
    :param records: integer array (n x observed variables) in observed codebook order
    """

    def __init__(self, codebook: Codebook, records: typing.Any):
        self.codebook = codebook.observed
        records = np.asarray(records, dtype=np.int64)
        width = len(self.codebook.variables)
        if records.ndim != 2 or records.shape[1] != width:
            raise CodebookError(f'Records must be an (n x {width}) array, got shape {records.shape}')
        if records.shape[0] < 1:
            raise CodebookError('Dataset needs at least one record')
        cardinalities = np.array([var.cardinality for var in self.codebook.variables])
        bad = (records < 0) | (records >= cardinalities)
        if bad.any():
            row, column = np.argwhere(bad)[0]
            raise CodebookError(
                f'Record {row} has index {records[row, column]} out of range for '
                f'{self.codebook.variables[column].name}', cell={'record': int(row)})
        records.setflags(write=False)
        self.records = records

    @property
    def n(self) -> int:
        return int(self.records.shape[0])

    def column(self, name: str) -> np.ndarray:
        return self.records[:, self.codebook.names.index(name)]

    def take(self, indexes: np.ndarray) -> 'Dataset':
        """
        Dataset made of the records at the given row indexes (used for resampling)
        """
        return Dataset(self.codebook, self.records[np.asarray(indexes)])

    def canonical_records(self) -> np.ndarray:
        """
        Records mapped to the canonical (X, W, Z, A, Y) axes
        """
        codebook = self.codebook
        codebook.require('A', 'Y')
        n = self.n
        columns = np.zeros((n, 5), dtype=np.int64)
        covariates = [var.name for var in codebook.covariates]
        if covariates:
            columns[:, _X] = codebook.flatten_covariates(
                np.column_stack([self.column(name) for name in covariates]))
        for axis, role in ((_W, 'W'), (_Z, 'Z'), (_A, 'A'), (_Y, 'Y')):
            var = codebook.by_role(role)
            if var:
                columns[:, axis] = self.column(var.name)
        return columns


def canonical_codebook(codebook: Codebook) -> Codebook:
    """
    Codebook of the canonical observed axes for a data codebook
    """
    codebook.require('A', 'Y')

    def cardinality(role):
        var = codebook.by_role(role)
        return var.cardinality if var else 1

    return Codebook((
        Variable('X', codebook.x_cardinality, 'X'),
        Variable('W', cardinality('W'), 'W'),
        Variable('Z', cardinality('Z'), 'Z'),
        Variable('A', 2, 'A'),
        Variable('Y', cardinality('Y'), 'Y'),
    ), codebook.y_values)


def read_dataset_csv(file_obj: typing.Any, codebook: Codebook) -> Dataset:
    """
    Read a dataset CSV

    :param file_obj: path or text file object
    :param codebook: codebook describing the columns
    :return: Dataset
    :raises CodebookError: header does not match the observed codebook variables or values are not integers
    """
    observed = codebook.observed
    frame = pd.read_csv(file_obj)
    expected = list(observed.names)
    if sorted(frame.columns) != sorted(expected):
        raise CodebookError(f'CSV header {list(frame.columns)} does not match codebook variables {expected}')
    frame = frame[expected]
    if frame.isna().any().any():
        raise CodebookError('CSV has missing values')
    if not all(pd.api.types.is_integer_dtype(dtype) for dtype in frame.dtypes):
        raise CodebookError('CSV values must be integer category indexes')
    LOGGER.info(f'read {len(frame)} records with columns {expected}')
    return Dataset(observed, frame.to_numpy(dtype=np.int64))


def write_dataset_csv(dataset: Dataset, file_obj: typing.TextIO) -> None:
    """
    Write a dataset CSV (header row then one row per record)
    """
    frame = pd.DataFrame(dataset.records, columns=list(dataset.codebook.names))
    frame.to_csv(file_obj, index=False, lineterminator='\n')


@dataclass(frozen=True)
class AuditEntry:
    """
    A required cell of a conditional with no raw mass
    """
    conditional: str
    cell: typing.Dict[str, int]

    def __str__(self):
        cell = ','.join(f'{key}={value}' for key, value in self.cell.items())
        return f'{self.conditional} empty at {cell}'


def _divide(numerator: np.ndarray, denominator: np.ndarray) -> np.ndarray:
    """
    Elementwise ratio, NaN where the denominator is zero
    """
    with np.errstate(divide='ignore', invalid='ignore'):
        return np.where(denominator > 0, numerator / np.where(denominator > 0, denominator, 1.0), np.nan)


class FrequencyModel(object):
    """
    Conditional tables of the observed margin.

    Arrays are indexed ``[a, x, ...]``. Entries whose conditioning cell has
    zero (smoothed) mass are NaN.

    :param joint: normalized JointPMF over the canonical axes (X, W, Z, A, Y)
    :param raw_mass: unsmoothed joint counts or probabilities used by the positivity audit
    :param smoothing: add-lambda pseudo count used to build ``joint``
    :param n: number of records (None in population mode)
    """

    def __init__(self, joint: JointPMF, raw_mass: np.ndarray = None, smoothing: float = 0.0, n: int = None):
        if joint.axes != CANONICAL_AXES:
            raise CodebookError(f'Frequency model needs axes {CANONICAL_AXES}, got {joint.axes}')
        self.joint = joint
        self.codebook = joint.codebook
        self.smoothing = float(smoothing)
        self.n = n
        self.y_values = np.array(self.codebook.y_values)
        self.y_inf = self.codebook.y_inf
        self.y_sup = self.codebook.y_sup

        p = joint.table                                   # p(x,w,z,a,y)
        p_xwza = p.sum(axis=_Y)
        ey_mass = np.tensordot(p, self.y_values, axes=([_Y], [0]))   # E[Y I(x,w,z,a)]

        p_axwz = np.moveaxis(p_xwza, 3, 0)                # [a,x,w,z]
        ey_axwz = np.moveaxis(ey_mass, 3, 0)
        p_axw = p_axwz.sum(axis=3)
        p_axz = p_axwz.sum(axis=2)
        p_ax = p_axw.sum(axis=2)

        self.p_a = p_ax.sum(axis=1)
        self.p_ax = p_ax
        self.p_x = p_ax.sum(axis=0)
        self.p_x_given_a = _divide(p_ax, self.p_a[:, None])
        self.p_w_given_ax = _divide(p_axw, p_ax[:, :, None])
        self.p_z_given_ax = _divide(p_axz, p_ax[:, :, None])
        self.p_wz_given_ax = _divide(p_axwz, p_ax[:, :, None, None])
        p_wx = p_axw.sum(axis=0)
        self.p_wx = p_wx
        self.p_a_given_wx = _divide(p_axw, p_wx[None, :, :])

        ey_ax = ey_axwz.sum(axis=(2, 3))
        self.ey_ax = _divide(ey_ax, p_ax)
        self.ey_axz = _divide(ey_axwz.sum(axis=2), p_axz)
        self.ey_a = _divide(ey_ax.sum(axis=1), self.p_a)
        # E[I(A=a)Y]
        self.ey_ind_a = ey_ax.sum(axis=1)

        self.positivity_audit = self._audit(p if raw_mass is None else np.asarray(raw_mass))
        for entry in self.positivity_audit:
            LOGGER.debug(f'positivity audit: {entry}')

    @staticmethod
    def _audit(raw: np.ndarray) -> typing.List[AuditEntry]:
        raw_xwza = raw.sum(axis=_Y)
        raw_ax = raw_xwza.sum(axis=(1, 2)).T
        raw_axw = np.moveaxis(raw_xwza.sum(axis=2), 2, 0)
        raw_axz = np.moveaxis(raw_xwza.sum(axis=1), 2, 0)
        entries = []
        for a, x in zip(*np.nonzero(raw_ax == 0)):
            entries.append(AuditEntry('p(.|a,x)', {'a': int(a), 'x': int(x)}))
        for a, x, w in zip(*np.nonzero(raw_axw == 0)):
            entries.append(AuditEntry('p(w|a,x)', {'a': int(a), 'x': int(x), 'w': int(w)}))
        for a, x, z in zip(*np.nonzero(raw_axz == 0)):
            entries.append(AuditEntry('E[Y|z,a,x]', {'a': int(a), 'x': int(x), 'z': int(z)}))
        return entries

    @property
    def cardinalities(self) -> typing.Dict[str, int]:
        return dict(zip(CANONICAL_AXES, self.joint.table.shape))

    @classmethod
    def from_joint(cls, joint: JointPMF) -> 'FrequencyModel':
        """
        Population mode: exact conditionals of the observed margin of a joint
        """
        observed = marginal(joint, joint.codebook.observed.names)
        canonical = canonical_codebook(observed.codebook)
        codebook = observed.codebook
        # order observed axes as (covariates..., W, Z, A, Y), inserting unit axes for absent proxies
        table = observed.table
        order = [codebook.names.index(var.name) for var in codebook.covariates]
        table = np.moveaxis(table, order, list(range(len(order)))) if order else table
        rest = [var for var in codebook.variables if var.role != 'X']
        table = table.reshape((canonical['X'].cardinality,) + tuple(var.cardinality for var in rest))
        rest_roles = [var.role for var in rest]
        for position, role in ((1, 'W'), (2, 'Z')):
            if role not in rest_roles:
                table = np.expand_dims(table, position)
                rest_roles.insert(position - 1, role)
        permutation = [0] + [1 + rest_roles.index(role) for role in ('W', 'Z', 'A', 'Y')]
        table = np.transpose(table, permutation)
        return cls(JointPMF(canonical, table))

    def require_cell(self, a: int, x: int, what: str) -> None:
        """
        :raises ZeroConditioningMass: p(a, x) = 0
        """
        if not self.p_ax[a, x] > 0:
            raise ZeroConditioningMass(
                f'{what} needs p(A={a}, X={x}) > 0', cell={'a': int(a), 'x': int(x)},
                diagnostics=[str(entry) for entry in self.positivity_audit])


def fit_frequencies(data: Dataset, smoothing: float = 0.0) -> FrequencyModel:
    """
    Tabulate a dataset into a frequency model

    Every cell of the canonical joint count table receives ``smoothing`` pseudo
    counts before normalization; every conditional derives from that table.

    :param data: observed dataset
    :param smoothing: add-lambda pseudo count (>= 0)
    :return: FrequencyModel
    """
    if smoothing < 0:
        raise ValueError('smoothing must be nonnegative')
    canonical = canonical_codebook(data.codebook)
    shape = tuple(var.cardinality for var in canonical.variables)
    cells = np.ravel_multi_index(tuple(data.canonical_records().T), shape)
    counts = np.bincount(cells, minlength=int(np.prod(shape))).reshape(shape).astype(np.float64)
    LOGGER.debug(f'fit_frequencies n={data.n} smoothing={smoothing} cells={counts.size}')
    joint = JointPMF(canonical, counts + smoothing)
    return FrequencyModel(joint, raw_mass=counts, smoothing=smoothing, n=data.n)
