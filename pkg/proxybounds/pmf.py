"""
Dense categorical probability tables.

A :py:class:`JointPMF` is a normalized numpy array with one axis per codebook
variable, in codebook order. All operations are exact sums over the table.

Build a joint and query it::

    >>> from proxybounds.codebook import Codebook, Variable
    >>> codebook = Codebook((Variable('A', 2, 'A'), Variable('Y', 2, 'Y')), y_values=(0, 1))
    >>> pmf = JointPMF(codebook, [[0.4, 0.1], [0.2, 0.3]])
    >>> marginal(pmf, {'A'}).table
    array([0.5, 0.5])
    >>> conditional(pmf, {'Y'}, {'A': 1}).table
    array([0.4, 0.6])
    >>> cond_mean_y(pmf, {'A': 0})
    0.2

"""
import json
import logging
import typing

import numpy as np

from proxybounds import ProxyboundsError
from proxybounds.codebook import Codebook, CodebookError

LOGGER = logging.getLogger(__name__)
NORMALIZATION_TOLERANCE = 1e-12


class UnknownAxis(CodebookError):
    pass


class ZeroConditioningMass(ProxyboundsError):
    pass


class JointPMF(object):
    """
    Joint probability table over the variables of a codebook.

    The table is renormalized on construction and made read only.

    :param codebook: variables, one table axis each in codebook order
    :param table: nonnegative array shaped by the codebook cardinalities
    """

    def __init__(self, codebook: Codebook, table: typing.Any):
        table = np.array(table, dtype=np.float64)
        shape = tuple(var.cardinality for var in codebook.variables)
        if table.shape != shape:
            raise CodebookError(f'Table shape {table.shape} does not match codebook shape {shape}')
        if not np.all(np.isfinite(table)) or np.any(table < 0):
            raise ProxyboundsError('Probability table entries must be finite and nonnegative')
        total = table.sum()
        if total <= 0:
            raise ProxyboundsError('Probability table has no mass')
        table = table / total
        table.setflags(write=False)
        self.codebook = codebook
        self.table = table

    @property
    def axes(self) -> typing.Tuple[str, ...]:
        return self.codebook.names

    def axis(self, name: str) -> int:
        try:
            return self.axes.index(name)
        except ValueError:
            raise UnknownAxis(f'Unknown axis {name!r}, joint axes are {self.axes}')

    def axis_for_role(self, role: str) -> str:
        var = self.codebook.by_role(role)
        if var is None:
            raise UnknownAxis(f'Joint has no {role} axis')
        return var.name

    def __repr__(self):
        return f'JointPMF(axes={self.axes}, shape={self.table.shape})'

    def to_dict(self) -> dict:
        return {'codebook': self.codebook.to_dict(), 'table': self.table.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> 'JointPMF':
        return cls(Codebook.from_dict(data['codebook']), data['table'])


def _check_axes(pmf: JointPMF, names: typing.Iterable[str]) -> typing.List[str]:
    names = list(names)
    for name in names:
        pmf.axis(name)
    return names


def marginal(pmf: JointPMF, keep: typing.Iterable[str]) -> JointPMF:
    """
    Sum out every axis not in keep

    :param pmf: joint table
    :param keep: names of the axes to keep
    :return: normalized joint over the kept axes (codebook order)
    :raises UnknownAxis: keep names an axis the joint does not have
    """
    keep = set(_check_axes(pmf, keep))
    drop = tuple(index for index, name in enumerate(pmf.axes) if name not in keep)
    table = pmf.table.sum(axis=drop) if drop else pmf.table
    return JointPMF(pmf.codebook.subset(keep), table)


def _given_index(pmf: JointPMF, given: typing.Mapping[str, int]) -> tuple:
    index = [slice(None)] * len(pmf.axes)
    for name, level in given.items():
        axis = pmf.axis(name)
        if not 0 <= int(level) < pmf.table.shape[axis]:
            raise UnknownAxis(f'Level {level} out of range for axis {name}')
        index[axis] = int(level)
    return tuple(index)


def conditional(pmf: JointPMF, target: typing.Iterable[str], given: typing.Mapping[str, int]) -> JointPMF:
    """
    Distribution of target given an assignment of other axes

    :param pmf: joint table
    :param target: names of the target axes
    :param given: mapping of axis name to category index
    :return: normalized joint over the target axes
    :raises ZeroConditioningMass: the assignment has zero probability
    """
    target = set(_check_axes(pmf, target))
    if target & set(given):
        raise UnknownAxis(f'Axes {sorted(target & set(given))} are both target and given')
    keep = target | set(given)
    joint = marginal(pmf, keep)
    mass = joint.table[_given_index(joint, given)]
    total = mass.sum()
    if total <= 0:
        raise ZeroConditioningMass(f'P({dict(given)}) = 0', cell=dict(given))
    return JointPMF(joint.codebook.subset(target), mass / total)


def cond_mean_y(pmf_or_model: typing.Any, given: typing.Mapping[str, int]) -> float:
    """
    Conditional mean of the numeric outcome given an assignment

    :param pmf_or_model: JointPMF or FrequencyModel
    :param given: mapping of axis name to category index
    :return: sum over y of y_value(y) * p(y | given)
    :raises ZeroConditioningMass: the assignment has zero probability
    """
    pmf = getattr(pmf_or_model, 'joint', pmf_or_model)
    outcome = pmf.axis_for_role('Y')
    dist = conditional(pmf, {outcome}, given)
    return float(np.dot(dist.table, pmf.codebook.y_values))


def role_table(pmf: JointPMF, roles: typing.Sequence[str]) -> np.ndarray:
    """
    Marginal table with one axis per listed role, in the listed order.

    Covariates are flattened into a single composite X axis (one level when the
    codebook has no covariates).

    :param pmf: joint table
    :param roles: role codes, e.g. ``('A', 'X', 'U', 'Y')``
    :return: numpy array
    :raises UnknownAxis: a role other than X is absent
    """
    groups = []
    for role in roles:
        if role == 'X':
            groups.append([var.name for var in pmf.codebook.covariates])
        else:
            groups.append([pmf.axis_for_role(role)])
    names = [name for group in groups for name in group]
    margin = marginal(pmf, names)
    table = np.transpose(margin.table, [margin.axes.index(name) for name in names])
    shape = tuple(int(np.prod([margin.codebook[name].cardinality for name in group], dtype=np.int64))
                  for group in groups)
    return table.reshape(shape)


def load_joint(file_obj: typing.TextIO) -> JointPMF:
    return JointPMF.from_dict(json.load(file_obj))
