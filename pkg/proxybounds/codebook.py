"""
Codebooks
---------

A codebook names the categorical variables of a model, their cardinalities and
the causal role each one plays. It also carries the numeric value attached to
every outcome level.

Roles:

* ``latent-confounder`` (U) - unmeasured confounder, only present in simulated joints
* ``latent-mediator`` (M) - unmeasured mediator, only present in simulated joints
* ``covariate`` (X) - observed confounders. Several covariates are flattened to one composite X axis
* ``outcome-proxy`` (W) - outcome confounding proxy
* ``treatment-proxy`` (Z) - treatment confounding proxy
* ``treatment`` (A) - binary treatment
* ``outcome`` (Y) - categorical outcome with numeric level values

Codebook JSON::

    {
        "variables": [
            {"name": "X", "cardinality": 4, "role": "covariate"},
            {"name": "W", "cardinality": 4, "role": "outcome-proxy"},
            {"name": "Z", "cardinality": 4, "role": "treatment-proxy"},
            {"name": "A", "cardinality": 2, "role": "treatment"},
            {"name": "Y", "cardinality": 3, "role": "outcome"}
        ],
        "y_values": [1, 2, 3]
    }

The single letter role codes (``U``, ``M``, ``X``, ``W``, ``Z``, ``A``, ``Y``) are
accepted in place of the long role names.
"""
import json
import logging
import typing
from dataclasses import dataclass, field

import numpy as np

from proxybounds import ProxyboundsError

LOGGER = logging.getLogger(__name__)

ROLES = {
    'U': 'latent-confounder',
    'M': 'latent-mediator',
    'X': 'covariate',
    'W': 'outcome-proxy',
    'Z': 'treatment-proxy',
    'A': 'treatment',
    'Y': 'outcome',
}
ROLE_CODES = {name: code for code, name in ROLES.items()}
LATENT_ROLES = ('U', 'M')


class CodebookError(ProxyboundsError):
    exit_code = 2


def role_code(role: str) -> str:
    """
    Normalise a role to its single letter code

    :param role: role code or long role name
    :return: role code
    """
    if role in ROLES:
        return role
    if role in ROLE_CODES:
        return ROLE_CODES[role]
    raise CodebookError(f'Unknown role {role!r}')


@dataclass(frozen=True)
class Variable:
    name: str
    cardinality: int
    role: str

    def __post_init__(self):
        object.__setattr__(self, 'role', role_code(self.role))
        if not self.name.isidentifier():
            raise CodebookError(f'Variable name {self.name!r} is not an identifier')
        if int(self.cardinality) < 1:
            raise CodebookError(f'Variable {self.name} cardinality must be positive')
        object.__setattr__(self, 'cardinality', int(self.cardinality))

    @property
    def latent(self) -> bool:
        return self.role in LATENT_ROLES


@dataclass(frozen=True)
class Codebook:
    """
    Ordered variables and outcome level values.

    :param variables: ordered variables
    :param y_values: numeric value of each outcome level (required when an outcome is declared)
    """
    variables: typing.Tuple[Variable, ...]
    y_values: typing.Tuple[float, ...] = field(default=())

    def __post_init__(self):
        variables = tuple(
            var if isinstance(var, Variable) else Variable(**var) for var in self.variables)
        object.__setattr__(self, 'variables', variables)
        object.__setattr__(self, 'y_values', tuple(float(value) for value in self.y_values))

        names = [var.name for var in variables]
        if len(set(names)) != len(names):
            raise CodebookError(f'Duplicate variable names in {names}')
        for role in ROLES:
            if role == 'X':
                continue
            found = [var.name for var in variables if var.role == role]
            if len(found) > 1:
                raise CodebookError(f'Only one variable allowed for role {ROLES[role]}, found {found}')

        treatment = self.by_role('A')
        if treatment and treatment.cardinality != 2:
            raise CodebookError(f'Treatment {treatment.name} must be binary, has {treatment.cardinality} levels')

        outcome = self.by_role('Y')
        if outcome:
            if len(self.y_values) != outcome.cardinality:
                raise CodebookError(
                    f'y_values has {len(self.y_values)} entries, outcome {outcome.name} '
                    f'has {outcome.cardinality} levels')
            if not all(np.isfinite(self.y_values)):
                raise CodebookError('y_values must be finite')
            if any(high <= low for low, high in zip(self.y_values, self.y_values[1:])):
                raise CodebookError('y_values must be strictly increasing')

    @property
    def names(self) -> typing.Tuple[str, ...]:
        return tuple(var.name for var in self.variables)

    def __getitem__(self, name: str) -> Variable:
        for var in self.variables:
            if var.name == name:
                return var
        raise CodebookError(f'Unknown variable {name!r}')

    def __contains__(self, name: str) -> bool:
        return name in self.names

    def by_role(self, role: str) -> typing.Optional[Variable]:
        """
        Get the variable holding a role (None if absent). Use `covariates` for X.
        """
        role = role_code(role)
        for var in self.variables:
            if var.role == role:
                return var
        return None

    def require(self, *roles: str) -> None:
        """
        Check every listed role is present

        :raises CodebookError: a role is missing
        """
        for role in roles:
            role = role_code(role)
            if role == 'X':
                continue
            if not self.by_role(role):
                raise CodebookError(f'Codebook has no {ROLES[role]} variable')

    @property
    def covariates(self) -> typing.Tuple[Variable, ...]:
        return tuple(var for var in self.variables if var.role == 'X')

    @property
    def x_cardinality(self) -> int:
        """
        Cardinality of the composite X axis (product of covariate cardinalities, 1 without covariates)
        """
        return int(np.prod([var.cardinality for var in self.covariates], dtype=np.int64))

    @property
    def observed(self) -> 'Codebook':
        """
        Codebook restricted to the non latent variables
        """
        return self.subset([var.name for var in self.variables if not var.latent])

    @property
    def y_inf(self) -> float:
        return min(self.y_values)

    @property
    def y_sup(self) -> float:
        return max(self.y_values)

    def subset(self, names: typing.Iterable[str]) -> 'Codebook':
        """
        Codebook keeping the named variables in codebook order
        """
        names = set(names)
        unknown = names - set(self.names)
        if unknown:
            raise CodebookError(f'Unknown variables {sorted(unknown)}')
        variables = tuple(var for var in self.variables if var.name in names)
        y_values = self.y_values if any(var.role == 'Y' for var in variables) else ()
        return Codebook(variables, y_values)

    def flatten_covariates(self, covariate_indexes: np.ndarray) -> np.ndarray:
        """
        Map covariate category indexes to the composite X index.

        :param covariate_indexes: integer array (records x covariates) in codebook covariate order
        :return: composite X index per record (row-major over the covariates)
        """
        covariates = self.covariates
        records = np.asarray(covariate_indexes, dtype=np.int64).reshape(-1, len(covariates))
        if not covariates:
            return np.zeros(records.shape[0], dtype=np.int64)
        dims = tuple(var.cardinality for var in covariates)
        return np.ravel_multi_index(tuple(records.T), dims).astype(np.int64)

    def to_dict(self) -> dict:
        return {
            'variables': [
                {'name': var.name, 'cardinality': var.cardinality, 'role': ROLES[var.role]}
                for var in self.variables],
            'y_values': list(self.y_values),
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'Codebook':
        try:
            variables = tuple(
                Variable(name=item['name'], cardinality=item['cardinality'], role=item['role'])
                for item in data['variables'])
        except (KeyError, TypeError) as err:
            raise CodebookError('Codebook JSON must have variables with name, cardinality and role',
                                original_exception=err)
        return cls(variables, tuple(data.get('y_values', ())))


def load_codebook(file_obj: typing.TextIO) -> Codebook:
    """
    Read a codebook from a JSON file object
    """
    return Codebook.from_dict(json.load(file_obj))


def dump_codebook(codebook: Codebook, file_obj: typing.TextIO) -> None:
    json.dump(codebook.to_dict(), file_obj, indent=2)
