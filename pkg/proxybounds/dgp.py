"""
Random data generating processes, exact joints, sampling and ground truth.

Three model families are supported. Every conditional is a softmax whose
linear predictor adds, per target level, a constant and one coefficient per
parent multiplied by the parent's 0-based category index.

``confounder``
    p(u,x) p(w|u,x) p(z|u,x) p(a|u,x,z) p(y|u,x,w,a) with U latent
``mediation``
    p(x) p(a|x) p(m|a,x) p(w|m,x) p(y|m,a,x,w) with the mediator M latent
``frontdoor``
    p(u,x) p(a|u,x) p(m|a,x) p(w|m,x) p(y|m,x,w,u) with U and M latent; A acts on Y only through M

Random streams
    numpy ``PCG64`` seeded through ``SeedSequence``. Replicate ``i`` of a run
    seeded with ``seed`` uses ``derive_seed(seed, i)``, the first 64 bit word of
    ``SeedSequence(seed, spawn_key=(i,))``.

Typical use::

    spec = sample_dgp_spec({'U': 4, 'X': 4, 'W': 4, 'Z': 4, 'A': 2, 'Y': 3}, 'confounder', seed=1)
    joint = build_joint(spec)
    truth = oracle_estimands(joint)
    data = draw_dataset(joint, n=5000, seed=2)

"""
import json
import logging
import typing
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import softmax

from proxybounds import ProxyboundsError
from proxybounds.codebook import Codebook, Variable
from proxybounds.frequency import Dataset
from proxybounds.pmf import JointPMF, marginal, role_table

LOGGER = logging.getLogger(__name__)

RNG_ALGORITHM = 'numpy.PCG64/SeedSequence'
COEFFICIENT_RANGE = (-0.5, 0.5)
PRIOR_RANGE = (0.1, 1.0)
MIN_LINK = 0.01

# family -> (axis order, prior axes, ((target, parents), ...), links that must be nonzero)
FAMILIES = {
    'confounder': (
        ('U', 'X', 'W', 'Z', 'A', 'Y'),
        ('U', 'X'),
        (('W', ('U', 'X')), ('Z', ('U', 'X')), ('A', ('U', 'X', 'Z')), ('Y', ('U', 'X', 'W', 'A'))),
        (('W', 'U'), ('Z', 'U')),
    ),
    'mediation': (
        ('X', 'A', 'M', 'W', 'Y'),
        ('X',),
        (('A', ('X',)), ('M', ('A', 'X')), ('W', ('M', 'X')), ('Y', ('M', 'A', 'X', 'W'))),
        (('W', 'M'),),
    ),
    'frontdoor': (
        ('U', 'X', 'A', 'M', 'W', 'Y'),
        ('U', 'X'),
        (('A', ('U', 'X')), ('M', ('A', 'X')), ('W', ('M', 'X')), ('Y', ('M', 'X', 'W', 'U'))),
        (('W', 'M'),),
    ),
}


class DGPSpecError(ProxyboundsError):
    exit_code = 2


class PositivityViolation(ProxyboundsError):
    pass


def derive_seed(seed: int, *key: int) -> int:
    """
    Seed of the stream derived from (seed, key...)
    """
    sequence = np.random.SeedSequence(int(seed), spawn_key=tuple(int(part) for part in key))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=tuple(key))))


@dataclass(frozen=True, eq=False)
class DGPSpec:
    """
    Parameters fully determining a joint.

    :param family: confounder, mediation or frontdoor
    :param cardinalities: axis name -> number of levels
    :param prior: unnormalized weights of the root distribution (p(u,x) or p(x))
    :param coefficients: target -> {'const' | parent: per target level coefficient list}
    :param seed: seed the spec was drawn with
    :param y_values: numeric outcome values (default 1..|Y|)
    """
    family: str
    cardinalities: typing.Dict[str, int]
    prior: typing.Any
    coefficients: typing.Dict[str, typing.Dict[str, typing.Any]]
    seed: int = 0
    y_values: typing.Tuple[float, ...] = field(default=())

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DGPSpecError(f'Unknown family {self.family!r}, use one of {sorted(FAMILIES)}')
        axes, prior_axes, factors, _ = FAMILIES[self.family]
        cards = {name: int(self.cardinalities[name]) for name in axes if name in self.cardinalities}
        check_cardinalities(cards, axes)
        object.__setattr__(self, 'cardinalities', cards)
        prior = np.asarray(self.prior, dtype=np.float64)
        if prior.shape != tuple(cards[name] for name in prior_axes):
            raise DGPSpecError(f'prior shape {prior.shape} does not match {prior_axes}')
        if np.any(prior < 0) or prior.sum() <= 0:
            raise DGPSpecError('prior weights must be nonnegative with positive total')
        object.__setattr__(self, 'prior', prior)
        coefficients = {}
        for target, parents in factors:
            given = self.coefficients.get(target, {})
            betas = {}
            for key in ('const',) + parents:
                beta = np.asarray(given.get(key, 0.0), dtype=np.float64)
                beta = np.broadcast_to(beta, (cards[target],)).copy()
                betas[key] = beta
            coefficients[target] = betas
        object.__setattr__(self, 'coefficients', coefficients)
        y_values = tuple(float(value) for value in self.y_values) or tuple(
            float(level) for level in range(1, cards['Y'] + 1))
        object.__setattr__(self, 'y_values', y_values)

    def codebook(self) -> Codebook:
        axes = FAMILIES[self.family][0]
        return Codebook(tuple(Variable(name, self.cardinalities[name], name) for name in axes), self.y_values)

    def with_coefficients(self, overrides: typing.Mapping[str, typing.Mapping[str, typing.Any]]) -> 'DGPSpec':
        """
        Copy of the spec with some coefficient vectors replaced (scalars broadcast over target levels)
        """
        coefficients = {target: dict(betas) for target, betas in self.coefficients.items()}
        for target, betas in overrides.items():
            if target not in coefficients:
                raise DGPSpecError(f'No factor for {target!r} in family {self.family}')
            for key, value in betas.items():
                if key not in coefficients[target]:
                    raise DGPSpecError(f'Factor {target} has no coefficient {key!r}')
                coefficients[target][key] = value
        return replace(self, coefficients=coefficients)

    def to_dict(self) -> dict:
        return {
            'family': self.family,
            'cardinalities': dict(self.cardinalities),
            'prior': self.prior.tolist(),
            'coefficients': {
                target: {key: beta.tolist() for key, beta in betas.items()}
                for target, betas in self.coefficients.items()},
            'seed': int(self.seed),
            'y_values': list(self.y_values),
            'rng': RNG_ALGORITHM,
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'DGPSpec':
        try:
            return cls(
                family=data['family'],
                cardinalities=data['cardinalities'],
                prior=data['prior'],
                coefficients=data['coefficients'],
                seed=data.get('seed', 0),
                y_values=tuple(data.get('y_values', ())))
        except KeyError as err:
            raise DGPSpecError(f'DGP spec JSON is missing {err}', original_exception=err)


def check_cardinalities(cards: typing.Mapping[str, int], axes: typing.Sequence[str]) -> None:
    missing = [name for name in axes if name not in cards]
    if missing:
        raise DGPSpecError(f'Missing cardinalities for {missing}')
    if cards['A'] != 2:
        raise DGPSpecError('Treatment A must have 2 levels')
    if cards['Y'] < 2:
        raise DGPSpecError('Outcome Y needs at least 2 levels')
    small = [name for name in axes if cards[name] < 1]
    if small:
        raise DGPSpecError(f'Cardinalities must be positive: {small}')


def sample_dgp_spec(cardinalities: typing.Mapping[str, int], family: str = 'confounder', seed: int = 0,
                    overrides: typing.Mapping[str, typing.Mapping[str, typing.Any]] = None,
                    y_values: typing.Sequence[float] = ()) -> DGPSpec:
    """
    Draw a random spec

    Root weights are drawn from Unif[0.1, 1] (normalized when the joint is built),
    every coefficient from Unif[-0.5, 0.5]. Coefficients linking the latent axis
    to the proxy are redrawn until their magnitude is at least 0.01.

    :param cardinalities: axis name -> number of levels (A must be 2)
    :param family: confounder, mediation or frontdoor
    :param seed: integer seed, the draw is a deterministic function of it
    :param overrides: coefficient overrides applied after the draw, e.g. ``{'Y': {'U': 0}}``
    :param y_values: numeric outcome values (default 1..|Y|)
    :return: DGPSpec
    """
    if family not in FAMILIES:
        raise DGPSpecError(f'Unknown family {family!r}, use one of {sorted(FAMILIES)}')
    axes, prior_axes, factors, links = FAMILIES[family]
    cards = {name: int(cardinalities[name]) for name in axes if name in cardinalities}
    check_cardinalities(cards, axes)

    rng = make_rng(seed)
    prior = rng.uniform(*PRIOR_RANGE, size=tuple(cards[name] for name in prior_axes))
    coefficients = {}
    for target, parents in factors:
        betas = {}
        for key in ('const',) + parents:
            beta = rng.uniform(*COEFFICIENT_RANGE, size=cards[target])
            if (target, key) in links:
                small = np.abs(beta) < MIN_LINK
                while small.any():
                    beta[small] = rng.uniform(*COEFFICIENT_RANGE, size=int(small.sum()))
                    small = np.abs(beta) < MIN_LINK
            betas[key] = beta
        coefficients[target] = betas

    spec = DGPSpec(family, cards, prior, coefficients, seed=int(seed), y_values=tuple(y_values))
    if overrides:
        spec = spec.with_coefficients(overrides)
    LOGGER.debug(f'sampled {family} spec seed={seed} cardinalities={cards}')
    return spec


def softmax_conditional(spec: DGPSpec, target: str, parents: typing.Sequence[str]) -> np.ndarray:
    """
    Conditional table p(target | parents) with axes (parents..., target)
    """
    cards = spec.cardinalities
    betas = spec.coefficients[target]
    shape = tuple(cards[name] for name in parents) + (cards[target],)
    logits = np.broadcast_to(betas['const'], shape).copy()
    for position, parent in enumerate(parents):
        levels_shape = [1] * len(shape)
        levels_shape[position] = cards[parent]
        levels = np.arange(cards[parent], dtype=np.float64).reshape(levels_shape)
        logits = logits + levels * betas[parent]
    return softmax(logits, axis=-1)


def build_joint(spec: DGPSpec) -> JointPMF:
    """
    Exact joint of a spec as the product of its softmax factors

    :param spec: DGPSpec
    :return: JointPMF over the family axes including latent ones
    """
    axes, prior_axes, factors, _ = FAMILIES[spec.family]
    letters = {name: letter for name, letter in zip(axes, 'abcdefgh')}
    operands = [spec.prior / spec.prior.sum()]
    subscripts = [''.join(letters[name] for name in prior_axes)]
    for target, parents in factors:
        operands.append(softmax_conditional(spec, target, parents))
        subscripts.append(''.join(letters[name] for name in parents + (target,)))
    expression = ','.join(subscripts) + '->' + ''.join(letters[name] for name in axes)
    table = np.einsum(expression, *operands)
    return JointPMF(spec.codebook(), table)


def draw_dataset(joint: JointPMF, n: int, seed: int) -> Dataset:
    """
    Draw n i.i.d. records from the observed margin of a joint

    :param joint: JointPMF (latent axes are summed out first)
    :param n: number of records (>= 1)
    :param seed: integer seed
    :return: Dataset
    """
    if n < 1:
        raise ValueError('n must be at least 1')
    observed = marginal(joint, joint.codebook.observed.names)
    probabilities = observed.table.ravel()
    probabilities = probabilities / probabilities.sum()
    rng = make_rng(seed)
    cells = rng.choice(probabilities.size, size=int(n), p=probabilities)
    records = np.column_stack(np.unravel_index(cells, observed.table.shape))
    LOGGER.debug(f'drew {n} records over {observed.axes}')
    return Dataset(observed.codebook, records)


@dataclass(frozen=True)
class OracleTruth:
    """
    Exact estimands of a joint.

    ``ett_mean[a]`` is E[Y^(a) | A = 1 - a] and ``po_mean[a]`` is E[Y^(a)].
    The mediation fields are None outside the mediation family.
    """
    family: str
    ett_mean: typing.Tuple[float, float]
    po_mean: typing.Tuple[float, float]
    observed_mean: typing.Tuple[float, float]
    ett: float
    ate: float
    cross_world: typing.Optional[float] = None
    nie: typing.Optional[float] = None
    nde: typing.Optional[float] = None

    def value(self, estimand: str, a: int = 0) -> float:
        """
        Oracle value for an estimand id (as used by the bound estimators)
        """
        values = {
            'ETT-mean': self.ett_mean[a],
            'PO-mean': self.po_mean[a],
            'frontdoor-PO-mean': self.po_mean[a],
            'ETT': self.ett,
            'ATE': self.ate,
            'mediation-cross-world': self.cross_world,
            'NIE': self.nie,
            'NDE': self.nde,
        }
        if values.get(estimand) is None:
            raise ProxyboundsError(f'No oracle value for {estimand} in the {self.family} family')
        return values[estimand]

    def to_dict(self) -> dict:
        return {
            'family': self.family,
            'ett_mean': list(self.ett_mean),
            'po_mean': list(self.po_mean),
            'observed_mean': list(self.observed_mean),
            'ett': self.ett,
            'ate': self.ate,
            'cross_world': self.cross_world,
            'nie': self.nie,
            'nde': self.nde,
        }


def _family_of(joint: JointPMF) -> str:
    has_u = joint.codebook.by_role('U') is not None
    has_m = joint.codebook.by_role('M') is not None
    if has_u and has_m:
        return 'frontdoor'
    if has_m:
        return 'mediation'
    if has_u:
        return 'confounder'
    raise ProxyboundsError('Oracle needs a joint with a latent axis (U or M)')


def _conditional_mean(mass_y: np.ndarray, y_values: np.ndarray) -> typing.Tuple[np.ndarray, np.ndarray]:
    """
    (E[Y | leading axes], p(leading axes)) from a table whose last axis is Y
    """
    mass = mass_y.sum(axis=-1)
    with np.errstate(divide='ignore', invalid='ignore'):
        mean = np.where(mass > 0, (mass_y @ y_values) / np.where(mass > 0, mass, 1.0), np.nan)
    return mean, mass


def oracle_estimands(joint: JointPMF) -> OracleTruth:
    """
    Exact causal estimands of a joint that includes its latent axes

    :param joint: JointPMF of a confounder, mediation or frontdoor model
    :return: OracleTruth
    :raises PositivityViolation: some treatment level has zero probability in a populated stratum
    """
    family = _family_of(joint)
    y_values = np.array(joint.codebook.y_values)
    if family == 'mediation':
        return _mediation_oracle(joint, y_values)

    # adjust for (X, U)
    table = role_table(joint, ('A', 'X', 'U', 'Y'))
    ey_axu, p_axu = _conditional_mean(table, y_values)
    p_xu = p_axu.sum(axis=0)
    populated = p_xu > 0
    if np.any(populated & ~(p_axu > 0).all(axis=0)):
        x, u = np.argwhere(populated & ~(p_axu > 0).all(axis=0))[0]
        raise PositivityViolation(f'p(a | x={x}, u={u}) = 0 for some a', cell={'x': int(x), 'u': int(u)})
    ey_axu = np.where(populated[None], ey_axu, 0.0)
    p_a = p_axu.sum(axis=(1, 2))
    po_mean = tuple(float((ey_axu[a] * p_xu).sum()) for a in (0, 1))
    observed_mean = tuple(float((ey_axu[a] * p_axu[a]).sum() / p_a[a]) for a in (0, 1))
    ett_mean = tuple(float((ey_axu[a] * p_axu[1 - a]).sum() / p_a[1 - a]) for a in (0, 1))
    ett = observed_mean[1] - ett_mean[0]
    ate = po_mean[1] - po_mean[0]
    return OracleTruth(family, ett_mean, po_mean, observed_mean, ett, ate)


def _mediation_oracle(joint: JointPMF, y_values: np.ndarray) -> OracleTruth:
    table = role_table(joint, ('A', 'X', 'M', 'Y'))
    ey_axm, p_axm = _conditional_mean(table, y_values)
    p_ax = p_axm.sum(axis=2)
    p_x = p_ax.sum(axis=0)
    populated = p_x > 0
    if np.any(populated & ~(p_ax > 0).all(axis=0)):
        x = int(np.argwhere(populated & ~(p_ax > 0).all(axis=0))[0][0])
        raise PositivityViolation(f'p(a | x={x}) = 0 for some a', cell={'x': x})
    with np.errstate(divide='ignore', invalid='ignore'):
        p_m_given_ax = np.where(p_ax[..., None] > 0, p_axm / np.where(p_ax > 0, p_ax, 1.0)[..., None], 0.0)
    if np.any(populated[None, :, None] & (p_m_given_ax <= 0)):
        a, x, m = np.argwhere(populated[None, :, None] & (p_m_given_ax <= 0))[0]
        raise PositivityViolation(f'p(m={m} | a={a}, x={x}) = 0', cell={'a': int(a), 'x': int(x), 'm': int(m)})
    ey_axm = np.where(np.isnan(ey_axm), 0.0, ey_axm)
    ey_ax = (ey_axm * p_m_given_ax).sum(axis=2)
    p_a = p_ax.sum(axis=1)
    po_mean = tuple(float((ey_ax[a] * p_x).sum()) for a in (0, 1))
    observed_mean = tuple(float((ey_ax[a] * p_ax[a]).sum() / p_a[a]) for a in (0, 1))
    ett_mean = tuple(float((ey_ax[a] * p_ax[1 - a]).sum() / p_a[1 - a]) for a in (0, 1))
    # E[Y^(1, M^(0))] = sum_x p(x) sum_m p(m | 0, x) E[Y | 1, x, m]
    cross_world = float(((ey_axm[1] * p_m_given_ax[0]).sum(axis=1) * p_x).sum())
    ate = po_mean[1] - po_mean[0]
    return OracleTruth(
        'mediation', ett_mean, po_mean, observed_mean,
        ett=observed_mean[1] - ett_mean[0],
        ate=ate,
        cross_world=cross_world,
        nie=po_mean[1] - cross_world,
        nde=cross_world - po_mean[0])


def load_spec(file_obj: typing.TextIO) -> DGPSpec:
    return DGPSpec.from_dict(json.load(file_obj))
