"""
Simulation studies.

A study draws ``replications`` random data generating processes for every
cardinality grid point, computes the oracle estimands and the bounds of every
configured method, and aggregates average widths and coverage per
``(grid point, n, method, estimand)``.

``kind``
    ``sample``: bounds are estimated from ``n`` drawn records for every ``n``
    in ``n_grid`` (with bootstrap intervals when ``replicates`` > 0).
    ``population``: bounds are computed from the exact observed margin and the
    bridge feasibility of every draw is recorded; coverage is also reported
    over the draws whose bridges are feasible.

Seeds of replication ``r`` at grid point ``g``::

    spec      derive_seed(seed, g, r, 0)
    data      derive_seed(seed, g, r, 1, n)
    bootstrap derive_seed(seed, g, r, 2, n)

With ``fixed_spec`` every replication at a grid point shares the model drawn
for ``r = 0`` and only the data and bootstrap streams vary.

Replications run through joblib and are aggregated in submission order, so the
summary does not depend on ``n_jobs``. A replication whose estimator fails is
quarantined: logged, excluded from the averages and counted in ``failed``.

Study config example (``pbounds study --config-file``)::

    {
        "name": "study1",
        "kind": "sample",
        "family": "confounder",
        "grid": [{"U": 4, "X": 4, "W": 4, "Z": 4, "A": 2, "Y": 3}],
        "n_grid": [3000, 5000, 7000, 9000],
        "replications": 100,
        "replicates": 500,
        "alpha": 50.0,
        "methods": ["W", "Z"],
        "estimands": ["ETT-mean"]
    }

"""
import logging
import math
import typing
from dataclasses import asdict, dataclass

import pandas as pd
from joblib import Parallel, delayed

from proxybounds import ProxyboundsError
from proxybounds.bootstrap import DEFAULT_LEVEL, bootstrap_ci
from proxybounds.bounds import DEFAULT_ALPHA, estimate_bounds
from proxybounds.bridge import check_outcome_bridge, check_treatment_bridge
from proxybounds.dgp import FAMILIES, DGPSpecError, PositivityViolation, check_cardinalities, build_joint, \
    derive_seed, draw_dataset, oracle_estimands, sample_dgp_spec
from proxybounds.frequency import FrequencyModel, fit_frequencies

LOGGER = logging.getLogger(__name__)

COVERAGE_MARGIN = 1e-9

FAMILY_METHODS = {
    'confounder': ('W', 'Z', 'WZ'),
    'mediation': ('mediation',),
    'frontdoor': ('frontdoor',),
}
FAMILY_ESTIMANDS = {
    'confounder': ('ETT-mean', 'PO-mean', 'ETT', 'ATE'),
    'mediation': ('mediation-cross-world', 'NIE', 'NDE', 'ETT', 'ATE'),
    'frontdoor': ('frontdoor-PO-mean', 'ATE'),
}
SUMMARY_COLUMNS = [
    'family', 'cardinalities', 'n', 'method', 'estimand', 'replications', 'completed', 'failed',
    'avg_hard_width', 'avg_smoothed_width', 'coverage', 'bridge_feasible_rate', 'coverage_bridge_feasible',
    'avg_ci_width', 'ci_coverage', 'ci_contains_point', 'ci_widened',
]


class StudyConfigError(ProxyboundsError):
    exit_code = 2


@dataclass(frozen=True)
class StudyConfig:
    name: str = 'study'
    kind: str = 'sample'
    family: str = 'confounder'
    grid: typing.Tuple[typing.Dict[str, int], ...] = ()
    n_grid: typing.Tuple[int, ...] = ()
    replications: int = 1
    replicates: int = 0
    alpha: float = DEFAULT_ALPHA
    smoothing: float = 0.0
    level: float = DEFAULT_LEVEL
    seed: int = 0
    methods: typing.Tuple[str, ...] = ('W', 'Z')
    estimands: typing.Tuple[str, ...] = ('ETT-mean',)
    a: int = 0
    fixed_spec: bool = False
    n_jobs: int = 1
    output: typing.Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, 'grid', tuple(dict(point) for point in self.grid))
        object.__setattr__(self, 'n_grid', tuple(int(n) for n in self.n_grid))
        object.__setattr__(self, 'methods', tuple(self.methods))
        object.__setattr__(self, 'estimands', tuple(self.estimands))
        self._validate()

    def _validate(self):
        if self.kind not in ('sample', 'population'):
            raise StudyConfigError(f'Study kind must be sample or population, got {self.kind!r}')
        if self.family not in FAMILIES:
            raise StudyConfigError(f'Unknown family {self.family!r}, use one of {sorted(FAMILIES)}')
        if not self.grid:
            raise StudyConfigError('Study grid is empty')
        axes = FAMILIES[self.family][0]
        for point in self.grid:
            try:
                check_cardinalities(point, axes)
            except DGPSpecError as err:
                raise StudyConfigError(f'Invalid grid point {point}: {err}', original_exception=err)
        if self.kind == 'sample' and (not self.n_grid or min(self.n_grid) < 1):
            raise StudyConfigError('Sample studies need a nonempty n_grid of positive sizes')
        if self.replications < 1:
            raise StudyConfigError('replications must be at least 1')
        if self.replicates == 1 or self.replicates < 0:
            raise StudyConfigError('replicates must be 0 (no intervals) or at least 2')
        if self.replicates and self.kind == 'population':
            raise StudyConfigError('Bootstrap intervals need a sample study')
        if not (self.alpha > 0):
            raise StudyConfigError('alpha must be positive')
        if not 0 <= self.level <= 1:
            raise StudyConfigError('level must be in [0, 1]')
        bad = [method for method in self.methods if method not in FAMILY_METHODS[self.family]]
        if bad or not self.methods:
            raise StudyConfigError(
                f'Methods {bad or "[]"} not available for family {self.family}, use {FAMILY_METHODS[self.family]}')
        bad = [estimand for estimand in self.estimands if estimand not in FAMILY_ESTIMANDS[self.family]]
        if bad or not self.estimands:
            raise StudyConfigError(
                f'Estimands {bad or "[]"} not available for family {self.family}, '
                f'use {FAMILY_ESTIMANDS[self.family]}')

    @classmethod
    def from_dict(cls, data: typing.Mapping[str, typing.Any]) -> 'StudyConfig':
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            LOGGER.warning(f'ignoring unknown study settings {sorted(unknown)}')
        try:
            return cls(**{key: value for key, value in data.items() if key in known})
        except (TypeError, ValueError) as err:
            raise StudyConfigError(f'Invalid study config: {err}', original_exception=err)

    def to_dict(self) -> dict:
        data = asdict(self)
        data['grid'] = [dict(point) for point in self.grid]
        for key in ('n_grid', 'methods', 'estimands'):
            data[key] = list(data[key])
        return data


def cardinality_label(point: typing.Mapping[str, int]) -> str:
    return ';'.join(f'{name}={point[name]}' for name in sorted(point))


def _bridges_feasible(joint, family: str) -> bool:
    if not check_outcome_bridge(joint, family).feasible:
        return False
    if family == 'confounder':
        try:
            return check_treatment_bridge(joint).feasible
        except PositivityViolation as err:
            LOGGER.info(f'treatment bridge not checked: {err}')
            return False
    return True


def _run_replication(config: StudyConfig, grid_index: int, replication: int) -> typing.List[dict]:
    point = config.grid[grid_index]
    base = {'family': config.family, 'cardinalities': cardinality_label(point), 'replication': replication}
    try:
        spec_replication = 0 if config.fixed_spec else replication
        spec = sample_dgp_spec(point, config.family, seed=derive_seed(config.seed, grid_index, spec_replication, 0))
        joint = build_joint(spec)
        truth = oracle_estimands(joint)
    except ProxyboundsError as err:
        LOGGER.warning(f'replication {replication} at {base["cardinalities"]} quarantined: {err}')
        return [dict(base, n=n, method=method, estimand=estimand, error=str(err))
                for n in (config.n_grid if config.kind == 'sample' else (0,))
                for method in config.methods for estimand in config.estimands]

    records = []
    if config.kind == 'population':
        feasible = _bridges_feasible(joint, config.family)
        model = FrequencyModel.from_joint(joint)
        for method in config.methods:
            for estimand in config.estimands:
                record = dict(base, n=0, method=method, estimand=estimand, bridge_feasible=feasible)
                records.append(_bounds_record(record, model, config, truth))
        return records

    for n in config.n_grid:
        data = draw_dataset(joint, n, seed=derive_seed(config.seed, grid_index, replication, 1, n))
        try:
            model = fit_frequencies(data, config.smoothing)
        except ProxyboundsError as err:
            model, error = None, str(err)
        for method in config.methods:
            for estimand in config.estimands:
                record = dict(base, n=n, method=method, estimand=estimand)
                if model is None:
                    records.append(dict(record, error=error))
                    continue
                record = _bounds_record(record, model, config, truth)
                if config.replicates and 'error' not in record:
                    record = _ci_record(record, data, config, grid_index, replication, n)
                records.append(record)
    return records


def _bounds_record(record: dict, model: FrequencyModel, config: StudyConfig, truth) -> dict:
    try:
        report = estimate_bounds(model, record['estimand'], record['method'], config.alpha, config.a)
        value = truth.value(record['estimand'], config.a)
    except ProxyboundsError as err:
        LOGGER.warning(f'{record["method"]} {record["estimand"]} replication {record["replication"]} '
                       f'quarantined: {err}')
        return dict(record, error=str(err))
    return dict(
        record, truth=value,
        hard_lower=report.hard.lower, hard_upper=report.hard.upper,
        smoothed_lower=report.smoothed.lower, smoothed_upper=report.smoothed.upper,
        covered=report.hard.contains(value, COVERAGE_MARGIN))


def _ci_record(record: dict, data, config: StudyConfig, grid_index: int, replication: int, n: int) -> dict:
    try:
        report = bootstrap_ci(
            data, record['estimand'], record['method'], config.a, config.replicates, config.alpha,
            config.level, seed=derive_seed(config.seed, grid_index, replication, 2, n),
            smoothing=config.smoothing)
    except ProxyboundsError as err:
        LOGGER.warning(f'bootstrap for {record["method"]} replication {replication} quarantined: {err}')
        return dict(record, error=str(err))
    return dict(
        record, ci_lower=report.ci.lower, ci_upper=report.ci.upper,
        ci_covered=report.ci.contains(record['truth'], COVERAGE_MARGIN),
        ci_contains_point=report.ci.covers(report.point), ci_widened=report.widened)


def run_study(config: StudyConfig) -> pd.DataFrame:
    """
    Run every replication of a study and return one record per
    (grid point, replication, n, method, estimand)

    :param config: StudyConfig
    :return: pandas DataFrame of replication records
    """
    tasks = [(grid_index, replication)
             for grid_index in range(len(config.grid)) for replication in range(config.replications)]
    LOGGER.info(f'study {config.name}: {len(tasks)} replications with n_jobs={config.n_jobs}')
    results = Parallel(n_jobs=config.n_jobs)(
        delayed(_run_replication)(config, grid_index, replication) for grid_index, replication in tasks)
    frame = pd.DataFrame([record for records in results for record in records])
    if 'error' not in frame.columns:
        frame['error'] = None
    failed = int(frame['error'].notna().sum())
    if failed:
        LOGGER.warning(f'study {config.name}: {failed} records quarantined')
    return frame


def _mean(series: pd.Series) -> float:
    series = series.dropna()
    return float(series.astype(float).mean()) if len(series) else math.nan


def summarize(records: pd.DataFrame) -> pd.DataFrame:
    """
    Aggregate replication records per (family, cardinalities, n, method, estimand)

    Coverage is the fraction of completed replications whose hard interval
    contains the oracle value.

    :param records: output of :py:func:`run_study`
    :return: pandas DataFrame with ``SUMMARY_COLUMNS``
    """
    keys = ['family', 'cardinalities', 'n', 'method', 'estimand']
    rows = []
    for key, group in records.groupby(keys, sort=False):
        done = group[group['error'].isna()]
        row = dict(zip(keys, key))
        row['replications'] = len(group)
        row['completed'] = len(done)
        row['failed'] = len(group) - len(done)
        row['avg_hard_width'] = _mean(done.get('hard_upper', pd.Series(dtype=float))
                                      - done.get('hard_lower', pd.Series(dtype=float)))
        row['avg_smoothed_width'] = _mean(done.get('smoothed_upper', pd.Series(dtype=float))
                                          - done.get('smoothed_lower', pd.Series(dtype=float)))
        row['coverage'] = _mean(done.get('covered', pd.Series(dtype=float)))
        if 'bridge_feasible' in done.columns:
            feasible = done[done['bridge_feasible'].fillna(False).astype(bool)]
            row['bridge_feasible_rate'] = _mean(done['bridge_feasible'])
            row['coverage_bridge_feasible'] = _mean(feasible['covered'])
        else:
            row['bridge_feasible_rate'] = math.nan
            row['coverage_bridge_feasible'] = math.nan
        if 'ci_lower' in done.columns:
            row['avg_ci_width'] = _mean(done['ci_upper'] - done['ci_lower'])
            row['ci_coverage'] = _mean(done['ci_covered'])
            row['ci_contains_point'] = _mean(done['ci_contains_point'])
            row['ci_widened'] = _mean(done['ci_widened'])
        else:
            row['avg_ci_width'] = row['ci_coverage'] = row['ci_contains_point'] = row['ci_widened'] = math.nan
        rows.append(row)
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)


def write_summary(summary: pd.DataFrame, file_obj: typing.TextIO) -> None:
    summary.to_csv(file_obj, index=False, lineterminator='\n', float_format='%.10g')
