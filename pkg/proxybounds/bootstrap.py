"""
Basic bootstrap confidence intervals around the smoothed bounds.

Given the smoothed bounds ``(L, U)`` on the full sample and the replicate
bounds ``(L*_b, U*_b)`` on ``B`` resamples of the records, the interval at
``level`` is::

    (2 L - q(L*, 1 - (1 - level) / 2),  2 U - q(U*, (1 - level) / 2))

where ``q(values, beta)`` is the nearest rank order statistic at index
``max(1, ceil(B * beta))``. ``level=1`` uses the replicate extremes and
``level=0`` the replicate medians.

The reported interval is the hull of this raw interval and the full sample
smoothed bounds. Reports whose raw interval missed part of the point bounds
are flagged ``widened``, and ``inverted`` when the raw endpoints crossed.

Replicate ``b`` resamples with the stream ``(seed, b, attempt)``. A replicate
whose estimator fails (for example a resample with an empty required cell) is
retried on the next attempt stream, up to ``max_retries`` times. Replicates run
through joblib and are reduced in replicate order, so the result does not depend
on ``n_jobs``.
"""
import logging
import math
import typing
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from proxybounds import ProxyboundsError
from proxybounds.bounds import DEFAULT_ALPHA, Interval, estimate_bounds
from proxybounds.dgp import RNG_ALGORITHM, make_rng
from proxybounds.frequency import Dataset, fit_frequencies

LOGGER = logging.getLogger(__name__)

DEFAULT_REPLICATES = 500
DEFAULT_LEVEL = 0.95
DEFAULT_MAX_RETRIES = 10


class BootstrapFailure(ProxyboundsError):
    pass


def nearest_rank(values: typing.Sequence[float], beta: float) -> float:
    """
    Nearest rank sample quantile: the ``max(1, ceil(len(values) * beta))``-th smallest value
    """
    ordered = np.sort(np.asarray(values, dtype=np.float64))
    if ordered.size == 0:
        raise ValueError('nearest_rank needs at least one value')
    # round off representation error such as 200 * 0.025 = 5.000000000000004
    rank = max(1, math.ceil(round(ordered.size * beta, 9)))
    return float(ordered[min(rank, ordered.size) - 1])


@dataclass(frozen=True)
class CIReport:
    """
    Bootstrap confidence interval for one estimand and method.

    :param estimand: estimand id
    :param method: bounds method
    :param a: treatment level (None for effects)
    :param alpha: LSE smoothing parameter
    :param replicates: number of bootstrap replicates B
    :param level: nominal coverage
    :param seed: root seed of the replicate streams
    :param point: smoothed bounds on the full sample
    :param ci: confidence interval, the hull of the raw interval and ``point``
    :param raw_ci: (lower, upper) of the basic bootstrap formula before the hull
    :param widened: the raw interval did not contain the point interval
    :param inverted: the raw lower endpoint exceeded the raw upper endpoint
    :param retries: replicate attempts that failed and were retried
    :param replicate_bounds: (lower, upper) of every replicate, in replicate order
    """
    estimand: str
    method: str
    a: typing.Optional[int]
    alpha: float
    replicates: int
    level: float
    seed: int
    point: Interval
    ci: Interval
    raw_ci: typing.Tuple[float, float] = (math.nan, math.nan)
    widened: bool = False
    inverted: bool = False
    retries: int = 0
    replicate_bounds: typing.Tuple[typing.Tuple[float, float], ...] = field(default=(), repr=False)

    @property
    def label(self) -> str:
        return self.estimand if self.a is None else f'{self.estimand}({self.a})'

    def replicate_summary(self) -> dict:
        pairs = np.asarray(self.replicate_bounds, dtype=np.float64).reshape(-1, 2)
        beta_high, beta_low = 1 - (1 - self.level) / 2, (1 - self.level) / 2
        summary = {}
        for name, column in (('lower', pairs[:, 0]), ('upper', pairs[:, 1])):
            summary[name] = {
                'min': float(column.min()),
                'q_low': nearest_rank(column, beta_low),
                'median': nearest_rank(column, 0.5),
                'q_high': nearest_rank(column, beta_high),
                'max': float(column.max()),
            }
        return summary

    def to_dict(self) -> dict:
        return {
            'estimand': self.label,
            'method': self.method,
            'alpha': None if math.isinf(self.alpha) else self.alpha,
            'replicates': self.replicates,
            'level': self.level,
            'seed': self.seed,
            'rng': RNG_ALGORITHM,
            'point': self.point.to_dict(),
            'ci': self.ci.to_dict(),
            'raw_ci': {'lower': self.raw_ci[0], 'upper': self.raw_ci[1]},
            'widened': self.widened,
            'inverted': self.inverted,
            'retries': self.retries,
            'replicate_summary': self.replicate_summary(),
        }


def write_replicates_csv(report: CIReport, file_obj: typing.TextIO) -> None:
    """
    Write every replicate (lower, upper) pair as CSV
    """
    frame = pd.DataFrame(list(report.replicate_bounds), columns=['lower', 'upper'])
    frame.insert(0, 'replicate', range(len(frame)))
    frame.to_csv(file_obj, index=False, lineterminator='\n')


def _replicate(data: Dataset, index: int, seed: int, max_retries: int, bounds_args: dict):
    """
    Smoothed bounds of one resample

    :return: (lower, upper, failed attempt messages); lower/upper are None when every attempt failed
    """
    errors = []
    for attempt in range(max_retries + 1):
        rng = make_rng(seed, index, attempt)
        sample = data.take(rng.integers(0, data.n, size=data.n))
        try:
            model = fit_frequencies(sample, bounds_args['smoothing'])
            report = estimate_bounds(
                model, bounds_args['estimand'], bounds_args['method'], bounds_args['alpha'],
                bounds_args['a'], bounds_args['strict'])
        except ProxyboundsError as err:
            errors.append(f'replicate {index} attempt {attempt}: {err}')
            continue
        return report.smoothed.lower, report.smoothed.upper, errors
    return None, None, errors


def bootstrap_ci(data: Dataset, estimand: str = 'ETT-mean', method: str = 'W', a: int = 0,
                 replicates: int = DEFAULT_REPLICATES, alpha: float = DEFAULT_ALPHA,
                 level: float = DEFAULT_LEVEL, seed: int = 0, smoothing: float = 0.0, n_jobs: int = 1,
                 max_retries: int = DEFAULT_MAX_RETRIES, strict: bool = False) -> CIReport:
    """
    Basic bootstrap confidence interval for smoothed bounds

    :param data: observed dataset
    :param estimand: estimand id accepted by :py:func:`proxybounds.bounds.estimate_bounds`
    :param method: bounds method
    :param a: treatment level for potential outcome estimands
    :param replicates: number of resamples B (>= 2)
    :param alpha: LSE smoothing parameter
    :param level: nominal coverage in [0, 1]
    :param seed: root seed
    :param smoothing: add-lambda pseudo count, fixed across replicates
    :param n_jobs: joblib worker count
    :param max_retries: retries per failing replicate
    :param strict: raise on undefined ratios instead of clamping
    :return: CIReport
    :raises BootstrapFailure: a replicate failed on every attempt
    """
    if replicates < 2:
        raise ValueError('replicates must be at least 2')
    if not 0 <= level <= 1:
        raise ValueError('level must be in [0, 1]')
    bounds_args = {
        'estimand': estimand, 'method': method, 'alpha': alpha, 'a': a, 'strict': strict,
        'smoothing': smoothing}
    point_report = estimate_bounds(fit_frequencies(data, smoothing), estimand, method, alpha, a, strict)
    point = point_report.smoothed

    LOGGER.info(f'bootstrap {point_report.label} method={method} B={replicates} n_jobs={n_jobs}')
    results = Parallel(n_jobs=n_jobs)(
        delayed(_replicate)(data, index, seed, max_retries, bounds_args) for index in range(replicates))

    failed = [(index, errors) for index, (lower, _, errors) in enumerate(results) if lower is None]
    if failed:
        index, errors = failed[0]
        raise BootstrapFailure(
            f'{len(failed)} bootstrap replicates failed after {max_retries} retries, first is replicate {index}',
            diagnostics=errors)
    retries = sum(len(errors) for _, _, errors in results)
    if retries:
        LOGGER.warning(f'{retries} bootstrap resamples failed and were redrawn')
    pairs = tuple((float(lower), float(upper)) for lower, upper, _ in results)

    lowers = [lower for lower, _ in pairs]
    uppers = [upper for _, upper in pairs]
    ci_lower = 2 * point.lower - nearest_rank(lowers, 1 - (1 - level) / 2)
    ci_upper = 2 * point.upper - nearest_rank(uppers, (1 - level) / 2)
    inverted = ci_lower > ci_upper
    widened = inverted or ci_lower > point.lower or ci_upper < point.upper
    if inverted:
        LOGGER.warning(f'inverted bootstrap interval [{ci_lower}, {ci_upper}] widened to include the point bounds')
    elif widened:
        LOGGER.info(f'bootstrap interval [{ci_lower}, {ci_upper}] widened to include the point bounds '
                    f'[{point.lower}, {point.upper}]')
    ci = Interval(min(ci_lower, ci_upper, point.lower), max(ci_lower, ci_upper, point.upper))

    return CIReport(
        estimand=point_report.estimand, method=method, a=point_report.a, alpha=alpha,
        replicates=replicates, level=level, seed=seed, point=point, ci=ci,
        raw_ci=(float(ci_lower), float(ci_upper)), widened=widened, inverted=inverted,
        retries=retries, replicate_bounds=pairs)
