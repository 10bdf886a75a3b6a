"""
Partial identification bounds from confounder and mediator proxies.

Every estimator takes a :py:class:`~proxybounds.frequency.FrequencyModel`
(fitted from data, or built from an exact joint for population level checks)
and returns a :py:class:`BoundsReport` holding the hard bounds and their
LogSumExp smoothed counterparts.

Estimators
==========

======================  ======  =====================================================
function                method  estimand
======================  ======  =====================================================
``ett_bounds_w``        W       E[Y^(a) | A=1-a] from an outcome confounding proxy
``po_bounds_w``         W       E[Y^(a)] from an outcome confounding proxy
``ett_bounds_z``        Z       E[Y^(a) | A=1-a] from a treatment confounding proxy
``po_bounds_z``         Z       E[Y^(a)] from a treatment confounding proxy
``ett_bounds_wz``       WZ      E[Y^(a) | A=1-a] from two conditionally independent proxies
``po_bounds_wz``        WZ      E[Y^(a)] from two conditionally independent proxies
``mediation_bound``     mediation  E[Y^(1, M^(0))] with a hidden mediator
``frontdoor_po_bounds`` frontdoor  E[Y^(a)] in a front-door model with a hidden mediator
======================  ======  =====================================================

Effects (ATE, ETT, NIE, NDE) are composed from these with interval arithmetic,
see :py:func:`compose_effect` and :py:func:`effect_bounds`.

Smoothing
=========

Every min / max over proxy categories is replaced by ``lse(values, -alpha)`` /
``lse(values, alpha)``. The outer clamp against the outcome range is smoothed
with the same alpha and a ``log(2)/alpha`` correction so the smoothed interval
always contains the hard one. ``alpha=math.inf`` returns the hard bounds only.

Ratio based methods (W, WZ, mediation, frontdoor) need a nonnegative outcome,
i.e. ``min(y_values) >= 0``.

Usage::

    model = fit_frequencies(data)
    report = ett_bounds_w(model, a=0, alpha=50)
    report.hard, report.smoothed

"""
import logging
import math
import typing
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from proxybounds import ProxyboundsError
from proxybounds.codebook import CodebookError
from proxybounds.frequency import FrequencyModel
from proxybounds.pmf import ZeroConditioningMass

LOGGER = logging.getLogger(__name__)

DEFAULT_ALPHA = 50.0
ORDER_TOLERANCE = 1e-9

ESTIMANDS = ('ETT-mean', 'PO-mean', 'ETT', 'ATE', 'mediation-cross-world', 'NIE', 'NDE', 'frontdoor-PO-mean')
METHODS = ('W', 'Z', 'WZ', 'mediation', 'frontdoor')


class RatioUndefined(ProxyboundsError):
    pass


class EmptyIntersection(ProxyboundsError):
    pass


class MissingComponent(ProxyboundsError):
    pass


def lse(values: typing.Iterable[float], alpha: float) -> float:
    """
    LogSumExp ``(1/alpha) * log(sum(exp(alpha * x)))``

    Smooth maximum for alpha > 0, smooth minimum for alpha < 0. Evaluated in
    max shifted form. ``alpha=inf`` / ``-inf`` give the exact max / min.

    :param values: nonempty list of reals
    :param alpha: nonzero smoothing parameter
    :return: smoothed extremum
    """
    values = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=np.float64).ravel()
    if values.size == 0:
        raise ValueError('lse needs at least one value')
    if alpha == 0:
        raise ValueError('lse alpha must be nonzero')
    if math.isinf(alpha):
        return float(values.max() if alpha > 0 else values.min())
    return float(logsumexp(alpha * values) / alpha)


@dataclass(frozen=True)
class Interval:
    lower: float
    upper: float

    def __post_init__(self):
        lower, upper = float(self.lower), float(self.upper)
        if not (math.isfinite(lower) and math.isfinite(upper)):
            raise ValueError(f'Interval bounds must be finite, got [{lower}, {upper}]')
        if lower > upper:
            if lower - upper > ORDER_TOLERANCE:
                raise ValueError(f'Interval lower {lower} exceeds upper {upper}')
            lower = upper
        object.__setattr__(self, 'lower', lower)
        object.__setattr__(self, 'upper', upper)

    @classmethod
    def point(cls, value: float) -> 'Interval':
        return cls(value, value)

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float, margin: float = 0.0) -> bool:
        return self.lower - margin <= value <= self.upper + margin

    def covers(self, other: 'Interval') -> bool:
        return self.lower <= other.lower and other.upper <= self.upper

    def hull(self, other: 'Interval') -> 'Interval':
        return Interval(min(self.lower, other.lower), max(self.upper, other.upper))

    def to_dict(self) -> dict:
        return {'lower': self.lower, 'upper': self.upper}


@dataclass(frozen=True)
class BoundsReport:
    """
    Hard and smoothed bounds for one estimand and method.

    :param estimand: estimand id (see ``ESTIMANDS``)
    :param method: W, Z, WZ, mediation or frontdoor
    :param hard: hard bounds
    :param smoothed: LSE smoothed bounds (equal to hard when alpha is inf)
    :param alpha: smoothing parameter
    :param a: treatment level of the potential outcome (None for effects)
    :param clamped: which outer range clamps were active
    :param ratio_details: per covariate cell extremized quantities
    :param diagnostics: positivity and undefined ratio notes
    """
    estimand: str
    method: str
    hard: Interval
    smoothed: Interval
    alpha: float
    a: typing.Optional[int] = None
    clamped: typing.Dict[str, bool] = field(default_factory=dict)
    ratio_details: typing.Any = field(default_factory=list)
    diagnostics: typing.Tuple[str, ...] = ()

    @property
    def label(self) -> str:
        return self.estimand if self.a is None else f'{self.estimand}({self.a})'

    def to_dict(self) -> dict:
        return {
            'estimand': self.label,
            'method': self.method,
            'hard': self.hard.to_dict(),
            'smoothed': self.smoothed.to_dict(),
            'alpha': None if math.isinf(self.alpha) else self.alpha,
            'clamped': dict(self.clamped),
            'ratio_details': self.ratio_details,
            'diagnostics': list(self.diagnostics),
        }


@dataclass
class _Terms:
    """
    Sums of weight * scale * extremum over covariate cells
    """
    hard_lo: float = 0.0
    hard_hi: float = 0.0
    smooth_lo: float = 0.0
    smooth_hi: float = 0.0
    details: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)


def _extremal_sum(values: np.ndarray, valid: np.ndarray, weight: np.ndarray, scale: np.ndarray,
                  undefined: np.ndarray, fallback_lo: np.ndarray, fallback_hi: np.ndarray,
                  alpha: float, quantity: str, strict: bool) -> _Terms:
    terms = _Terms()
    for x in range(values.shape[0]):
        if not weight[x] > 0:
            continue
        if undefined[x]:
            message = f'{quantity} undefined at x={x}: positive numerator over zero denominator, slice clamped'
            if strict:
                raise RatioUndefined(message, cell={'x': x})
            LOGGER.warning(message)
            terms.diagnostics.append(message)
            terms.hard_lo += fallback_lo[x]
            terms.hard_hi += fallback_hi[x]
            terms.smooth_lo += fallback_lo[x]
            terms.smooth_hi += fallback_hi[x]
            terms.details.append({'x': x, 'undefined': True})
            continue
        row = values[x][valid[x]]
        low, high = float(row.min()), float(row.max())
        smooth_low, smooth_high = lse(row, -alpha), lse(row, alpha)
        factor = weight[x] * scale[x]
        terms.hard_lo += factor * low
        terms.hard_hi += factor * high
        terms.smooth_lo += factor * smooth_low
        terms.smooth_hi += factor * smooth_high
        terms.details.append({
            'x': x, 'weight': float(weight[x]), 'scale': float(scale[x]),
            'min': low, 'max': high, 'smooth_min': smooth_low, 'smooth_max': smooth_high})
    return terms


def _outer(terms: _Terms, floor: float, ceiling: float, alpha: float, offset: float = 0.0):
    """
    Clamp the summed terms to [floor, ceiling], hard and smoothed

    :return: (hard Interval, smoothed Interval, clamped flags)
    """
    hard = Interval(offset + max(floor, terms.hard_lo), offset + min(ceiling, terms.hard_hi))
    if math.isinf(alpha):
        smoothed = hard
    else:
        correction = math.log(2) / alpha
        smoothed = Interval(
            offset + lse([floor, terms.smooth_lo], alpha) - correction,
            offset + lse([ceiling, terms.smooth_hi], -alpha) + correction)
    clamped = {'lower': bool(terms.hard_lo < floor), 'upper': bool(terms.hard_hi > ceiling)}
    return hard, smoothed, clamped


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not alpha > 0:
        raise ValueError(f'alpha must be positive, got {alpha}')
    return alpha


def _check_nonnegative_outcome(model: FrequencyModel, method: str) -> None:
    if model.y_inf < 0:
        raise CodebookError(f'{method} bounds need a nonnegative outcome, min(y_values) = {model.y_inf}')


def _check_treatment(a: int) -> int:
    if a not in (0, 1):
        raise ValueError(f'treatment level must be 0 or 1, got {a}')
    return int(a)


def _ratio(numerator: np.ndarray, denominator: np.ndarray):
    """
    Ratio table with validity and undefined masks over the last axis
    """
    valid = denominator > 0
    with np.errstate(divide='ignore', invalid='ignore'):
        values = np.where(valid, numerator / np.where(valid, denominator, 1.0), np.nan)
    undefined = ((numerator > 0) & ~valid).any(axis=-1)
    return values, valid, undefined


def _audit_notes(model: FrequencyModel) -> typing.List[str]:
    return [str(entry) for entry in model.positivity_audit]


def _require_cells(model: FrequencyModel, a: int, weight: np.ndarray, what: str) -> None:
    for x in np.nonzero(weight > 0)[0]:
        model.require_cell(a, int(x), what)


def _require_arm(model: FrequencyModel, a: int, what: str) -> None:
    if not model.p_a[a] > 0:
        raise ZeroConditioningMass(f'{what} needs p(A={a}) > 0', cell={'a': a},
                                   diagnostics=_audit_notes(model))


def ett_bounds_w(model: FrequencyModel, a: int, alpha: float = DEFAULT_ALPHA, strict: bool = False) -> BoundsReport:
    """
    Bounds on E[Y^(a) | A=1-a] from an outcome confounding proxy W

    The ratio r(w, x) = p(w | 1-a, x) / p(w | a, x) is extremized over the
    proxy levels with p(w | a, x) > 0 and clamped to the outcome range.

    :param model: frequency model
    :param a: treatment level of the potential outcome
    :param alpha: LSE smoothing parameter (inf for hard bounds only)
    :param strict: raise RatioUndefined instead of clamping undefined covariate slices
    :return: BoundsReport
    """
    a, alpha = _check_treatment(a), _check_alpha(alpha)
    _check_nonnegative_outcome(model, 'W')
    _require_arm(model, 1 - a, 'ETT-mean W bounds')
    weight = model.p_x_given_a[1 - a]
    _require_cells(model, a, weight, 'ETT-mean W bounds')
    values, valid, undefined = _ratio(model.p_w_given_ax[1 - a], model.p_w_given_ax[a])
    terms = _extremal_sum(
        values, valid, weight, model.ey_ax[a], undefined,
        model.y_inf * weight, model.y_sup * weight, alpha, 'p(w|1-a,x)/p(w|a,x)', strict)
    hard, smoothed, clamped = _outer(terms, model.y_inf, model.y_sup, alpha)
    return BoundsReport('ETT-mean', 'W', hard, smoothed, alpha, a, clamped, terms.details,
                        tuple(terms.diagnostics + _audit_notes(model)))


def po_bounds_w(model: FrequencyModel, a: int, alpha: float = DEFAULT_ALPHA, strict: bool = False) -> BoundsReport:
    """
    Bounds on E[Y^(a)] from an outcome confounding proxy W

    The inverse propensity 1 / p(a | w, x) is extremized over the proxy levels
    with p(w, x) > 0. The lower bound is the larger of
    ``inf Y * p(1-a) + E[Y | a] p(a)`` and ``E[I(A=a) Y / max_w p(a | w, X)]``;
    the upper bound mirrors it.

    :param model: frequency model
    :param a: treatment level of the potential outcome
    :param alpha: LSE smoothing parameter (inf for hard bounds only)
    :param strict: raise RatioUndefined instead of clamping undefined covariate slices
    :return: BoundsReport
    """
    a, alpha = _check_treatment(a), _check_alpha(alpha)
    _check_nonnegative_outcome(model, 'W')
    _require_arm(model, a, 'PO-mean W bounds')
    _require_cells(model, a, model.p_ax[1 - a], 'PO-mean W bounds')
    weight = model.p_ax[a]
    scale = np.nan_to_num(model.ey_ax[a])
    # 1 / p(a | w, x) over w with p(w, x) > 0
    propensity = np.nan_to_num(model.p_a_given_wx[a])
    values, valid, undefined = _ratio((model.p_wx > 0).astype(np.float64), propensity)
    point = weight * scale
    weight_other = model.p_ax[1 - a]
    terms = _extremal_sum(
        values, valid, weight, scale, undefined,
        point + model.y_inf * weight_other, point + model.y_sup * weight_other,
        alpha, '1/p(a|w,x)', strict)
    p_other = model.p_a[1 - a]
    hard, smoothed, clamped = _outer(
        terms, model.y_inf * p_other + model.ey_ind_a[a], model.y_sup * p_other + model.ey_ind_a[a], alpha)
    return BoundsReport('PO-mean', 'W', hard, smoothed, alpha, a, clamped, terms.details,
                        tuple(terms.diagnostics + _audit_notes(model)))


def ett_bounds_z(model: FrequencyModel, a: int, alpha: float = DEFAULT_ALPHA, strict: bool = False) -> BoundsReport:
    """
    Bounds on E[Y^(a) | A=1-a] from a treatment confounding proxy Z

    E[Y | z, x, a] is extremized over the proxy levels with p(z, a, x) > 0.
    The bounds are averages of conditional means, so they lie in the outcome
    range without clamping.

    :param model: frequency model
    :param a: treatment level of the potential outcome
    :param alpha: LSE smoothing parameter (inf for hard bounds only)
    :param strict: unused, accepted for a uniform estimator signature
    :return: BoundsReport
    """
    a, alpha = _check_treatment(a), _check_alpha(alpha)
    _require_arm(model, 1 - a, 'ETT-mean Z bounds')
    weight = model.p_x_given_a[1 - a]
    _require_cells(model, a, weight, 'ETT-mean Z bounds')
    terms = _z_terms(model, a, weight, alpha)
    return _z_report('ETT-mean', model, a, alpha, terms, offset=0.0, scale=1.0)


def _z_terms(model: FrequencyModel, a: int, weight: np.ndarray, alpha: float) -> _Terms:
    values = model.ey_axz[a]
    valid = ~np.isnan(values)
    no_fallback = np.zeros(values.shape[0])
    return _extremal_sum(
        values, valid, weight, np.ones(values.shape[0]), np.zeros(values.shape[0], dtype=bool),
        no_fallback, no_fallback, alpha, 'E[Y|z,x,a]', False)


def _z_report(estimand: str, model: FrequencyModel, a: int, alpha: float, terms: _Terms,
              offset: float, scale: float) -> BoundsReport:
    hard = Interval(offset + scale * terms.hard_lo, offset + scale * terms.hard_hi)
    smoothed = hard if math.isinf(alpha) else Interval(
        offset + scale * terms.smooth_lo, offset + scale * terms.smooth_hi)
    diagnostics = list(terms.diagnostics)
    low_range = offset + scale * model.y_inf - 1e-12
    high_range = offset + scale * model.y_sup + 1e-12
    if hard.lower < low_range or hard.upper > high_range:
        message = f'Z bounds [{hard.lower}, {hard.upper}] outside the outcome range'
        LOGGER.warning(message)
        diagnostics.append(message)
    return BoundsReport(estimand, 'Z', hard, smoothed, alpha, a, {'lower': False, 'upper': False},
                        terms.details, tuple(diagnostics + _audit_notes(model)))


def po_bounds_z(model: FrequencyModel, a: int, alpha: float = DEFAULT_ALPHA, strict: bool = False) -> BoundsReport:
    """
    Bounds on E[Y^(a)] from a treatment confounding proxy Z

    The E[Y^(a) | A=1-a] bounds weighted by p(1-a) plus the point term
    E[Y | a] p(a). With p(1-a) = 0 the interval collapses to E[Y | a].

    :param model: frequency model
    :param a: treatment level of the potential outcome
    :param alpha: LSE smoothing parameter (inf for hard bounds only)
    :param strict: unused, accepted for a uniform estimator signature
    :return: BoundsReport
    """
    a, alpha = _check_treatment(a), _check_alpha(alpha)
    _require_arm(model, a, 'PO-mean Z bounds')
    p_other = float(model.p_a[1 - a])
    if p_other > 0:
        weight = model.p_x_given_a[1 - a]
        _require_cells(model, a, weight, 'PO-mean Z bounds')
        terms = _z_terms(model, a, weight, alpha)
    else:
        terms = _Terms()
    return _z_report('PO-mean', model, a, alpha, terms, offset=float(model.ey_ind_a[a]), scale=p_other)


def ett_bounds_wz(model: FrequencyModel, a: int, alpha: float = DEFAULT_ALPHA, strict: bool = False) -> BoundsReport:
    """
    Bounds on E[Y^(a) | A=1-a] from two proxies W and Z that are independent given (A, X, U)

    The dependence ratio p(w, z | a, x) / (p(w | a, x) p(z | a, x)) is
    extremized over the |W| x |Z| cells with a positive denominator and the
    result clamped to the outcome range.

    :param model: frequency model
    :param a: treatment level of the potential outcome
    :param alpha: LSE smoothing parameter (inf for hard bounds only)
    :param strict: raise RatioUndefined instead of clamping undefined covariate slices
    :return: BoundsReport
    """
    a, alpha = _check_treatment(a), _check_alpha(alpha)
    _check_nonnegative_outcome(model, 'WZ')
    _require_arm(model, 1 - a, 'ETT-mean WZ bounds')
    weight = model.p_x_given_a[1 - a]
    _require_cells(model, a, weight, 'ETT-mean WZ bounds')
    terms = _wz_terms(model, a, weight, alpha, strict)
    hard, smoothed, clamped = _outer(terms, model.y_inf, model.y_sup, alpha)
    return BoundsReport('ETT-mean', 'WZ', hard, smoothed, alpha, a, clamped, terms.details,
                        tuple(terms.diagnostics + _audit_notes(model)))


def _wz_terms(model: FrequencyModel, a: int, weight: np.ndarray, alpha: float, strict: bool) -> _Terms:
    joint = model.p_wz_given_ax[a]
    product = model.p_w_given_ax[a][:, :, None] * model.p_z_given_ax[a][:, None, :]
    cells = joint.shape[0]
    values, valid, undefined = _ratio(np.nan_to_num(joint).reshape(cells, -1), np.nan_to_num(product).reshape(cells, -1))
    return _extremal_sum(
        values, valid, weight, model.ey_ax[a], undefined,
        model.y_inf * weight, model.y_sup * weight, alpha, 'p(w,z|a,x)/(p(w|a,x)p(z|a,x))', strict)


def po_bounds_wz(model: FrequencyModel, a: int, alpha: float = DEFAULT_ALPHA, strict: bool = False) -> BoundsReport:
    """
    Bounds on E[Y^(a)] from two proxies: the two proxy E[Y^(a) | A=1-a] bounds
    weighted by p(1-a) plus E[Y | a] p(a)

    :param model: frequency model
    :param a: treatment level of the potential outcome
    :param alpha: LSE smoothing parameter (inf for hard bounds only)
    :param strict: raise RatioUndefined instead of clamping undefined covariate slices
    :return: BoundsReport
    """
    a, alpha = _check_treatment(a), _check_alpha(alpha)
    _require_arm(model, a, 'PO-mean WZ bounds')
    p_other = float(model.p_a[1 - a])
    offset = float(model.ey_ind_a[a])
    if not p_other > 0:
        point = Interval.point(offset)
        return BoundsReport('PO-mean', 'WZ', point, point, alpha, a, {'lower': False, 'upper': False}, [],
                            tuple(_audit_notes(model)))
    ett = ett_bounds_wz(model, a, alpha, strict)
    hard = Interval(offset + p_other * ett.hard.lower, offset + p_other * ett.hard.upper)
    smoothed = Interval(offset + p_other * ett.smoothed.lower, offset + p_other * ett.smoothed.upper)
    return BoundsReport('PO-mean', 'WZ', hard, smoothed, alpha, a, ett.clamped, ett.ratio_details,
                        ett.diagnostics)


def mediation_bound(model: FrequencyModel, alpha: float = DEFAULT_ALPHA, strict: bool = False) -> BoundsReport:
    """
    Bounds on the cross world mean E[Y^(1, M^(0))] with a hidden mediator M and its proxy W

    The ratio p(w | A=0, x) / p(w | A=1, x) is extremized over proxy levels with
    p(w | A=1, x) > 0, scaled by E[Y | A=1, x], averaged over p(x) and clamped to
    the outcome range.

    :param model: frequency model of a mediation model (W proxies the mediator)
    :param alpha: LSE smoothing parameter (inf for hard bounds only)
    :param strict: raise RatioUndefined instead of clamping undefined covariate slices
    :return: BoundsReport
    """
    alpha = _check_alpha(alpha)
    _check_nonnegative_outcome(model, 'mediation')
    weight = model.p_x
    _require_cells(model, 1, weight, 'mediation bounds')
    _require_cells(model, 0, weight, 'mediation bounds')
    values, valid, undefined = _ratio(model.p_w_given_ax[0], model.p_w_given_ax[1])
    terms = _extremal_sum(
        values, valid, weight, model.ey_ax[1], undefined,
        model.y_inf * weight, model.y_sup * weight, alpha, 'p(w|0,x)/p(w|1,x)', strict)
    hard, smoothed, clamped = _outer(terms, model.y_inf, model.y_sup, alpha)
    return BoundsReport('mediation-cross-world', 'mediation', hard, smoothed, alpha, None, clamped,
                        terms.details, tuple(terms.diagnostics + _audit_notes(model)))


def frontdoor_po_bounds(model: FrequencyModel, a: int, alpha: float = DEFAULT_ALPHA,
                        strict: bool = False) -> BoundsReport:
    """
    Bounds on E[Y^(a)] in a front-door model whose mediator is hidden and proxied by W

    ``E[I(A=a) Y] + max{inf Y * p(1-a), E[I(A=1-a) min_w p(w|a,X)/p(w|1-a,X) Y]}``
    for the lower bound, symmetric for the upper bound.

    :param model: frequency model of a front-door model
    :param a: treatment level of the potential outcome
    :param alpha: LSE smoothing parameter (inf for hard bounds only)
    :param strict: raise RatioUndefined instead of clamping undefined covariate slices
    :return: BoundsReport
    """
    a, alpha = _check_treatment(a), _check_alpha(alpha)
    _check_nonnegative_outcome(model, 'frontdoor')
    weight = model.p_ax[1 - a]
    _require_cells(model, a, weight, 'frontdoor bounds')
    values, valid, undefined = _ratio(model.p_w_given_ax[a], model.p_w_given_ax[1 - a])
    terms = _extremal_sum(
        values, valid, weight, np.nan_to_num(model.ey_ax[1 - a]), undefined,
        model.y_inf * weight, model.y_sup * weight, alpha, 'p(w|a,x)/p(w|1-a,x)', strict)
    p_other = float(model.p_a[1 - a])
    hard, smoothed, clamped = _outer(
        terms, model.y_inf * p_other, model.y_sup * p_other, alpha, offset=float(model.ey_ind_a[a]))
    return BoundsReport('frontdoor-PO-mean', 'frontdoor', hard, smoothed, alpha, a, clamped, terms.details,
                        tuple(terms.diagnostics + _audit_notes(model)))


def observed_mean(model: FrequencyModel, a: int) -> Interval:
    """
    E[Y | A=a] as a degenerate interval (E[Y^(a) | A=a] under consistency)
    """
    _require_arm(model, a, 'observed mean')
    return Interval.point(float(model.ey_a[a]))


def g_formula(model: FrequencyModel, a: int) -> Interval:
    """
    sum_x E[Y | a, x] p(x) as a degenerate interval (point identified E[Y^(a)] without latent confounding)
    """
    _require_cells(model, a, model.p_x, 'g-formula')
    weight = model.p_x
    return Interval.point(float(np.sum(np.where(weight > 0, np.nan_to_num(model.ey_ax[a]) * weight, 0.0))))


_EFFECT_RECIPES = {
    'ATE': ('PO-mean(1)', 'PO-mean(0)'),
    'ETT': ('observed-mean(1)', 'ETT-mean(0)'),
    'NIE': ('PO-mean(1)', 'mediation-cross-world'),
    'NDE': ('mediation-cross-world', 'PO-mean(0)'),
}


def compose_effect(parts: typing.Mapping[str, Interval], target: str) -> Interval:
    """
    Difference of two component intervals by interval arithmetic

    ======  ===================  =========================
    target  plus term            minus term
    ======  ===================  =========================
    ATE     PO-mean(1)           PO-mean(0)
    ETT     observed-mean(1)     ETT-mean(0)
    NIE     PO-mean(1)           mediation-cross-world
    NDE     mediation-cross-world  PO-mean(0)
    ======  ===================  =========================

    :param parts: component label -> Interval (point identified components as degenerate intervals)
    :param target: ATE, ETT, NIE or NDE
    :return: [L(plus) - U(minus), U(plus) - L(minus)]
    :raises MissingComponent: a required component is absent
    """
    if target not in _EFFECT_RECIPES:
        raise ValueError(f'Unknown effect {target!r}, use one of {sorted(_EFFECT_RECIPES)}')
    plus, minus = _EFFECT_RECIPES[target]
    missing = [label for label in (plus, minus) if label not in parts]
    if missing:
        raise MissingComponent(f'{target} needs components {missing}')
    return Interval(parts[plus].lower - parts[minus].upper, parts[plus].upper - parts[minus].lower)


def intersect_bounds(intervals: typing.Sequence[Interval]) -> Interval:
    """
    Intersection of bounds obtained from several proxies

    :param intervals: nonempty list of Interval
    :return: [max of lowers, min of uppers]
    :raises EmptyIntersection: the intervals do not overlap
    """
    intervals = list(intervals)
    if not intervals:
        raise ValueError('intersect_bounds needs at least one interval')
    lower = max(interval.lower for interval in intervals)
    upper = min(interval.upper for interval in intervals)
    if lower > upper:
        raise EmptyIntersection(
            f'Bounds do not overlap: max lower {lower} > min upper {upper}; '
            f'the assumptions fail for at least one proxy')
    return Interval(lower, upper)


def intersect_reports(reports: typing.Sequence[BoundsReport]) -> BoundsReport:
    """
    Intersect the hard and smoothed intervals of reports for the same estimand (one per proxy)
    """
    reports = list(reports)
    labels = {report.label for report in reports}
    if len(labels) != 1:
        raise ValueError(f'Reports are for different estimands: {sorted(labels)}')
    first = reports[0]
    return BoundsReport(
        first.estimand, '+'.join(report.method for report in reports),
        intersect_bounds([report.hard for report in reports]),
        intersect_bounds([report.smoothed for report in reports]),
        first.alpha, first.a,
        {key: any(report.clamped.get(key) for report in reports) for key in ('lower', 'upper')},
        [report.ratio_details for report in reports],
        tuple(note for report in reports for note in report.diagnostics))


_ETT_ESTIMATORS = {'W': ett_bounds_w, 'Z': ett_bounds_z, 'WZ': ett_bounds_wz}
_PO_ESTIMATORS = {'W': po_bounds_w, 'Z': po_bounds_z, 'WZ': po_bounds_wz, 'frontdoor': frontdoor_po_bounds}


def estimate_bounds(model: FrequencyModel, estimand: str, method: str, alpha: float = DEFAULT_ALPHA,
                    a: int = 0, strict: bool = False) -> BoundsReport:
    """
    Route an (estimand, method) pair to its estimator

    :param model: frequency model
    :param estimand: one of ``ESTIMANDS``
    :param method: one of ``METHODS``
    :param alpha: LSE smoothing parameter (inf for hard bounds only)
    :param a: treatment level for potential outcome estimands
    :param strict: raise RatioUndefined instead of clamping undefined covariate slices
    :return: BoundsReport
    """
    if method not in METHODS:
        raise ValueError(f'Unknown method {method!r}, use one of {METHODS}')
    if estimand in _EFFECT_RECIPES:
        return effect_bounds(model, estimand, method, alpha, strict)
    if estimand == 'ETT-mean' and method in _ETT_ESTIMATORS:
        return _ETT_ESTIMATORS[method](model, a, alpha, strict)
    if estimand in ('PO-mean', 'frontdoor-PO-mean') and method in _PO_ESTIMATORS:
        if (estimand == 'frontdoor-PO-mean') != (method == 'frontdoor'):
            raise ValueError(f'Estimand {estimand} is not available for method {method}')
        return _PO_ESTIMATORS[method](model, a, alpha, strict)
    if estimand == 'mediation-cross-world' and method == 'mediation':
        return mediation_bound(model, alpha, strict)
    raise ValueError(f'Estimand {estimand!r} is not available for method {method!r}')


def _part_reports(model: FrequencyModel, target: str, method: str, alpha: float,
                  strict: bool) -> typing.Dict[str, BoundsReport]:
    def point(label, interval):
        return BoundsReport(label, method, interval, interval, alpha)

    if method == 'mediation':
        cross = mediation_bound(model, alpha, strict)
        return {
            'PO-mean(1)': point('g-formula(1)', g_formula(model, 1)),
            'PO-mean(0)': point('g-formula(0)', g_formula(model, 0)),
            'observed-mean(1)': point('observed-mean(1)', observed_mean(model, 1)),
            'ETT-mean(0)': point('g-formula-ETT(0)', Interval.point(
                float(np.nansum(model.ey_ax[0] * model.p_x_given_a[1])))),
            'mediation-cross-world': cross,
        }
    if target == 'ATE':
        estimator = _PO_ESTIMATORS.get(method)
        if estimator is None:
            raise ValueError(f'ATE is not available for method {method!r}')
        return {f'PO-mean({a})': estimator(model, a, alpha, strict) for a in (1, 0)}
    if target == 'ETT':
        estimator = _ETT_ESTIMATORS.get(method)
        if estimator is None:
            raise ValueError(f'ETT is not available for method {method!r}')
        return {
            'observed-mean(1)': point('observed-mean(1)', observed_mean(model, 1)),
            'ETT-mean(0)': estimator(model, 0, alpha, strict),
        }
    raise ValueError(f'{target} is not available for method {method!r}')


def effect_bounds(model: FrequencyModel, target: str, method: str, alpha: float = DEFAULT_ALPHA,
                  strict: bool = False) -> BoundsReport:
    """
    Bounds on ATE, ETT, NIE or NDE composed from potential outcome bounds

    :param model: frequency model
    :param target: ATE, ETT, NIE or NDE
    :param method: W, Z, WZ, mediation or frontdoor
    :param alpha: LSE smoothing parameter (inf for hard bounds only)
    :param strict: raise RatioUndefined instead of clamping undefined covariate slices
    :return: BoundsReport whose ratio_details hold the component reports
    """
    alpha = _check_alpha(alpha)
    if target in ('NIE', 'NDE') and method != 'mediation':
        raise ValueError(f'{target} is only available for the mediation method')
    parts = _part_reports(model, target, method, alpha, strict)
    hard = compose_effect({label: report.hard for label, report in parts.items()}, target)
    smoothed = compose_effect({label: report.smoothed for label, report in parts.items()}, target)
    used = _EFFECT_RECIPES[target]
    clamped = {
        key: any(parts[label].clamped.get(key, False) for label in used) for key in ('lower', 'upper')}
    details = {label: parts[label].to_dict() for label in used}
    diagnostics = tuple(dict.fromkeys(note for label in used for note in parts[label].diagnostics))
    return BoundsReport(target, method, hard, smoothed, alpha, None, clamped, details, diagnostics)
