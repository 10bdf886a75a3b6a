"""
Feasibility checks for nonnegative bridge functions.

The bounds are valid when a nonnegative outcome bridge h (and, for the
conditionally independent proxies variant, a treatment bridge q) exists. These
checks need the latent axes, so they run on simulated joints only.

Outcome bridge, ``variant``:

==============  ============  =============================  =====================
variant         per cell      kernel K[row, col]             right hand side
==============  ============  =============================  =====================
``confounder``  (a, x)        p(w | a, x, u)                 E[Y | a, x, u]
``mediation``   x             p(w | x, m)                    E[Y | A=1, x, m]
``frontdoor``   (a, x)        p(w | a, x, m)                 E[Y | a, x, m]
==============  ============  =============================  =====================

Treatment bridge, per (a, x): ``K[u, z] = p(z | a, x, u)`` with right hand side
``p(u | 1-a, x) / p(u | a, x)``. The result also records the normalization gap
``sum_z q(z) p(z | a, x) - 1``.

Each system is solved by least squares first; a solution whose negative entries
are all above ``-clip`` is clipped at zero and kept if its residual is within
``tolerance``. Otherwise the cell is solved by nonnegative least squares. The
residual is the largest absolute violation of the system.

Conditioning cells with p(a, x) = 0 are skipped and listed in ``skipped``.
"""
import logging
import typing
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lstsq
from scipy.optimize import nnls

from proxybounds.dgp import PositivityViolation
from proxybounds.pmf import JointPMF, role_table

LOGGER = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-8
DEFAULT_CLIP = 1e-10

OUTCOME_VARIANTS = {
    # variant -> (latent role, condition on a)
    'confounder': ('U', True),
    'mediation': ('M', False),
    'frontdoor': ('M', True),
}


@dataclass(frozen=True)
class BridgeCell:
    cell: typing.Dict[str, int]
    solution: typing.Tuple[float, ...]
    residual: float
    feasible: bool
    normalization_gap: typing.Optional[float] = None

    def to_dict(self) -> dict:
        data = {
            'cell': dict(self.cell),
            'solution': list(self.solution),
            'residual': self.residual,
            'feasible': self.feasible,
        }
        if self.normalization_gap is not None:
            data['normalization_gap'] = self.normalization_gap
        return data


@dataclass(frozen=True)
class BridgeCheckResult:
    """
    Outcome of a bridge feasibility check.

    :param bridge: outcome or treatment
    :param variant: confounder, mediation or frontdoor (treatment bridges are always confounder)
    :param cells: per conditioning cell solutions
    :param tolerance: residual tolerance used
    :param skipped: conditioning cells without mass
    :param diagnostics: one note per skipped cell
    """
    bridge: str
    variant: str
    cells: typing.Tuple[BridgeCell, ...] = field(default=())
    tolerance: float = DEFAULT_TOLERANCE
    skipped: typing.Tuple[typing.Dict[str, int], ...] = field(default=())
    diagnostics: typing.Tuple[str, ...] = field(default=())

    @property
    def feasible(self) -> bool:
        return all(cell.feasible for cell in self.cells)

    @property
    def max_residual(self) -> float:
        return max((cell.residual for cell in self.cells), default=0.0)

    def infeasible_cells(self) -> typing.List[typing.Dict[str, int]]:
        return [cell.cell for cell in self.cells if not cell.feasible]

    def to_dict(self) -> dict:
        return {
            'bridge': self.bridge,
            'variant': self.variant,
            'feasible': self.feasible,
            'max_residual': self.max_residual,
            'tolerance': self.tolerance,
            'cells': [cell.to_dict() for cell in self.cells],
            'skipped': [dict(cell) for cell in self.skipped],
            'diagnostics': list(self.diagnostics),
        }


def max_violation(kernel: np.ndarray, solution: np.ndarray, rhs: np.ndarray) -> float:
    return float(np.abs(kernel @ solution - rhs).max(initial=0.0))


def solve_nonnegative(kernel: np.ndarray, rhs: np.ndarray, tolerance: float = DEFAULT_TOLERANCE,
                      clip: float = DEFAULT_CLIP) -> typing.Tuple[np.ndarray, float, bool]:
    """
    Nonnegative solution of ``kernel @ h = rhs``

    :return: (solution, largest absolute violation, feasible)
    """
    solution, _, _, _ = lstsq(kernel, rhs)
    if solution.min(initial=0.0) >= -clip:
        solution = np.clip(solution, 0.0, None)
        residual = max_violation(kernel, solution, rhs)
        if residual <= tolerance:
            return solution, residual, True
    solution, _ = nnls(kernel, rhs)
    residual = max_violation(kernel, solution, rhs)
    return solution, residual, bool(residual <= tolerance)


def _skip(cell: typing.Dict[str, int], reason: str, skipped: list, diagnostics: list) -> None:
    message = f'bridge cell {cell} skipped: {reason}'
    LOGGER.info(message)
    skipped.append(cell)
    diagnostics.append(message)


def _conditionals(table_y: np.ndarray, y_values: np.ndarray):
    """
    From a table [..., latent, proxy, y]: p(latent, ...), p(proxy | ..., latent), E[Y | ..., latent]
    """
    mass_lw = table_y.sum(axis=-1)
    mass_l = mass_lw.sum(axis=-1)
    with np.errstate(divide='ignore', invalid='ignore'):
        p_w = mass_lw / np.where(mass_l > 0, mass_l, 1.0)[..., None]
        ey = (table_y.sum(axis=-2) @ y_values) / np.where(mass_l > 0, mass_l, 1.0)
    return mass_l, p_w, ey


def check_outcome_bridge(joint: JointPMF, variant: str = 'confounder', tolerance: float = DEFAULT_TOLERANCE,
                         clip: float = DEFAULT_CLIP) -> BridgeCheckResult:
    """
    Check that a nonnegative outcome bridge exists in every populated cell

    :param joint: JointPMF including the latent axis
    :param variant: confounder, mediation or frontdoor
    :param tolerance: residual tolerance
    :param clip: magnitude of negative least squares entries clipped to zero
    :return: BridgeCheckResult
    """
    if variant not in OUTCOME_VARIANTS:
        raise ValueError(f'Unknown bridge variant {variant!r}, use one of {sorted(OUTCOME_VARIANTS)}')
    latent, per_arm = OUTCOME_VARIANTS[variant]
    y_values = np.array(joint.codebook.y_values)
    table = role_table(joint, ('A', 'X', latent, 'W', 'Y'))
    if not per_arm:
        # p(w | x, m) pooled over A, right hand side from the A=1 arm
        pooled_mass, pooled_w, _ = _conditionals(table.sum(axis=0), y_values)
        mass_1, _, ey_1 = _conditionals(table[1], y_values)
        arms = [(None, pooled_mass * (mass_1 > 0), pooled_w, ey_1)]
    else:
        arms = [(a,) + _conditionals(table[a], y_values) for a in (0, 1)]

    cells, skipped, diagnostics = [], [], []
    for a, mass, p_w, ey in arms:
        for x in range(mass.shape[0]):
            rows = mass[x] > 0
            cell = {'x': x} if a is None else {'a': a, 'x': x}
            if not rows.any():
                _skip(cell, f'p(A={1 if a is None else a}, X={x}) = 0', skipped, diagnostics)
                continue
            solution, residual, feasible = solve_nonnegative(p_w[x][rows], ey[x][rows], tolerance, clip)
            if not feasible:
                LOGGER.info(f'outcome bridge ({variant}) infeasible at {cell}, residual {residual:.3g}')
            cells.append(BridgeCell(cell, tuple(float(value) for value in solution), residual, feasible))
    return BridgeCheckResult('outcome', variant, tuple(cells), tolerance, tuple(skipped), tuple(diagnostics))


def check_treatment_bridge(joint: JointPMF, tolerance: float = DEFAULT_TOLERANCE,
                           clip: float = DEFAULT_CLIP) -> BridgeCheckResult:
    """
    Check that a nonnegative treatment bridge q(z, a, x) exists in every populated (a, x) cell

    :param joint: JointPMF of a confounder model including U
    :param tolerance: residual tolerance
    :param clip: magnitude of negative least squares entries clipped to zero
    :return: BridgeCheckResult with the normalization gap of every cell
    :raises PositivityViolation: p(u | a, x) = 0 for a latent level u present at x
    """
    table = role_table(joint, ('A', 'X', 'U', 'Z'))
    mass_axu = table.sum(axis=-1)
    mass_ax = mass_axu.sum(axis=-1)
    with np.errstate(divide='ignore', invalid='ignore'):
        p_z = table / np.where(mass_axu > 0, mass_axu, 1.0)[..., None]
        p_u = mass_axu / np.where(mass_ax > 0, mass_ax, 1.0)[..., None]
        p_z_given_ax = table.sum(axis=2) / np.where(mass_ax > 0, mass_ax, 1.0)[..., None]

    cells, skipped, diagnostics = [], [], []
    for a in (0, 1):
        for x in range(mass_ax.shape[1]):
            cell = {'a': a, 'x': x}
            if not (mass_ax[a, x] > 0 and mass_ax[1 - a, x] > 0):
                _skip(cell, f'p(A={a}, X={x}) = 0 or p(A={1 - a}, X={x}) = 0', skipped, diagnostics)
                continue
            rows = mass_axu.sum(axis=0)[x] > 0
            if not (mass_axu[a, x][rows] > 0).all():
                u = int(np.argwhere(rows & ~(mass_axu[a, x] > 0))[0][0])
                raise PositivityViolation(f'p(u={u} | a={a}, x={x}) = 0', cell=dict(cell, u=u))
            rhs = p_u[1 - a, x][rows] / p_u[a, x][rows]
            solution, residual, feasible = solve_nonnegative(p_z[a, x][rows], rhs, tolerance, clip)
            gap = float(solution @ p_z_given_ax[a, x] - 1.0)
            if not feasible:
                LOGGER.info(f'treatment bridge infeasible at {cell}, residual {residual:.3g}')
            cells.append(BridgeCell(cell, tuple(float(value) for value in solution), residual, feasible, gap))
    return BridgeCheckResult('treatment', 'confounder', tuple(cells), tolerance, tuple(skipped), tuple(diagnostics))
