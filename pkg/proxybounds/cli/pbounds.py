import argparse
import json
import logging
import math
import os

from proxybounds import __version__, ProxyboundsError
from proxybounds.bootstrap import bootstrap_ci, write_replicates_csv
from proxybounds.bounds import ESTIMANDS, METHODS, estimate_bounds, intersect_reports
from proxybounds.bridge import OUTCOME_VARIANTS, check_outcome_bridge, check_treatment_bridge
from proxybounds.cli import add_logging_arg_group, add_version, dicts_to_csv, get_config, print_banner, \
    print_exception_details, write_json
from proxybounds.codebook import dump_codebook, load_codebook
from proxybounds.dgp import FAMILIES, DGPSpec, build_joint, derive_seed, draw_dataset, oracle_estimands, \
    sample_dgp_spec
from proxybounds.frequency import FrequencyModel, fit_frequencies, read_dataset_csv, write_dataset_csv
from proxybounds.pmf import JointPMF
from proxybounds.study import StudyConfig, StudyConfigError, run_study, summarize, write_summary

LOGGER = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 4


def cli_entry(*args):
    return cli_run(**vars(_get_cli_parser().parse_args(*args)))


def cli_run(**kwargs):

    print_banner('pbounds', kwargs)
    if not kwargs.get('func'):
        print(__name__ + " (" + __version__ + ")")
        print("try --help for information")
        return EXIT_CONFIG

    logging.basicConfig(
        level=kwargs.get('loglevel'),
        format='%(asctime)s:%(name)s:%(lineno)s:%(levelname)s:%(message)s')

    try:
        config = get_config('proxybounds.json', cli_filename=kwargs.get('config_file'))
        kwargs['func'](config=config, **kwargs)
    except ProxyboundsError as err:
        print_exception_details(err)
        return err.exit_code
    except json.JSONDecodeError as err:
        print("*** ERROR - processing has stopped ***")
        print(f'Invalid JSON: {err}')
        return EXIT_CONFIG
    except OSError as err:
        print("*** ERROR - processing has stopped ***")
        print(err)
        return EXIT_IO
    except ValueError as err:
        print("*** ERROR - processing has stopped ***")
        print(err)
        return EXIT_CONFIG
    return EXIT_OK


def _get_cli_parser():
    """
    pbounds argparse parser create
    :return: parser
    """
    parser = argparse.ArgumentParser(
        description="Proxy based causal bounds ({version})".format(version=__version__))
    add_version(parser)

    subparsers = parser.add_subparsers(help="Sub-command help")

    simulate_parser = subparsers.add_parser("simulate", help="Draw random models, datasets and oracle values")
    simulate_parser.set_defaults(func=simulate)
    _add_common_args(simulate_parser)
    _add_simulate_args(simulate_parser)

    bounds_parser = subparsers.add_parser("bounds", help="Bounds from a dataset or a population model")
    bounds_parser.set_defaults(func=bounds)
    _add_common_args(bounds_parser)
    _add_estimator_args(bounds_parser)
    bounds_parser.add_argument(
        "--population", action="store_true",
        help="input is a DGP spec or joint JSON, use its exact observed margin")
    bounds_parser.add_argument("--hard-only", action="store_true", help="hard bounds only (no smoothing)")
    bounds_parser.add_argument("--strict", action="store_true", default=None,
                               help="fail on undefined ratios instead of clamping")

    ci_parser = subparsers.add_parser("ci", help="Bootstrap confidence interval for smoothed bounds")
    ci_parser.set_defaults(func=ci)
    _add_common_args(ci_parser)
    _add_estimator_args(ci_parser)
    _add_ci_args(ci_parser)

    bridge_parser = subparsers.add_parser("bridge-check", help="Check bridge function feasibility")
    bridge_parser.set_defaults(func=bridge_check)
    _add_common_args(bridge_parser)
    bridge_parser.add_argument("--variant", choices=sorted(OUTCOME_VARIANTS),
                               help="outcome bridge variant (default: the spec family)")
    bridge_parser.add_argument("--tolerance", type=float, help="residual tolerance")
    bridge_parser.add_argument("--clip", type=float, help="negative entry clip")
    bridge_parser.add_argument("--cells-csv", help="write per cell solutions to this CSV file")

    study_parser = subparsers.add_parser("study", help="Run a simulation study")
    study_parser.set_defaults(func=study)
    study_parser.add_argument("input", nargs="?", default="study1",
                              help="study preset name or study config JSON file")
    study_parser.add_argument("-o", "--output", help="summary CSV file (summary JSON written alongside)")
    study_parser.add_argument("--replications", type=int, help="replications per grid point")
    study_parser.add_argument("--replicates", type=int, help="bootstrap replicates (0 for none)")
    study_parser.add_argument("--seed", type=int, help="root seed")
    study_parser.add_argument("--jobs", type=int, dest="n_jobs", help="joblib worker count")
    study_parser.add_argument("--records-csv", help="write every replication record to this CSV file")
    study_parser.add_argument("--config-file", help="File containing proxybounds configuration")
    add_logging_arg_group(study_parser)

    return parser


def _add_common_args(parser):
    parser.add_argument("input", nargs="?", help="Input file")
    parser.add_argument("-o", "--output", help="Output file or directory")
    parser.add_argument("--config-file", help="File containing proxybounds configuration")
    add_logging_arg_group(parser)


def _add_simulate_args(parser):
    parser.add_argument("--family", choices=sorted(FAMILIES), default="confounder", help="model family")
    parser.add_argument("--cardinalities", help="axis cardinalities, e.g. U=4,X=4,W=4,Z=4,A=2,Y=3")
    parser.add_argument("--preset", help="take family and cardinalities from a study preset")
    parser.add_argument("-n", "--samples", type=int, nargs="+", default=[5000], help="dataset sizes")
    parser.add_argument("--replications", type=int, default=1, help="number of models to draw")
    parser.add_argument("--seed", type=int, default=0, help="root seed")


def _add_estimator_args(parser):
    parser.add_argument("--codebook", help="codebook JSON of the dataset")
    parser.add_argument("--method", choices=METHODS, nargs="+", default=["W"],
                        help="bounds method; several methods are intersected")
    parser.add_argument("--estimand", choices=ESTIMANDS, default="ETT-mean", help="estimand")
    parser.add_argument("-a", "--treatment", type=int, dest="a", choices=[0, 1],
                        help="treatment level of the potential outcome")
    parser.add_argument("--alpha", type=float, help="LSE smoothing parameter")
    parser.add_argument("--smoothing", type=float, help="add-lambda pseudo count")


def _add_ci_args(parser):
    parser.add_argument("--replicates", type=int, help="bootstrap replicates B")
    parser.add_argument("--level", type=float, help="nominal coverage")
    parser.add_argument("--seed", type=int, default=0, help="root seed")
    parser.add_argument("--jobs", type=int, dest="n_jobs", help="joblib worker count")
    parser.add_argument("--replicates-csv", help="write every replicate (lower, upper) pair to this CSV file")


def _setting(kwargs, key, section):
    return section[key] if kwargs.get(key) is None else kwargs[key]


def _require(kwargs, *keys):
    missing = [key for key in keys if not kwargs.get(key)]
    if missing:
        raise ValueError(f'Missing arguments: {", ".join(missing)}')


def parse_cardinalities(text):
    """
    Parse ``U=4,X=4`` into a dict
    """
    try:
        return {name.strip(): int(value) for name, value in (item.split('=') for item in text.split(','))}
    except ValueError:
        raise ValueError(f'Cardinalities must look like U=4,X=4,...; got {text!r}')


def load_population(filename):
    """
    Read a DGP spec JSON or a joint JSON

    :return: (JointPMF, family or None)
    """
    with open(filename, 'r') as in_json:
        data = json.load(in_json)
    if 'family' in data:
        spec = DGPSpec.from_dict(data)
        return build_joint(spec), spec.family
    return JointPMF.from_dict(data), None


def _load_model(kwargs, smoothing):
    if kwargs.get('population'):
        joint, _ = load_population(kwargs['input'])
        return FrequencyModel.from_joint(joint)
    return fit_frequencies(_load_dataset(kwargs), smoothing)


def _load_dataset(kwargs):
    _require(kwargs, 'input', 'codebook')
    with open(kwargs['codebook'], 'r') as in_codebook:
        codebook = load_codebook(in_codebook)
    with open(kwargs['input'], 'r') as in_csv:
        return read_dataset_csv(in_csv, codebook)


def simulate(config, **kwargs):
    """
    Write DGP spec, oracle truth, codebook and dataset files for each replication

    :param config: dict containing proxybounds config
    :return: None
    """
    family = kwargs.get('family') or 'confounder'
    if kwargs.get('preset'):
        preset = config['studies'].get(kwargs['preset'])
        if not preset:
            raise StudyConfigError(f'Unknown study preset {kwargs["preset"]!r}')
        family, cardinalities = preset['family'], preset['grid'][0]
    else:
        _require(kwargs, 'cardinalities')
        cardinalities = parse_cardinalities(kwargs['cardinalities'])
    output_dir = kwargs.get('output') or '.'
    os.makedirs(output_dir, exist_ok=True)
    seed = kwargs.get('seed') or 0

    for replication in range(kwargs.get('replications') or 1):
        spec = sample_dgp_spec(cardinalities, family, seed=derive_seed(seed, 0, replication, 0))
        joint = build_joint(spec)
        stem = os.path.join(output_dir, f'r{replication:04d}')
        write_json(dict(spec.to_dict(), config={'seed': seed, 'replication': replication}), stem + '_spec.json')
        write_json(oracle_estimands(joint).to_dict(), stem + '_truth.json')
        with open(stem + '_codebook.json', 'w') as out_codebook:
            dump_codebook(joint.codebook.observed, out_codebook)
        for n in kwargs.get('samples') or [5000]:
            data = draw_dataset(joint, n, seed=derive_seed(seed, 0, replication, 1, n))
            with open(f'{stem}_n{n}.csv', 'w', newline='') as out_csv:
                write_dataset_csv(data, out_csv)
    LOGGER.info(f'simulate wrote {kwargs.get("replications") or 1} replications to {output_dir}')


def _effective_bounds(config, kwargs):
    section = config['bounds']
    alpha = math.inf if kwargs.get('hard_only') else float(_setting(kwargs, 'alpha', section))
    return {
        'alpha': alpha,
        'smoothing': float(_setting(kwargs, 'smoothing', section)),
        'a': int(_setting(kwargs, 'a', section)),
        'strict': bool(_setting(kwargs, 'strict', section)),
    }


def bounds(config, **kwargs):
    """
    Compute bounds for one estimand, intersecting several methods when more than one is given

    :param config: dict containing proxybounds config
    :return: None
    """
    _require(kwargs, 'input')
    settings = _effective_bounds(config, kwargs)
    model = _load_model(kwargs, settings['smoothing'])
    reports = [
        estimate_bounds(model, kwargs['estimand'], method, settings['alpha'], settings['a'], settings['strict'])
        for method in kwargs['method']]
    report = reports[0] if len(reports) == 1 else intersect_reports(reports)
    effective = dict(settings, alpha=None if math.isinf(settings['alpha']) else settings['alpha'],
                     rng=config['rng'])
    write_json(dict(report.to_dict(), config=effective), kwargs.get('output') or kwargs['input'] + '.bounds.json')


def ci(config, **kwargs):
    """
    Bootstrap confidence interval for smoothed bounds

    :param config: dict containing proxybounds config
    :return: None
    """
    if len(kwargs['method']) != 1:
        raise ValueError('ci takes a single method')
    settings = _effective_bounds(config, kwargs)
    section = config['bootstrap']
    data = _load_dataset(kwargs)
    report = bootstrap_ci(
        data, kwargs['estimand'], kwargs['method'][0], settings['a'],
        replicates=int(_setting(kwargs, 'replicates', section)),
        alpha=settings['alpha'],
        level=float(_setting(kwargs, 'level', section)),
        seed=kwargs.get('seed') or 0,
        smoothing=settings['smoothing'],
        n_jobs=int(_setting(kwargs, 'n_jobs', section)),
        max_retries=int(section['max_retries']),
        strict=settings['strict'])
    effective = dict(settings, level=report.level, replicates=report.replicates, rng=config['rng'])
    write_json(dict(report.to_dict(), config=effective), kwargs.get('output') or kwargs['input'] + '.ci.json')
    if kwargs.get('replicates_csv'):
        with open(kwargs['replicates_csv'], 'w', newline='') as out_csv:
            write_replicates_csv(report, out_csv)


def bridge_check(config, **kwargs):
    """
    Check outcome (and, for the confounder family, treatment) bridge feasibility of a spec or joint

    :param config: dict containing proxybounds config
    :return: None
    """
    _require(kwargs, 'input')
    section = config['bridge']
    tolerance = float(_setting(kwargs, 'tolerance', section))
    clip = float(_setting(kwargs, 'clip', section))
    joint, family = load_population(kwargs['input'])
    variant = kwargs.get('variant') or family or 'confounder'
    results = [check_outcome_bridge(joint, variant, tolerance, clip)]
    if variant == 'confounder' and joint.codebook.by_role('Z') is not None:
        results.append(check_treatment_bridge(joint, tolerance, clip))
    output = {
        'feasible': all(result.feasible for result in results),
        'results': [result.to_dict() for result in results],
        'config': {'tolerance': tolerance, 'clip': clip, 'variant': variant},
    }
    write_json(output, kwargs.get('output') or kwargs['input'] + '.bridge.json')
    if kwargs.get('cells_csv'):
        rows = [
            dict(bridge=result.bridge, feasible=cell.feasible, residual=cell.residual,
                 normalization_gap=cell.normalization_gap, **cell.cell)
            for result in results for cell in result.cells]
        with open(kwargs['cells_csv'], 'w', newline='') as out_csv:
            dicts_to_csv(rows, out_csv)


def study(config, **kwargs):
    """
    Run a study preset or study config file and write the summary CSV and JSON

    :param config: dict containing proxybounds config
    :return: None
    """
    name = kwargs.get('input') or 'study1'
    if name in config['studies']:
        settings = dict(config['studies'][name])
    elif os.path.isfile(name):
        with open(name, 'r') as in_json:
            settings = json.load(in_json)
    else:
        raise StudyConfigError(f'{name!r} is neither a study preset ({sorted(config["studies"])}) nor a file')
    for key in ('replications', 'replicates', 'seed', 'n_jobs'):
        if kwargs.get(key) is not None:
            settings[key] = kwargs[key]
    study_config = StudyConfig.from_dict(settings)

    records = run_study(study_config)
    summary = summarize(records)
    output = kwargs.get('output') or study_config.output or f'{study_config.name}_summary.csv'
    with open(output, 'w', newline='') as out_csv:
        write_summary(summary, out_csv)
    effective = dict(study_config.to_dict(), rng=config['rng'])
    effective.pop('n_jobs')
    write_json({
        'config': effective,
        'rows': json.loads(summary.to_json(orient='records')),
    }, os.path.splitext(output)[0] + '.json')
    if kwargs.get('records_csv'):
        with open(kwargs['records_csv'], 'w', newline='') as out_csv:
            records.to_csv(out_csv, index=False, lineterminator='\n', float_format='%.10g')


if __name__ == '__main__':
    cli_entry()
