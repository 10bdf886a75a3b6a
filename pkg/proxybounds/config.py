"""
The config module contains the default configuration for the proxybounds library.

The config consists of a single dictionary called `config` with a number of keys for different configuration data.
A user config file (see :py:func:`proxybounds.cli.get_config`) is merged over this dictionary, so it only needs the
keys it changes.

bounds
======

Defaults for the bound estimators.

alpha
    LogSumExp smoothing parameter. Larger values give smoothed bounds closer to the hard bounds.
smoothing
    add-lambda pseudo count added to every cell of the observed count table
a
    treatment level of the potential outcome, e.g. ``0`` for E[Y^(0) | A=1]
strict
    raise an error instead of clamping a covariate slice with an undefined ratio

.. code-block:: json

    {"alpha": 50.0, "smoothing": 0.0, "a": 0, "strict": false}

bootstrap
=========

replicates
    number of bootstrap resamples B
level
    nominal coverage of the interval, in [0, 1]
max_retries
    number of times a failing resample is redrawn before giving up
n_jobs
    joblib worker count. Results do not depend on it.

bridge
======

tolerance
    largest absolute violation under which a bridge system counts as solved
clip
    negative least squares entries down to ``-clip`` are set to zero

rng
===

Identifier of the random number generator recorded in every report.

studies
=======

Named study settings, each one a :py:class:`proxybounds.study.StudyConfig` dictionary.

* ``study1``: widths and bootstrap intervals of the W and Z methods for n from 3000 to 9000, a new model
  per replication
* ``study1_fixed``: as ``study1`` with one model shared by every replication
* ``study2``: width as the latent confounder and proxy cardinalities grow
* ``study3``: coverage of the W and Z methods when the proxies are coarser than the confounder
* ``containment``: population bounds of every confounder method against the oracle
* ``mediation``: population bounds on the cross world mean and the natural effects
* ``frontdoor``: population front-door bounds against the oracle

"""
config = {
    'bounds': {
        'alpha': 50.0,
        'smoothing': 0.0,
        'a': 0,
        'strict': False,
    },
    'bootstrap': {
        'replicates': 500,
        'level': 0.95,
        'max_retries': 10,
        'n_jobs': 1,
    },
    'bridge': {
        'tolerance': 1e-8,
        'clip': 1e-10,
    },
    'rng': 'numpy.PCG64/SeedSequence',
    'studies': {
        'study1': {
            'name': 'study1',
            'kind': 'sample',
            'family': 'confounder',
            'grid': [{'U': 4, 'X': 4, 'W': 4, 'Z': 4, 'A': 2, 'Y': 3}],
            'n_grid': [3000, 5000, 7000, 9000],
            'replications': 100,
            'replicates': 500,
            'alpha': 50.0,
            'methods': ['W', 'Z'],
            'estimands': ['ETT-mean'],
        },
        'study1_fixed': {
            'name': 'study1_fixed',
            'kind': 'sample',
            'family': 'confounder',
            'grid': [{'U': 4, 'X': 4, 'W': 4, 'Z': 4, 'A': 2, 'Y': 3}],
            'n_grid': [3000, 5000, 7000, 9000],
            'replications': 100,
            'replicates': 500,
            'alpha': 50.0,
            'methods': ['W', 'Z'],
            'estimands': ['ETT-mean'],
            'fixed_spec': True,
        },
        'study2': {
            'name': 'study2',
            'kind': 'sample',
            'family': 'confounder',
            'grid': [
                {'U': u, 'X': 5, 'W': w, 'Z': w, 'A': 2, 'Y': 3}
                for u in range(3, 8) for w in range(u, 8)],
            'n_grid': [10000],
            'replications': 100,
            'replicates': 0,
            'alpha': 50.0,
            'methods': ['W', 'Z'],
            'estimands': ['ETT-mean'],
        },
        'study3': {
            'name': 'study3',
            'kind': 'sample',
            'family': 'confounder',
            'grid': [{'U': 7, 'X': 5, 'W': w, 'Z': w, 'A': 2, 'Y': 3} for w in range(3, 7)],
            'n_grid': [10000],
            'replications': 500,
            'replicates': 0,
            'alpha': 50.0,
            'methods': ['W', 'Z'],
            'estimands': ['ETT-mean'],
        },
        'containment': {
            'name': 'containment',
            'kind': 'population',
            'family': 'confounder',
            'grid': [
                {'U': k, 'X': x, 'W': k, 'Z': k, 'A': 2, 'Y': 3}
                for k in (2, 3, 4) for x in (2, 3)],
            'replications': 84,
            'methods': ['W', 'Z', 'WZ'],
            'estimands': ['ETT-mean', 'PO-mean', 'ATE'],
        },
        'mediation': {
            'name': 'mediation',
            'kind': 'population',
            'family': 'mediation',
            'grid': [{'X': x, 'M': k, 'W': k, 'A': 2, 'Y': 3} for k in (2, 3, 4) for x in (2, 3)],
            'replications': 34,
            'methods': ['mediation'],
            'estimands': ['mediation-cross-world', 'NIE', 'NDE'],
        },
        'frontdoor': {
            'name': 'frontdoor',
            'kind': 'population',
            'family': 'frontdoor',
            'grid': [{'U': 2, 'X': x, 'M': k, 'W': k, 'A': 2, 'Y': 3} for k in (2, 3, 4) for x in (2, 3)],
            'replications': 34,
            'methods': ['frontdoor'],
            'estimands': ['frontdoor-PO-mean', 'ATE'],
        },
    },
}
