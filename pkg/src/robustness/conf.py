"""
Tolerance and solver defaults.

Values come from the Django settings module when one is configured and fall
back to the literals below otherwise, so the numerical modules can be used
without a Django project.
"""
from django.conf import settings
from django.core.exceptions import ImproperlyConfigured

DEFAULTS = {
    'ROBUSTNESS_SOLVER': 'CLARABEL',
    'ROBUSTNESS_TOL_FEAS': 1e-8,
    'ROBUSTNESS_TOL_GAP': 1e-7,
    'ROBUSTNESS_TOL_MEMBERSHIP': 1e-6,
    'ROBUSTNESS_TOL_HERMITIAN': 1e-9,
    'ROBUSTNESS_TOL_PSD': 1e-9,
    'ROBUSTNESS_MAX_ITER': 200,
    'ROBUSTNESS_POSTPROCESSING_CAP': 10 ** 6,
}


def setting(name):
    """Look up a robustness setting"""
    try:
        return getattr(settings, name, DEFAULTS[name])
    except ImproperlyConfigured:
        return DEFAULTS[name]
