"""
Django settings for pyrobust project.
"""

import os
import tempfile
from pathlib import Path
from dotenv import load_dotenv

load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Only management commands run; the key is never used for signing.
SECRET_KEY = os.environ.get('SECRET_KEY', 'django-insecure-dev-key-change-in-production')

DEBUG = os.environ.get('DEBUG', '1') == '1'

ALLOWED_HOSTS = []

# Application definition
INSTALLED_APPS = [
    'rest_framework',
    'robustness',
    'core',
]

# No persistence layer
DATABASES = {}

# Internationalization
LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# Conic solver settings
ROBUSTNESS_SOLVER = os.environ.get('ROBUSTNESS_SOLVER', 'CLARABEL')
ROBUSTNESS_TOL_FEAS = float(os.environ.get('ROBUSTNESS_TOL_FEAS', '1e-8'))
ROBUSTNESS_TOL_GAP = float(os.environ.get('ROBUSTNESS_TOL_GAP', '1e-7'))
ROBUSTNESS_TOL_MEMBERSHIP = float(os.environ.get('ROBUSTNESS_TOL_MEMBERSHIP', '1e-6'))
ROBUSTNESS_TOL_HERMITIAN = float(os.environ.get('ROBUSTNESS_TOL_HERMITIAN', '1e-9'))
ROBUSTNESS_TOL_PSD = float(os.environ.get('ROBUSTNESS_TOL_PSD', '1e-9'))
ROBUSTNESS_MAX_ITER = int(os.environ.get('ROBUSTNESS_MAX_ITER', '200'))
ROBUSTNESS_POSTPROCESSING_CAP = int(os.environ.get('ROBUSTNESS_POSTPROCESSING_CAP', '1000000'))

# Report output
REPORT_DIR = os.environ.get('REPORT_DIR', os.getcwd())
LOG_DIR = os.path.join(REPORT_DIR, 'logs')

# Logging configuration
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {process:d} {thread:d} {message}',
            'style': '{',
        },
        'simple': {
            'format': '{levelname} {asctime} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
        'file': {
            'class': 'logging.handlers.RotatingFileHandler',
            'filename': os.path.join(LOG_DIR, 'robustness.log') if os.path.exists(LOG_DIR) else os.path.join(tempfile.gettempdir(), 'robustness.log'),
            'maxBytes': 10485760,  # 10MB
            'backupCount': 5,
            'formatter': 'verbose',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'WARNING',
    },
    'loggers': {
        'django': {
            'handlers': ['console', 'file'],
            'level': os.environ.get('DJANGO_LOG_LEVEL', 'WARNING'),
            'propagate': False,
        },
        'robustness': {
            'handlers': ['console', 'file'],
            'level': os.environ.get('ROBUSTNESS_LOG_LEVEL', 'WARNING'),
            'propagate': False,
        },
    },
}
