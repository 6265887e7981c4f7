"""
Django settings for bpstudy project.

The project has no web surface: settings configure the installed apps used by
the management commands, logging and the defaults of the fitting and
simulation commands.
"""
import os
from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.environ.get("BPREG_SECRET_KEY", "bpreg-insecure-development-key")

DEBUG = os.environ.get("BPREG_DEBUG", "0") == "1"

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    "django.contrib.contenttypes",
    "django.contrib.auth",
    "rest_framework",
    "bpreg.apps.BpregConfig",
]

# Nothing is persisted, Django falls back to its dummy backend.
DATABASES = {}

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

LANGUAGE_CODE = "en-us"

TIME_ZONE = "UTC"

USE_TZ = True


# Worker threads for Monte Carlo replicates and bootstrap refits (0 = auto)
BPREG_THREADS = int(os.environ.get("BPREG_THREADS", "0"))

BPREG = {
    "SCHEMA_VERSION": 1,
    "FIT": {
        "MAX_ITER": 200,
        "TOL_SCORE": 1e-8,
        "TOL_STEP": 1e-10,
        "STEP_HALVINGS": 30,
        "BOOTSTRAP_REPS": 500,
        "SEED": 2024,
    },
    "SIMULATION": {
        "M": 2000,
        "FULL_M": 10000,
        "SEED": 2024,
        "OUTPUT_DIR": BASE_DIR / "results",
    },
}


# Logging
# https://docs.djangoproject.com/en/5.1/topics/logging/

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {
            "format": "{asctime} {levelname} {name}: {message}",
            "style": "{",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "plain",
        },
    },
    "loggers": {
        "bpreg": {
            "handlers": ["console"],
            "level": os.environ.get("BPREG_LOG_LEVEL", "INFO"),
            "propagate": False,
        },
        "django": {
            "handlers": ["console"],
            "level": "WARNING",
        },
    },
}
