"""File to config app."""
from django.apps import AppConfig


class BpregConfig(AppConfig):
    """Class to config beta prime regression app."""
    default_auto_field = "django.db.models.BigAutoField"
    name = "bpreg"
    verbose_name = "Beta prime regression"
