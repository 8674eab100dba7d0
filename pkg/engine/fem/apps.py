from django.apps import AppConfig


class FemConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'fem'
