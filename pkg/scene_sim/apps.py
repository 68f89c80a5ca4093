from django.apps import AppConfig


class SceneSimConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'scene_sim'
    verbose_name = 'Synthetic scenes'
