"""
Django settings for the speakerid project.

Everything tunable is read through python-decouple, so an environment
variable or a ``.env`` file next to manage.py overrides the defaults below.
"""
from pathlib import Path
from decouple import config, Csv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = config('SECRET_KEY', default='django-insecure-speakerid-local-development-key')

DEBUG = config('DEBUG', default=True, cast=bool)

ALLOWED_HOSTS = config('ALLOWED_HOSTS', default='localhost,127.0.0.1', cast=Csv())


# Application definition

INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'django.contrib.auth',

    # Third party apps
    'rest_framework',

    # Local apps
    'scene_sim',
    'localization',
    'detection',
    'recognition',
    'fusion',
    'pipeline',
]

MIDDLEWARE = []


# Database
# Nothing is persisted in a database; the sqlite entry keeps Django's
# management machinery happy.

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'db.sqlite3',
    }
}


# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# Django REST Framework Configuration
# Serializers are only used to validate scene, cascade, model and scenario
# files, so no renderers or authentication are needed.
REST_FRAMEWORK = {
    'DEFAULT_AUTHENTICATION_CLASSES': [],
    'DEFAULT_PERMISSION_CLASSES': [],
    'UNAUTHENTICATED_USER': None,
}

# Celery Configuration
CELERY_BROKER_URL = config('CELERY_BROKER_URL', default='redis://localhost:6379/0')
CELERY_RESULT_BACKEND = config('CELERY_RESULT_BACKEND', default='redis://localhost:6379/0')
CELERY_ACCEPT_CONTENT = ['json']
CELERY_TASK_SERIALIZER = 'json'
CELERY_RESULT_SERIALIZER = 'json'
CELERY_TIMEZONE = TIME_ZONE
# Run tasks in-process unless a worker deployment switches this off.
CELERY_TASK_ALWAYS_EAGER = config('CELERY_TASK_ALWAYS_EAGER', default=True, cast=bool)
CELERY_TASK_EAGER_PROPAGATES = config('CELERY_TASK_EAGER_PROPAGATES', default=True, cast=bool)


# Acoustics
SPEED_OF_SOUND = config('SPEED_OF_SOUND', default=343.0, cast=float)
DEFAULT_SAMPLE_RATE = config('DEFAULT_SAMPLE_RATE', default=32000, cast=int)
FRAME_LENGTH = config('FRAME_LENGTH', default=4096, cast=int)
BANDWIDTH_THRESHOLD_HZ = config('BANDWIDTH_THRESHOLD_HZ', default=4000.0, cast=float)

# Microphone array (inner diameter, outer diameter, inner count, outer count)
ARRAY_INNER_DIAMETER_M = config('ARRAY_INNER_DIAMETER_M', default=0.2, cast=float)
ARRAY_OUTER_DIAMETER_M = config('ARRAY_OUTER_DIAMETER_M', default=0.4, cast=float)
ARRAY_INNER_COUNT = config('ARRAY_INNER_COUNT', default=7, cast=int)
ARRAY_OUTER_COUNT = config('ARRAY_OUTER_COUNT', default=9, cast=int)

# Steering plane
GRID_DISTANCE_M = config('GRID_DISTANCE_M', default=2.0, cast=float)
GRID_HALF_WIDTH_M = config('GRID_HALF_WIDTH_M', default=1.5, cast=float)
GRID_HALF_HEIGHT_M = config('GRID_HALF_HEIGHT_M', default=1.125, cast=float)
GRID_CELLS_U = config('GRID_CELLS_U', default=64, cast=int)
GRID_CELLS_V = config('GRID_CELLS_V', default=48, cast=int)

# Camera frame
IMAGE_WIDTH = config('IMAGE_WIDTH', default=640, cast=int)
IMAGE_HEIGHT = config('IMAGE_HEIGHT', default=480, cast=int)

# Face detection
DETECTION_SCALE_FACTOR = config('DETECTION_SCALE_FACTOR', default=1.1, cast=float)
DETECTION_STEP = config('DETECTION_STEP', default=2, cast=int)
DETECTION_MIN_NEIGHBORS = config('DETECTION_MIN_NEIGHBORS', default=3, cast=int)

# Face recognition
FACE_SIZE = config('FACE_SIZE', default=64, cast=int)
EIGEN_COMPONENTS = config('EIGEN_COMPONENTS', default=30, cast=int)
KNN_K = config('KNN_K', default=1, cast=int)

# Fusion
COLOCATE_FRACTION = config('COLOCATE_FRACTION', default=0.10, cast=float)
PROXIMITY_FRACTION = config('PROXIMITY_FRACTION', default=0.15, cast=float)
TALK_FLOOR_FACTOR = config('TALK_FLOOR_FACTOR', default=3.0, cast=float)

# Scenario runs
DEFAULT_SEED = config('DEFAULT_SEED', default=42, cast=int)
PIPELINE_WORKERS = config('PIPELINE_WORKERS', default=2, cast=int)
OUTPUT_ROOT = config('OUTPUT_ROOT', default=str(BASE_DIR / 'output'))


# Logging Configuration
LOG_LEVEL = config('LOG_LEVEL', default='INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {process:d} {thread:d} {message}',
            'style': '{',
        },
        'simple': {
            'format': '{levelname} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'level': 'DEBUG',
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'WARNING',
    },
    'loggers': {
        'django': {
            'handlers': ['console'],
            'level': 'INFO',
            'propagate': False,
        },
        **{
            app: {
                'handlers': ['console'],
                'level': LOG_LEVEL,
                'propagate': False,
            }
            for app in ('scene_sim', 'localization', 'detection', 'recognition', 'fusion', 'pipeline')
        },
    },
}
