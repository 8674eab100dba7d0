"""
Django settings for the deep material network engine.
"""
import os
from pathlib import Path
from dotenv import load_dotenv

load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


SECRET_KEY = os.getenv('SECRET_KEY', 'django-insecure-dmn-engine-local-only')

DEBUG = os.getenv('DEBUG', 'True') == 'True'

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'rest_framework',
    'mechanics',
    'network',
    'training',
    'transfer',
    'materials',
    'online',
    'fem',
    'storage',
]

DMN_LOG_LEVEL = os.getenv('DMN_LOG_LEVEL', 'INFO')

ENGINE_APPS = ['mechanics', 'network', 'training', 'transfer', 'materials', 'online', 'fem', 'storage']

# Logging configuration
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': DMN_LOG_LEVEL,
    },
    'loggers': {
        'django': {
            'handlers': ['console'],
            'level': 'INFO',
            'propagate': False,
        },
        'config': {
            'handlers': ['console'],
            'level': DMN_LOG_LEVEL,
            'propagate': False,
        },
        **{
            app: {
                'handlers': ['console'],
                'level': os.getenv(f'DMN_LOG_LEVEL_{app.upper()}', DMN_LOG_LEVEL),
                'propagate': False,
            }
            for app in ENGINE_APPS
        },
    },
}


# Database
# Run manifests are stored in a local SQLite file.

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': os.getenv('DB_PATH', str(BASE_DIR / 'db.sqlite3')),
    }
}


USE_TZ = True

TIME_ZONE = 'UTC'

# Default primary key field type
DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# REST Framework is used only for validating structured input files.
REST_FRAMEWORK = {
    'DEFAULT_AUTHENTICATION_CLASSES': [],
    'DEFAULT_PERMISSION_CLASSES': [],
    'UNAUTHENTICATED_USER': None,
}


# Engine settings

DMN_THREADS = int(os.getenv('DMN_THREADS', '1'))
DMN_OUTPUT_DIR = os.getenv('DMN_OUTPUT_DIR', str(BASE_DIR / 'runs'))

# Offline training
DMN_TRAIN_EPOCHS = int(os.getenv('DMN_TRAIN_EPOCHS', '20000'))
DMN_TRAIN_BATCHES = int(os.getenv('DMN_TRAIN_BATCHES', '10'))
DMN_TRAIN_LAMBDA = float(os.getenv('DMN_TRAIN_LAMBDA', '0.001'))
DMN_TRAIN_LR0 = float(os.getenv('DMN_TRAIN_LR0', '0.01'))
DMN_TRAIN_BOLD_UP = float(os.getenv('DMN_TRAIN_BOLD_UP', '1.05'))
DMN_TRAIN_BOLD_DOWN = float(os.getenv('DMN_TRAIN_BOLD_DOWN', '0.5'))
DMN_TRAIN_LR_MIN = float(os.getenv('DMN_TRAIN_LR_MIN', '1e-12'))

# Online prediction
DMN_ONLINE_TOL = float(os.getenv('DMN_ONLINE_TOL', '1e-8'))
DMN_ONLINE_MAX_ITER = int(os.getenv('DMN_ONLINE_MAX_ITER', '50'))
DMN_ONLINE_RELAX_AFTER = int(os.getenv('DMN_ONLINE_RELAX_AFTER', '20'))
DMN_ONLINE_RELAX_FACTOR = float(os.getenv('DMN_ONLINE_RELAX_FACTOR', '0.5'))

# Explicit dynamics
DMN_CFL_SAFETY = float(os.getenv('DMN_CFL_SAFETY', '0.9'))
