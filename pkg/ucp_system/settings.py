"""
Django settings for the ucp_system project.

Database, broker and simulation defaults can be overridden from the
environment; see UCP_SIMULATION below for the link-level defaults.
"""
import os
import sys
from pathlib import Path

BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.getenv('DJANGO_SECRET_KEY', 'django-insecure-ucp-link-simulation-development-key')

DEBUG = os.getenv('DJANGO_DEBUG', '1') == '1'

ALLOWED_HOSTS = [h for h in os.getenv('DJANGO_ALLOWED_HOSTS', '').split(',') if h]


# Application definition

INSTALLED_APPS = [
    'django.contrib.admin',
    'django.contrib.auth',
    'django.contrib.contenttypes',
    'django.contrib.sessions',
    'django.contrib.messages',
    'django.contrib.staticfiles',
    'links',
]

MIDDLEWARE = [
    'django.middleware.security.SecurityMiddleware',
    'django.contrib.sessions.middleware.SessionMiddleware',
    'django.middleware.common.CommonMiddleware',
    'django.middleware.csrf.CsrfViewMiddleware',
    'django.contrib.auth.middleware.AuthenticationMiddleware',
    'django.contrib.messages.middleware.MessageMiddleware',
    'django.middleware.clickjacking.XFrameOptionsMiddleware',
]

ROOT_URLCONF = 'ucp_system.urls'

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'DIRS': [],
        'APP_DIRS': True,
        'OPTIONS': {
            'context_processors': [
                'django.template.context_processors.request',
                'django.contrib.auth.context_processors.auth',
                'django.contrib.messages.context_processors.messages',
            ],
        },
    },
]

WSGI_APPLICATION = 'ucp_system.wsgi.application'


# Database

TESTING = 'test' in sys.argv or os.getenv('UCP_TESTING') == '1'

if TESTING:
    DATABASES = {
        'default': {
            'ENGINE': 'django.db.backends.sqlite3',
            'NAME': ':memory:',
        }
    }
elif os.getenv('DATABASE_NAME'):
    DATABASES = {
        'default': {
            'ENGINE': 'django.db.backends.postgresql',
            'NAME': os.getenv('DATABASE_NAME'),
            'USER': os.getenv('DATABASE_USER'),
            'PASSWORD': os.getenv('DATABASE_PASSWORD'),
            'HOST': os.getenv('DATABASE_HOST'),
            'PORT': os.getenv('DATABASE_PORT'),
        }
    }
else:
    DATABASES = {
        'default': {
            'ENGINE': 'django.db.backends.sqlite3',
            'NAME': BASE_DIR / 'db.sqlite3',
        }
    }


LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_TZ = True

STATIC_URL = 'static/'

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Celery

CELERY_BROKER_URL = os.getenv('CELERY_BROKER_URL', 'redis://redis:6379/0')
CELERY_RESULT_BACKEND = os.getenv('CELERY_RESULT_BACKEND', 'redis://redis:6379/0')
CELERY_TASK_ALWAYS_EAGER = TESTING
CELERY_TASK_EAGER_PROPAGATES = TESTING


# Link simulation defaults. Keys other than desk_runs, full_runs,
# precoder_cache and output_dir are LinkConfig fields.

UCP_SIMULATION = {
    'n': 256,
    'cp': 16,
    'n_middle': 0,
    'n_edge': 0,
    'bandwidth': 625e6,
    'payload_syms': 10,
    'packets_per_run': 5,
    'desk_runs': 100,
    'full_runs': 1000,
    'noise_db': [-20.0, -22.5, -25.0, -27.5, -30.0, -32.5, -35.0, -37.5, -40.0],
    'qam_orders': {'ucp': 16, 'dco': 16, 'bb': 16, 'aco': 256, 'u_ofdm': 256},
    'clip_probs': {'ucp': 2.2e-2, 'dco': 4.4e-2, 'aco': 0.69e-3, 'u_ofdm': 0.97e-3, 'bb': 2.2e-2},
    'shaping': {'oversampling': 8, 'rolloff': 0.25, 'group_delay_syms': 8},
    'workers': int(os.getenv('UCP_WORKERS', '1')),
    'precoder_cache': os.getenv('UCP_PRECODER_CACHE', str(BASE_DIR / 'var' / 'precoders')),
    'output_dir': os.getenv('UCP_OUTPUT_DIR', str(BASE_DIR / 'results')),
}


# Logging

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{asctime} {levelname} {name} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'links': {
            'handlers': ['console'],
            'level': os.getenv('UCP_LOG_LEVEL', 'WARNING' if TESTING else 'INFO'),
            'propagate': False,
        },
    },
}
