"""
WSGI entry point of the link simulation service (used by gunicorn).
"""
import os

from django.core.wsgi import get_wsgi_application

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'ucp_system.settings')

application = get_wsgi_application()
