import os

from celery import Celery

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'ucp_system.settings')

app = Celery('ucp_system')
app.config_from_object('django.conf:settings', namespace='CELERY')
# picks up links.tasks
app.autodiscover_tasks()
