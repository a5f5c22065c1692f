from django.contrib import admin
from django.urls import path

from links import views

urlpatterns = [
    path('admin/', admin.site.urls),
    path('precoders/', views.create_precoder, name='create_precoder'),
    path('campaigns/', views.create_campaign, name='create_campaign'),
    path('campaigns/<int:campaign_id>/', views.view_campaign, name='view_campaign'),
    path('campaigns/<int:campaign_id>/report.csv', views.campaign_report, name='campaign_report'),
]
