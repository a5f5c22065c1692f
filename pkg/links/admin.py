from django.contrib import admin

from .models import BerPoint, Campaign


@admin.register(Campaign)
class CampaignAdmin(admin.ModelAdmin):
    list_display = ('campaign_id', 'kind', 'status', 'channel', 'runs', 'seed', 'created_at')
    list_filter = ('kind', 'status', 'channel')


@admin.register(BerPoint)
class BerPointAdmin(admin.ModelAdmin):
    list_display = ('campaign', 'scheme', 'channel', 'noise_db', 'ber', 'bits')
    list_filter = ('scheme', 'channel')
