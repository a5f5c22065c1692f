import math

from django.db import models, transaction
from django.utils import timezone


class Campaign(models.Model):
    KIND_CHOICES = [
        ('papr', 'PAPR'),
        ('wander', 'Baseline wander'),
        ('ber', 'BER'),
        ('clip_sweep', 'Clip sweep'),
    ]
    STATUS_CHOICES = [
        ('pending', 'Pending'),
        ('running', 'Running'),
        ('done', 'Done'),
        ('failed', 'Failed'),
    ]

    campaign_id = models.AutoField(primary_key=True)
    kind = models.CharField(max_length=20, choices=KIND_CHOICES, default='ber')
    status = models.CharField(max_length=10, choices=STATUS_CHOICES, default='pending')
    seed = models.BigIntegerField(default=0)
    runs = models.IntegerField(default=100)
    channel = models.CharField(max_length=10, default='awgn')
    config = models.JSONField(default=dict)
    error = models.TextField(blank=True, default='')
    created_at = models.DateTimeField(auto_now_add=True)
    finished_at = models.DateTimeField(null=True, blank=True)

    def __str__(self):
        return f"Campaign {self.campaign_id} - {self.kind} ({self.status})"

    def mark_done(self):
        self.status = 'done'
        self.finished_at = timezone.now()
        self.save(update_fields=['status', 'finished_at'])

    def mark_failed(self, message):
        self.status = 'failed'
        self.error = message
        self.finished_at = timezone.now()
        self.save(update_fields=['status', 'error', 'finished_at'])


class BerPoint(models.Model):
    campaign = models.ForeignKey(Campaign, on_delete=models.CASCADE, related_name='points')
    scheme = models.CharField(max_length=10)
    channel = models.CharField(max_length=10)
    noise_db = models.FloatField()
    ber = models.FloatField()
    bits = models.BigIntegerField()
    errors = models.BigIntegerField()
    evm_db = models.FloatField(null=True)
    clip_prob = models.FloatField()
    papr_mean_db = models.FloatField(null=True)

    class Meta:
        ordering = ['id']

    def __str__(self):
        return f"{self.scheme} {self.channel} at {self.noise_db} dB: BER {self.ber:.3g}"


def _finite(value):
    return value if value is not None and math.isfinite(value) else None


def save_report(campaign, report):
    """Replace the campaign's points with those of a LinkReport."""
    with transaction.atomic():
        campaign.points.all().delete()
        BerPoint.objects.bulk_create([
            BerPoint(
                campaign=campaign,
                scheme=p.scheme,
                channel=p.channel,
                noise_db=p.noise_db,
                ber=p.ber,
                bits=p.bits,
                errors=p.errors,
                evm_db=_finite(p.evm_db),
                clip_prob=p.clip_prob,
                papr_mean_db=_finite(p.papr_mean_db),
            )
            for p in report.points
        ])
        campaign.config = report.config
        campaign.save(update_fields=['config'])
    return campaign.points.count()
