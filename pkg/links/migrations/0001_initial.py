# Generated by Django 5.2.4 on 2026-10-19 09:12

import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='Campaign',
            fields=[
                ('campaign_id', models.AutoField(primary_key=True, serialize=False)),
                ('kind', models.CharField(choices=[('papr', 'PAPR'), ('wander', 'Baseline wander'), ('ber', 'BER'), ('clip_sweep', 'Clip sweep')], default='ber', max_length=20)),
                ('status', models.CharField(choices=[('pending', 'Pending'), ('running', 'Running'), ('done', 'Done'), ('failed', 'Failed')], default='pending', max_length=10)),
                ('seed', models.BigIntegerField(default=0)),
                ('runs', models.IntegerField(default=100)),
                ('channel', models.CharField(default='awgn', max_length=10)),
                ('config', models.JSONField(default=dict)),
                ('error', models.TextField(blank=True, default='')),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('finished_at', models.DateTimeField(blank=True, null=True)),
            ],
        ),
        migrations.CreateModel(
            name='BerPoint',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('scheme', models.CharField(max_length=10)),
                ('channel', models.CharField(max_length=10)),
                ('noise_db', models.FloatField()),
                ('ber', models.FloatField()),
                ('bits', models.BigIntegerField()),
                ('errors', models.BigIntegerField()),
                ('evm_db', models.FloatField(null=True)),
                ('clip_prob', models.FloatField()),
                ('papr_mean_db', models.FloatField(null=True)),
                ('campaign', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='points', to='links.campaign')),
            ],
            options={
                'ordering': ['id'],
            },
        ),
    ]
