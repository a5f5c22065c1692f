import json

import pandas as pd
from django.http import HttpResponse, JsonResponse
from django.views.decorators.csrf import csrf_exempt
from django.views.decorators.http import require_http_methods

from . import config as link_config
from .exceptions import LinkError
from .link import REPORT_COLUMNS
from .models import Campaign
from .reports import BER_SCHEMA, csv_text
from .tasks import run_ber_campaign, synthesize_precoder


# build_link_config arguments that are not link settings
RESERVED_KEYS = ('path', 'full')


def _body(request):
    if not request.body:
        return {}
    data = json.loads(request.body)
    if not isinstance(data, dict):
        raise ValueError("request body must be a JSON object")
    return data


def _points(campaign):
    return [
        {
            'scheme': p.scheme,
            'channel': p.channel,
            'P_N_db': p.noise_db,
            'ber': p.ber,
            'bits': p.bits,
            'errors': p.errors,
            'evm_db': p.evm_db,
            'clip_prob': p.clip_prob,
            'papr_mean_db': p.papr_mean_db,
        }
        for p in campaign.points.all()
    ]


@csrf_exempt
@require_http_methods(["POST"])
def create_precoder(request):
    try:
        data = _body(request)
        n = int(data.get('n', 256))
        n_middle = int(data.get('n_middle', 0))
        n_edge = int(data.get('n_edge', 0))

        result = synthesize_precoder.apply(args=(n, n_middle, n_edge)).get()
        if 'error' in result:
            return JsonResponse({"error": result['error']}, status=400)
        return JsonResponse(result, status=201)

    except (ValueError, TypeError) as e:
        return JsonResponse({"error": str(e)}, status=400)


@csrf_exempt
@require_http_methods(["POST"])
def create_campaign(request):
    try:
        data = _body(request)
        reserved = sorted(set(data) & set(RESERVED_KEYS))
        if reserved:
            return JsonResponse({"error": f"unknown configuration key(s): {', '.join(reserved)}"}, status=400)
        # validate before queueing
        cfg = link_config.build_link_config(**data)

        campaign = Campaign.objects.create(
            kind='ber',
            seed=cfg.seed,
            runs=cfg.runs,
            channel=cfg.channel,
            config=data,
        )
        run_ber_campaign.delay(campaign.campaign_id)

        return JsonResponse({
            "campaign_id": campaign.campaign_id,
            "status": campaign.status,
            "runs": cfg.runs,
            "channel": cfg.channel,
        }, status=202)

    except LinkError as e:
        return JsonResponse({"error": str(e)}, status=400)
    except (ValueError, TypeError) as e:
        return JsonResponse({"error": str(e)}, status=400)


@require_http_methods(["GET"])
def view_campaign(request, campaign_id):
    try:
        campaign = Campaign.objects.get(campaign_id=campaign_id)
    except Campaign.DoesNotExist:
        return JsonResponse({"error": "Campaign not found"}, status=404)

    return JsonResponse({
        "campaign_id": campaign.campaign_id,
        "kind": campaign.kind,
        "status": campaign.status,
        "seed": campaign.seed,
        "runs": campaign.runs,
        "channel": campaign.channel,
        "config": campaign.config,
        "error": campaign.error,
        "points": _points(campaign),
    }, status=200)


@require_http_methods(["GET"])
def campaign_report(request, campaign_id):
    try:
        campaign = Campaign.objects.get(campaign_id=campaign_id)
    except Campaign.DoesNotExist:
        return JsonResponse({"error": "Campaign not found"}, status=404)

    frame = pd.DataFrame(_points(campaign)).reindex(columns=REPORT_COLUMNS)
    response = HttpResponse(csv_text(frame, BER_SCHEMA, campaign.config), content_type='text/csv')
    response['Content-Disposition'] = f'attachment; filename="campaign_{campaign.campaign_id}.csv"'
    return response
