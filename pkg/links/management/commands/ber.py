from links.link import run_campaign
from links.management.base import SimulationCommand
from links.models import Campaign, save_report
from links.reports import write_ber_report


class Command(SimulationCommand):
    help = 'BER against noise power for each scheme on one channel'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--store', action='store_true', help='Also save the points to the database')

    def handle(self, *args, **options):
        cfg = self.link_config(options)
        self.stdout.write(
            f"Running {cfg.runs} run(s) on {cfg.channel}: {', '.join(cfg.schemes)} "
            f"over {len(cfg.noise_db)} noise level(s)"
        )

        def progress(done, total):
            if options['verbosity'] > 1:
                self.stdout.write(f'  run {done}/{total}')

        report = run_campaign(cfg, self.precoder_cache(), progress=progress)
        for point in report.points:
            self.stdout.write(f'  {point.scheme:7s} P_N {point.noise_db:6.1f} dB  BER {point.ber:.3e}')
        if report.receiver_ops is not None:
            ops = report.receiver_ops
            self.stdout.write(f'  UCP receiver ops per block: {ops.total}')

        paths = write_ber_report(report, self.out_dir(options, f'ber_{cfg.channel}'), xlsx=options['xlsx'])
        self.report_paths(paths)

        if options['store']:
            campaign = Campaign.objects.create(
                kind='ber', status='running', seed=cfg.seed, runs=cfg.runs, channel=cfg.channel,
            )
            save_report(campaign, report)
            campaign.mark_done()
            self.stdout.write(f'  stored as campaign {campaign.campaign_id}')

        self.stdout.write(self.style.SUCCESS('BER campaign finished'))
