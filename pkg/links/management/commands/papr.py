from links.experiments import run_papr_experiment
from links.management.base import SimulationCommand
from links.reports import write_papr_report
from links.waveforms import SCHEMES


class Command(SimulationCommand):
    help = 'PAPR CCDF of every scheme after pulse shaping'
    default_schemes = SCHEMES

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--symbols', type=int, default=10_000, help='OFDM symbols per scheme')
        parser.add_argument('--qam', type=int, default=None, help='QAM order used by every scheme')
        parser.add_argument('--probability', type=float, default=1e-3, help='CCDF level reported per scheme')

    def handle(self, *args, **options):
        extra = {}
        if options['qam']:
            extra['qam_orders'] = dict.fromkeys(SCHEMES, options['qam'])
        cfg = self.link_config(options, **extra)

        self.stdout.write(f"Measuring PAPR over {options['symbols']} symbols: {', '.join(cfg.schemes)}")
        result = run_papr_experiment(
            cfg, n_blocks=options['symbols'], probability=options['probability'],
            cache_dir=self.precoder_cache(),
        )
        for scheme, level in result.levels.items():
            self.stdout.write(f"  {scheme}: {level:.2f} dB at CCDF {result.probability:g}")

        paths = write_papr_report(result, self.out_dir(options, 'papr'), cfg.to_dict(), xlsx=options['xlsx'])
        self.report_paths(paths)
        self.stdout.write(self.style.SUCCESS('PAPR experiment finished'))
