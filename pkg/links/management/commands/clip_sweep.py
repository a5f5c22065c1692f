from links.experiments import CLIP_GRID, run_clip_sweep
from links.management.base import SimulationCommand
from links.reports import write_clip_sweep_report


def probability_list(value):
    return tuple(float(p) for p in value.split(',') if p.strip())


class Command(SimulationCommand):
    help = 'BER against clip probability at a fixed noise level'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--grid', type=probability_list, default=CLIP_GRID, help='Comma-separated clip probabilities')
        parser.add_argument('--noise-db', type=float, default=-30.0, help='Noise power P_N in dB')

    def handle(self, *args, **options):
        cfg = self.link_config(options)
        result = run_clip_sweep(cfg, options['grid'], options['noise_db'], cache_dir=self.precoder_cache())
        for scheme, prob in result.optimum.items():
            self.stdout.write(f'  {scheme}: best clip probability {prob:.3g}')

        paths = write_clip_sweep_report(result, self.out_dir(options, 'clip_sweep'), cfg.to_dict())
        self.report_paths(paths)
        self.stdout.write(self.style.SUCCESS('Clip sweep finished'))
