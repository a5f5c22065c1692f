from links.channel import WanderConfig
from links.experiments import run_wander_experiment
from links.management.base import SimulationCommand
from links.reports import write_wander_report


class Command(SimulationCommand):
    help = 'Baseline-wander resilience of UCP-OFDM and baseband PAM'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--symbols', type=int, default=200, help='OFDM symbols per scheme')
        parser.add_argument('--noise-db', type=float, default=-40.0, help='Noise power P_N in dB')
        parser.add_argument('--wander-rms', type=float, default=None, help='Wander RMS (default: signal std)')
        parser.add_argument('--wander-period', type=float, default=45.0, help='Wander period in OFDM symbols')
        parser.add_argument('--wander-phase', type=float, default=0.0, help='Wander phase in radians')

    def handle(self, *args, **options):
        cfg = self.link_config(options)
        wander = WanderConfig(
            rms=options['wander_rms'], period_syms=options['wander_period'], phase=options['wander_phase'],
        )
        result = run_wander_experiment(
            cfg, wander=wander, n_blocks=options['symbols'], noise_db=options['noise_db'],
            cache_dir=self.precoder_cache(),
        )
        for scheme, evm in result.evm_db.items():
            self.stdout.write(f"  {scheme}: EVM {evm:.1f} dB, {result.symbol_errors[scheme]} symbol error(s)")

        paths = write_wander_report(result, self.out_dir(options, 'wander'), cfg.to_dict())
        self.report_paths(paths)
        self.stdout.write(self.style.SUCCESS('Wander experiment finished'))
