from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from links import config as link_config
from links.exceptions import LinkError


def scheme_list(value):
    return tuple(s.strip() for s in value.split(',') if s.strip())


class SimulationCommand(BaseCommand):
    """
    Shared flags of the experiment commands. Library errors leave the
    command with the error's exit code (2 for configuration, 1 otherwise).
    """
    default_schemes = None

    def add_arguments(self, parser):
        parser.add_argument('--config', type=str, default=None, help='TOML experiment configuration file')
        parser.add_argument('--seed', type=int, default=None, help='Master seed')
        parser.add_argument('--runs', type=int, default=None, help='Independent runs (desk scale by default)')
        parser.add_argument('--out', type=str, default=None, help='Output directory')
        parser.add_argument('--scheme', type=scheme_list, default=None, help='Comma-separated schemes, e.g. ucp,dco')
        parser.add_argument('--channel', choices=['awgn', 'dlos', 'ndlos'], default=None, help='Channel kind')
        parser.add_argument('--full', action='store_true', help='Full-scale run count')
        parser.add_argument('--workers', type=int, default=None, help='Worker threads')
        parser.add_argument('--xlsx', action='store_true', help='Also write an .xlsx workbook')

    def overrides(self, options):
        return {
            'seed': options['seed'],
            'runs': options['runs'],
            'schemes': options['scheme'] or self.default_schemes,
            'channel': options['channel'],
            'workers': options['workers'],
        }

    def link_config(self, options, **extra):
        return link_config.build_link_config(
            options['config'], full=options['full'], **{**self.overrides(options), **extra},
        )

    def out_dir(self, options, name):
        if options['out']:
            return Path(options['out'])
        return link_config.output_dir() / name

    def execute(self, *args, **options):
        try:
            return super().execute(*args, **options)
        except LinkError as e:
            raise CommandError(str(e), returncode=e.exit_code)

    def report_paths(self, paths):
        for name, path in paths.items():
            self.stdout.write(f'  {name}: {path}')

    def precoder_cache(self):
        return link_config.precoder_cache_dir()
