from pathlib import Path

import numpy as np
from django.core.management.base import BaseCommand, CommandError

from links import config as link_config
from links.exceptions import ConfigurationError, LinkError
from links.precoder import build_mask, build_mask_from_set, cache_path, save_precoder, synthesize
from links.reports import write_matrix_csv
from links.tasks import precoder_summary


def read_mask_file(path, n):
    """Centered indices of the active bins, separated by whitespace or commas."""
    try:
        text = Path(path).read_text()
    except FileNotFoundError:
        raise ConfigurationError(f"mask file {path} does not exist")
    try:
        active = [int(token) for token in text.replace(',', ' ').split()]
    except ValueError as e:
        raise ConfigurationError(f"mask file {path} must list integer bin indices: {e}")
    return build_mask_from_set(n, active)


class Command(BaseCommand):
    help = 'Synthesize the UCP-OFDM precoder for a spectral mask and write its cache file'

    def add_arguments(self, parser):
        parser.add_argument('--n', type=int, default=256, help='Number of subcarriers (power of two)')
        parser.add_argument('--n-middle', type=int, default=0, help='Nulled bins on each side of DC')
        parser.add_argument('--n-edge', type=int, default=0, help='Nulled bins next to Nyquist on each side')
        parser.add_argument('--mask-file', type=str, default=None, help='File listing the active centered bin indices')
        parser.add_argument('--out', type=str, default=None, help='Directory for the cache file')
        parser.add_argument('--dump', action='store_true', help='Also write |W| and P as CSV matrices')

    def handle(self, *args, **options):
        try:
            if options['mask_file']:
                mask = read_mask_file(options['mask_file'], options['n'])
            else:
                mask = build_mask(options['n'], options['n_middle'], options['n_edge'])

            pre = synthesize(mask)
            out = Path(options['out'] or link_config.precoder_cache_dir() or '.')
            path = save_precoder(pre, cache_path(mask, out))
            summary = precoder_summary(pre, path)

            if options['dump']:
                write_matrix_csv(np.abs(pre.w), out / f"ucp_n{mask.n_total}_w_abs.csv")
                write_matrix_csv(pre.p, out / f"ucp_n{mask.n_total}_p.csv")
        except LinkError as e:
            raise CommandError(str(e), returncode=e.exit_code)

        self.stdout.write(f'Precoder for {mask}:')
        self.stdout.write(f"  M: {summary['m_active']}")
        self.stdout.write(f"  Z: {summary['z_null']}")
        self.stdout.write(f"  r: {summary['rank']}")
        self.stdout.write(f"  unitarity residual: {summary['unitarity']:.3e}")
        self.stdout.write(f"  realness residual: {summary['realness']:.3e}")
        self.stdout.write(f"  ||P - I||_F: {summary['distance_from_identity']:.6f}")
        self.stdout.write(f"  encode MACs per block: {summary['encode_macs']}")
        self.stdout.write(f"  storage (reals): {summary['storage_reals']}")
        self.stdout.write(self.style.SUCCESS(f'Wrote {path}'))
