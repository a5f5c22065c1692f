"""
Result writers. Every CSV starts with `# schema: <name>/v<k>` and
`# config: <json>` comment lines so a file can be traced back to the run
that produced it.
"""
import json
import logging
from pathlib import Path

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

BER_SCHEMA = 'ber/v1'
PAPR_SCHEMA = 'papr/v1'
WANDER_WAVEFORM_SCHEMA = 'wander_waveform/v1'
WANDER_CONSTELLATION_SCHEMA = 'wander_constellation/v1'
CLIP_SWEEP_SCHEMA = 'clip_sweep/v1'

SCHEMA_COLUMNS = {
    BER_SCHEMA: ['scheme', 'channel', 'P_N_db', 'ber', 'bits', 'errors', 'evm_db',
                 'clip_prob', 'papr_mean_db', 'ops_per_block'],
    PAPR_SCHEMA: ['scheme', 'qam', 'papr_db', 'ccdf'],
    WANDER_WAVEFORM_SCHEMA: ['scheme', 'sample', 'transmitted', 'received'],
    WANDER_CONSTELLATION_SCHEMA: ['scheme', 'tx_re', 'tx_im', 'rx_re', 'rx_im'],
    CLIP_SWEEP_SCHEMA: ['scheme', 'clip_prob', 'ber', 'bits', 'achieved_clip_prob'],
}


def _default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def dumps(data, **kwargs):
    return json.dumps(data, default=_default, **kwargs)


def csv_text(frame, schema, config):
    """CSV body with the schema and config header lines."""
    expected = SCHEMA_COLUMNS[schema]
    if list(frame.columns) != expected:
        raise ValueError(f"{schema} expects columns {expected}, got {list(frame.columns)}")
    header = f"# schema: {schema}\n# config: {dumps(config, sort_keys=True)}\n"
    return header + frame.to_csv(index=False, float_format='%.10g')


def write_csv(frame, path, schema, config):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(csv_text(frame, schema, config))
    logger.info("Wrote %d row(s) to %s", len(frame), path)
    return path


def read_csv(path):
    """(schema, config, frame) of a file written by write_csv."""
    with open(path) as fh:
        schema = fh.readline().removeprefix('# schema:').strip()
        config = json.loads(fh.readline().removeprefix('# config:').strip())
        frame = pd.read_csv(fh)
    return schema, config, frame


def write_json(data, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(data, indent=2, sort_keys=True) + '\n')
    return path


def gnuplot_script(csv_path, x, y, group='scheme', groups=(), logscale_y=False, title=''):
    """
    Plot script for a long-format CSV written by write_csv: one curve per
    value of `group`, columns addressed by name.
    """
    csv_path = Path(csv_path)
    lines = [
        "set datafile separator ','",
        "set datafile commentschars '#'",
        "set key autotitle columnhead",
        f"set xlabel '{x}'",
        f"set ylabel '{y}'",
        "set grid",
    ]
    if title:
        lines.append(f"set title '{title}'")
    if logscale_y:
        lines.append("set logscale y")
    if groups:
        curves = [
            f"'{csv_path.name}' using (strcol('{group}') eq '{g}' ? column('{x}') : NaN):'{y}' "
            f"with linespoints title '{g}'"
            for g in groups
        ]
    else:
        curves = [f"'{csv_path.name}' using '{x}':'{y}' with linespoints notitle"]
    lines.append("plot " + ", \\\n     ".join(curves))
    return "\n".join(lines) + "\n"


def write_gnuplot(csv_path, frame, x, y, group='scheme', logscale_y=False, title=''):
    groups = list(dict.fromkeys(frame[group])) if group in frame else []
    path = Path(csv_path).with_suffix('.gp')
    path.write_text(gnuplot_script(csv_path, x, y, group, groups, logscale_y, title))
    return path


def write_xlsx(frames, path, config=None):
    """One sheet per named frame, plus a config sheet when given."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with pd.ExcelWriter(path, engine='openpyxl') as writer:
        for name, frame in frames.items():
            frame.to_excel(writer, sheet_name=name[:31], index=False)
        if config is not None:
            flat = pd.json_normalize(json.loads(dumps(config)), sep='.')
            flat.T.rename(columns={0: 'value'}).to_excel(writer, sheet_name='config', index_label='key')
    logger.info("Wrote workbook %s", path)
    return path


def write_ber_report(report, out_dir, stem='ber', xlsx=False):
    out_dir = Path(out_dir)
    frame = report.to_frame()
    csv_path = write_csv(frame, out_dir / f"{stem}.csv", BER_SCHEMA, report.config)
    paths = {
        'csv': csv_path,
        'json': write_json(report.summary(), out_dir / f"{stem}.json"),
        'gnuplot': write_gnuplot(csv_path, frame, 'P_N_db', 'ber', logscale_y=True, title=f"BER, {report.config['channel']}"),
    }
    if xlsx:
        paths['xlsx'] = write_xlsx({'ber': frame}, out_dir / f"{stem}.xlsx", report.config)
    return paths


def write_papr_report(result, out_dir, config, xlsx=False):
    out_dir = Path(out_dir)
    csv_path = write_csv(result.frame, out_dir / 'papr_ccdf.csv', PAPR_SCHEMA, config)
    paths = {
        'csv': csv_path,
        'json': write_json({**result.summary(), 'config': config}, out_dir / 'papr.json'),
        'gnuplot': write_gnuplot(csv_path, result.frame, 'papr_db', 'ccdf', logscale_y=True, title='PAPR CCDF'),
    }
    if xlsx:
        paths['xlsx'] = write_xlsx({'papr': result.frame}, out_dir / 'papr.xlsx', config)
    return paths


def write_wander_report(result, out_dir, config):
    out_dir = Path(out_dir)
    config = {**config, 'noise_db': result.noise_db}
    waveform = write_csv(result.waveforms, out_dir / 'wander_waveform.csv', WANDER_WAVEFORM_SCHEMA, config)
    constellation = write_csv(
        result.constellation, out_dir / 'wander_constellation.csv', WANDER_CONSTELLATION_SCHEMA, config,
    )
    return {
        'waveform': waveform,
        'constellation': constellation,
        'json': write_json({**result.summary(), 'config': config}, out_dir / 'wander.json'),
        'gnuplot': write_gnuplot(waveform, result.waveforms, 'sample', 'received', title='Received waveform under wander'),
    }


def write_clip_sweep_report(result, out_dir, config):
    out_dir = Path(out_dir)
    csv_path = write_csv(result.frame, out_dir / 'clip_sweep.csv', CLIP_SWEEP_SCHEMA, config)
    return {
        'csv': csv_path,
        'json': write_json({**result.summary(), 'config': config}, out_dir / 'clip_sweep.json'),
        'gnuplot': write_gnuplot(csv_path, result.frame, 'clip_prob', 'ber', logscale_y=True, title='BER against clip probability'),
    }


def write_matrix_csv(matrix, path):
    """Dense real matrix as headerless CSV (heat-map input)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(np.asarray(matrix, dtype=float)).to_csv(path, header=False, index=False, float_format='%.12g')
    return path
