"""
End-to-end packet simulation and the Monte Carlo campaign runner.

A packet is one preamble block followed by `payload_syms` data blocks. The
channel is estimated per packet from the preamble and equalized with a
single-tap zero-forcing gain per bin. Symbol timing is known.

Seed discipline: (seed, run) determines the channel realization and the
data bits; (seed, run, packet, noise index) determines the noise. Every
scheme in a run therefore sees the same channel and the same noise process.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from .channel import AWGN, CHANNEL_KINDS, RoomGeometry, apply_channel, noise_sigma, realize_channel, table_geometry
from .exceptions import ConfigurationError, EqualizationError
from .frontend import FrontEndConfig, ShapingConfig, calibrate_gain, papr, receive, shape
from .precoder import OpCounter, build_mask, get_precoder
from .waveforms import ACO, BB, BIPOLAR, DCO, DEFAULT_QAM, SCHEMES, U_OFDM, UCP, make_scheme

logger = logging.getLogger(__name__)

SINGULAR_BIN = 1e-12
CALIBRATION_SEED = 20_240_601

DEFAULT_NOISE_DB = tuple(float(v) for v in np.arange(-20.0, -40.01, -2.5))

DEFAULT_CLIP_PROBS = {
    UCP: 2.2e-2,
    DCO: 4.4e-2,
    ACO: 0.69e-3,
    U_OFDM: 0.97e-3,
    BB: 2.2e-2,
}

# SeedSequence tags
_CHANNEL, _DATA, _NOISE = 0, 1, 2

REPORT_COLUMNS = [
    'scheme', 'channel', 'P_N_db', 'ber', 'bits', 'errors', 'evm_db',
    'clip_prob', 'papr_mean_db', 'ops_per_block',
]


@dataclass(frozen=True)
class LinkConfig:
    schemes: tuple = (UCP, DCO, ACO, U_OFDM)
    n: int = 256
    cp: int = 16
    n_middle: int = 0
    n_edge: int = 0
    bandwidth: float = 625e6
    payload_syms: int = 10
    packets_per_run: int = 5
    runs: int = 100
    qam_orders: dict = field(default_factory=lambda: dict(DEFAULT_QAM))
    channel: str = AWGN
    noise_db: tuple = DEFAULT_NOISE_DB
    seed: int = 0
    clip_probs: dict = field(default_factory=lambda: dict(DEFAULT_CLIP_PROBS))
    zc_root: int = 1
    calibration_samples: int = 100_000
    range_lo: float = 0.0
    range_hi: float = 1.0
    bias: float = 0.5
    shaping: ShapingConfig = field(default_factory=ShapingConfig)
    geometry: RoomGeometry | None = None
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, 'schemes', tuple(self.schemes))
        object.__setattr__(self, 'noise_db', tuple(float(v) for v in self.noise_db))
        unknown = [s for s in self.schemes if s not in SCHEMES]
        if not self.schemes or unknown:
            raise ConfigurationError(f"unknown scheme(s) {unknown}; expected some of {', '.join(SCHEMES)}")
        if self.channel not in CHANNEL_KINDS:
            raise ConfigurationError(f"unknown channel {self.channel!r}; expected one of {', '.join(CHANNEL_KINDS)}")
        if not 0 <= self.cp < self.n:
            raise ConfigurationError(f"CP length {self.cp} must be in [0, {self.n})")
        for name in ('payload_syms', 'packets_per_run', 'runs', 'workers'):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be at least 1")
        if not self.noise_db:
            raise ConfigurationError("the noise grid is empty")
        if self.bandwidth <= 0:
            raise ConfigurationError("bandwidth must be positive")
        self._check_parity()

    def _check_parity(self):
        rates = {s: self.bits_per_sample(s) for s in self.schemes}
        if max(rates.values()) > 1.01 * min(rates.values()):
            logger.warning(
                "QAM orders do not give equal throughput: %s",
                ', '.join(f"{s}={r:.3f} bit/sample" for s, r in rates.items()),
            )

    @property
    def mask(self):
        return build_mask(self.n, self.n_middle, self.n_edge)

    @property
    def room(self):
        return self.geometry if self.geometry is not None else table_geometry(
            self.channel, symbol_rate=self.bandwidth,
        )

    def qam_order(self, scheme):
        return self.qam_orders.get(scheme, DEFAULT_QAM[scheme])

    def clip_prob(self, scheme):
        return self.clip_probs.get(scheme, DEFAULT_CLIP_PROBS[scheme])

    def front_end(self, scheme, gain=None):
        return FrontEndConfig(
            range_lo=self.range_lo, range_hi=self.range_hi, bias=self.bias,
            gain=gain, target_clip_prob=self.clip_prob(scheme),
        )

    def bits_per_sample(self, scheme):
        mask = self.mask
        symbols = {
            UCP: mask.m_active // 2,
            DCO: mask.positive_active_bins.size,
            U_OFDM: mask.positive_active_bins.size,
            ACO: self.n // 4,
            BB: self.n // 2,
        }[scheme]
        block = 2 * (self.n + self.cp) if scheme == U_OFDM else self.n + self.cp
        return symbols * np.log2(self.qam_order(scheme)) / block

    def to_dict(self):
        """JSON-serializable echo of every field."""
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, (ShapingConfig, RoomGeometry)):
                value = asdict(value)
            elif isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        out['geometry'] = asdict(self.room)
        return out


@dataclass(frozen=True, eq=False)
class Equalizer:
    d: NDArray

    def __post_init__(self):
        if not np.all(np.isfinite(self.d)):
            raise EqualizationError("equalizer gains must be finite")

    @classmethod
    def identity(cls, n, active=None):
        d = np.zeros(n, dtype=complex)
        d[np.arange(n) if active is None else active] = 1.0
        return cls(d=d)


def estimate_channel(preamble_rx, training_freq):
    """Zero-forcing gains training / rx on trained bins, 0 elsewhere."""
    rx = np.asarray(preamble_rx, dtype=complex)
    training = np.asarray(training_freq, dtype=complex)
    if rx.shape != training.shape:
        raise ConfigurationError(f"preamble spectrum has shape {rx.shape}, training {training.shape}")

    trained = np.flatnonzero(training != 0)
    weak = trained[np.abs(rx[trained]) < SINGULAR_BIN]
    if weak.size:
        raise EqualizationError(
            f"received preamble vanishes on bin {int(weak[0])}; zero-forcing is undefined",
            count=int(weak.size), bin_index=int(weak[0]),
        )
    d = np.zeros(training.size, dtype=complex)
    d[trained] = training[trained] / rx[trained]
    return Equalizer(d=d)


@dataclass(frozen=True)
class ReceiverOpCount:
    """
    Scalar operations per UCP-OFDM block on the receive side. Each FFT
    counts (N/2) log2 N butterfly multiplications, the equalizer one
    multiplication per active bin, the decoder its real multiply-accumulates.
    """
    fft: int
    equalizer: int
    decode: int

    @property
    def total(self):
        return self.fft + self.equalizer + self.decode

    @staticmethod
    def bound(n, z_null, m_active):
        log2n = int(np.log2(n))
        return 2 * n * log2n + 2 * n * z_null + 2 * m_active

    @classmethod
    def for_blocks(cls, precoder, counter, blocks):
        n = precoder.n
        return cls(
            fft=2 * (n // 2) * int(np.log2(n)),
            equalizer=precoder.mask.m_active,
            decode=counter.macs // max(blocks, 1),
        )


# --- per-scheme transmit state ---

@dataclass(frozen=True, eq=False)
class SchemeRuntime:
    scheme: object
    front_end: FrontEndConfig
    training: NDArray
    preamble: NDArray

    @property
    def name(self):
        return self.scheme.name


def calibration_stream(scheme, shaping, n_samples, rng):
    """Shaped random payload of at least `n_samples` high-rate samples."""
    per_block = scheme.block_len * shaping.oversampling
    blocks = int(np.ceil(n_samples / per_block)) + 1
    bits = rng.integers(0, 2, size=(blocks, scheme.bits_per_block), dtype=np.uint8)
    samples = scheme.modulate(scheme.map_bits(bits))
    return shape(samples.ravel(), shaping)[:n_samples]


def prepare_schemes(cfg, cache_dir=None):
    """Schemes with calibrated front ends and preambles, in cfg.schemes order."""
    precoder = get_precoder(cfg.mask, cache_dir) if UCP in cfg.schemes else None
    runtimes = []
    for name in cfg.schemes:
        scheme = make_scheme(name, cfg.mask, cfg.cp, cfg.qam_order(name), precoder)
        rng = np.random.default_rng([CALIBRATION_SEED, SCHEMES.index(name)])
        stream = calibration_stream(scheme, cfg.shaping, cfg.calibration_samples, rng)
        fe = cfg.front_end(name)
        fe = replace(fe, gain=calibrate_gain(stream, fe, scheme.polarity))
        training, preamble = scheme.preamble(cfg.zc_root)
        runtimes.append(SchemeRuntime(scheme=scheme, front_end=fe, training=training, preamble=preamble))
    return runtimes


# --- one packet ---

@dataclass(frozen=True, eq=False)
class TxPacket:
    bits: NDArray
    symbols: NDArray
    electrical: NDArray
    training: NDArray
    n_symbols: int
    clipped: int
    drive_samples: int
    papr_db: NDArray


def _rms(x):
    return float(np.sqrt(np.mean(np.square(x))))


def transmit_packet(rt, cfg, rng):
    """bits -> QAM -> modulate -> serialize -> shape -> scale and bias."""
    scheme, fe, shaping = rt.scheme, rt.front_end, cfg.shaping
    bits = rng.integers(0, 2, size=(cfg.payload_syms, scheme.bits_per_block), dtype=np.uint8)
    symbols = scheme.map_bits(bits)
    payload = scheme.modulate(symbols)

    preamble_rms = _rms(rt.preamble)
    scale = _rms(payload) / preamble_rms if preamble_rms > 0 else 1.0
    stream = np.concatenate([scale * rt.preamble, payload.ravel()])
    shaped = shape(stream, shaping)

    offset = fe.bias if scheme.polarity == BIPOLAR else fe.range_lo
    drive = offset + fe.gain * shaped
    clipped = (drive > fe.range_hi) | (drive < fe.range_lo) if scheme.polarity == BIPOLAR else drive > fe.range_hi
    optical = np.clip(drive, fe.range_lo, fe.range_hi)

    window = scheme.block_len * shaping.oversampling
    start = (shaping.group_delay_syms + scheme.block_len) * shaping.oversampling
    return TxPacket(
        bits=bits,
        symbols=symbols,
        # ideal bias removal at the photodiode
        electrical=optical - offset,
        training=scale * rt.training,
        n_symbols=stream.size,
        clipped=int(np.count_nonzero(clipped)),
        drive_samples=int(drive.size),
        papr_db=papr(drive[:start + cfg.payload_syms * window], window, start).values,
    )


@dataclass(frozen=True, eq=False)
class PacketResult:
    bits: int
    errors: int
    error_energy: float
    symbol_energy: float
    symbols: NDArray
    estimates: NDArray

    @property
    def ber(self):
        return self.errors / self.bits if self.bits else 0.0


def receive_packet(rt, cfg, tx, rx, counter=None):
    """matched filter -> downsample -> estimate -> equalize -> demodulate -> demap."""
    scheme = rt.scheme
    low = receive(rx, cfg.shaping, tx.n_symbols)
    block = scheme.block_len
    eq = estimate_channel(scheme.received_spectrum(low[:block]), tx.training)
    payload = low[block:].reshape(cfg.payload_syms, block)
    estimates = scheme.demodulate(payload, eq, counter)
    decided = scheme.demap(estimates)
    return PacketResult(
        bits=int(tx.bits.size),
        errors=int(np.count_nonzero(decided != tx.bits)),
        error_energy=float(np.sum(np.abs(estimates - tx.symbols) ** 2)),
        symbol_energy=float(np.sum(np.abs(tx.symbols) ** 2)),
        symbols=tx.symbols,
        estimates=estimates,
    )


def run_packet(cfg, runtime, channel, rng, noise_rng=None, counter=None):
    """One packet through TX, `channel` (taps and noise sigma) and RX."""
    tx = transmit_packet(runtime, cfg, rng)
    rx = apply_channel(tx.electrical, channel, noise_rng if noise_rng is not None else rng, cfg.shaping.oversampling)
    return receive_packet(runtime, cfg, tx, rx, counter)


# --- campaign ---

@dataclass
class Tally:
    bits: int = 0
    errors: int = 0
    error_energy: float = 0.0
    symbol_energy: float = 0.0

    def add(self, result):
        self.bits += result.bits
        self.errors += result.errors
        self.error_energy += result.error_energy
        self.symbol_energy += result.symbol_energy

    def merge(self, other):
        self.bits += other.bits
        self.errors += other.errors
        self.error_energy += other.error_energy
        self.symbol_energy += other.symbol_energy


@dataclass
class RunResult:
    run: int
    tallies: dict
    clipped: dict
    drive_samples: dict
    papr_sum: dict
    papr_count: dict
    decode_macs: int = 0
    decoded_blocks: int = 0


def _channel_for_run(cfg, run):
    if cfg.channel == AWGN:
        return realize_channel(cfg.room, AWGN)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, run, _CHANNEL]))
    return realize_channel(cfg.room, cfg.channel, rng, max_taps=cfg.cp + 1).normalized()


def _simulate_run(cfg, runtimes, run):
    channel = _channel_for_run(cfg, run)
    sigmas = [noise_sigma(db) for db in cfg.noise_db]
    result = RunResult(run=run, tallies={}, clipped={}, drive_samples={}, papr_sum={}, papr_count={})
    os_ = cfg.shaping.oversampling

    for rt in runtimes:
        data_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, run, _DATA]))
        tallies = [Tally() for _ in sigmas]
        clipped = samples = 0
        papr_sum, papr_count = 0.0, 0
        counter = OpCounter() if rt.name == UCP else None
        quiet = replace(channel, noise_sigma=0.0)

        for packet in range(cfg.packets_per_run):
            tx = transmit_packet(rt, cfg, data_rng)
            clipped += tx.clipped
            samples += tx.drive_samples
            papr_sum += float(tx.papr_db.sum())
            papr_count += int(tx.papr_db.size)
            clean = apply_channel(tx.electrical, quiet, None, os_)
            for index, sigma in enumerate(sigmas):
                noise_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, run, _NOISE, packet, index]))
                rx = clean + sigma * noise_rng.standard_normal(clean.size) if sigma > 0 else clean
                tallies[index].add(receive_packet(rt, cfg, tx, rx, counter))
                if counter is not None:
                    result.decoded_blocks += cfg.payload_syms

        result.tallies[rt.name] = tallies
        result.clipped[rt.name] = clipped
        result.drive_samples[rt.name] = samples
        result.papr_sum[rt.name] = papr_sum
        result.papr_count[rt.name] = papr_count
        if counter is not None:
            result.decode_macs = counter.macs

    logger.debug("Finished run %d of %d", run + 1, cfg.runs)
    return result


@dataclass(frozen=True)
class LinkPoint:
    scheme: str
    channel: str
    noise_db: float
    ber: float
    bits: int
    errors: int
    evm_db: float
    clip_prob: float
    papr_mean_db: float
    ops_per_block: int | None = None

    def as_row(self):
        row = asdict(self)
        row['P_N_db'] = row.pop('noise_db')
        return {column: row[column] for column in REPORT_COLUMNS}


@dataclass(frozen=True, eq=False)
class LinkReport:
    config: dict
    points: tuple
    receiver_ops: ReceiverOpCount | None = None

    def to_frame(self):
        return pd.DataFrame([p.as_row() for p in self.points], columns=REPORT_COLUMNS)

    def point(self, scheme, noise_db):
        for p in self.points:
            if p.scheme == scheme and np.isclose(p.noise_db, noise_db):
                return p
        raise KeyError(f"no point for {scheme} at {noise_db} dB")

    def summary(self):
        out = {
            'schema': 'ber/v1',
            'config': self.config,
            'points': len(self.points),
            'schemes': {},
        }
        for p in self.points:
            entry = out['schemes'].setdefault(p.scheme, {
                'clip_prob': p.clip_prob,
                'papr_mean_db': p.papr_mean_db,
                'best_ber': p.ber,
            })
            entry['best_ber'] = min(entry['best_ber'], p.ber)
        if self.receiver_ops is not None:
            ops = self.receiver_ops
            out['receiver_ops'] = {**asdict(ops), 'total': ops.total}
        return out


def _evm_db(tally):
    if tally.symbol_energy <= 0:
        return float('nan')
    if tally.error_energy <= 0:
        return float('-inf')
    return float(10.0 * np.log10(tally.error_energy / tally.symbol_energy))


def _reduce(cfg, runtimes, results):
    """Fold per-run results in run order."""
    results = sorted(results, key=lambda r: r.run)
    totals = {rt.name: [Tally() for _ in cfg.noise_db] for rt in runtimes}
    clipped = dict.fromkeys(totals, 0)
    samples = dict.fromkeys(totals, 0)
    papr_sum = dict.fromkeys(totals, 0.0)
    papr_count = dict.fromkeys(totals, 0)
    decode_macs = decoded_blocks = 0

    for result in results:
        for name in totals:
            for total, part in zip(totals[name], result.tallies[name]):
                total.merge(part)
            clipped[name] += result.clipped[name]
            samples[name] += result.drive_samples[name]
            papr_sum[name] += result.papr_sum[name]
            papr_count[name] += result.papr_count[name]
        decode_macs += result.decode_macs
        decoded_blocks += result.decoded_blocks

    receiver_ops = None
    ops_per_block = None
    ucp = next((rt for rt in runtimes if rt.name == UCP), None)
    if ucp is not None and decoded_blocks:
        receiver_ops = ReceiverOpCount.for_blocks(ucp.scheme.precoder, OpCounter(macs=decode_macs), decoded_blocks)
        ops_per_block = receiver_ops.total

    points = []
    for rt in runtimes:
        name = rt.name
        for noise_db, tally in zip(cfg.noise_db, totals[name]):
            points.append(LinkPoint(
                scheme=name,
                channel=cfg.channel,
                noise_db=noise_db,
                ber=tally.errors / tally.bits if tally.bits else 0.0,
                bits=tally.bits,
                errors=tally.errors,
                evm_db=_evm_db(tally),
                clip_prob=clipped[name] / samples[name] if samples[name] else 0.0,
                papr_mean_db=papr_sum[name] / papr_count[name] if papr_count[name] else float('nan'),
                ops_per_block=ops_per_block if name == UCP else None,
            ))
    return LinkReport(config=cfg.to_dict(), points=tuple(points), receiver_ops=receiver_ops)


def run_campaign(cfg, cache_dir=None, workers=None, progress=None):
    """
    Monte Carlo BER campaign. Runs are spread over a thread pool and folded
    in run order, so the report does not depend on the worker count.
    `progress(done, total)` is called after each finished run.
    """
    workers = workers or cfg.workers
    runtimes = prepare_schemes(cfg, cache_dir)
    logger.info(
        "Starting %s campaign: %s, %d run(s), %d noise level(s), %d worker(s)",
        cfg.channel, ', '.join(cfg.schemes), cfg.runs, len(cfg.noise_db), workers,
    )

    results = []
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_simulate_run, cfg, runtimes, run) for run in range(cfg.runs)]
        for future in futures:
            results.append(future.result())
            if progress is not None:
                progress(len(results), cfg.runs)

    report = _reduce(cfg, runtimes, results)
    for name in cfg.schemes:
        best = min(p.ber for p in report.points if p.scheme == name)
        logger.info("%s on %s: lowest BER %.3g", name, cfg.channel, best)
    return report

