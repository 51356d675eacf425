"""Time-varying uplink channel simulator for a uniform linear array.

Generates multipath Rayleigh channels with per-path Doppler rotation,
transmits pilot/data frames through them, and forms the pilot-based
least-squares channel estimates that the tracking models consume.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput

# Propagation speed used for wavelength; the round 3e8 m/s convention of
# link-budget calculations, not the exact SI value.
SPEED_OF_LIGHT = 3.0e8


@dataclass(frozen=True)
class SystemConfig:
    """Physical and statistical parameters of the simulated uplink."""

    n_antennas: int = 32
    n_paths: int = 20
    carrier_freq: float = 3.0e9
    sample_period: float = 2.0e-5
    antenna_spacing_wavelengths: float = 0.5
    user_speed: float = 50.0
    path_gain_power: float = 1.0
    normalize_channel_power: bool = True
    snr_db: float = 20.0
    seed: int = 0

    def __post_init__(self):
        if self.n_antennas < 2:
            raise InvalidInput("n_antennas must be >= 2")
        if self.n_paths < 1:
            raise InvalidInput("n_paths must be >= 1")
        if self.sample_period <= 0:
            raise InvalidInput("sample_period must be positive")
        if self.carrier_freq <= 0:
            raise InvalidInput("carrier_freq must be positive")
        if self.user_speed < 0:
            raise InvalidInput("user_speed must be non-negative")
        if self.path_gain_power <= 0:
            raise InvalidInput("path_gain_power must be positive")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq

    @property
    def max_doppler(self) -> float:
        """Largest per-path Doppler magnitude, v / wavelength (Hz)."""
        return self.user_speed / self.wavelength

    @property
    def channel_power(self) -> float:
        """Expected per-antenna channel power E|h_k|^2."""
        if self.normalize_channel_power:
            return self.path_gain_power
        return self.path_gain_power * self.n_paths

    @property
    def noise_var(self) -> float:
        """Per-antenna noise variance implied by snr_db.

        SNR is defined per receive antenna as
        (average channel power x symbol power) / noise variance,
        with unit-power symbols.
        """
        return self.channel_power / 10.0 ** (self.snr_db / 10.0)


@dataclass(frozen=True)
class PathSet:
    """One realization of the multipath geometry.

    gains: complex path gains, shape (n_paths,)
    doppler_freqs: per-path Doppler shifts in Hz, shape (n_paths,)
    aoas: per-path directions of arrival in radians, shape (n_paths,)
    """

    gains: np.ndarray
    doppler_freqs: np.ndarray
    aoas: np.ndarray

    def __post_init__(self):
        n = len(self.gains)
        if len(self.doppler_freqs) != n or len(self.aoas) != n:
            raise InvalidInput("gains, doppler_freqs and aoas must have equal length")


@dataclass(frozen=True)
class FrameLayout:
    """Pilot/data structure of one transmitted frame.

    A frame is n_blocks * groups_per_block groups laid out back to back;
    each group is one pilot followed by group_len - 1 data symbols, so
    pilots sit at indices 0, K, 2K, ... of the flattened frame.
    """

    n_blocks: int = 1
    groups_per_block: int = 50
    group_len: int = 10

    def __post_init__(self):
        if self.n_blocks < 1 or self.groups_per_block < 1:
            raise InvalidInput("n_blocks and groups_per_block must be >= 1")
        if self.group_len < 1:
            raise InvalidInput("group_len must be >= 1")

    @property
    def n_symbols(self) -> int:
        return self.n_blocks * self.groups_per_block * self.group_len


@dataclass(frozen=True)
class SymbolStream:
    """Transmitted symbols for one frame plus the pilot positions."""

    symbols: np.ndarray
    pilot_mask: np.ndarray


@dataclass(frozen=True)
class LsSeries:
    """Per-time-index LS channel estimates with pilot hold-extension.

    estimates: (n_symbols, n_antennas) complex; rows at data indices are
    bit-identical copies of the most recent pilot row.
    source_pilot_index: (n_symbols,) int, the pilot index each row came from.
    """

    estimates: np.ndarray
    source_pilot_index: np.ndarray


@dataclass(frozen=True)
class Frame:
    """One fully simulated frame."""

    paths: PathSet
    stream: SymbolStream
    channels: np.ndarray  # (n_symbols, n_antennas) complex, true h(n)
    received: np.ndarray  # (n_symbols, n_antennas) complex
    noise_var: float


def steering_vector(theta: float, n_antennas: int, spacing: float) -> np.ndarray:
    """Array response of a uniform linear array to a plane wave from theta.

    Element k is exp(-j 2 pi spacing k sin(theta)), k = 0 .. n_antennas-1,
    with spacing in wavelengths.
    """
    if n_antennas < 1:
        raise InvalidInput("n_antennas must be >= 1")
    k = np.arange(n_antennas)
    return np.exp(-2j * np.pi * spacing * np.sin(theta) * k)


def _steering_matrix(aoas, n_antennas, spacing):
    # columns are steering vectors, shape (n_antennas, n_paths)
    k = np.arange(n_antennas)[:, None]
    return np.exp(-2j * np.pi * spacing * k * np.sin(aoas)[None, :])


def draw_paths(config: SystemConfig, rng: np.random.Generator) -> PathSet:
    """Draw one multipath realization.

    Directions of arrival are uniform on [-pi, pi). Doppler shifts follow
    the classic ring model: nu_i = (v / wavelength) * cos(psi_i) with
    independent uniform headings psi_i. Gains are zero-mean circular
    complex Gaussian with variance path_gain_power (divided by n_paths
    when channel power normalization is on).
    """
    npaths = config.n_paths
    aoas = rng.uniform(-np.pi, np.pi, npaths)
    headings = rng.uniform(-np.pi, np.pi, npaths)
    doppler = config.max_doppler * np.cos(headings)
    var = config.path_gain_power
    if config.normalize_channel_power:
        var = var / npaths
    gains = (rng.standard_normal(npaths) + 1j * rng.standard_normal(npaths)) * np.sqrt(var / 2.0)
    return PathSet(gains=gains, doppler_freqs=doppler, aoas=aoas)


def sample_channel(paths: PathSet, config: SystemConfig, n: int) -> np.ndarray:
    """Channel vector at discrete time n:

    h(n) = sum_i gains_i * exp(j 2 pi n doppler_i Ts) * a(aoa_i)
    """
    phase = np.exp(2j * np.pi * n * paths.doppler_freqs * config.sample_period)
    steer = _steering_matrix(paths.aoas, config.n_antennas, config.antenna_spacing_wavelengths)
    return steer @ (paths.gains * phase)


def sample_channel_block(paths: PathSet, config: SystemConfig, n_indices: np.ndarray) -> np.ndarray:
    """Channel vectors for many time indices at once, shape (len(n), n_antennas)."""
    n_indices = np.asarray(n_indices)
    phase = np.exp(
        2j * np.pi * config.sample_period * np.outer(n_indices, paths.doppler_freqs)
    )
    steer = _steering_matrix(paths.aoas, config.n_antennas, config.antenna_spacing_wavelengths)
    return (phase * paths.gains) @ steer.T


_QPSK = np.exp(1j * (np.pi / 4.0 + np.pi / 2.0 * np.arange(4)))


def generate_frame(layout: FrameLayout, rng: np.random.Generator) -> SymbolStream:
    """Unit-power frame: pilots are 1+0j, data symbols are uniform QPSK."""
    total = layout.n_symbols
    pilot_mask = np.arange(total) % layout.group_len == 0
    symbols = np.empty(total, dtype=complex)
    symbols[pilot_mask] = 1.0 + 0.0j
    n_data = int(total - pilot_mask.sum())
    symbols[~pilot_mask] = _QPSK[rng.integers(0, 4, n_data)]
    return SymbolStream(symbols=symbols, pilot_mask=pilot_mask)


def receive(
    h: np.ndarray, x: complex, noise_var: float, rng: np.random.Generator
) -> np.ndarray:
    """Received vector y = h * x + w with circular complex Gaussian noise.

    noise_var is the per-element variance of w.
    """
    if noise_var < 0:
        raise InvalidInput("noise_var must be non-negative")
    n = len(h)
    w = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * np.sqrt(noise_var / 2.0)
    return h * x + w


def ls_estimate(y: np.ndarray, pilot: complex) -> np.ndarray:
    """Least-squares channel estimate from one pilot: y / pilot."""
    if pilot == 0:
        raise InvalidInput("pilot symbol must be non-zero")
    return y / pilot


def simulate_frame(config: SystemConfig, layout: FrameLayout, rng: np.random.Generator) -> Frame:
    """Draw paths, transmit one frame and collect the noisy received signal."""
    paths = draw_paths(config, rng)
    stream = generate_frame(layout, rng)
    total = layout.n_symbols
    channels = sample_channel_block(paths, config, np.arange(total))
    noise_var = config.noise_var
    noise = (
        rng.standard_normal((total, config.n_antennas))
        + 1j * rng.standard_normal((total, config.n_antennas))
    ) * np.sqrt(noise_var / 2.0)
    received = channels * stream.symbols[:, None] + noise
    return Frame(paths=paths, stream=stream, channels=channels, received=received, noise_var=noise_var)


def build_ls_series(received: np.ndarray, stream: SymbolStream) -> LsSeries:
    """LS estimates at pilots, held constant across the following data symbols.

    Row n at a data index is a bit-for-bit copy of the row at its source
    pilot index.
    """
    total, _ = received.shape
    if total != len(stream.symbols):
        raise InvalidInput("received and symbol stream lengths differ")
    if not stream.pilot_mask[0]:
        raise InvalidInput("frame must start with a pilot")
    estimates = np.empty_like(received)
    source = np.empty(total, dtype=int)
    last_pilot = 0
    for n in range(total):
        if stream.pilot_mask[n]:
            estimates[n] = ls_estimate(received[n], stream.symbols[n])
            last_pilot = n
        else:
            estimates[n] = estimates[last_pilot]
        source[n] = last_pilot
    return LsSeries(estimates=estimates, source_pilot_index=source)
