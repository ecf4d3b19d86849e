"""Synthetic c-VEP generator: code-locked biphasic responses in pink noise.

Each class waveform is the circular convolution of its bipolar code (expanded
to sample rate) with a biphasic evoked-response kernel. Trials add integer
circular jitter, per-channel mixing gains and 1/f channel noise. Every trial
draws from an RNG seeded by ``(seed, session_id, trial_index)`` so output is
reproducible regardless of generation order.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import codes
from .data import FS, N_CHANNELS, N_SAMPLES, REFRESH, Session, Trial

#: Default per-channel mixing gains. Deliberately non-uniform so the
#: Laplacian reference (which removes spatially uniform activity) keeps a
#: usable residual of the evoked response.
DEFAULT_GAINS = (1.0, 0.9, 1.2, 0.8, 1.1, 0.7, 1.05, 0.85)

_ORDER_TAG = 0xFFFFFFFF


@dataclass(frozen=True)
class ForwardModelConfig:
    """Parameters of the synthetic recording.

    Parameters
    ----------
    noise_sd : float
        Standard deviation of the additive 1/f noise per channel, microvolts.
    jitter_sd : float
        Standard deviation of the per-trial circular latency jitter, samples.
        Shifts are rounded to integers.
    trials_per_class : int
        Trials per class per session.
    n_sessions : int
        Number of recording sessions per subject.
    gains : tuple of float
        Per-channel mixing gains applied to the evoked waveform.
    peak_ms, trough_ms : float
        Latencies of the positive and negative kernel lobes, milliseconds.
    peak_width_ms, trough_width_ms : float
        Gaussian widths of the two lobes, milliseconds.
    peak_amp, trough_amp : float
        Relative lobe amplitudes; only their ratio matters because class
        waveforms are normalized to unit RMS.
    kernel_ms : float
        Kernel support length in milliseconds.
    seed : int
        Master seed; combined with session and trial indices per draw.
    """

    noise_sd: float = 5.0
    jitter_sd: float = 0.0
    trials_per_class: int = 114
    n_sessions: int = 5
    gains: tuple = DEFAULT_GAINS
    peak_ms: float = 75.0
    trough_ms: float = 135.0
    peak_width_ms: float = 20.0
    trough_width_ms: float = 30.0
    peak_amp: float = 1.0
    trough_amp: float = 0.8
    kernel_ms: float = 400.0
    seed: int = 0

    def __post_init__(self) -> None:
        if len(self.gains) != N_CHANNELS:
            raise ValueError(f"gains must have {N_CHANNELS} entries")
        if self.noise_sd < 0 or self.jitter_sd < 0:
            raise ValueError("noise_sd and jitter_sd must be non-negative")
        if self.trials_per_class < 1 or self.n_sessions < 1:
            raise ValueError("trials_per_class and n_sessions must be positive")


def vep_kernel(cfg: ForwardModelConfig, fs: float = FS) -> np.ndarray:
    """Biphasic evoked-response kernel sampled at ``fs``.

    A positive Gaussian lobe followed by a negative one, mimicking the
    dominant deflections of a short-latency visual response.
    """
    n = int(round(cfg.kernel_ms * fs / 1000.0))
    t = np.arange(n) * 1000.0 / fs
    pos = cfg.peak_amp * np.exp(-0.5 * ((t - cfg.peak_ms) / cfg.peak_width_ms) ** 2)
    neg = cfg.trough_amp * np.exp(-0.5 * ((t - cfg.trough_ms) / cfg.trough_width_ms) ** 2)
    return pos - neg


def class_waveforms(cfg: ForwardModelConfig, fs: float = FS,
                    refresh: float = REFRESH) -> np.ndarray:
    """Noise-free single-channel waveform per class, shape (6, n_samples).

    Circular convolution of each class's bipolar sample-expanded code with
    the evoked kernel; circularity matches the periodic stimulation. The
    stack is scaled so class 0 has unit RMS; the other classes land within a
    few percent of that (their shifted codes quantize onto the sample grid
    with slightly different 8/9-sample bit patterns), so ``noise_sd`` acts
    as an inverse amplitude signal-to-noise ratio.
    """
    kernel = vep_kernel(cfg, fs)
    base = codes.canonical_sequence()
    waves = []
    for shift in codes.CLASS_SHIFTS:
        seq = codes.circular_shift(base, shift)
        drive = codes.expand_to_samples(seq, fs, refresh) * 2.0 - 1.0
        spec_x = np.fft.rfft(drive)
        spec_k = np.fft.rfft(kernel, n=drive.size)
        waves.append(np.fft.irfft(spec_x * spec_k, n=drive.size))
    out = np.stack(waves)
    rms = float(np.sqrt(np.mean(out[0] ** 2)))
    if rms > 0:
        out /= rms
    return out


def pink_noise(rng: np.random.Generator, shape: tuple) -> np.ndarray:
    """Unit-variance 1/f noise along the last axis."""
    n = shape[-1]
    white = rng.standard_normal(shape)
    spec = np.fft.rfft(white, axis=-1)
    freqs = np.fft.rfftfreq(n)
    scale = np.ones_like(freqs)
    scale[1:] = 1.0 / np.sqrt(freqs[1:])
    scale[0] = 0.0
    x = np.fft.irfft(spec * scale, n=n, axis=-1)
    sd = x.std(axis=-1, keepdims=True)
    return x / np.where(sd > 0, sd, 1.0)


def _trial_rng(cfg: ForwardModelConfig, session_id: int, trial_index: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(entropy=(cfg.seed, session_id, trial_index)))


def simulate_trial(cfg: ForwardModelConfig, label: int, session_id: int,
                   trial_index: int, waves: np.ndarray | None = None) -> Trial:
    """Generate one trial of class ``label``.

    Parameters
    ----------
    cfg : ForwardModelConfig
    label : int
        Class in 0..5.
    session_id, trial_index : int
        Position of the trial; determines its RNG stream.
    waves : np.ndarray, optional
        Precomputed :func:`class_waveforms` output, to avoid recomputation.
    """
    if waves is None:
        waves = class_waveforms(cfg)
    rng = _trial_rng(cfg, session_id, trial_index)
    shift = 0
    if cfg.jitter_sd > 0:
        shift = int(np.rint(rng.normal(0.0, cfg.jitter_sd)))
    wave = np.roll(waves[label], shift)
    gains = np.asarray(cfg.gains, dtype=np.float64)
    data = gains[:, None] * wave[None, :]
    if cfg.noise_sd > 0:
        data = data + cfg.noise_sd * pink_noise(rng, (N_CHANNELS, N_SAMPLES))
    return Trial(data=data, label=label, session_id=session_id)


def session_labels(cfg: ForwardModelConfig, session_id: int) -> np.ndarray:
    """Deterministic shuffled label order for one session."""
    labels = np.repeat(np.arange(codes.N_CLASSES), cfg.trials_per_class)
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=(cfg.seed, session_id, _ORDER_TAG)))
    rng.shuffle(labels)
    return labels


def simulate_session(cfg: ForwardModelConfig, session_id: int,
                     waves: np.ndarray | None = None) -> Session:
    """Generate one session with ``6 * trials_per_class`` trials."""
    if waves is None:
        waves = class_waveforms(cfg)
    labels = session_labels(cfg, session_id)
    trials = [simulate_trial(cfg, int(lab), session_id, idx, waves)
              for idx, lab in enumerate(labels)]
    return Session(trials=trials, session_id=session_id)


def simulate_subject(cfg: ForwardModelConfig) -> list[Session]:
    """Generate all sessions of one synthetic subject."""
    waves = class_waveforms(cfg)
    return [simulate_session(cfg, sid, waves) for sid in range(cfg.n_sessions)]


def make_subject_configs(n_subjects: int, base: ForwardModelConfig,
                         master_seed: int = 0) -> list[ForwardModelConfig]:
    """Derive per-subject configs with varied kernels, gains and noise.

    Latencies, widths, amplitudes, gains and noise level are perturbed
    multiplicatively per subject so synthetic subjects differ in both
    response shape and signal-to-noise ratio.
    """
    out = []
    for s in range(n_subjects):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=(master_seed, 0xA11CE, s)))
        jitter = rng.uniform(0.9, 1.1, size=12)
        gains = tuple(np.asarray(base.gains) * rng.uniform(0.9, 1.1, N_CHANNELS))
        out.append(replace(
            base,
            peak_ms=base.peak_ms * jitter[0],
            trough_ms=base.trough_ms * jitter[1],
            peak_width_ms=base.peak_width_ms * jitter[2],
            trough_width_ms=base.trough_width_ms * jitter[3],
            peak_amp=base.peak_amp * jitter[4],
            trough_amp=base.trough_amp * jitter[5],
            noise_sd=base.noise_sd * float(rng.uniform(0.8, 1.2)),
            gains=gains,
            seed=int(rng.integers(0, 2**31 - 1)),
        ))
    return out
