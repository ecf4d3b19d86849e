"""Shared recording constants and containers for single-trial EEG epochs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .codes import N_CLASSES, SEQUENCE_LENGTH

#: Sampling rate of the amplifier in Hz.
FS = 512.0

#: Display refresh rate in Hz; one code bit per refresh interval.
REFRESH = 60.0

#: Recorded channels, in storage order.
CHANNEL_NAMES = ("O1", "O2", "Oz", "Pz", "P3", "P4", "PO7", "PO8")

#: Number of channels per trial.
N_CHANNELS = len(CHANNEL_NAMES)

#: Samples per epoch: floor(63 * 512 / 60) + 1.
N_SAMPLES = int(np.floor(SEQUENCE_LENGTH * FS / REFRESH)) + 1


@dataclass
class Trial:
    """One stimulation epoch.

    Parameters
    ----------
    data : np.ndarray
        Channel-by-sample float64 array, microvolts.
    label : int
        Target class in ``0 .. 5``.
    session_id : int
        Recording session the trial belongs to.
    """

    data: np.ndarray
    label: int
    session_id: int = 0

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise ValueError("trial data must be channels x samples")
        if not 0 <= int(self.label) < N_CLASSES:
            raise ValueError(f"label must be in 0..{N_CLASSES - 1}, got {self.label}")
        self.label = int(self.label)
        self.session_id = int(self.session_id)


@dataclass
class Session:
    """A list of trials recorded in one sitting."""

    trials: list[Trial] = field(default_factory=list)
    session_id: int = 0

    def __len__(self) -> int:
        return len(self.trials)

    def labels(self) -> np.ndarray:
        return np.array([t.label for t in self.trials], dtype=np.int64)

    def stacked(self) -> np.ndarray:
        """Trials stacked to a (n, channels, samples) array."""
        return np.stack([t.data for t in self.trials])
