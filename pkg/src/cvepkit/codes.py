"""Binary m-sequence handling for code-modulated VEP stimulation.

The stimulation code is a fixed 63-bit maximum-length sequence presented at
the display refresh rate. Each target class uses the same sequence under a
different circular shift, so templates and class codewords are all derived
from one canonical bit string.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# 63-bit maximum-length sequence used by every class, as presented on screen.
CANONICAL_BITS = "101011001101110110100100111000101111001010001100001000001111110"

#: Circular bit shifts assigned to the six target classes, in class order.
CLASS_SHIFTS = (0, 8, 16, 24, 32, 40)

#: Number of target classes.
N_CLASSES = len(CLASS_SHIFTS)

#: Sequence length in bits.
SEQUENCE_LENGTH = len(CANONICAL_BITS)


@dataclass(frozen=True)
class CodeSequence:
    """A binary stimulation code.

    Parameters
    ----------
    bits : np.ndarray
        One-dimensional array of 0/1 values of length 63.
    name : str
        Identifier used in error messages and file output.
    """

    bits: np.ndarray
    name: str = "code"

    def __post_init__(self) -> None:
        bits = np.asarray(self.bits, dtype=np.uint8)
        if bits.ndim != 1 or bits.size != SEQUENCE_LENGTH:
            raise ValueError(
                f"code must be a flat array of {SEQUENCE_LENGTH} bits, "
                f"got shape {np.shape(self.bits)}"
            )
        if not np.isin(bits, (0, 1)).all():
            raise ValueError("code bits must be 0 or 1")
        object.__setattr__(self, "bits", bits)

    def __len__(self) -> int:
        return self.bits.size

    def bipolar(self) -> np.ndarray:
        """Return the sequence mapped to +1/-1 levels as float64.

        Zeros map to -1 and ones map to +1, the convention used for
        correlation and autocorrelation computations.
        """
        return self.bits.astype(np.float64) * 2.0 - 1.0


def canonical_sequence() -> CodeSequence:
    """Return the canonical 63-bit m-sequence.

    Returns
    -------
    CodeSequence
        The base code; class codes are circular shifts of it.
    """
    bits = np.frombuffer(CANONICAL_BITS.encode("ascii"), dtype=np.uint8) - ord("0")
    return CodeSequence(bits, name="m63")


def circular_shift(seq: CodeSequence, k: int) -> CodeSequence:
    """Circularly shift a code by ``k`` bits.

    A positive ``k`` delays the sequence: output bit ``i`` equals input bit
    ``(i - k) mod 63``. Shifting by 0 or any multiple of 63 returns an equal
    sequence.

    Parameters
    ----------
    seq : CodeSequence
        Input code.
    k : int
        Shift in bits; any integer is accepted and reduced modulo 63.

    Returns
    -------
    CodeSequence
    """
    k = int(k) % len(seq)
    return CodeSequence(np.roll(seq.bits, k), name=f"{seq.name}+{k}")


def class_codewords() -> np.ndarray:
    """Return the 6x63 matrix of class codewords in {0, 1}.

    Row ``c`` is the canonical sequence shifted by ``CLASS_SHIFTS[c]``.
    """
    base = canonical_sequence()
    return np.stack([circular_shift(base, k).bits for k in CLASS_SHIFTS])


def circular_autocorrelation(seq: CodeSequence) -> np.ndarray:
    """Circular autocorrelation of the bipolar code at all 63 lags.

    The value at lag ``L`` is ``sum_i s[i] * s[(i + L) mod 63]`` with
    ``s`` the +/-1 mapping of the bits. For a maximum-length sequence this
    is two-valued: 63 at lag 0 and -1 at every other lag.

    Returns
    -------
    np.ndarray
        Length-63 float array of lag products.
    """
    s = seq.bipolar()
    return np.array([np.dot(s, np.roll(s, -lag)) for lag in range(len(seq))])


def expand_to_samples(seq: CodeSequence, fs: float, refresh: float) -> np.ndarray:
    """Expand a bit sequence to sample resolution at rate ``fs``.

    Bit ``k`` occupies samples ``edge[k] .. edge[k+1] - 1`` where
    ``edge[k] = round(k * fs / refresh)``. The output has
    ``floor(len(seq) * fs / refresh) + 1`` samples so the final bit keeps the
    same nominal duration as the others despite the non-integer samples-per-bit
    ratio.

    Parameters
    ----------
    seq : CodeSequence
        Code to expand.
    fs : float
        Sampling rate in Hz.
    refresh : float
        Display refresh rate in Hz (one bit per refresh interval).

    Returns
    -------
    np.ndarray
        Float64 array of 0/1 values, one per sample.
    """
    if fs <= 0 or refresh <= 0:
        raise ValueError("fs and refresh must be positive")
    n_bits = len(seq)
    n_samples = int(np.floor(n_bits * fs / refresh)) + 1
    edges = np.rint(np.arange(n_bits + 1) * fs / refresh).astype(int)
    edges[-1] = n_samples
    out = np.empty(n_samples, dtype=np.float64)
    for k in range(n_bits):
        out[edges[k]:edges[k + 1]] = seq.bits[k]
    return out


def bits_from_samples(samples: np.ndarray, fs: float, refresh: float,
                      n_bits: int = SEQUENCE_LENGTH) -> np.ndarray:
    """Recover a bit sequence from a sample-rate signal by per-bit majority vote.

    Uses the same segment edges as :func:`expand_to_samples`, so it is the
    exact inverse for noiseless expanded codes. Values are first thresholded
    at 0.5.

    Returns
    -------
    np.ndarray
        uint8 array of length ``n_bits``.
    """
    samples = np.asarray(samples, dtype=np.float64)
    edges = np.rint(np.arange(n_bits + 1) * fs / refresh).astype(int)
    edges[-1] = samples.size
    bits = np.empty(n_bits, dtype=np.uint8)
    for k in range(n_bits):
        seg = samples[edges[k]:edges[k + 1]] >= 0.5
        bits[k] = 1 if seg.sum() * 2 > seg.size else 0
    return bits
