"""Single-trial conditioning: detrending, band-pass filtering, surface Laplacian.

The surface Laplacian follows the spherical spline-free small-montage form:
each channel gets a reference built from inverse-distance weighted neighbors
within a great-circle radius, subtracted from the channel itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .data import CHANNEL_NAMES, FS, N_CHANNELS

#: Band-pass corner frequencies in Hz.
BAND_LOW = 0.5
BAND_HIGH = 42.66

#: Butterworth order of the band-pass prototype.
FILTER_ORDER = 4

#: Neighbor cutoff for Laplacian weights, in sphere radii of arc length.
RADIUS_LIMIT = 1.0


@dataclass(frozen=True)
class SensorLayout:
    """Electrode positions on a unit sphere.

    Parameters
    ----------
    names : tuple of str
        Channel names in storage order.
    latitude : np.ndarray
        Latitude of each sensor in radians (0 at the equatorial head ring,
        pi/2 at the vertex).
    longitude : np.ndarray
        Longitude in radians, measured from the right ear (+x) toward the
        nose (+y); the back midline sits at -pi/2.
    """

    names: tuple
    latitude: np.ndarray
    longitude: np.ndarray

    def cartesian(self) -> np.ndarray:
        """Unit vectors (n, 3) with x right, y front, z up."""
        clat = np.cos(self.latitude)
        return np.column_stack((
            clat * np.cos(self.longitude),
            clat * np.sin(self.longitude),
            np.sin(self.latitude),
        ))


def _slerp(a: np.ndarray, b: np.ndarray, t: float) -> np.ndarray:
    """Spherical interpolation between unit vectors ``a`` and ``b``."""
    omega = np.arccos(np.clip(np.dot(a, b), -1.0, 1.0))
    if omega < 1e-12:
        return a.copy()
    return (np.sin((1 - t) * omega) * a + np.sin(t * omega) * b) / np.sin(omega)


def _latlon(v: np.ndarray) -> tuple[float, float]:
    return float(np.arcsin(np.clip(v[2], -1.0, 1.0))), float(np.arctan2(v[1], v[0]))


def sensor_layout() -> SensorLayout:
    """Build the 8-channel occipito-parietal layout on a unit sphere.

    The outer head ring sits on the equator with 18-degree steps between
    ring positions. Midline parietal and lateral parietal sensors are placed
    by spherical interpolation along the standard arcs, which reproduces the
    usual 10-20 proportions without a lookup table.
    """
    def ring(deg: float) -> np.ndarray:
        lam = np.deg2rad(deg)
        return np.array([np.cos(lam), np.sin(lam), 0.0])

    oz, o1, o2 = ring(-90.0), ring(-108.0), ring(-72.0)
    po7, po8 = ring(-126.0), ring(-54.0)
    p7, p8 = ring(-144.0), ring(-36.0)
    # Pz is 20% of the sagittal arc above the inion: 36 degrees of latitude.
    pz = np.array([0.0, -np.cos(np.deg2rad(54.0)), np.sin(np.deg2rad(54.0))])
    pz /= np.linalg.norm(pz)
    p3 = _slerp(p7, pz, 0.5)
    p4 = _slerp(p8, pz, 0.5)

    order = {"O1": o1, "O2": o2, "Oz": oz, "Pz": pz,
             "P3": p3, "P4": p4, "PO7": po7, "PO8": po8}
    lat, lon = zip(*(_latlon(order[name]) for name in CHANNEL_NAMES))
    return SensorLayout(tuple(CHANNEL_NAMES), np.array(lat), np.array(lon))


def great_circle_distance(lat1: float, lon1: float, lat2: float, lon2: float,
                          radius: float = 1.0) -> float:
    """Great-circle distance between two points on a sphere.

    Uses the numerically stable arctangent form of the central angle,

        d = r * atan2(sqrt(a1 + a2), a3)

    with ``a1 = (cos(lat2) sin(dlon))^2``,
    ``a2 = (cos(lat1) sin(lat2) - sin(lat1) cos(lat2) cos(dlon))^2`` and
    ``a3 = sin(lat1) sin(lat2) + cos(lat1) cos(lat2) cos(dlon)``, which keeps
    full precision for antipodal and near-identical points alike.

    Parameters
    ----------
    lat1, lon1, lat2, lon2 : float
        Coordinates in radians.
    radius : float
        Sphere radius; defaults to 1 so distances are arc angles.

    Returns
    -------
    float
    """
    dlon = lon2 - lon1
    a1 = (np.cos(lat2) * np.sin(dlon)) ** 2
    a2 = (np.cos(lat1) * np.sin(lat2)
          - np.sin(lat1) * np.cos(lat2) * np.cos(dlon)) ** 2
    a3 = (np.sin(lat1) * np.sin(lat2)
          + np.cos(lat1) * np.cos(lat2) * np.cos(dlon))
    return radius * float(np.arctan2(np.sqrt(a1 + a2), a3))


def distance_matrix(layout: SensorLayout, radius: float = 1.0) -> np.ndarray:
    """Pairwise great-circle distances between layout sensors."""
    n = len(layout.names)
    d = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d[i, j] = d[j, i] = great_circle_distance(
                layout.latitude[i], layout.longitude[i],
                layout.latitude[j], layout.longitude[j], radius)
    return d


def laplacian_weights(layout: SensorLayout, radius_limit: float = RADIUS_LIMIT,
                      normalized: bool = True) -> np.ndarray:
    """Inverse-distance neighbor weights for the surface Laplacian.

    Entry ``(i, j)`` is ``1 / d(i, j)`` when ``0 < d(i, j) <= radius_limit``
    and zero otherwise. With ``normalized`` each row is scaled to sum to one,
    so the subtracted reference is a weighted average of the neighbors and a
    spatially uniform field maps to zero.

    Parameters
    ----------
    layout : SensorLayout
    radius_limit : float
        Neighbor cutoff as great-circle arc length on the unit sphere.
    normalized : bool
        Row-normalize the weights (default). The raw variant keeps plain
        inverse distances.

    Returns
    -------
    np.ndarray
        (n, n) float64 weight matrix with zero diagonal.
    """
    d = distance_matrix(layout)
    with np.errstate(divide="ignore"):
        w = np.where((d > 0) & (d <= radius_limit), 1.0 / np.where(d > 0, d, 1.0), 0.0)
    np.fill_diagonal(w, 0.0)
    if normalized:
        sums = w.sum(axis=1, keepdims=True)
        w = np.divide(w, sums, out=np.zeros_like(w), where=sums > 0)
    return w


def surface_laplacian(data: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Subtract the weighted neighbor average from each channel.

    Parameters
    ----------
    data : np.ndarray
        (channels, samples) array.
    weights : np.ndarray
        (channels, channels) weight matrix from :func:`laplacian_weights`.

    Returns
    -------
    np.ndarray
        Referenced data of the same shape.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.shape[0] != weights.shape[0]:
        raise ValueError("weight matrix does not match channel count")
    return data - weights @ data


def detrend(data: np.ndarray) -> np.ndarray:
    """Remove the least-squares fitted line from each channel."""
    return signal.detrend(np.asarray(data, dtype=np.float64), axis=-1, type="linear")


def design_bandpass(fs: float = FS, low: float = BAND_LOW, high: float = BAND_HIGH,
                    order: int = FILTER_ORDER) -> np.ndarray:
    """Second-order sections of the Butterworth band-pass prototype."""
    if not 0 < low < high < fs / 2:
        raise ValueError("band edges must satisfy 0 < low < high < fs/2")
    return signal.butter(order, (low, high), btype="bandpass", output="sos", fs=fs)


def bandpass_filter(data: np.ndarray, fs: float = FS, sos: np.ndarray | None = None) -> np.ndarray:
    """Zero-phase band-pass along the last axis.

    The filter runs forward and backward (squaring the magnitude response,
    cancelling phase) with reflection padding of one epoch length on each
    side to suppress edge transients.
    """
    data = np.asarray(data, dtype=np.float64)
    if sos is None:
        sos = design_bandpass(fs)
    padlen = data.shape[-1] - 1
    return signal.sosfiltfilt(sos, data, axis=-1, padtype="even", padlen=padlen)


class Preprocessor:
    """Detrend, band-pass and Laplacian-reference trials with shared state.

    Parameters
    ----------
    fs : float
        Sampling rate in Hz.
    normalized_laplacian : bool
        Row-normalize Laplacian weights; see :func:`laplacian_weights`.
    radius_limit : float
        Neighbor cutoff passed to :func:`laplacian_weights`.
    """

    def __init__(self, fs: float = FS, normalized_laplacian: bool = True,
                 radius_limit: float = RADIUS_LIMIT):
        self.fs = fs
        self.sos = design_bandpass(fs)
        self.layout = sensor_layout()
        self.weights = laplacian_weights(self.layout, radius_limit,
                                         normalized=normalized_laplacian)

    def apply(self, data: np.ndarray) -> np.ndarray:
        """Condition one (channels, samples) epoch."""
        if data.shape[0] != N_CHANNELS:
            raise ValueError(f"expected {N_CHANNELS} channels, got {data.shape[0]}")
        out = detrend(data)
        out = bandpass_filter(out, self.fs, self.sos)
        return surface_laplacian(out, self.weights)

    def apply_batch(self, stacked: np.ndarray) -> np.ndarray:
        """Condition a (n, channels, samples) stack in one vectorized pass."""
        stacked = np.asarray(stacked, dtype=np.float64)
        out = detrend(stacked)
        out = bandpass_filter(out, self.fs, self.sos)
        return out - np.einsum("ij,njs->nis", self.weights, out)
