"""Uniform planar array geometry and steering vectors.

Conventions used throughout the package:

* The array lies in a vertical plane; element (m, n) sits at horizontal
  offset m and vertical offset n, in units of `spacing_wavelengths`.
* Angles are given in the array frame: azimuth about the vertical axis,
  elevation above the (tilted) boresight. The downtilt enters only when
  converting geometric user angles to this frame (see channel module).
* Flattened element order is horizontal-major: index p = m * n_y + n.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ArrayGeometry:
    n_x: int
    n_y: int
    spacing_wavelengths: float = 0.5
    downtilt_deg: float = 0.0
    carrier_hz: float = 28e9

    def __post_init__(self):
        if self.n_x < 1 or self.n_y < 1:
            raise ValueError("antenna counts must be >= 1")
        if self.spacing_wavelengths <= 0:
            raise ValueError("element spacing must be > 0")

    @property
    def n_elements(self) -> int:
        return self.n_x * self.n_y


def array_response(geometry: ArrayGeometry, azimuth: float, elevation: float) -> np.ndarray:
    """Unit-norm steering vector for one direction (angles in radians)."""
    return array_response_many(
        geometry, np.atleast_1d(azimuth), np.atleast_1d(elevation)
    )[0]


def array_response_many(
    geometry: ArrayGeometry, azimuth: np.ndarray, elevation: np.ndarray
) -> np.ndarray:
    """Steering vectors for broadcast-compatible angle arrays.

    Returns shape angle_shape + (n_elements,), each row unit-norm. The phase
    of element (m, n) toward direction (az, el) is
    2*pi*d*(m*cos(el)*sin(az) + n*sin(el)).
    """
    az = np.asarray(azimuth, dtype=float)
    el = np.asarray(elevation, dtype=float)
    if not (np.all(np.isfinite(az)) and np.all(np.isfinite(el))):
        raise ValueError("angles must be finite")
    m = np.arange(geometry.n_x)
    n = np.arange(geometry.n_y)
    horiz = np.cos(el)[..., None] * np.sin(az)[..., None] * m        # ... x n_x
    vert = np.sin(el)[..., None] * n                                 # ... x n_y
    phase = 2.0 * np.pi * geometry.spacing_wavelengths * (
        horiz[..., :, None] + vert[..., None, :]
    )                                                                # ... x n_x x n_y
    vec = np.exp(1j * phase) / np.sqrt(geometry.n_elements)
    return vec.reshape(az.shape + (geometry.n_elements,))
