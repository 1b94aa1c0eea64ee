"""Grid-of-beams analog codebook and per-user best-beam selection.

Beam k is the steering vector at grid point (i_az, i_el) with azimuth-fastest
ordering, k = i_el * n_az + i_az, so consecutive indices are azimuth
neighbours. Grid points sit at the centres of equal angle cells spanning the
configured ranges. Indices are 0-based everywhere, including the CSV export.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .arrays import ArrayGeometry, array_response_many
from .config import SystemConfig
from .errors import ConfigurationError

MAX_CODEBOOK_ENTRIES = 200_000_000  # complex entries (beams x elements)


@dataclass
class Codebook:
    beams: np.ndarray        # (n_beams, N_BS), unit-norm rows
    az_deg: np.ndarray       # (n_beams,)
    el_deg: np.ndarray       # (n_beams,)
    n_az: int
    n_el: int

    def __len__(self) -> int:
        return self.beams.shape[0]


@dataclass
class BeamAssignment:
    indices: np.ndarray      # (I,) best beam index per user
    matrix: np.ndarray       # (N_BS, I), column i = assigned beam of user i
    gram: np.ndarray         # (I, I) = matrix^H matrix

    @property
    def n_users(self) -> int:
        return self.indices.shape[0]


def _cell_centres(lo: float, hi: float, n: int) -> np.ndarray:
    step = (hi - lo) / n
    return lo + step * (np.arange(n) + 0.5)


def build_grid_codebook(
    geometry: ArrayGeometry,
    n_az: int,
    n_el: int,
    az_range_deg: tuple[float, float] = (-180.0, 180.0),
    el_range_deg: tuple[float, float] = (-30.0, 30.0),
) -> Codebook:
    """Equally spaced beam grid over the given angle ranges."""
    if n_az < 1 or n_el < 1:
        raise ConfigurationError("codebook grid must be at least 1x1")
    if n_az * n_el * geometry.n_elements > MAX_CODEBOOK_ENTRIES:
        raise ConfigurationError("codebook grid exceeds the memory budget")
    az = _cell_centres(az_range_deg[0], az_range_deg[1], n_az)
    el = _cell_centres(el_range_deg[0], el_range_deg[1], n_el)
    el_grid, az_grid = np.meshgrid(el, az, indexing="ij")   # az-fastest flatten
    az_flat = az_grid.ravel()
    el_flat = el_grid.ravel()
    beams = array_response_many(geometry, np.deg2rad(az_flat), np.deg2rad(el_flat))
    return Codebook(beams=beams, az_deg=az_flat, el_deg=el_flat, n_az=n_az, n_el=n_el)


def codebook_from_config(config: SystemConfig) -> Codebook:
    from .channel import geometry_from_config

    return build_grid_codebook(
        geometry_from_config(config), config.n_az, config.n_el,
        config.az_range_deg, config.el_range_deg,
    )


_TIE_RTOL = 1e-12


def _lowest_argmax(power: np.ndarray, axis=None):
    """argmax with ties (within a few ulps, relative) going to the lowest
    index. A plain argmax is not scale-invariant here: a full +-180 degree
    azimuth scan contains mirror beams that are mathematically identical, so
    their powers differ only by rounding."""
    if axis is None:
        return int(np.argmax(power >= power.max() * (1.0 - _TIE_RTOL)))
    thresh = power.max(axis=axis, keepdims=True) * (1.0 - _TIE_RTOL)
    return np.argmax(power >= thresh, axis=axis)


def select_best_beam(h: np.ndarray, codebook: Codebook) -> int:
    """argmax_k |h^H g_k|^2, ties broken by lowest index."""
    if len(codebook) == 0:
        raise ValueError("empty codebook")
    h = np.asarray(h)
    if h.shape != (codebook.beams.shape[1],):
        raise ValueError("channel length does not match the codebook")
    power = np.abs(codebook.beams.conj() @ h) ** 2
    return _lowest_argmax(power)


def sweep_assignments(state, codebook: Codebook) -> BeamAssignment:
    """Best beam for every user (protocol step 1); the protocol driver keeps
    the result fixed for the rest of the long-time block.

    `state` is a ChannelState or a plain (I, N_BS) channel matrix.
    """
    channels = np.asarray(getattr(state, "h", state))
    power = np.abs(channels.conj() @ codebook.beams.T) ** 2       # (I, n_beams)
    indices = _lowest_argmax(power, axis=1).astype(np.int64)
    matrix = codebook.beams[indices].T.copy()
    gram = matrix.conj().T @ matrix
    return BeamAssignment(indices=indices, matrix=matrix, gram=gram)


def export_beam_grid(codebook: Codebook, path) -> None:
    """CSV of (index, azimuth_deg, elevation_deg) for plotting beam patterns."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "azimuth_deg", "elevation_deg"])
        for k in range(len(codebook)):
            writer.writerow([k, repr(float(codebook.az_deg[k])), repr(float(codebook.el_deg[k]))])
