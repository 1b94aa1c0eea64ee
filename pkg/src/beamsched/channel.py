"""Clustered mmWave channel generation on two timescales.

Per user the channel is a sum over a few scattering clusters, each carrying
several sub-paths with Laplacian angular spread around the cluster centre:

    h_i = sqrt(N_BS * PL(d_i)) * sum_c sqrt(p_c / L) * sum_l g_{c,l} * a(az_{c,l}, el_{c,l})

Path angles are drawn from the user geometry once per long-time block and
held fixed; per-path complex gains g evolve every short-time block through a
first-order Gauss-Markov recursion whose coefficient is the Jakes
autocorrelation J0(2*pi*f_D*dt) at the user speed. Path loss follows a
log-distance law (urban-NLOS 1 m intercept by default) plus per-user
lognormal shadow fading, evaluated on the 3-D slant distance between the BS
and user antennas; shadowing redraws with the angles at long-block
boundaries.

States are values: the advance functions return new states and never mutate
their input (the RNG is copied). Callers must treat the arrays as read-only.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np
from scipy.special import j0

from .arrays import ArrayGeometry, array_response_many
from .config import SystemConfig


@dataclass
class ClusterSet:
    """Path-angle structure of one user, fixed within a long-time block."""

    azimuth: np.ndarray       # (K,) cluster centres, array frame, rad
    elevation: np.ndarray     # (K,)
    power: np.ndarray         # (K,) mean powers, sum to 1
    sub_azimuth: np.ndarray   # (K, L) absolute sub-path angles
    sub_elevation: np.ndarray  # (K, L)


@dataclass
class ChannelState:
    config: SystemConfig
    geometry: ArrayGeometry
    pos: np.ndarray            # (I, 2) ground-plane positions, m
    vel: np.ndarray            # (I, 2) velocities, m/s
    cluster_az: np.ndarray     # (I, K)
    cluster_el: np.ndarray     # (I, K)
    cluster_power: np.ndarray  # (K,)
    sub_az: np.ndarray         # (I, K, L)
    sub_el: np.ndarray         # (I, K, L)
    gains: np.ndarray          # (I, K, L) complex per-path gains
    shadow_db: np.ndarray      # (I,) lognormal shadow fading, dB
    h: np.ndarray              # (I, N_BS) complex channels
    rng: np.random.Generator

    @property
    def n_users(self) -> int:
        return self.pos.shape[0]

    def clusters(self, user: int) -> ClusterSet:
        return ClusterSet(
            azimuth=self.cluster_az[user],
            elevation=self.cluster_el[user],
            power=self.cluster_power,
            sub_azimuth=self.sub_az[user],
            sub_elevation=self.sub_el[user],
        )


def geometry_from_config(config: SystemConfig) -> ArrayGeometry:
    return ArrayGeometry(
        n_x=config.n_x,
        n_y=config.n_y,
        spacing_wavelengths=config.spacing_wavelengths,
        downtilt_deg=config.downtilt_deg,
        carrier_hz=config.carrier_hz,
    )


def _geometric_angles(config: SystemConfig, pos: np.ndarray):
    """Azimuth / boresight-relative elevation / slant distance per user."""
    ground = np.hypot(pos[:, 0], pos[:, 1])
    azimuth = np.arctan2(pos[:, 1], pos[:, 0])
    dz = config.user_height_m - config.bs_height_m
    slant = np.hypot(ground, dz)
    elevation = np.arctan2(dz, ground) + np.deg2rad(config.downtilt_deg)
    return azimuth, elevation, slant


def pathloss_amplitude(config: SystemConfig, slant_m: np.ndarray) -> np.ndarray:
    """sqrt of the linear path gain under the log-distance law."""
    pl_db = config.pathloss_intercept_db \
        + 10.0 * config.pathloss_exponent * np.log10(slant_m)
    return 10.0 ** (-pl_db / 20.0)


def _cluster_powers(config: SystemConfig) -> np.ndarray:
    decay = 10.0 ** (-config.cluster_decay_db * np.arange(config.clusters) / 10.0)
    return decay / decay.sum()


def _draw_cluster_angles(rng, config: SystemConfig, az_geo, el_geo):
    """Cluster centres and sub-path angles from the current user geometry.

    Clusters scatter uniformly around the BS-to-user direction (NLOS-style:
    even the strongest cluster need not point at the user); sub-paths add
    Laplacian offsets with the configured RMS spread.
    """
    n, k, l = az_geo.shape[0], config.clusters, config.subpaths
    az_off = rng.uniform(-1.0, 1.0, size=(n, k)) * np.deg2rad(config.cluster_scatter_deg)
    el_off = rng.uniform(-1.0, 1.0, size=(n, k)) * np.deg2rad(config.cluster_elev_scatter_deg)
    cluster_az = az_geo[:, None] + az_off
    cluster_el = el_geo[:, None] + el_off
    spread = np.deg2rad(config.angular_spread_deg) / np.sqrt(2.0)  # Laplace scale
    sub_az = cluster_az[:, :, None] + rng.laplace(0.0, spread, size=(n, k, l))
    sub_el = cluster_el[:, :, None] + rng.laplace(0.0, spread, size=(n, k, l))
    return cluster_az, cluster_el, sub_az, sub_el


def _draw_gains(rng, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def _assemble_channels(config, geometry, pos, sub_az, sub_el, cluster_power,
                       gains, shadow_db):
    _, _, slant = _geometric_angles(config, pos)
    amp = pathloss_amplitude(config, slant) * np.sqrt(geometry.n_elements) \
        * 10.0 ** (-shadow_db / 20.0)
    steer = array_response_many(geometry, sub_az, sub_el)          # (I, K, L, N)
    weight = np.sqrt(cluster_power / config.subpaths)              # (K,)
    h = np.einsum("ikl,ikln->in", gains * weight[None, :, None], steer)
    return amp[:, None] * h


def generate_episode(seed: int, config: SystemConfig) -> ChannelState:
    """Fresh deterministic episode: user drop, velocities, clusters, gains."""
    config.validate()
    geometry = geometry_from_config(config)
    rng = np.random.default_rng(seed)

    radius = config.cell_radius_m * np.sqrt(rng.uniform(size=config.users))
    theta = rng.uniform(0.0, 2.0 * np.pi, size=config.users)
    pos = np.column_stack((radius * np.cos(theta), radius * np.sin(theta)))
    heading = rng.uniform(0.0, 2.0 * np.pi, size=config.users)
    vel = config.speed_mps * np.column_stack((np.cos(heading), np.sin(heading)))

    az_geo, el_geo, _ = _geometric_angles(config, pos)
    cluster_az, cluster_el, sub_az, sub_el = _draw_cluster_angles(rng, config, az_geo, el_geo)
    cluster_power = _cluster_powers(config)
    shadow_db = rng.normal(0.0, config.shadowing_std_db, size=config.users)
    gains = _draw_gains(rng, (config.users, config.clusters, config.subpaths))
    h = _assemble_channels(config, geometry, pos, sub_az, sub_el, cluster_power,
                           gains, shadow_db)

    return ChannelState(
        config=config, geometry=geometry, pos=pos, vel=vel,
        cluster_az=cluster_az, cluster_el=cluster_el, cluster_power=cluster_power,
        sub_az=sub_az, sub_el=sub_el, gains=gains, shadow_db=shadow_db, h=h, rng=rng,
    )


def gain_correlation(config: SystemConfig, dt: float) -> float:
    """Gauss-Markov coefficient: Jakes autocorrelation at the Doppler rate."""
    doppler_hz = config.speed_mps / config.wavelength_m
    return float(j0(2.0 * np.pi * doppler_hz * dt))


def advance_short_block(
    state: ChannelState, dt: float | None = None, evolve_gains: bool | None = None
) -> ChannelState:
    """One short-time block: move users, evolve path gains, keep angles."""
    config = state.config
    if dt is None:
        dt = config.block_duration_s
    if evolve_gains is None:
        evolve_gains = config.gain_evolution
    rng = copy.deepcopy(state.rng)

    pos = state.pos + state.vel * dt
    if evolve_gains:
        rho = gain_correlation(config, dt)
        noise = _draw_gains(rng, state.gains.shape)
        gains = rho * state.gains + np.sqrt(max(0.0, 1.0 - rho * rho)) * noise
    else:
        gains = state.gains
    h = _assemble_channels(config, state.geometry, pos, state.sub_az, state.sub_el,
                           state.cluster_power, gains, state.shadow_db)
    return ChannelState(
        config=config, geometry=state.geometry, pos=pos, vel=state.vel,
        cluster_az=state.cluster_az, cluster_el=state.cluster_el,
        cluster_power=state.cluster_power, sub_az=state.sub_az, sub_el=state.sub_el,
        gains=gains, shadow_db=state.shadow_db, h=h, rng=rng,
    )


def advance_long_block(state: ChannelState) -> ChannelState:
    """Long-block boundary: re-draw path angles from the moved geometry and
    reset per-path gains."""
    config = state.config
    rng = copy.deepcopy(state.rng)
    az_geo, el_geo, _ = _geometric_angles(config, state.pos)
    cluster_az, cluster_el, sub_az, sub_el = _draw_cluster_angles(rng, config, az_geo, el_geo)
    shadow_db = rng.normal(0.0, config.shadowing_std_db, size=state.n_users)
    gains = _draw_gains(rng, state.gains.shape)
    h = _assemble_channels(config, state.geometry, state.pos, sub_az, sub_el,
                           state.cluster_power, gains, shadow_db)
    return ChannelState(
        config=config, geometry=state.geometry, pos=state.pos, vel=state.vel,
        cluster_az=cluster_az, cluster_el=cluster_el,
        cluster_power=state.cluster_power, sub_az=sub_az, sub_el=sub_el,
        gains=gains, shadow_db=shadow_db, h=h, rng=rng,
    )


def dump_channels(state: ChannelState, path) -> None:
    """Debug dump: one row per user, entries as re,im pairs."""
    flat = np.column_stack([state.h.real, state.h.imag])
    order = np.empty(2 * state.h.shape[1], dtype=int)
    order[0::2] = np.arange(state.h.shape[1])
    order[1::2] = np.arange(state.h.shape[1]) + state.h.shape[1]
    header = ",".join(f"re{i},im{i}" for i in range(state.h.shape[1]))
    np.savetxt(path, flat[:, order], delimiter=",", header=header, comments="")


def load_channel_dump(path) -> np.ndarray:
    raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return raw[:, 0::2] + 1j * raw[:, 1::2]
