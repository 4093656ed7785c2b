"""Geometry-based mmWave channel synthesis for all three link types.

Each link is a clustered multipath sum: per-path complex gain, times the link
distance raised to ``-eta`` (the decay applies to the complex amplitude, not
to power, which is stronger attenuation than the usual power-law convention),
times a uniform-rectangular-array steering vector. Mean path angles come from
the endpoint geometry; individual paths scatter uniformly inside a configured
spread window around the mean.

Every sampler takes an explicit ``numpy.random.Generator``. Draws never depend
on entity positions, only on the stream, so moving a UAV while reusing a
stream yields common random numbers across candidate placements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    ArrayGeometry,
    NetworkLayout,
    Position3D,
    angles_between,
    distance_3d,
)

# Stream labels for the per-link substreams of one realization.
_LINK_FIRST_HOP = 1
_LINK_SECOND_HOP = 2
_LINK_DIRECT = 3


@dataclass(frozen=True)
class ChannelParams:
    """Multipath, path-loss, and noise parameters shared by all links.

    ``n_clusters`` and ``n_paths_first_hop`` control the BS-to-UAV links
    (``n_clusters * n_paths_first_hop`` paths total); ``n_paths_user`` controls
    every link that terminates at a single-antenna user. Spreads are the
    half-widths of the uniform per-path angle windows.

    Gain normalization differs between the link families on purpose: user-link
    paths are CN(0, 1/Q) so each row has unit expected gain power, while
    first-hop paths are CN(0, first_hop_path_gain_var) each, unit variance per
    path by default. Set ``first_hop_path_gain_var`` to 1/(C*L) to normalize
    the first hop the same way as the user links.
    """

    n_clusters: int = 1
    n_paths_first_hop: int = 10
    n_paths_user: int = 10
    first_hop_path_gain_var: float = 1.0
    path_loss_exponent: float = 3.6
    carrier_freq_hz: float = 28.0e9
    bandwidth_hz: float = 100.0e6
    noise_psd_dbm_per_hz: float = -174.0
    spread_el_first_hop_rad: float = math.radians(10.0)
    spread_az_first_hop_rad: float = math.radians(10.0)
    spread_el_user_rad: float = math.radians(10.0)
    spread_az_user_rad: float = math.radians(10.0)
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_clusters < 1 or self.n_paths_first_hop < 1 or self.n_paths_user < 1:
            raise ValueError("path and cluster counts must be >= 1")
        if self.path_loss_exponent <= 0:
            raise ValueError("path loss exponent must be positive")
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth must be positive")


@dataclass
class ChannelSet:
    """One Monte Carlo realization of every channel in the network.

    ``h1[m]`` is the (N_r, N_b) BS-to-UAV matrix, ``h2[m]`` the (K, N_t)
    matrix from UAV m to every user (rows later restricted to the UAV's own
    group where needed), and ``hd`` the (K, N_b) direct BS-to-user matrix.
    ``path_gains`` retains the raw complex gain draws per link for
    reproducibility checks.
    """

    h1: list[np.ndarray]
    h2: list[np.ndarray]
    hd: np.ndarray
    path_gains: dict = field(default_factory=dict)


def noise_power_dbm(params: ChannelParams) -> float:
    """Thermal noise power in dBm over the configured bandwidth."""
    return params.noise_psd_dbm_per_hz + 10.0 * math.log10(params.bandwidth_hz)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def noise_power_watts(params: ChannelParams) -> float:
    return dbm_to_watts(noise_power_dbm(params))


def _steering_matrix(geom: ArrayGeometry, cos_x, cos_y) -> np.ndarray:
    """Stack of steering vectors, one column per direction-cosine pair."""
    cos_x = np.atleast_1d(np.asarray(cos_x, dtype=float))
    cos_y = np.atleast_1d(np.asarray(cos_y, dtype=float))
    nx = np.arange(geom.n_x)[:, None]
    ny = np.arange(geom.n_y)[:, None]
    px = np.exp(-2j * np.pi * geom.spacing_d * nx * cos_x[None, :])
    py = np.exp(-2j * np.pi * geom.spacing_d * ny * cos_y[None, :])
    return (px[:, None, :] * py[None, :, :]).reshape(geom.n_elements, -1)


def steering_from_cosines(geom: ArrayGeometry, cos_x: float, cos_y: float) -> np.ndarray:
    """Array response for a direction given directly by its cosine pair."""
    return _steering_matrix(geom, cos_x, cos_y)[:, 0]


def steering_vector(geom: ArrayGeometry, elevation: float, azimuth: float) -> np.ndarray:
    """Array response of a URA toward (elevation, azimuth).

    The x-axis phase progression uses sin(el)cos(az) and the y-axis one uses
    sin(el)sin(az); the result is their Kronecker product, length n_x * n_y,
    with unit-modulus entries and a leading 1.
    """
    s = math.sin(elevation)
    return steering_from_cosines(geom, s * math.cos(azimuth), s * math.sin(azimuth))


def _complex_gains(rng, shape, variance: float) -> np.ndarray:
    scale = math.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def _h1_parts(params, bs, uav, geom_tx, geom_rx, rng):
    """Per-path pieces of one BS-to-UAV channel draw.

    Draw order is fixed (receive angles, transmit angles, then gains) so that
    two calls on identically seeded streams agree element for element.
    """
    tau = distance_3d(bs, uav)
    el_t, az_t = angles_between(bs, uav)
    el_r, az_r = angles_between(uav, bs)
    n_paths = params.n_clusters * params.n_paths_first_hop
    de, da = params.spread_el_first_hop_rad, params.spread_az_first_hop_rad
    rx_el = el_r + rng.uniform(-de, de, n_paths)
    rx_az = az_r + rng.uniform(-da, da, n_paths)
    tx_el = el_t + rng.uniform(-de, de, n_paths)
    tx_az = az_t + rng.uniform(-da, da, n_paths)
    gains = _complex_gains(rng, n_paths, params.first_hop_path_gain_var)
    a_rx = _steering_matrix(geom_rx, np.sin(rx_el) * np.cos(rx_az), np.sin(rx_el) * np.sin(rx_az))
    a_tx = _steering_matrix(geom_tx, np.sin(tx_el) * np.cos(tx_az), np.sin(tx_el) * np.sin(tx_az))
    coeffs = gains * tau ** -params.path_loss_exponent
    angles = {"rx_el": rx_el, "rx_az": rx_az, "tx_el": tx_el, "tx_az": tx_az}
    return a_rx, a_tx, coeffs, gains, angles


def _assemble_paths(a_rx: np.ndarray, a_tx: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """Sum of coeff-weighted outer products a_rx[:, p] a_tx[:, p]^T."""
    return (a_rx * coeffs) @ a_tx.T


def synthesize_h1(
    params: ChannelParams,
    layout: NetworkLayout,
    uav_index: int,
    geom_tx: ArrayGeometry,
    geom_rx: ArrayGeometry,
    rng,
) -> np.ndarray:
    """One realization of the BS-to-UAV MIMO channel, shape (N_r, N_b).

    Per-path gains are complex Gaussian with the configured per-path variance;
    the amplitude decay tau**-eta uses the 3D BS-UAV distance.
    """
    a_rx, a_tx, coeffs, _, _ = _h1_parts(
        params, layout.bs, layout.uavs[uav_index], geom_tx, geom_rx, rng
    )
    return _assemble_paths(a_rx, a_tx, coeffs)


def synthesize_user_channel(
    params: ChannelParams,
    tx_pos: Position3D,
    user_pos: Position3D,
    geom_tx: ArrayGeometry,
    rng,
) -> np.ndarray:
    """One realization of a transmitter-to-single-antenna-user channel row.

    Used both for the direct BS-to-user rows and for each UAV-to-user row.
    Gains are CN(0, 1/Q) per path so the expected total gain power is one.
    """
    rows, _ = _user_rows(params, tx_pos, [user_pos], geom_tx, rng)
    return rows[0]


def _user_rows(params, tx_pos, users, geom_tx, rng):
    """All user rows from one transmitter, vectorized over users and paths."""
    n_users = len(users)
    q = params.n_paths_user
    tau = np.empty(n_users)
    el0 = np.empty(n_users)
    az0 = np.empty(n_users)
    for k, user in enumerate(users):
        tau[k] = distance_3d(tx_pos, user)
        el0[k], az0[k] = angles_between(tx_pos, user)
    de, da = params.spread_el_user_rad, params.spread_az_user_rad
    el = el0[:, None] + rng.uniform(-de, de, (n_users, q))
    az = az0[:, None] + rng.uniform(-da, da, (n_users, q))
    gains = _complex_gains(rng, (n_users, q), 1.0 / q)
    s = np.sin(el).ravel()
    a = _steering_matrix(geom_tx, s * np.cos(az.ravel()), s * np.sin(az.ravel()))
    coeffs = (gains * tau[:, None] ** -params.path_loss_exponent).ravel()
    rows = (a * coeffs).reshape(geom_tx.n_elements, n_users, q).sum(axis=2).T
    return rows, gains


def _link_stream(seed_key, link_code: int, index: int):
    entropy = [int(v) & 0xFFFFFFFF for v in seed_key] + [link_code, index]
    return np.random.default_rng(np.random.SeedSequence(entropy))


@dataclass(frozen=True)
class ArraySet:
    """The three arrays in play: BS transmit, UAV receive, UAV transmit."""

    bs: ArrayGeometry
    uav_rx: ArrayGeometry
    uav_tx: ArrayGeometry


def synthesize_channel_set(
    params: ChannelParams,
    layout: NetworkLayout,
    arrays: ArraySet,
    seed_key=None,
) -> ChannelSet:
    """Draw every channel of one network realization.

    Substreams are keyed by (seed_key, link type, endpoint index), never by
    positions, so re-synthesizing after moving a UAV reuses the same gain and
    angle-offset draws (common random numbers across candidate placements).
    """
    key = tuple(seed_key) if seed_key is not None else (params.rng_seed,)
    h1, h2, gains = [], [], {}
    for m in range(layout.m_uavs):
        rng = _link_stream(key, _LINK_FIRST_HOP, m)
        a_rx, a_tx, coeffs, z, _ = _h1_parts(
            params, layout.bs, layout.uavs[m], arrays.bs, arrays.uav_rx, rng
        )
        h1.append(_assemble_paths(a_rx, a_tx, coeffs))
        gains[("h1", m)] = z
    rng = _link_stream(key, _LINK_DIRECT, 0)
    hd, z = _user_rows(params, layout.bs, layout.users, arrays.bs, rng)
    gains[("hd",)] = z
    for m in range(layout.m_uavs):
        rng = _link_stream(key, _LINK_SECOND_HOP, m)
        rows, z = _user_rows(params, layout.uavs[m], layout.users, arrays.uav_tx, rng)
        h2.append(rows)
        gains[("h2", m)] = z
    return ChannelSet(h1=h1, h2=h2, hd=hd, path_gains=gains)
