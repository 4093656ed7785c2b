"""Hybrid RF/baseband beamformer construction with exact power normalization.

RF stages are codebook based: each column is a conjugated array response on
the quantized direction-cosine grid, scaled so every entry has modulus
1/sqrt(N) (the phase-shifter constant-modulus constraint). Baseband stages are
built from the reduced-dimension effective channels: the UAV receive combiner
takes the left singular factor of the combined first-hop channel, the UAV
transmit precoder is regularized zero-forcing against its own users, and the
BS precoder takes right singular vectors of the stacked effective channels of
everything the BS reaches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .channel import ArraySet, ChannelSet, _steering_matrix
from .clustering import Assignment
from .geometry import AngleSupport, ArrayGeometry, NetworkLayout, los_window


class EmptyRfSupportError(ValueError):
    """No quantized pair falls inside the configured angle windows."""


class RankDeficientZfError(ValueError):
    """Plain zero-forcing requested on a channel with deficient column rank."""


class DegeneratePowerError(ValueError):
    """A transmitter was handed an all-zero power allocation."""


@dataclass
class RfStage:
    """Analog stage: (N, N_RF) matrix of constant-modulus steering columns.

    ``quantized_pairs`` records the direction-cosine grid pair behind each
    column. For receive combining the stage applies as ``matrix.T`` (one
    codebook vector per output row).
    """

    matrix: np.ndarray
    quantized_pairs: list[tuple[float, float]]

    @property
    def n_elements(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_rf(self) -> int:
        return self.matrix.shape[1]

    def applied_rows(self) -> np.ndarray:
        return self.matrix.T


@dataclass
class BbStage:
    """Digital stage, dimensions set by the role it plays in the chain."""

    matrix: np.ndarray


@dataclass
class PowerAllocation:
    """Per-user power weights at the BS and at each UAV.

    Entries start as normalized hats in [0, 1]; ``normalize_power`` rescales
    them by kappa**2 so the full transmit chains meet their power budgets
    exactly, and records the applied kappas.
    """

    p_bs: np.ndarray
    p_uav: list[np.ndarray]
    kappa_b: float = 1.0
    kappa_u: tuple = ()

    def __post_init__(self):
        self.p_bs = np.asarray(self.p_bs, dtype=float)
        self.p_uav = [np.asarray(p, dtype=float) for p in self.p_uav]
        if (self.p_bs < 0).any() or any((p < 0).any() for p in self.p_uav):
            raise ValueError("power allocation entries must be nonnegative")


@dataclass
class HybridBeamformers:
    """The full transmit/receive chain for one network configuration."""

    f_b: RfStage
    b_b: BbStage
    f_ur: list[RfStage]
    b_ur: list[BbStage]
    f_ut: list[RfStage]
    b_ut: list[BbStage]
    pa: PowerAllocation


def quantized_angle_grid(n_x: int, n_y: int) -> list[tuple[float, float]]:
    """Full direction-cosine codebook grid, row-major over the x index.

    Grid points are -1 + (2i - 1)/n per axis, so they tile (-1, 1) uniformly
    and the single-element grid degenerates to the broadside point 0.
    """
    if n_x < 1 or n_y < 1:
        raise ValueError("grid dimensions must be >= 1")
    xs = [-1.0 + (2 * u - 1) / n_x for u in range(1, n_x + 1)]
    ys = [-1.0 + (2 * k - 1) / n_y for k in range(1, n_y + 1)]
    return [(x, y) for x in xs for y in ys]


def _window_samples(window: AngleSupport, n_x: int, n_y: int) -> np.ndarray:
    """Direction-cosine samples covering one angular window.

    Sample density scales with the window size and the grid resolution so that
    every codebook cell the window sweeps through receives at least one
    sample.
    """
    n_el = int(np.clip(np.ceil(2.0 * window.spread_elevation * n_x) + 1, 5, 8 * n_x + 1))
    n_az = int(np.clip(np.ceil(2.0 * window.spread_azimuth * n_y) + 1, 5, 8 * n_y + 1))
    el = np.linspace(
        window.mean_elevation - window.spread_elevation,
        window.mean_elevation + window.spread_elevation,
        n_el,
    )
    az = np.linspace(
        window.mean_azimuth - window.spread_azimuth,
        window.mean_azimuth + window.spread_azimuth,
        n_az,
    )
    ee, aa = np.meshgrid(el, az, indexing="ij")
    s = np.sin(ee).ravel()
    return np.column_stack([s * np.cos(aa.ravel()), s * np.sin(aa.ravel())])


def _support_members(pairs: np.ndarray, supports, n_x: int, n_y: int):
    """Quantization-aware membership of grid pairs in the angular supports.

    Each sampled support direction is assigned to the nearest grid pair (in
    the cell-scaled Chebyshev metric, ties toward the lowest index); a pair is
    a member when it receives a sample that actually lies within its own cell.
    Returns the member mask and each pair's cosine-plane distance to the
    nearest window center, used for ranking.
    """
    samples = np.vstack([_window_samples(w, n_x, n_y) for w in supports])
    dx = np.abs(samples[:, 0][:, None] - pairs[None, :, 0]) * n_x
    dy = np.abs(samples[:, 1][:, None] - pairs[None, :, 1]) * n_y
    scaled = np.maximum(dx, dy)
    nearest = np.argmin(scaled, axis=1)
    covered = scaled[np.arange(len(samples)), nearest] <= 1.0 + 1e-9
    member = np.zeros(len(pairs), dtype=bool)
    member[np.unique(nearest[covered])] = True

    centers = np.array([w.center_cosines for w in supports])
    dist = np.hypot(
        pairs[:, 0][:, None] - centers[None, :, 0],
        pairs[:, 1][:, None] - centers[None, :, 1],
    ).min(axis=1)
    return member, dist


def select_rf_columns(
    geom: ArrayGeometry,
    grid: list[tuple[float, float]],
    supports,
    n_rf: int,
) -> RfStage:
    """Pick quantized pairs covering the angular supports and build the stage.

    Pairs whose codebook cell covers part of some window are kept first,
    ranked by distance to the nearest window center; when more than ``n_rf``
    qualify only the closest survive, and when fewer qualify the stage is
    padded with the nearest remaining pairs so the column count always equals
    ``n_rf`` (the stream count downstream relies on it). If no provided pair
    covers any window at all, the codebook cannot serve the support and that
    is an error rather than a silent fallback.
    """
    if not supports:
        raise ValueError("need at least one angular support window")
    if not 1 <= n_rf <= len(grid):
        raise ValueError(f"n_rf must be in [1, {len(grid)}], got {n_rf}")
    pairs = np.asarray(grid, dtype=float)
    inside, dist = _support_members(pairs, supports, geom.n_x, geom.n_y)
    if not inside.any():
        raise EmptyRfSupportError(
            "empty RF support: no quantized pair falls inside the angle windows"
        )
    order = sorted(range(len(grid)), key=lambda i: (not inside[i], dist[i], i))
    chosen = sorted(order[:n_rf])
    cols = _steering_matrix(geom, pairs[chosen, 0], pairs[chosen, 1])
    matrix = np.conj(cols) / math.sqrt(geom.n_elements)
    return RfStage(matrix=matrix, quantized_pairs=[grid[i] for i in chosen])


@dataclass
class EffectiveChannel:
    """Reduced-dimension channel seen by the baseband, with its SVD attached."""

    matrix: np.ndarray
    u: np.ndarray
    s: np.ndarray
    vh: np.ndarray


def effective_h1(f_ur: RfStage, h1: np.ndarray, f_b: RfStage) -> EffectiveChannel:
    """Combined first-hop channel after RF stages on both ends, plus its SVD."""
    matrix = f_ur.applied_rows() @ h1 @ f_b.matrix
    u, s, vh = np.linalg.svd(matrix, full_matrices=False)
    return EffectiveChannel(matrix=matrix, u=u, s=s, vh=vh)


def bb_uav_receive(eff: EffectiveChannel) -> BbStage:
    """UAV receive combiner: conjugate transpose of the left singular factor."""
    return BbStage(matrix=eff.u.conj().T)


def bb_uav_transmit_rzf(effective_h2: np.ndarray, beta: float) -> BbStage:
    """Regularized zero-forcing precoder against the UAV's own users.

    Solves (H^H H + beta * N_rf * I) B = H^H. With beta = 0 this is plain
    zero-forcing and requires full column rank; near-singular systems raise
    instead of returning garbage.
    """
    if beta < 0:
        raise ValueError("regularization must be >= 0")
    h = np.asarray(effective_h2)
    n_rf = h.shape[1]
    gram = h.conj().T @ h
    if beta == 0.0:
        s = np.linalg.svd(h, compute_uv=False)
        if len(s) < n_rf or s[-1] <= max(h.shape) * np.finfo(float).eps * s[0] or s[0] == 0:
            raise RankDeficientZfError("rank-deficient ZF: channel has no plain inverse")
    a = gram + beta * n_rf * np.eye(n_rf)
    return BbStage(matrix=np.linalg.solve(a, h.conj().T))


def effective_h2_blocks(h2_per_uav, f_ut_per_uav, assignment: Assignment):
    """Per-UAV effective channel restricted to that UAV's own user rows."""
    blocks = []
    for m, (h2, f_ut) in enumerate(zip(h2_per_uav, f_ut_per_uav)):
        rows = assignment.groups[m]
        blocks.append(h2[rows, :] @ f_ut.matrix)
    return blocks


def bb_bs(effective_stack: np.ndarray, p_t: float, k: int) -> BbStage:
    """BS baseband precoder from the stacked effective channels.

    Takes the first ``k`` right singular vectors of the stack and scales each
    column to squared norm p_t / k, so the stage alone carries the full budget
    before per-user power weighting.
    """
    stack = np.asarray(effective_stack)
    if k > stack.shape[1]:
        raise ValueError("stream count exceeds the BS RF chain count")
    _, _, vh = np.linalg.svd(stack, full_matrices=False)
    if vh.shape[0] < k:
        raise ValueError("stacked effective channel has too few rows")
    return BbStage(matrix=math.sqrt(p_t / k) * vh[:k].conj().T)


def _pair_streams_to_groups(b_b: np.ndarray, effectives, groups) -> np.ndarray:
    """Permute BS precoder columns so each relay group gets aligned streams.

    The singular-vector columns come out ordered by stack energy, which says
    nothing about which relay can actually decode which stream; pairing them
    to users in raw order systematically hands the last group the worst
    directions. Columns are instead assigned greedily by the power each one
    delivers through a group's effective first-hop channel, one column per
    user slot, ties broken deterministically.
    """
    n_cols = b_b.shape[1]
    if len(groups) == 1:
        return b_b
    scores = np.stack(
        [np.sum(np.abs(eff.matrix @ b_b) ** 2, axis=0) for eff in effectives]
    )
    need = [len(g) for g in groups]
    order = sorted(
        ((m, j) for m in range(len(groups)) for j in range(n_cols)),
        key=lambda mj: (-scores[mj[0], mj[1]], mj[0], mj[1]),
    )
    taken = np.zeros(n_cols, dtype=bool)
    assigned = [[] for _ in groups]
    for m, j in order:
        if need[m] > 0 and not taken[j]:
            assigned[m].append(j)
            taken[j] = True
            need[m] -= 1
    perm = np.empty(n_cols, dtype=int)
    for m, group in enumerate(groups):
        cols = sorted(assigned[m], key=lambda j: (-scores[m, j], j))
        for slot, j in zip(group, cols):
            perm[slot] = j
    return b_b[:, perm]


def _chain_column_powers(f: RfStage, b: BbStage) -> np.ndarray:
    cols = f.matrix @ b.matrix
    return np.sum(np.abs(cols) ** 2, axis=0)


def normalize_power(hb: HybridBeamformers, p_t: float, p_u_targets) -> HybridBeamformers:
    """Rescale power allocations so every transmit chain meets its budget.

    kappa_b**2 is chosen so || F_b B_b diag(sqrt(p_bs)) ||_F^2 equals p_t
    exactly, and likewise per UAV against its own target. Applying twice is a
    no-op because the recomputed kappas come out as one.
    """
    p_u_targets = list(np.broadcast_to(p_u_targets, (len(hb.f_ut),)))
    weights_b = _chain_column_powers(hb.f_b, hb.b_b)
    total_b = float(weights_b @ hb.pa.p_bs)
    if total_b <= 0.0:
        raise DegeneratePowerError("degenerate power allocation: BS chain radiates nothing")
    kb2 = p_t / total_b
    p_uav_new, kappas = [], []
    for m, (f_ut, b_ut) in enumerate(zip(hb.f_ut, hb.b_ut)):
        weights = _chain_column_powers(f_ut, b_ut)
        total = float(weights @ hb.pa.p_uav[m])
        if total <= 0.0:
            raise DegeneratePowerError(
                f"degenerate power allocation: UAV {m} chain radiates nothing"
            )
        ku2 = p_u_targets[m] / total
        p_uav_new.append(ku2 * hb.pa.p_uav[m])
        kappas.append(math.sqrt(ku2))
    pa = PowerAllocation(
        p_bs=kb2 * hb.pa.p_bs,
        p_uav=p_uav_new,
        kappa_b=math.sqrt(kb2),
        kappa_u=tuple(kappas),
    )
    return replace(hb, pa=pa)


@dataclass(frozen=True)
class RfWindows:
    """Half-widths of the angular coverage windows used for codebook selection.

    These are wider than the per-path scattering spreads: the RF stage must
    cover the whole angular region a link can occupy, not a single path.
    """

    first_hop_el: float = math.radians(30.0)
    first_hop_az: float = math.radians(60.0)
    user_el: float = math.radians(15.0)
    user_az: float = math.radians(75.0)


def bs_supports(layout: NetworkLayout, windows: RfWindows) -> list[AngleSupport]:
    """Departure windows from the BS toward every UAV and every user."""
    sup = [
        los_window(layout.bs, uav, windows.first_hop_el, windows.first_hop_az)
        for uav in layout.uavs
    ]
    sup += [
        los_window(layout.bs, user, windows.user_el, windows.user_az)
        for user in layout.users
    ]
    return sup


def uav_rx_support(layout: NetworkLayout, m: int, windows: RfWindows) -> list[AngleSupport]:
    """Arrival window at UAV m, centered on the BS direction."""
    return [los_window(layout.uavs[m], layout.bs, windows.first_hop_el, windows.first_hop_az)]


def uav_tx_supports(
    layout: NetworkLayout, m: int, group, windows: RfWindows
) -> list[AngleSupport]:
    """Departure windows from UAV m toward each of its own users."""
    return [
        los_window(layout.uavs[m], layout.users[k], windows.user_el, windows.user_az)
        for k in group
    ]


def build_beamformers(
    arrays: ArraySet,
    layout: NetworkLayout,
    assignment: Assignment,
    channels: ChannelSet,
    pa_bs_hat,
    pa_uav_hat,
    p_t: float,
    p_u_targets,
    sigma2_second_hop: float,
    n_rf_bs: int | None = None,
    n_rf_uav: int | None = None,
    windows: RfWindows = RfWindows(),
) -> HybridBeamformers:
    """Construct every RF and BB stage for one network configuration.

    RF chain counts default to the minimum that sustains one stream per user
    (K at the BS, K/M at each UAV). The BS precoder is designed from the stack
    of the direct-link effective channel over all effective first-hop blocks,
    so it serves relays and users with one set of columns regardless of
    whether receivers end up combining the direct signal. Power allocations
    are attached as raw hats here; call ``normalize_power`` afterwards.
    """
    k = layout.n_users
    group_size = layout.group_size
    n_rf_bs = n_rf_bs or k
    n_rf_uav = n_rf_uav or group_size
    p_u_targets = list(np.broadcast_to(p_u_targets, (layout.m_uavs,)))

    grid_bs = quantized_angle_grid(arrays.bs.n_x, arrays.bs.n_y)
    grid_rx = quantized_angle_grid(arrays.uav_rx.n_x, arrays.uav_rx.n_y)
    grid_tx = quantized_angle_grid(arrays.uav_tx.n_x, arrays.uav_tx.n_y)

    f_b = select_rf_columns(arrays.bs, grid_bs, bs_supports(layout, windows), n_rf_bs)

    f_ur, b_ur, f_ut, b_ut, effectives = [], [], [], [], []
    for m in range(layout.m_uavs):
        stage_rx = select_rf_columns(
            arrays.uav_rx, grid_rx, uav_rx_support(layout, m, windows), n_rf_uav
        )
        f_ur.append(stage_rx)
        eff1 = effective_h1(stage_rx, channels.h1[m], f_b)
        effectives.append(eff1)
        b_ur.append(bb_uav_receive(eff1))

        stage_tx = select_rf_columns(
            arrays.uav_tx,
            grid_tx,
            uav_tx_supports(layout, m, assignment.groups[m], windows),
            n_rf_uav,
        )
        f_ut.append(stage_tx)

    eff2 = effective_h2_blocks(channels.h2, f_ut, assignment)
    for m in range(layout.m_uavs):
        beta = sigma2_second_hop / p_u_targets[m]
        b_ut.append(bb_uav_transmit_rzf(eff2[m], beta))

    stack = np.vstack([channels.hd @ f_b.matrix] + [eff.matrix for eff in effectives])
    b_b = bb_bs(stack, p_t, k)
    b_b = BbStage(matrix=_pair_streams_to_groups(b_b.matrix, effectives, assignment.groups))

    pa = PowerAllocation(p_bs=np.asarray(pa_bs_hat, dtype=float), p_uav=list(pa_uav_hat))
    if pa.p_bs.shape != (k,):
        raise ValueError("BS power allocation must have one entry per user")
    for m, p in enumerate(pa.p_uav):
        if p.shape != (group_size,):
            raise ValueError(f"UAV {m} power allocation must have one entry per served user")
    return HybridBeamformers(
        f_b=f_b, b_b=b_b, f_ur=f_ur, b_ur=b_ur, f_ut=f_ut, b_ut=b_ut, pa=pa
    )
