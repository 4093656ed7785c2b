"""Link and end-to-end rate metrics for the two-phase relaying protocol.

The first hop is a MIMO log-det rate through the combined RF/BB receive chain
at each UAV. The second hop is a per-user SINR sum: each user adds a
direct-link term (its own BS beam against all other BS beams) and a relay
term (its own UAV beam against the rest of that UAV's beams, other UAVs'
transmissions, and noise). The end-to-end total halves each UAV's bottleneck
rate because source and relay phases split every transmission round.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .beamforming import BbStage, HybridBeamformers, RfStage
from .channel import ChannelParams, ChannelSet, noise_power_watts
from .clustering import Assignment
from .geometry import NetworkLayout

_LN2 = math.log(2.0)


class NumericalRateError(ArithmeticError):
    """A rate evaluation produced a non-finite value."""


@dataclass(frozen=True)
class NoiseModel:
    """Receiver noise variances in watts for the three reception points."""

    sigma2_relay: float
    sigma2_direct: float
    sigma2_second_hop: float

    def __post_init__(self):
        if min(self.sigma2_relay, self.sigma2_direct, self.sigma2_second_hop) <= 0:
            raise ValueError("noise variances must be positive")

    @classmethod
    def from_params(cls, params: ChannelParams) -> "NoiseModel":
        s2 = noise_power_watts(params)
        return cls(s2, s2, s2)


@dataclass
class RateBreakdown:
    """Per-link rates for one realization: first hop, second hop, and total."""

    r1_per_uav: np.ndarray
    r2_per_uav: np.ndarray
    per_user_sinr: np.ndarray
    r_total: float


def _abs2(v) -> np.ndarray:
    v = np.asarray(v)
    return v.real**2 + v.imag**2


def rate_first_hop(
    eff_h1: np.ndarray, b_ur: BbStage, f_ur: RfStage, g_b: np.ndarray, noise: NoiseModel
) -> float:
    """Log-det rate of one BS-to-UAV link through the full receive chain.

    ``g_b`` is the BS baseband precoder (power weights already applied)
    restricted to the streams this UAV forwards. The noise covariance after
    combining is sigma2 * (B F)(B F)^H, which stays well conditioned because
    the combiner rows are orthonormal.
    """
    s = b_ur.matrix @ np.asarray(eff_h1) @ np.asarray(g_b)
    w = b_ur.matrix @ f_ur.applied_rows()
    q = noise.sigma2_relay * (w @ w.conj().T)
    sign_q, logdet_q = np.linalg.slogdet(q)
    sign_t, logdet_t = np.linalg.slogdet(q + s @ s.conj().T)
    rate = (logdet_t - logdet_q) / _LN2
    if sign_q.real <= 0 or sign_t.real <= 0 or not np.isfinite(rate):
        raise NumericalRateError(
            "non-finite first-hop log-det "
            f"(noise covariance condition number {np.linalg.cond(q):.3e})"
        )
    return max(rate, 0.0)


def sinr_user(
    k: int,
    m: int,
    local_k: int,
    hd_row: np.ndarray,
    h2_row: np.ndarray,
    f_b: RfStage,
    b_b: BbStage,
    f_ut: RfStage,
    b_ut: BbStage,
    pa,
    noise: NoiseModel,
    direct_link: bool,
    inter_uav_power: float = 0.0,
) -> float:
    """Two-term SINR of user ``k`` served by UAV ``m``.

    The direct term plays the user's BS beam against every other BS beam plus
    direct-phase noise; with the direct link disabled it contributes nothing.
    The relay term plays the user's beam at its serving UAV against that UAV's
    other beams, any power received from other UAVs' simultaneous relay-phase
    transmissions (``inter_uav_power``, computed by the caller), and noise.
    ``local_k`` is the user's slot inside UAV ``m``'s group.
    """
    total = 0.0
    if direct_link:
        gains = _abs2(hd_row @ f_b.matrix @ b_b.matrix)
        signal = pa.p_bs[k] * gains[k]
        interference = float(pa.p_bs @ gains) - signal
        total += signal / (interference + noise.sigma2_direct)
    gains2 = _abs2(h2_row @ f_ut.matrix @ b_ut.matrix)
    p_u = pa.p_uav[m]
    signal2 = p_u[local_k] * gains2[local_k]
    interference2 = float(p_u @ gains2) - signal2
    total += signal2 / (interference2 + inter_uav_power + noise.sigma2_second_hop)
    return total


def rate_second_hop(assignment: Assignment, sinrs) -> np.ndarray:
    """Per-UAV sum of log2(1 + SINR) over that UAV's own users."""
    sinrs = np.asarray(sinrs, dtype=float)
    return np.array(
        [np.log2(1.0 + sinrs[group]).sum() for group in assignment.groups]
    )


def rate_total(r1_list, r2_list) -> float:
    """Half the per-UAV bottleneck rates, summed over UAVs."""
    r1 = np.asarray(r1_list, dtype=float)
    r2 = np.asarray(r2_list, dtype=float)
    if r1.shape != r2.shape:
        raise ValueError("first and second hop rate lists must have equal length")
    return float(0.5 * np.minimum(r1, r2).sum())


def evaluate_rates(
    layout: NetworkLayout,
    assignment: Assignment,
    channels: ChannelSet,
    hb: HybridBeamformers,
    noise: NoiseModel,
    direct_link: bool = True,
    inter_uav_interference: bool = False,
    first_hop_literal: bool = False,
) -> RateBreakdown:
    """Full rate breakdown for one realization and one beamformer set.

    By default the first hop counts only the streams routed to each UAV, with
    power weights applied; ``first_hop_literal`` switches to the plain form
    that runs the unweighted BS baseband over all streams, kept for
    comparison. Each user's SINR is per serving UAV; set
    ``inter_uav_interference`` to also count power arriving from other UAVs'
    simultaneous relay-phase transmissions (off by default: relay cells are
    treated as angularly separated, and the high-power multi-UAV gains the
    scheme is built around do not survive a shared interference floor).
    """
    m_uavs = layout.m_uavs
    k_users = layout.n_users
    sqrt_p_b = np.sqrt(hb.pa.p_bs)

    r1 = np.empty(m_uavs)
    for m in range(m_uavs):
        eff = hb.f_ur[m].applied_rows() @ channels.h1[m] @ hb.f_b.matrix
        if first_hop_literal:
            g_b = hb.b_b.matrix
        else:
            g_b = (hb.b_b.matrix * sqrt_p_b)[:, assignment.groups[m]]
        r1[m] = rate_first_hop(eff, hb.b_ur[m], hb.f_ur[m], g_b, noise)

    # Power each user receives from every UAV's beams, for the cross terms.
    beam_gains = [
        _abs2(channels.h2[m] @ hb.f_ut[m].matrix @ hb.b_ut[m].matrix)
        for m in range(m_uavs)
    ]
    sinrs = np.empty(k_users)
    for k in range(k_users):
        m = assignment.serving_uav(k)
        cross = 0.0
        if inter_uav_interference:
            cross = sum(
                float(hb.pa.p_uav[other] @ beam_gains[other][k])
                for other in range(m_uavs)
                if other != m
            )
        sinrs[k] = sinr_user(
            k,
            m,
            assignment.local_index(k),
            channels.hd[k],
            channels.h2[m][k],
            hb.f_b,
            hb.b_b,
            hb.f_ut[m],
            hb.b_ut[m],
            hb.pa,
            noise,
            direct_link,
            inter_uav_power=cross,
        )

    r2 = rate_second_hop(assignment, sinrs)
    return RateBreakdown(
        r1_per_uav=r1,
        r2_per_uav=r2,
        per_user_sinr=sinrs,
        r_total=rate_total(r1, r2),
    )
