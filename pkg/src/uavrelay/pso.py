"""Joint UAV placement and power allocation by particle swarm search.

A particle stacks every UAV's ground coordinates with the square roots of the
normalized per-user power weights at the BS and at each UAV, so its length is
2M + K + M*(K/M) = 2M + 2K. Velocity updates pull toward the global and
personal bests with fresh uniform per-slot randomization; positions clamp to
the deployment box and the [0, 1] power range after every move, and a
velocity cap keeps the inertia weight above one from diverging. The objective
is the end-to-end total rate pushed through the full pipeline: re-associate
users to the candidate UAV positions, rebuild every beamforming stage, meet
the power budgets exactly, then score.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .beamforming import RfWindows, build_beamformers, normalize_power
from .channel import ArraySet, ChannelParams, synthesize_channel_set
from .clustering import balanced_association
from .geometry import NetworkLayout, Position3D
from .rates import NoiseModel, RateBreakdown, evaluate_rates

logger = logging.getLogger(__name__)

PA_MODES = ("bs-and-uav", "uav-only", "equal")


@dataclass(frozen=True)
class SwarmConfig:
    """Swarm size, iteration budget, and attraction/inertia coefficients."""

    n_particles: int = 20
    n_iters: int = 50
    gamma1: float = 2.0
    gamma2: float = 2.0
    gamma3: float = 1.1
    velocity_cap_frac: float = 0.2
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_particles < 1 or self.n_iters < 0:
            raise ValueError("need at least one particle and a nonnegative iteration count")
        if min(self.gamma1, self.gamma2, self.gamma3) < 0:
            raise ValueError("attraction and inertia coefficients must be >= 0")


@dataclass
class Particle:
    position: np.ndarray
    velocity: np.ndarray
    best_position: np.ndarray
    best_objective: float


@dataclass
class SwarmState:
    particles: list[Particle]
    global_best_position: np.ndarray
    global_best_objective: float
    iteration: int = 0


@dataclass(frozen=True)
class ParticleCodec:
    """Maps between flat particle vectors and (UAV xy, power hats).

    Power slots store sqrt(p_hat), so decoded hats are the squared slots and
    always land in [0, 1] when slots do.
    """

    m_uavs: int
    n_users: int
    bounds_min: tuple[float, float]
    bounds_max: tuple[float, float]

    @property
    def group_size(self) -> int:
        return self.n_users // self.m_uavs

    @property
    def dim(self) -> int:
        return 2 * self.m_uavs + self.n_users + self.m_uavs * self.group_size

    def lower(self) -> np.ndarray:
        lo = np.zeros(self.dim)
        lo[0 : 2 * self.m_uavs : 2] = self.bounds_min[0]
        lo[1 : 2 * self.m_uavs : 2] = self.bounds_min[1]
        return lo

    def upper(self) -> np.ndarray:
        hi = np.ones(self.dim)
        hi[0 : 2 * self.m_uavs : 2] = self.bounds_max[0]
        hi[1 : 2 * self.m_uavs : 2] = self.bounds_max[1]
        return hi

    def decode(self, vec: np.ndarray):
        vec = np.asarray(vec, dtype=float)
        m, k, g = self.m_uavs, self.n_users, self.group_size
        uav_xy = vec[: 2 * m].reshape(m, 2)
        pa_bs_hat = vec[2 * m : 2 * m + k] ** 2
        tail = vec[2 * m + k :]
        pa_uav_hat = [tail[i * g : (i + 1) * g] ** 2 for i in range(m)]
        return uav_xy, pa_bs_hat, pa_uav_hat


@dataclass(frozen=True)
class PipelineSettings:
    """Everything the rate pipeline needs besides geometry and power hats."""

    params: ChannelParams
    arrays: ArraySet
    noise: NoiseModel
    p_t_watts: float
    p_u_watts: float
    n_rf_bs: int | None = None
    n_rf_uav: int | None = None
    windows: RfWindows = field(default_factory=RfWindows)
    direct_link: bool = True
    inter_uav_interference: bool = False
    first_hop_literal: bool = False


def evaluate_candidate(
    settings: PipelineSettings,
    layout: NetworkLayout,
    seed_key,
    pa_bs_hat=None,
    pa_uav_hat=None,
) -> RateBreakdown:
    """Score one concrete network configuration on one channel realization.

    Synthesizes channels for the given layout and seed, associates users to
    the nearest UAV with the equal-size repair, builds and power-normalizes
    every stage, and returns the rate breakdown. Omitted power hats default to
    equal allocation.
    """
    if pa_bs_hat is None:
        pa_bs_hat = np.ones(layout.n_users)
    if pa_uav_hat is None:
        pa_uav_hat = [np.ones(layout.group_size) for _ in range(layout.m_uavs)]
    channels = synthesize_channel_set(settings.params, layout, settings.arrays, seed_key)
    assignment = balanced_association(layout.users, layout.uavs_xy())
    hb = build_beamformers(
        settings.arrays,
        layout,
        assignment,
        channels,
        pa_bs_hat,
        pa_uav_hat,
        settings.p_t_watts,
        settings.p_u_watts,
        settings.noise.sigma2_second_hop,
        n_rf_bs=settings.n_rf_bs,
        n_rf_uav=settings.n_rf_uav,
        windows=settings.windows,
    )
    hb = normalize_power(hb, settings.p_t_watts, settings.p_u_watts)
    return evaluate_rates(
        layout,
        assignment,
        channels,
        hb,
        settings.noise,
        direct_link=settings.direct_link,
        inter_uav_interference=settings.inter_uav_interference,
        first_hop_literal=settings.first_hop_literal,
    )


class RateObjective:
    """Mean total rate of a particle over a fixed batch of realizations.

    Each realization is a (user list, channel seed) pair; channels are
    re-synthesized per candidate from shared seeds so that moving a UAV only
    changes geometry, not the underlying random draws. ``pa_mode`` selects
    which power slots the particle actually controls: both ends, the UAVs
    only (BS stays equal), or neither. A fixed-placement scheme pins the UAV
    slots to the given coordinates.
    """

    def __init__(
        self,
        settings: PipelineSettings,
        codec: ParticleCodec,
        realizations,
        bs: Position3D,
        uav_height: float,
        bounds_min,
        bounds_max,
        pa_mode: str = "bs-and-uav",
        fixed_uav_xy=None,
    ):
        if pa_mode not in PA_MODES:
            raise ValueError(f"unknown PA mode {pa_mode!r}")
        self.settings = settings
        self.codec = codec
        self.realizations = list(realizations)
        self.bs = bs
        self.uav_height = uav_height
        self.bounds_min = tuple(bounds_min)
        self.bounds_max = tuple(bounds_max)
        self.pa_mode = pa_mode
        self.fixed_uav_xy = None if fixed_uav_xy is None else np.asarray(fixed_uav_xy, float)

    def resolve(self, vec):
        """Decode a particle and apply the scheme's placement/PA overrides."""
        uav_xy, pa_bs_hat, pa_uav_hat = self.codec.decode(vec)
        if self.fixed_uav_xy is not None:
            uav_xy = self.fixed_uav_xy
        if self.pa_mode in ("uav-only", "equal"):
            pa_bs_hat = np.ones(self.codec.n_users)
        if self.pa_mode == "equal":
            pa_uav_hat = [np.ones(self.codec.group_size) for _ in range(self.codec.m_uavs)]
        return uav_xy, pa_bs_hat, pa_uav_hat

    def layout_for(self, uav_xy, users) -> NetworkLayout:
        uavs = [Position3D(float(x), float(y), self.uav_height) for x, y in uav_xy]
        return NetworkLayout(self.bs, uavs, list(users), self.bounds_min, self.bounds_max)

    def breakdown(self, vec, realization) -> RateBreakdown:
        users, seed_key = realization
        uav_xy, pa_bs_hat, pa_uav_hat = self.resolve(vec)
        layout = self.layout_for(uav_xy, users)
        return evaluate_candidate(self.settings, layout, seed_key, pa_bs_hat, pa_uav_hat)

    def __call__(self, vec) -> float:
        return float(
            np.mean([self.breakdown(vec, r).r_total for r in self.realizations])
        )


def init_swarm(config: SwarmConfig, codec: ParticleCodec, centroids, objective, rng) -> SwarmState:
    """Uniformly scattered swarm with one particle warm-started at the centroids.

    All slots for all particles are drawn before the warm start overwrites the
    first particle's coordinate slots, so the draw count is independent of the
    warm start. Velocities start at zero and every particle is scored once.
    """
    lo, hi = codec.lower(), codec.upper()
    positions = rng.uniform(lo, hi, size=(config.n_particles, codec.dim))
    if centroids is not None:
        positions[0, : 2 * codec.m_uavs] = np.asarray(centroids, float).ravel()
    particles = []
    for pos in positions:
        value = float(objective(pos))
        particles.append(
            Particle(
                position=pos.copy(),
                velocity=np.zeros(codec.dim),
                best_position=pos.copy(),
                best_objective=value,
            )
        )
    best = max(particles, key=lambda p: p.best_objective)
    return SwarmState(
        particles=particles,
        global_best_position=best.best_position.copy(),
        global_best_objective=best.best_objective,
        iteration=0,
    )


def step(state: SwarmState, objective, config: SwarmConfig, codec: ParticleCodec, rng) -> SwarmState:
    """One synchronous swarm iteration.

    Every particle draws fresh per-slot uniform attraction weights, moves, and
    clamps to bounds. A particle whose evaluation fails keeps its personal
    best and is re-scattered uniformly; the sweep continues. The global best
    is the running maximum of personal bests, so it can never decrease.
    """
    lo, hi = codec.lower(), codec.upper()
    v_cap = config.velocity_cap_frac * (hi - lo)
    particles = []
    for p in state.particles:
        y1 = rng.uniform(size=codec.dim)
        y2 = rng.uniform(size=codec.dim)
        velocity = (
            config.gamma1 * y1 * (state.global_best_position - p.position)
            + config.gamma2 * y2 * (p.best_position - p.position)
            + config.gamma3 * p.velocity
        )
        velocity = np.clip(velocity, -v_cap, v_cap)
        position = np.clip(p.position + velocity, lo, hi)
        try:
            value = float(objective(position))
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            logger.warning("objective failed for a particle, re-scattering: %s", exc)
            particles.append(
                Particle(
                    position=rng.uniform(lo, hi, size=codec.dim),
                    velocity=np.zeros(codec.dim),
                    best_position=p.best_position.copy(),
                    best_objective=p.best_objective,
                )
            )
            continue
        if value > p.best_objective:
            best_position, best_objective = position.copy(), value
        else:
            best_position, best_objective = p.best_position.copy(), p.best_objective
        particles.append(
            Particle(
                position=position,
                velocity=velocity,
                best_position=best_position,
                best_objective=best_objective,
            )
        )
    best = max(particles, key=lambda p: p.best_objective)
    if best.best_objective > state.global_best_objective:
        global_best_position = best.best_position.copy()
        global_best_objective = best.best_objective
    else:
        global_best_position = state.global_best_position.copy()
        global_best_objective = state.global_best_objective
    return SwarmState(
        particles=particles,
        global_best_position=global_best_position,
        global_best_objective=global_best_objective,
        iteration=state.iteration + 1,
    )


@dataclass
class TraceRecord:
    iteration: int
    objective: float
    uav_xy: np.ndarray


@dataclass
class OptimizeResult:
    best_position: np.ndarray
    best_objective: float
    history: list[TraceRecord]
    state: SwarmState


def optimize(
    config: SwarmConfig,
    codec: ParticleCodec,
    objective,
    centroids=None,
    rng=None,
) -> OptimizeResult:
    """Run the swarm for the configured iteration budget and keep the best.

    The per-iteration trace of (global best objective, best UAV coordinates)
    comes back with the result; the objective sequence is non-decreasing by
    construction.
    """
    if rng is None:
        rng = np.random.default_rng(config.rng_seed)
    state = init_swarm(config, codec, centroids, objective, rng)

    def record(st):
        m = codec.m_uavs
        return TraceRecord(
            iteration=st.iteration,
            objective=st.global_best_objective,
            uav_xy=st.global_best_position[: 2 * m].reshape(m, 2).copy(),
        )

    history = [record(state)]
    for _ in range(config.n_iters):
        state = step(state, objective, config, codec, rng)
        history.append(record(state))
    return OptimizeResult(
        best_position=state.global_best_position.copy(),
        best_objective=state.global_best_objective,
        history=history,
        state=state,
    )
