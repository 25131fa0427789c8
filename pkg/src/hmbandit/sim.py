"""Monte-Carlo simulation of many hidden-state arms under one sampler.

Each slot, a policy picks exactly one arm; the chosen arm pays the reward
of its hidden state and emits a noisy signal, every other arm pays its
passive reward.  Beliefs evolve by the sampled/unsampled filters.  All
policies are run on common random numbers: every (episode, arm) pair owns
a counter-based stream derived from the experiment seed, so policies see
identical arms, initial states, signal noise, and transitions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arm import MIN_DENOMINATOR, ArmParams
from .errors import DegenerateObservation, MissingIndexTable, ValidationError
from .index import WhittleTable

DEFAULT_HORIZON = 2000
DEFAULT_ITERATIONS = 100


@dataclass(frozen=True)
class BanditConfig:
    """Experiment description: the arms plus run geometry."""

    arms: tuple
    beta: float
    horizon: int = DEFAULT_HORIZON
    iterations: int = DEFAULT_ITERATIONS
    seed: int = 0
    initial_beliefs: object = "random"   # "random" or a per-arm tuple

    def __post_init__(self):
        arms = tuple(self.arms)
        object.__setattr__(self, "arms", arms)
        if not arms or not all(isinstance(a, ArmParams) for a in arms):
            raise ValidationError("arms must be a non-empty tuple of ArmParams")
        if not 0.0 < self.beta < 1.0:
            raise ValidationError(f"beta={self.beta!r} outside (0, 1)")
        if self.horizon < 1 or self.iterations < 1:
            raise ValidationError("horizon and iterations must be >= 1")
        if self.seed < 0:
            raise ValidationError("seed must be a non-negative integer")
        if self.initial_beliefs != "random":
            vals = tuple(float(x) for x in self.initial_beliefs)
            if len(vals) != len(arms) or any(not 0.0 <= x <= 1.0 for x in vals):
                raise ValidationError(
                    "initial_beliefs needs one probability per arm"
                )
            object.__setattr__(self, "initial_beliefs", vals)

    @property
    def n_arms(self) -> int:
        return len(self.arms)


@dataclass
class SystemState:
    """Hidden truth and the sampler's beliefs at one slot."""

    hidden: np.ndarray     # per-arm state in {0, 1}
    beliefs: np.ndarray    # per-arm P(state 0)
    slot: int = 0


def myopic_index(params: ArmParams, pi):
    """Expected immediate sampling reward at belief pi."""
    pi = np.asarray(pi, dtype=float)
    out = pi * params.eta0 + (1.0 - pi) * params.eta1
    return float(out) if out.ndim == 0 else out


class _ArmArrays:
    """Per-arm parameter vectors, gathered once per simulation."""

    def __init__(self, arms):
        get = lambda name: np.array([getattr(a, name) for a in arms])
        self.lam0, self.lam1 = get("lambda0"), get("lambda1")
        self.mu0, self.mu1 = get("mu0"), get("mu1")
        self.rho0, self.rho1 = get("rho0"), get("rho1")
        self.eta0, self.eta1, self.eta2 = get("eta0"), get("eta1"), get("eta2")
        self.eta2_total = float(self.eta2.sum())


class MyopicPolicy:
    """Sample the arm with the best expected immediate reward."""

    name = "Myopic"

    def start(self, config: BanditConfig):
        self._arms = _ArmArrays(config.arms)

    def choose(self, beliefs, u):
        scores = beliefs * self._arms.eta0 + (1.0 - beliefs) * self._arms.eta1
        return np.argmax(scores, axis=-1)


class RandomPolicy:
    """Sample a uniformly random arm each slot."""

    name = "Random"

    def start(self, config: BanditConfig):
        self._n = config.n_arms

    def choose(self, beliefs, u):
        return np.minimum((u * self._n).astype(np.int64), self._n - 1)


class WhittlePolicy:
    """Sample the arm with the largest subsidy index at its current belief."""

    name = "Whittle"

    def __init__(self, tables):
        self.tables = tuple(tables)

    def start(self, config: BanditConfig):
        if len(self.tables) != config.n_arms:
            raise MissingIndexTable(
                f"{config.n_arms} arms but {len(self.tables)} index tables"
            )
        if not all(isinstance(t, WhittleTable) for t in self.tables):
            raise MissingIndexTable("index tables must be WhittleTable instances")

    def choose(self, beliefs, u):
        beliefs = np.atleast_2d(beliefs)
        scores = np.column_stack(
            [t.lookup(beliefs[:, a]) for a, t in enumerate(self.tables)]
        )
        return np.argmax(scores, axis=-1)


def step(config: BanditConfig, state: SystemState, chosen: int, rng):
    """Advance one slot with an explicit generator; returns (state, reward, z).

    Draw order: one uniform for the signal, then one per arm for the
    transitions.
    """
    arms = _ArmArrays(config.arms)
    x = np.asarray(state.hidden, dtype=np.int8)
    beliefs = np.asarray(state.beliefs, dtype=float)
    u_sig = rng.uniform()
    u_trans = rng.uniform(size=config.n_arms)
    new_hidden, new_beliefs, reward, z = _advance(
        arms, x[None, :], beliefs[None, :],
        np.array([chosen]), np.array([u_sig]), u_trans[None, :],
    )
    return (
        SystemState(new_hidden[0], new_beliefs[0], state.slot + 1),
        float(reward[0]),
        int(z[0]),
    )


def _advance(arms, hidden, beliefs, chosen, u_sig, u_trans):
    """One synchronous slot for a (K, N) batch; returns the new batch."""
    k = hidden.shape[0]
    rows = np.arange(k)
    x_c = hidden[rows, chosen]
    pi_c = beliefs[rows, chosen]

    reward = np.where(x_c == 0, arms.eta0[chosen], arms.eta1[chosen])
    reward = reward + (arms.eta2_total - arms.eta2[chosen])

    rho_cur = np.where(x_c == 0, arms.rho0[chosen], arms.rho1[chosen])
    z = (u_sig < rho_cur).astype(np.int8)

    # transitions: sampled arms use mu, the rest lambda
    p0 = np.where(hidden == 0, arms.lam0, arms.lam1)
    mu_c = np.where(x_c == 0, arms.mu0[chosen], arms.mu1[chosen])
    p0[rows, chosen] = mu_c
    new_hidden = np.where(u_trans < p0, 0, 1).astype(np.int8)

    # belief filters: gamma2 everywhere, overwritten by gamma1/gamma0 where sampled
    new_beliefs = beliefs * arms.lam0 + (1.0 - beliefs) * arms.lam1
    r0, r1 = arms.rho0[chosen], arms.rho1[chosen]
    m0, m1 = arms.mu0[chosen], arms.mu1[chosen]
    den1 = pi_c * r0 + (1.0 - pi_c) * r1
    den0 = pi_c * (1.0 - r0) + (1.0 - pi_c) * (1.0 - r1)
    den = np.where(z == 1, den1, den0)
    if np.any(den < MIN_DENOMINATOR):
        raise DegenerateObservation(
            "observed a signal whose probability underflows; the filter "
            "update is undefined for these parameters"
        )
    num1 = pi_c * r0 * m0 + (1.0 - pi_c) * r1 * m1
    num0 = pi_c * (1.0 - r0) * m0 + (1.0 - pi_c) * (1.0 - r1) * m1
    new_beliefs[rows, chosen] = np.clip(np.where(z == 1, num1, num0) / den, 0.0, 1.0)
    return new_hidden, np.clip(new_beliefs, 0.0, 1.0), reward, z


def _episode_tensors(config: BanditConfig, episodes):
    """Pre-draw every uniform the engine will consume, stream per (episode, arm).

    Streams are independent Philox generators keyed by (seed, episode, arm),
    so any episode can be reproduced in isolation; the policy's own draws
    live on key (seed, episode, n_arms).
    """
    n, t = config.n_arms, config.horizon
    k = len(episodes)
    u_belief = np.empty((k, n))
    u_state = np.empty((k, n))
    u_sig = np.empty((k, n, t))
    u_trans = np.empty((k, n, t))
    u_pol = np.empty((k, t))
    for i, e in enumerate(episodes):
        for a in range(n):
            g = _stream(config.seed, e, a)
            u_belief[i, a] = g.uniform()
            u_state[i, a] = g.uniform()
            u_sig[i, a] = g.uniform(size=t)
            u_trans[i, a] = g.uniform(size=t)
        u_pol[i] = _stream(config.seed, e, n).uniform(size=t)
    return u_belief, u_state, u_sig, u_trans, u_pol


def _stream(seed, episode, arm):
    ss = np.random.SeedSequence(seed, spawn_key=(episode, arm))
    return np.random.Generator(np.random.Philox(ss))


def _generator_tensors(config: BanditConfig, rng):
    """Same tensor layout as _episode_tensors but fed from one generator."""
    n, t = config.n_arms, config.horizon
    u_belief = np.empty((1, n))
    u_state = np.empty((1, n))
    u_sig = np.empty((1, n, t))
    u_trans = np.empty((1, n, t))
    for a in range(n):
        u_belief[0, a] = rng.uniform()
        u_state[0, a] = rng.uniform()
        u_sig[0, a] = rng.uniform(size=t)
        u_trans[0, a] = rng.uniform(size=t)
    u_pol = rng.uniform(size=t)[None, :]
    return u_belief, u_state, u_sig, u_trans, u_pol


def _initial_conditions(config, u_belief, u_state):
    if config.initial_beliefs == "random":
        beliefs = u_belief.copy()
    else:
        beliefs = np.tile(np.asarray(config.initial_beliefs), (u_belief.shape[0], 1))
    hidden = np.where(u_state < beliefs, 0, 1).astype(np.int8)
    return hidden, beliefs


def _simulate(config, policy, tensors, collect_trace=False):
    u_belief, u_state, u_sig, u_trans, u_pol = tensors
    arms = _ArmArrays(config.arms)
    policy.start(config)
    hidden, beliefs = _initial_conditions(config, u_belief, u_state)
    k, t = u_pol.shape
    rewards = np.empty((k, t))
    chosen_all = np.empty((k, t), dtype=np.int64)
    signals = np.empty((k, t), dtype=np.int8)
    belief_path = [beliefs.copy()] if collect_trace else None
    rows = np.arange(k)
    for slot in range(t):
        chosen = np.atleast_1d(policy.choose(beliefs, u_pol[:, slot]))
        hidden, beliefs, reward, z = _advance(
            arms, hidden, beliefs, chosen,
            u_sig[rows, chosen, slot], u_trans[:, :, slot],
        )
        rewards[:, slot] = reward
        chosen_all[:, slot] = chosen
        signals[:, slot] = z
        if collect_trace:
            belief_path.append(beliefs.copy())
    discounts = config.beta ** np.arange(t)
    discounted = rewards @ discounts
    return {
        "rewards": rewards,
        "chosen": chosen_all,
        "signals": signals,
        "discounted": discounted,
        "beliefs": np.stack(belief_path, axis=1) if collect_trace else None,
    }


@dataclass(frozen=True)
class EpisodeTrace:
    """Full record of one simulated episode."""

    chosen: np.ndarray          # (horizon,) sampled arm ids
    actions: np.ndarray         # (horizon, n_arms) one-hot sampling matrix
    signals: np.ndarray         # (horizon,) observed signals
    rewards: np.ndarray         # (horizon,) instantaneous rewards
    beliefs: np.ndarray         # (horizon + 1, n_arms) belief trajectory
    discounted_total: float


def run_episode(config: BanditConfig, policy, rng=None) -> EpisodeTrace:
    """Simulate one episode.

    rng=None replays episode 0 of the seeded experiment, an integer replays
    that episode index (bit-identical to its row in monte_carlo), and a
    numpy Generator draws everything sequentially from that generator.
    """
    if rng is None or isinstance(rng, (int, np.integer)):
        tensors = _episode_tensors(config, [int(rng or 0)])
    else:
        tensors = _generator_tensors(config, rng)
    out = _simulate(config, policy, tensors, collect_trace=True)
    t, n = config.horizon, config.n_arms
    actions = np.zeros((t, n), dtype=np.int8)
    actions[np.arange(t), out["chosen"][0]] = 1
    return EpisodeTrace(
        chosen=out["chosen"][0],
        actions=actions,
        signals=out["signals"][0],
        rewards=out["rewards"][0],
        beliefs=out["beliefs"][0],
        discounted_total=float(out["discounted"][0]),
    )


@dataclass(frozen=True)
class SimStats:
    """Cross-episode reward summaries for each policy."""

    policies: tuple
    slot_means: dict            # policy name -> (horizon,) mean reward per slot
    discounted_means: dict      # policy name -> mean discounted episode total
    iterations: int
    horizon: int
    beta: float
    seed: int

    def time_average(self, policy: str, start: int = 0, stop=None) -> float:
        """Mean instantaneous reward over a slot window (zero-based)."""
        return float(np.mean(self.slot_means[policy][start:stop]))

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("slot,policy,mean_instantaneous_reward\n")
            for name in self.policies:
                means = self.slot_means[name]
                for slot in range(self.horizon):
                    fh.write(f"{slot},{name},{means[slot]:.17g}\n")


def monte_carlo(config: BanditConfig, policies) -> SimStats:
    """Run every policy over the same seeded episodes and average rewards."""
    names = [p.name for p in policies]
    if len(set(names)) != len(names):
        raise ValidationError("policies must have distinct names")
    tensors = _episode_tensors(config, range(config.iterations))
    slot_means = {}
    discounted = {}
    for policy in policies:
        out = _simulate(config, policy, tensors)
        slot_means[policy.name] = out["rewards"].mean(axis=0)
        discounted[policy.name] = float(out["discounted"].mean())
    return SimStats(
        policies=tuple(names),
        slot_means=slot_means,
        discounted_means=discounted,
        iterations=config.iterations,
        horizon=config.horizon,
        beta=config.beta,
        seed=config.seed,
    )
