"""Training loop: epsilon-greedy episodes, replay regression, episode logging.

Episodes cycle through the instance list. Realized rewards are pushed when a
vehicle finishes; one SGD step runs every `train_every` decisions on a replay
sample. After the optimizer activation episode, finished routes are tightened
and the tightened distance is what the training log reports (rewards always
come from the legs actually driven during construction).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import episode as ep
from . import net
from . import subtour as st
from .model import routes_distance


@dataclass
class EpisodeLog:
    episode: int
    instance: str
    distance: float
    reward_mean: float
    epsilon: float
    loss: float

    def csv_row(self) -> str:
        # coerce to builtin float so repr round-trips through csv
        return (f"{self.episode},{self.instance},{float(self.distance)!r},"
                f"{float(self.reward_mean)!r},{float(self.epsilon)!r},"
                f"{float(self.loss)!r}")

    @staticmethod
    def csv_header() -> str:
        return "episode,instance,distance,reward_mean,epsilon,loss"


@dataclass
class Trainer:
    preps: Sequence[ep.PreparedInstance]
    config: net.TrainConfig
    seed: int
    sat_from_episode: Optional[int] = None  # tightening active from this episode
    delta_tighten: int = 3
    timeout_ms: float = 1000.0
    params: net.NetworkParams = None
    buffer: net.ReplayBuffer = None
    logs: List[EpisodeLog] = field(default_factory=list)
    global_step: int = 0
    last_loss: float = float("nan")

    def __post_init__(self):
        if self.params is None:
            self.params = net.init(self.seed)
        if self.buffer is None:
            self.buffer = net.ReplayBuffer()
        self._batch_rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence((self.seed, 0xB0))))

    def run(self, episodes: int) -> net.NetworkParams:
        for e in range(episodes):
            self.run_episode(e)
        return self.params

    def run_episode(self, e: int) -> EpisodeLog:
        prep = self.preps[e % len(self.preps)]
        epsilon = self.config.epsilon(e)
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((self.seed, 1, e))))
        pushed = set()
        rewards: List[float] = []

        def on_step(state: ep.EpisodeState) -> None:
            self.global_step += 1
            for veh in state.vehicles:
                if veh.done and veh.id not in pushed and veh.trajectory:
                    self._push_vehicle(veh, prep, rewards)
                    pushed.add(veh.id)
            if self.global_step % self.config.train_every == 0 and self.buffer.count > 0:
                X, y = self.buffer.sample(self.config.batch_size, self._batch_rng)
                self.last_loss = net.train_batch(self.params, X, y, self.config)

        solution, state = ep.run_policy_episode(
            prep, self.params, epsilon, self.config.temperature, rng, on_step=on_step)
        for veh in state.vehicles:
            if veh.id not in pushed and veh.trajectory:
                self._push_vehicle(veh, prep, rewards)
                pushed.add(veh.id)

        distance = solution.total_distance
        if self.sat_from_episode is not None and e >= self.sat_from_episode:
            orders = []
            for veh in state.vehicles:
                route = [cid for cid, _ in veh.route]
                if route:
                    orders.append(list(st.tighten(route, prep.ctx, self.delta_tighten,
                                                  self.timeout_ms).sequence))
            distance = routes_distance(prep.d, orders)

        log = EpisodeLog(
            episode=e, instance=prep.inst.name, distance=distance,
            reward_mean=float(np.mean(rewards)) if rewards else float("nan"),
            epsilon=epsilon, loss=self.last_loss,
        )
        self.logs.append(log)
        return log

    def _push_vehicle(self, veh: ep.VehicleState, prep: ep.PreparedInstance,
                      rewards: List[float]) -> None:
        rs = ep.compute_rewards(veh.trajectory, veh.d_return, prep.pre, self.config.gamma)
        for leg, r in zip(veh.trajectory, rs):
            if leg.features is not None:
                self.buffer.push(leg.features, r)
                rewards.append(r)
