"""Round protocol: worker-side projection, master-side gather, communication ledger."""
from dataclasses import dataclass, field

import numpy as np

from .. import models
from ..errors import ProtocolError
from .wire import BroadcastMsg, GradientMsg


@dataclass(frozen=True)
class RoundComm:
    """Traffic of one round. A scalar is one transmitted index or value.

    Broadcasts are counted per receiving worker (unicast); a dense broadcast
    counts d values and no indices.
    """

    round: int
    downstream_scalars: int = 0
    upstream_scalars: int = 0
    downstream_msgs: int = 0
    upstream_msgs: int = 0
    downstream_bytes: int = 0
    upstream_bytes: int = 0


@dataclass
class CommLedger:
    rounds: list = field(default_factory=list)

    def record(self, delta):
        if self.rounds and delta.round <= self.rounds[-1].round:
            raise ProtocolError(f"ledger already has round {delta.round}")
        self.rounds.append(delta)

    def total(self, attr):
        return sum(getattr(r, attr) for r in self.rounds)

    @property
    def upstream_scalars(self):
        return self.total("upstream_scalars")

    @property
    def downstream_scalars(self):
        return self.total("downstream_scalars")


def expected_round_scalars(m, support_size, d, dense):
    """Closed form (downstream, upstream) scalar counts for one round."""
    if dense:
        return (m - 1) * d, (m - 1) * d
    return (m - 1) * 2 * support_size, (m - 1) * support_size


def worker_step(shard, msg, worker_id=0):
    """Gradient of the local loss at the broadcast iterate, restricted to its support."""
    d = shard.d
    if len(msg) and int(msg.indices[-1]) >= d:
        raise ProtocolError(
            f"broadcast index {int(msg.indices[-1])} outside local dimension {d}", round=msg.round
        )
    theta = np.zeros(d)
    idx = msg.indices.astype(np.intp)
    theta[idx] = msg.values
    grad = models.loss_gradient(shard, theta)
    return GradientMsg(msg.round, worker_id, grad[idx])


def gather_round(transport, broadcast, m, d, dense=False):
    """Send ``broadcast`` to the m-1 workers and collect one reply each.

    Returns the replies ordered by worker_id together with the round's
    :class:`RoundComm`. Ordering by id (not arrival) keeps the master's
    arithmetic identical across transports.
    """
    if m <= 1:
        return [], RoundComm(broadcast.round)
    replies = transport.exchange(broadcast)
    seen = {}
    down_bytes = up_bytes = 0
    for msg, nbytes_down, nbytes_up in replies:
        if msg.round != broadcast.round:
            raise ProtocolError(
                f"worker {msg.worker_id} answered round {msg.round}", round=broadcast.round
            )
        if msg.worker_id in seen:
            raise ProtocolError(f"duplicate reply from worker {msg.worker_id}", round=broadcast.round)
        if len(msg) != len(broadcast):
            raise ProtocolError(
                f"worker {msg.worker_id} sent {len(msg)} values for a support of {len(broadcast)}",
                round=broadcast.round,
            )
        seen[msg.worker_id] = msg
        down_bytes += nbytes_down
        up_bytes += nbytes_up
    expected = set(transport.worker_ids)
    if set(seen) != expected:
        missing = sorted(expected - set(seen))
        extra = sorted(set(seen) - expected)
        raise ProtocolError(
            f"reply set mismatch: missing {missing}, unexpected {extra}", round=broadcast.round
        )
    if len(seen) != m - 1:
        raise ProtocolError(f"expected {m - 1} workers, transport has {len(seen)}", round=broadcast.round)
    msgs = [seen[w] for w in sorted(seen)]
    n_workers = len(msgs)
    down_scalars = n_workers * (d if dense else 2 * len(broadcast))
    return msgs, RoundComm(
        round=broadcast.round,
        downstream_scalars=down_scalars,
        upstream_scalars=sum(len(g) for g in msgs),
        downstream_msgs=n_workers,
        upstream_msgs=n_workers,
        downstream_bytes=down_bytes,
        upstream_bytes=up_bytes,
    )
