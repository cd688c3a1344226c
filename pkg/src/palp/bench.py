"""Network-administration benchmark generator.

A network of machines crashes at random; crashed machines drag down their
downstream neighbors, and the administrator may reboot one machine per step.
Three topologies are supported:

* ring:          0 -> 1 -> ... -> n-1 -> 0
* ring-of-rings: several inner directed rings; the first node of each inner
  ring also sits on an outer directed ring (so a "12-ring-of-rings" is four
  3-rings whose representatives form a 4-cycle):

        [0 -> 1 -> 2 -> 0]   inner rings
         |
         v  outer ring over representatives 0, 3, 6, 9
        [3 -> 4 -> 5 -> 3] ...

* grid:          rows x cols cells, arrows to the right and down neighbors.

Machine state is binary (1 = up).  Keeping a workstation up pays 1 per step,
keeping the server up pays 2.  The crash dynamics below are this package's
documented choice and are echoed into the generated metadata:

* reboot_i makes machine i come up with probability `reboot_success`,
  regardless of its current state;
* otherwise an up machine stays up with probability
  `base_up - penalty * (fraction of its in-neighbors that are down)`;
* a down machine stays down unless rebooted.

The default parameters make machines flaky enough that value approximations
with per-machine structure pay off; with very sticky up-states the
partitioned programs collapse onto the constant value function and every
method degenerates to the same myopic policy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .factors import Variable, enumerate_states
from .mdp import Cpd, FactoredMdp, RewardFactor

TOPOLOGY_KINDS = ("ring", "ring-of-rings", "grid")


class TopologyError(ValueError):
    """Raised for malformed or degenerate topology requests."""


@dataclass(frozen=True)
class Topology:
    kind: str
    params: dict
    server: int

    @property
    def num_machines(self) -> int:
        if self.kind == "ring":
            return self.params["n"]
        if self.kind == "ring-of-rings":
            return self.params["num_rings"] * self.params["ring_size"]
        return self.params["rows"] * self.params["cols"]


def ring(n: int) -> Topology:
    if n < 3:
        raise TopologyError(f"a ring needs at least 3 machines, got {n}")
    return Topology("ring", {"n": n}, server=0)


def ring_of_rings(num_rings: int, ring_size: int) -> Topology:
    if num_rings < 2 or ring_size < 3:
        raise TopologyError("a ring-of-rings needs >= 2 rings of >= 3 machines, "
                            f"got {num_rings} x {ring_size}")
    return Topology("ring-of-rings",
                    {"num_rings": num_rings, "ring_size": ring_size}, server=0)


def grid(rows: int, cols: int) -> Topology:
    if rows < 2 or cols < 2:
        raise TopologyError(f"a grid needs both sides >= 2, got {rows}x{cols}")
    return Topology("grid", {"rows": rows, "cols": cols}, server=0)


def arrow_list(topology: Topology) -> list[tuple[int, int]]:
    """Directed connections i -> j along which failures spread."""
    kind = topology.kind
    if kind == "ring":
        n = topology.params["n"]
        return [(i, (i + 1) % n) for i in range(n)]
    if kind == "ring-of-rings":
        num_rings = topology.params["num_rings"]
        size = topology.params["ring_size"]
        arrows = []
        for r in range(num_rings):
            base = r * size
            arrows.extend((base + i, base + (i + 1) % size) for i in range(size))
        reps = [r * size for r in range(num_rings)]
        arrows.extend((reps[r], reps[(r + 1) % num_rings])
                      for r in range(num_rings))
        return arrows
    if kind == "grid":
        rows, cols = topology.params["rows"], topology.params["cols"]
        arrows = []
        for r in range(rows):
            for c in range(cols):
                cell = r * cols + c
                if c + 1 < cols:
                    arrows.append((cell, cell + 1))
                if r + 1 < rows:
                    arrows.append((cell, cell + cols))
        return arrows
    raise TopologyError(f"unknown topology kind {kind!r}")


@dataclass(frozen=True)
class DynamicsParams:
    reboot_success: float = 0.95
    base_up: float = 0.5
    neighbor_penalty: float = 0.2

    def to_dict(self) -> dict:
        return {"reboot_success": self.reboot_success, "base_up": self.base_up,
                "neighbor_penalty": self.neighbor_penalty}


@dataclass(frozen=True)
class BenchMetadata:
    topology: Topology
    arrows: tuple[tuple[int, int], ...]
    dynamics: DynamicsParams
    gamma: float

    @property
    def server(self) -> int:
        return self.topology.server

    def to_dict(self) -> dict:
        return {
            "topology": {"kind": self.topology.kind,
                         "params": self.topology.params,
                         "server": self.topology.server},
            "arrows": [list(a) for a in self.arrows],
            "dynamics": self.dynamics.to_dict(),
            "gamma": self.gamma,
        }


def save_metadata(meta: BenchMetadata, path) -> None:
    with open(path, "w") as fh:
        json.dump(meta.to_dict(), fh, indent=1)
        fh.write("\n")


def load_metadata(path) -> BenchMetadata:
    with open(path) as fh:
        doc = json.load(fh)
    topo = Topology(doc["topology"]["kind"], doc["topology"]["params"],
                    doc["topology"]["server"])
    return BenchMetadata(
        topology=topo,
        arrows=tuple(tuple(a) for a in doc["arrows"]),
        dynamics=DynamicsParams(**doc["dynamics"]),
        gamma=doc["gamma"],
    )


def generate(topology: Topology, dynamics: DynamicsParams | None = None,
             gamma: float = 0.95) -> tuple[FactoredMdp, BenchMetadata]:
    """Build the benchmark model for a topology.

    Machines are binary, actions are reboot_0..reboot_{n-1} plus noop, every
    machine's transition depends on itself and its in-neighbors, and rewards
    are action-independent per-machine payoffs.
    """
    dynamics = dynamics or DynamicsParams()
    arrows = arrow_list(topology)
    n = topology.num_machines
    in_neighbors: list[list[int]] = [[] for _ in range(n)]
    for i, j in arrows:
        in_neighbors[j].append(i)

    variables = tuple(Variable(i, f"machine_{i}", 2) for i in range(n))
    actions = tuple(f"reboot_{i}" for i in range(n)) + ("noop",)

    cpds = []
    for v in range(n):
        parents = tuple(sorted({v} | set(in_neighbors[v])))
        parent_card = (2,) * len(parents)
        assignments = enumerate_states(parent_card)
        self_pos = parents.index(v)
        nbr_pos = [parents.index(u) for u in in_neighbors[v]]
        tables = np.zeros((len(actions), len(assignments), 2))
        for a, action in enumerate(actions):
            for row, values in enumerate(assignments):
                if action == f"reboot_{v}":
                    p_up = dynamics.reboot_success
                elif values[self_pos] == 0:
                    p_up = 0.0
                else:
                    if nbr_pos:
                        down = sum(1 for pos in nbr_pos if values[pos] == 0)
                        frac = down / len(nbr_pos)
                    else:
                        frac = 0.0
                    p_up = dynamics.base_up - dynamics.neighbor_penalty * frac
                tables[a, row] = (1.0 - p_up, p_up)
        cpds.append(Cpd(v, parents, parent_card, tables))

    rewards = []
    for v in range(n):
        payoff = 2.0 if v == topology.server else 1.0
        table = np.tile([0.0, payoff], (len(actions), 1))
        rewards.append(RewardFactor((v,), table))

    mdp = FactoredMdp(variables=variables, actions=actions, cpds=tuple(cpds),
                      rewards=tuple(rewards), gamma=gamma)
    meta = BenchMetadata(topology=topology, arrows=tuple(arrows),
                         dynamics=dynamics, gamma=gamma)
    return mdp, meta


def topology_from_spec(kind: str, **params) -> Topology:
    if kind == "ring":
        return ring(params["n"])
    if kind == "ring-of-rings":
        return ring_of_rings(params["num_rings"], params["ring_size"])
    if kind == "grid":
        return grid(params["rows"], params["cols"])
    raise TopologyError(f"unknown topology kind {kind!r} "
                        f"(choose from {TOPOLOGY_KINDS})")
