"""Compositional pattern-producing networks and the two-network genome.

A robot genome is a pair of feedforward function graphs: one painted over
the workspace to decide where material goes (and whether it actuates), the
other to derive the oscillation frequency and per-voxel phase offsets.
Both take the same five spatial inputs per cell: x, y, z, the distance d
from the workspace center, and a constant bias b = 1.

Networks are immutable values.  Mutation returns a fresh genome and never
touches its argument; all randomness comes from the caller's generator.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

N_INPUTS = 5
N_OUTPUTS = 2


class ActivationKind(enum.Enum):
    SINE = "sine"
    SIGMOID = "sigmoid"
    GAUSSIAN = "gaussian"
    IDENTITY = "identity"
    ABSOLUTE = "absolute"


ACTIVATION_POOL = (
    ActivationKind.SINE,
    ActivationKind.SIGMOID,
    ActivationKind.GAUSSIAN,
    ActivationKind.IDENTITY,
    ActivationKind.ABSOLUTE,
)


def apply_activation(kind: ActivationKind, x: np.ndarray) -> np.ndarray:
    if kind is ActivationKind.SINE:
        return np.sin(x)
    if kind is ActivationKind.SIGMOID:
        return np.tanh(x)
    if kind is ActivationKind.GAUSSIAN:
        return np.exp(-np.square(x))
    if kind is ActivationKind.ABSOLUTE:
        return np.abs(x)
    return x


class NodeRole(enum.Enum):
    INPUT = "input"
    HIDDEN = "hidden"
    OUTPUT = "output"


@dataclass(frozen=True)
class NodeGene:
    id: int
    role: NodeRole
    activation: ActivationKind


@dataclass(frozen=True)
class ConnectionGene:
    source: int
    target: int
    weight: float
    enabled: bool = True


@dataclass(frozen=True)
class Cppn:
    """An acyclic function graph with 5 inputs and 2 outputs.

    Node ids 0..4 are the inputs, 5..6 the outputs, 7+ hidden.  The
    evaluation plan (topological order plus incoming edge lists) is built
    lazily and cached; it is derived state, not part of equality.
    """

    nodes: tuple[NodeGene, ...]
    connections: tuple[ConnectionGene, ...]
    _plan: list | None = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate node ids")
        pairs = [(c.source, c.target) for c in self.connections]
        if len(set(pairs)) != len(pairs):
            raise ValueError("duplicate connection")
        if topological_order(self.nodes, self.connections) is None:
            raise ValueError("connection graph has a cycle")

    @property
    def input_ids(self) -> list[int]:
        return [n.id for n in self.nodes if n.role is NodeRole.INPUT]

    @property
    def output_ids(self) -> list[int]:
        return [n.id for n in self.nodes if n.role is NodeRole.OUTPUT]

    @property
    def hidden_ids(self) -> list[int]:
        return [n.id for n in self.nodes if n.role is NodeRole.HIDDEN]

    def _evaluation_plan(self):
        # list of (node, [(source_id, weight), ...]) in evaluation order
        if self._plan is None:
            order = topological_order(self.nodes, self.connections)
            assert order is not None
            by_id = {n.id: n for n in self.nodes}
            incoming: dict[int, list[tuple[int, float]]] = {n.id: [] for n in self.nodes}
            for c in self.connections:
                if c.enabled:
                    incoming[c.target].append((c.source, c.weight))
            plan = [
                (by_id[i], incoming[i])
                for i in order
                if by_id[i].role is not NodeRole.INPUT
            ]
            object.__setattr__(self, "_plan", plan)
        return self._plan


def topological_order(nodes, connections) -> list[int] | None:
    """Kahn's algorithm over enabled and disabled edges alike.

    Returns node ids in a deterministic order (ready set kept sorted), or
    None if the graph has a cycle.
    """
    ids = [n.id for n in nodes]
    indeg = {i: 0 for i in ids}
    out: dict[int, list[int]] = {i: [] for i in ids}
    for c in connections:
        indeg[c.target] += 1
        out[c.source].append(c.target)
    ready = sorted(i for i in ids if indeg[i] == 0)
    order: list[int] = []
    while ready:
        i = ready.pop(0)
        order.append(i)
        for j in sorted(out[i]):
            indeg[j] -= 1
            if indeg[j] == 0:
                ready.append(j)
        ready.sort()
    return order if len(order) == len(ids) else None


def query_grid(net: Cppn, inputs: np.ndarray) -> np.ndarray:
    """Evaluate the network at many points at once.

    inputs has shape (n, 5) in the order (x, y, z, d, b); the result has
    shape (n, 2).  Nodes with no enabled incoming edge evaluate to
    activation(0).
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    n = inputs.shape[0]
    values: dict[int, np.ndarray] = {}
    for idx, node_id in enumerate(net.input_ids):
        values[node_id] = inputs[:, idx]
    for node, incoming in net._evaluation_plan():
        acc = np.zeros(n, dtype=np.float64)
        for source, weight in incoming:
            acc = acc + weight * values[source]
        values[node.id] = apply_activation(node.activation, acc)
    return np.stack([values[i] for i in net.output_ids], axis=1)


def query(net: Cppn, x: float, y: float, z: float, d: float, b: float) -> tuple[float, float]:
    """Evaluate the network at a single point."""
    out = query_grid(net, np.array([[x, y, z, d, b]], dtype=np.float64))
    return float(out[0, 0]), float(out[0, 1])


@dataclass(frozen=True)
class Genome:
    """Two networks plus lineage bookkeeping.

    morphology outputs: (presence, active-vs-passive)
    control outputs:    (frequency contribution, phase offset)
    """

    morphology_net: Cppn
    control_net: Cppn
    id: int = 0
    parent_id: int | None = None


@dataclass(frozen=True)
class MutationRates:
    perturb_weight_prob: float = 0.8
    perturb_connection_prob: float = 0.1
    add_connection_prob: float = 0.15
    add_node_prob: float = 0.08
    change_activation_prob: float = 0.1
    weight_sigma: float = 0.5

    def __post_init__(self) -> None:
        probs = (
            self.perturb_weight_prob,
            self.perturb_connection_prob,
            self.add_connection_prob,
            self.add_node_prob,
            self.change_activation_prob,
        )
        if any(not 0.0 <= p <= 1.0 for p in probs):
            raise ValueError("mutation probabilities must lie in [0, 1]")
        if not any(p > 0.0 for p in probs):
            raise ValueError("at least one mutation rate must be positive")


def _random_net(rng: np.random.Generator) -> Cppn:
    nodes = [NodeGene(i, NodeRole.INPUT, ActivationKind.IDENTITY) for i in range(N_INPUTS)]
    for j in range(N_OUTPUTS):
        act = ACTIVATION_POOL[int(rng.integers(len(ACTIVATION_POOL)))]
        nodes.append(NodeGene(N_INPUTS + j, NodeRole.OUTPUT, act))
    conns = []
    for i in range(N_INPUTS):
        for j in range(N_OUTPUTS):
            w = float(rng.uniform(-1.0, 1.0))
            conns.append(ConnectionGene(i, N_INPUTS + j, w, True))
    return Cppn(tuple(nodes), tuple(conns))


def random_genome(rng: np.random.Generator, genome_id: int = 0) -> Genome:
    """A minimal genome: both nets fully connected inputs-to-outputs."""
    return Genome(
        morphology_net=_random_net(rng),
        control_net=_random_net(rng),
        id=genome_id,
        parent_id=None,
    )


def _creates_cycle(connections, source: int, target: int) -> bool:
    # would target reach source?
    out: dict[int, list[int]] = {}
    for c in connections:
        out.setdefault(c.source, []).append(c.target)
    stack, seen = [target], set()
    while stack:
        i = stack.pop()
        if i == source:
            return True
        if i in seen:
            continue
        seen.add(i)
        stack.extend(out.get(i, ()))
    return False


def _mutate_net(net: Cppn, rates: MutationRates, rng: np.random.Generator) -> Cppn:
    nodes = list(net.nodes)
    conns = list(net.connections)

    if rng.random() < rates.perturb_weight_prob:
        for i, c in enumerate(conns):
            if rng.random() < rates.perturb_connection_prob:
                delta = float(rng.normal(0.0, rates.weight_sigma))
                conns[i] = replace(c, weight=c.weight + delta)

    if rng.random() < rates.add_connection_prob:
        # legal sites: non-output source, non-input target, unused pair,
        # no path from target back to source
        taken = {(c.source, c.target) for c in conns}
        sources = [n.id for n in nodes if n.role is not NodeRole.OUTPUT]
        targets = [n.id for n in nodes if n.role is not NodeRole.INPUT]
        sites = [
            (s, t)
            for s in sources
            for t in targets
            if s != t and (s, t) not in taken and not _creates_cycle(conns, s, t)
        ]
        if sites:
            s, t = sites[int(rng.integers(len(sites)))]
            w = float(rng.uniform(-1.0, 1.0))
            conns.append(ConnectionGene(s, t, w, True))

    if rng.random() < rates.add_node_prob:
        enabled = [i for i, c in enumerate(conns) if c.enabled]
        if enabled:
            i = enabled[int(rng.integers(len(enabled)))]
            old = conns[i]
            new_id = max(n.id for n in nodes) + 1
            act = ACTIVATION_POOL[int(rng.integers(len(ACTIVATION_POOL)))]
            conns[i] = replace(old, enabled=False)
            nodes.append(NodeGene(new_id, NodeRole.HIDDEN, act))
            conns.append(ConnectionGene(old.source, new_id, 1.0, True))
            conns.append(ConnectionGene(new_id, old.target, old.weight, True))

    if rng.random() < rates.change_activation_prob:
        mutable = [i for i, n in enumerate(nodes) if n.role is not NodeRole.INPUT]
        i = mutable[int(rng.integers(len(mutable)))]
        pool = [a for a in ACTIVATION_POOL if a is not nodes[i].activation]
        nodes[i] = replace(nodes[i], activation=pool[int(rng.integers(len(pool)))])

    return Cppn(tuple(nodes), tuple(conns))


def mutate(
    genome: Genome,
    rates: MutationRates,
    rng: np.random.Generator,
    new_id: int | None = None,
) -> Genome:
    """One offspring genome; exactly one of the two nets is altered.

    Operator draws repeat until the chosen net actually differs, so the
    offspring is never a verbatim copy of its parent.
    """
    if new_id is None:
        new_id = genome.id + 1
    mutate_morphology = bool(rng.integers(2))
    old = genome.morphology_net if mutate_morphology else genome.control_net
    for _ in range(10_000):
        new = _mutate_net(old, rates, rng)
        if new != old:
            break
    else:  # pragma: no cover - rates make this unreachable in practice
        raise RuntimeError("mutation failed to produce a distinct network")
    if mutate_morphology:
        return Genome(new, genome.control_net, id=new_id, parent_id=genome.id)
    return Genome(genome.morphology_net, new, id=new_id, parent_id=genome.id)
