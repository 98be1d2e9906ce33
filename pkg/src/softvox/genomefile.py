"""Versioned structured-text genome files.

The format is line-oriented and diffable.  Weights are printed with 17
significant digits, which round-trips IEEE doubles bit-exactly:

    softvox-genome 1
    id 42
    parent 17          # or "parent -" for an initial genome
    net morphology
    node 0 input identity
    node 5 output sine
    conn 0 5 -0.4285714285714285 1
    net control
    ...
    end
"""

from __future__ import annotations

from pathlib import Path

from .cppn import ActivationKind, ConnectionGene, Cppn, Genome, NodeGene, NodeRole

FORMAT_VERSION = 1
_HEADER = "softvox-genome"


class ParseError(Exception):
    def __init__(self, lineno: int, message: str):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}")


class VersionMismatch(Exception):
    pass


def serialize_genome(genome: Genome) -> str:
    lines = [f"{_HEADER} {FORMAT_VERSION}"]
    lines.append(f"id {genome.id}")
    lines.append(f"parent {'-' if genome.parent_id is None else genome.parent_id}")
    for name, net in (("morphology", genome.morphology_net), ("control", genome.control_net)):
        lines.append(f"net {name}")
        for node in net.nodes:
            lines.append(f"node {node.id} {node.role.value} {node.activation.value}")
        for conn in net.connections:
            lines.append(
                f"conn {conn.source} {conn.target} {conn.weight:.17g} {1 if conn.enabled else 0}"
            )
    lines.append("end")
    return "\n".join(lines) + "\n"


def _parse_int(lineno: int, token: str, what: str) -> int:
    try:
        return int(token)
    except ValueError as exc:
        raise ParseError(lineno, f"bad {what}: {token!r}") from exc


def parse_genome(text: str) -> Genome:
    lines = text.splitlines()
    if not lines:
        raise ParseError(1, "empty genome document")
    header = lines[0].split()
    if len(header) != 2 or header[0] != _HEADER:
        raise ParseError(1, f"expected '{_HEADER} <version>'")
    if _parse_int(1, header[1], "version") != FORMAT_VERSION:
        raise VersionMismatch(f"unsupported genome format version {header[1]}")

    genome_id: int | None = None
    parent_id: int | None = None
    nets: dict[str, tuple[list[NodeGene], list[ConnectionGene]]] = {}
    current: tuple[list[NodeGene], list[ConnectionGene]] | None = None
    ended = False

    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line:
            continue
        if ended:
            raise ParseError(lineno, "content after end")
        tokens = line.split()
        kind = tokens[0]
        if kind == "id" and len(tokens) == 2:
            genome_id = _parse_int(lineno, tokens[1], "id")
        elif kind == "parent" and len(tokens) == 2:
            parent_id = None if tokens[1] == "-" else _parse_int(lineno, tokens[1], "parent")
        elif kind == "net" and len(tokens) == 2:
            if tokens[1] not in ("morphology", "control") or tokens[1] in nets:
                raise ParseError(lineno, f"bad net name {tokens[1]!r}")
            current = ([], [])
            nets[tokens[1]] = current
        elif kind == "node" and len(tokens) == 4:
            if current is None:
                raise ParseError(lineno, "node outside a net section")
            try:
                role = NodeRole(tokens[2])
                activation = ActivationKind(tokens[3])
            except ValueError as exc:
                raise ParseError(lineno, str(exc)) from exc
            current[0].append(NodeGene(_parse_int(lineno, tokens[1], "node id"), role, activation))
        elif kind == "conn" and len(tokens) == 5:
            if current is None:
                raise ParseError(lineno, "conn outside a net section")
            try:
                weight = float(tokens[3])
            except ValueError as exc:
                raise ParseError(lineno, f"bad weight: {tokens[3]!r}") from exc
            current[1].append(
                ConnectionGene(
                    _parse_int(lineno, tokens[1], "source"),
                    _parse_int(lineno, tokens[2], "target"),
                    weight,
                    tokens[4] == "1",
                )
            )
        elif kind == "end" and len(tokens) == 1:
            ended = True
        else:
            raise ParseError(lineno, f"unrecognized line {line!r}")

    if not ended:
        raise ParseError(len(lines), "missing end marker")
    if genome_id is None or "morphology" not in nets or "control" not in nets:
        raise ParseError(len(lines), "incomplete genome document")
    try:
        morphology = Cppn(tuple(nets["morphology"][0]), tuple(nets["morphology"][1]))
        control = Cppn(tuple(nets["control"][0]), tuple(nets["control"][1]))
    except ValueError as exc:
        raise ParseError(len(lines), f"invalid network: {exc}") from exc
    return Genome(morphology_net=morphology, control_net=control, id=genome_id, parent_id=parent_id)


def write_genome(genome: Genome, path: str | Path) -> None:
    Path(path).write_text(serialize_genome(genome))


def read_genome(path: str | Path) -> Genome:
    return parse_genome(Path(path).read_text())
