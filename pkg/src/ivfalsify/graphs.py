"""Counterfactual restrictions read off a causal graph.

A graph here is a set of parents-child families (the solid arrows) plus
dashed arcs marking pairs whose background disturbances may be dependent.
Two syntactic rule families translate it into counterfactual statements:

* *Exclusion*: a node's response under its own parents is unchanged by
  additionally holding any disjoint set of observed nodes fixed --
  ``Y(pa) = Y(pa, s)`` for every nonempty S disjoint from the parents and Y
  itself (enumerated up to a configurable size cap).
* *Independence*: a node's response is jointly independent of the responses
  of every node it shares no dashed arc with -- one maximal-set statement
  per node, rendered pairwise when the set is a singleton.

Rendering is canonical (arguments sorted, lowercase realizations, root nodes
shown bare), so structural equality of restrictions is string equality and
the same graph always produces byte-identical output.  Only the syntactic
translation is implemented; no probabilistic reasoning is done with the
restrictions.
"""

from __future__ import annotations

import graphlib
import itertools
from dataclasses import dataclass
from typing import Iterable, Mapping

from .errors import FalsifyError

DEFAULT_SET_CAP = 3


class GraphError(FalsifyError, ValueError):
    """The graph violates its construction contract."""


@dataclass(frozen=True)
class CausalGraph:
    """Nodes, acyclic parent sets, and dashed (possibly-dependent) pairs."""

    nodes: tuple[str, ...]
    parents: Mapping[str, frozenset[str]]
    dashed_arcs: frozenset[frozenset[str]]

    def __post_init__(self) -> None:
        nodes = tuple(str(n) for n in self.nodes)
        if len(set(nodes)) != len(nodes):
            raise GraphError("duplicate node labels")
        node_set = set(nodes)
        parents = {n: frozenset() for n in nodes}
        for child, pset in dict(self.parents).items():
            if child not in node_set:
                raise GraphError(f"parent map references unknown node {child!r}")
            pset = frozenset(str(p) for p in pset)
            if not pset <= node_set:
                raise GraphError(f"parents of {child!r} reference unknown nodes")
            if child in pset:
                raise GraphError(f"node {child!r} cannot be its own parent")
            parents[child] = pset
        try:
            tuple(graphlib.TopologicalSorter({n: parents[n] for n in nodes}).static_order())
        except graphlib.CycleError as exc:
            raise GraphError(f"parent relation is cyclic: {exc.args[1]}") from None
        arcs = set()
        for pair in self.dashed_arcs:
            pair = frozenset(str(p) for p in pair)
            if len(pair) != 2 or not pair <= node_set:
                raise GraphError(f"dashed arc {sorted(pair)} must join two distinct known nodes")
            arcs.add(pair)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "parents", parents)
        object.__setattr__(self, "dashed_arcs", frozenset(arcs))

    @classmethod
    def from_dict(cls, data: dict) -> "CausalGraph":
        if "nodes" not in data:
            raise GraphError("graph JSON is missing 'nodes'")
        return cls(
            nodes=tuple(data["nodes"]),
            parents={k: frozenset(v) for k, v in data.get("parents", {}).items()},
            dashed_arcs=frozenset(frozenset(pair) for pair in data.get("dashed", [])),
        )

    def to_dict(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "parents": {n: sorted(self.parents[n]) for n in self.nodes if self.parents[n]},
            "dashed": sorted(sorted(pair) for pair in self.dashed_arcs),
        }


@dataclass(frozen=True)
class Restriction:
    """One canonical counterfactual statement."""

    kind: str  # "exclusion" | "independence"
    subject: str
    detail: tuple[str, ...]
    line: str


def render_term(node: str, args: Iterable[str]) -> str:
    """Canonical counterfactual term: bare symbol for roots, sorted lowercase args."""
    arglist = sorted(str(a).lower() for a in args)
    if not arglist:
        return node
    return f"{node}({','.join(arglist)})"


def _term_for(graph: CausalGraph, node: str) -> str:
    return render_term(node, graph.parents[node])


def exclusion_restrictions(
    graph: CausalGraph, max_set_size: int = DEFAULT_SET_CAP
) -> list[Restriction]:
    """One equality chain per node with at least one usable held-fixed set.

    Chain terms are ordered by argument count (the bare parents term first),
    then by the rendered string, and nodes are emitted in sorted label order.
    """
    if max_set_size < 1:
        raise ValueError("max_set_size must be at least 1")
    out: list[Restriction] = []
    for node in sorted(graph.nodes):
        base_args = graph.parents[node]
        candidates = sorted(set(graph.nodes) - base_args - {node})
        variants = []
        for size in range(1, min(max_set_size, len(candidates)) + 1):
            for extra in itertools.combinations(candidates, size):
                variants.append(render_term(node, base_args | set(extra)))
        if not variants:
            continue
        subject = render_term(node, base_args)
        line = " = ".join([subject, *variants])
        out.append(
            Restriction(kind="exclusion", subject=subject, detail=tuple(variants), line=line)
        )
    return out


def independence_restrictions(graph: CausalGraph) -> list[Restriction]:
    """One maximal joint-independence statement per node, if any partner exists.

    The partner set of a node is every other node it shares no dashed arc
    with; singleton sets render pairwise, larger sets render as a braced
    joint statement.  Adding a dashed arc can only shrink this output.
    """
    out: list[Restriction] = []
    for node in sorted(graph.nodes):
        partners = sorted(
            m
            for m in graph.nodes
            if m != node and frozenset({m, node}) not in graph.dashed_arcs
        )
        if not partners:
            continue
        terms = tuple(_term_for(graph, m) for m in partners)
        subject = _term_for(graph, node)
        if len(terms) == 1:
            line = f"{subject} ⊥ {terms[0]}"
        else:
            line = f"{subject} ⊥ {{{', '.join(terms)}}}"
        out.append(
            Restriction(kind="independence", subject=subject, detail=terms, line=line)
        )
    return out
