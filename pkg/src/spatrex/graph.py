"""Frequency-weighted directed graphs of place triples, with exports.

Nodes are the distinct normalized place labels appearing in valid triples
(surface forms are kept verbatim, never merged); each directed edge
subject -> object carries the relation and a weight equal to that exact
triple's multiplicity.  Exports are byte-deterministic: nodes and edges are
sorted lexicographically, so shuffled input triples serialize identically.

Formats: GEXF 1.2draft XML (directed edge default, float ``weight``
attributes), Graphviz DOT (relation as edge label, ``penwidth`` = 1 + weight)
and JSON Lines of edges.  Rendering/layout stays with external viewers.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence
from xml.sax.saxutils import quoteattr

from .triples import VALID, SemanticTriple, normalize_place

GEXF_NAMESPACE = "http://www.gexf.net/1.2draft"

FORMATS = ("gexf", "dot", "jsonl")


class GraphError(Exception):
    """Raised for invalid construction input or unknown export formats."""


@dataclass(frozen=True)
class TripleGraph:
    nodes: frozenset[str]
    edges: Mapping[tuple[str, str, str], int]  # (subject, object, relation) -> weight

    def sorted_nodes(self) -> list[str]:
        return sorted(self.nodes)

    def sorted_edges(self) -> list[tuple[tuple[str, str, str], int]]:
        return sorted(self.edges.items())


def build_graph(triples: Sequence[SemanticTriple]) -> TripleGraph:
    """Aggregate valid triples into a weighted directed graph.

    The caller filters to validity=valid beforehand; anything else here is an
    error.  Edge weight is the multiplicity of the exact (subject, object,
    relation) combination after place normalization.
    """
    weights: Counter[tuple[str, str, str]] = Counter()
    nodes: set[str] = set()
    for triple in triples:
        if triple.validity != VALID:
            raise GraphError(
                f"graph input must be valid triples only, got validity={triple.validity!r} "
                f"for <{triple.subject}, {triple.relation}, {triple.object}>"
            )
        subject = normalize_place(triple.subject)
        obj = normalize_place(triple.object)
        if subject == obj:
            raise GraphError(f"self-loop edge rejected: {subject!r} -> {obj!r}")
        nodes.add(subject)
        nodes.add(obj)
        weights[(subject, obj, triple.relation)] += 1
    return TripleGraph(nodes=frozenset(nodes), edges=dict(weights))


def export(graph: TripleGraph, format: str) -> bytes:
    """Serialize the graph; output bytes are stable for equal graphs."""
    if format == "gexf":
        return _to_gexf(graph)
    if format == "dot":
        return _to_dot(graph)
    if format == "jsonl":
        return _to_jsonl(graph)
    raise GraphError(f"unknown export format {format!r} (expected one of {FORMATS})")


def _to_gexf(graph: TripleGraph) -> bytes:
    nodes = graph.sorted_nodes()
    node_ids = {label: str(i) for i, label in enumerate(nodes)}
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<gexf xmlns={quoteattr(GEXF_NAMESPACE)} version="1.2">',
        '  <graph mode="static" defaultedgetype="directed">',
        '    <attributes class="edge">',
        '      <attribute id="0" title="relation" type="string"/>',
        "    </attributes>",
        "    <nodes>",
    ]
    for label in nodes:
        lines.append(f"      <node id={quoteattr(node_ids[label])} label={quoteattr(label)}/>")
    lines.append("    </nodes>")
    lines.append("    <edges>")
    for edge_number, ((subject, obj, relation), weight) in enumerate(graph.sorted_edges()):
        lines.append(
            f'      <edge id="{edge_number}" source={quoteattr(node_ids[subject])} '
            f'target={quoteattr(node_ids[obj])} weight="{float(weight)}">'
        )
        lines.append("        <attvalues>")
        lines.append(f'          <attvalue for="0" value={quoteattr(relation)}/>')
        lines.append("        </attvalues>")
        lines.append("      </edge>")
    lines.append("    </edges>")
    lines.append("  </graph>")
    lines.append("</gexf>")
    return ("\n".join(lines) + "\n").encode("utf-8")


def _dot_quote(value: str) -> str:
    escaped = value.replace("\\", "\\\\").replace('"', '\\"')
    return f'"{escaped}"'


def _to_dot(graph: TripleGraph) -> bytes:
    lines = ["digraph triples {"]
    for label in graph.sorted_nodes():
        lines.append(f"  {_dot_quote(label)};")
    for (subject, obj, relation), weight in graph.sorted_edges():
        lines.append(
            f"  {_dot_quote(subject)} -> {_dot_quote(obj)} "
            f"[label={_dot_quote(relation)}, penwidth={1 + weight}];"
        )
    lines.append("}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def _to_jsonl(graph: TripleGraph) -> bytes:
    lines = [
        json.dumps(
            {"subject": subject, "relation": relation, "object": obj, "weight": weight},
            ensure_ascii=False,
        )
        for (subject, obj, relation), weight in graph.sorted_edges()
    ]
    return "".join(line + "\n" for line in lines).encode("utf-8")


def total_weight(graph: TripleGraph) -> int:
    return sum(graph.edges.values())
