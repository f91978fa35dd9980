"""
DOT Export Module

Handles:
- Automata as GraphViz digraphs (marked states double-circled)
- RBTS game graphs: Y-states as boxes, Z-states as rounded boxes,
  pruned decisions dashed and gray, goal estimates double-bordered
"""

from modules.automata import Automaton, state_sort_key
from modules.rbts import RBTS


def _gvquote(s):
    return '"{}"'.format(str(s).replace("\\", "\\\\").replace('"', r'\"'))


def automaton_dot(automaton):
    """Yield the DOT text of one automaton, line by line"""
    yield f"digraph {_gvquote(automaton.name)} {{\n"
    yield "  rankdir=LR;\n"
    for state in sorted(automaton.states, key=state_sort_key):
        attrs = ["shape=doublecircle" if state in automaton.marked else "shape=circle"]
        if state == automaton.initial:
            attrs.append("style=bold")
        if state in automaton.unsafe:
            attrs.append("color=red")
        yield f"  {_gvquote(state)} [{' '.join(attrs)}];\n"
    for source, event, target in automaton.triples():
        yield f"  {_gvquote(source)} -> {_gvquote(target)} [label={_gvquote(event)}];\n"
    yield "}\n"


def rbts_dot(rbts):
    """Yield the DOT text of an RBTS; the initial Y-state is drawn bold"""
    model = rbts.mission.composite
    graph = rbts.graph
    ids = {}
    y_count = z_count = 0
    yield "digraph RBTS {\n"
    yield "  rankdir=TB;\n"
    for node, data in graph.nodes(data=True):
        if data["kind"] == "Y":
            ids[node] = f"y{y_count}"
            y_count += 1
            attrs = ["shape=box", f"label={_gvquote(node.estimate)}"]
            if data.get("goal"):
                attrs.append("peripheries=2")
            if node == rbts.initial:
                attrs.append("penwidth=2")
        else:
            ids[node] = f"z{z_count}"
            z_count += 1
            label = f"{node.estimate}\\n{node.decision.label(model)}"
            attrs = ["shape=box", f"label=\"{label}\""]
            if data["pruned"] is not None:
                attrs += ['style="rounded,dashed"', "color=gray", "fontcolor=gray"]
            else:
                attrs.append('style="rounded"')
        yield f"  {ids[node]} [{' '.join(attrs)}];\n"
    for source, target, data in graph.edges(data=True):
        if "decision" in data:
            attrs = [f"label={_gvquote(data['decision'].label(model))}"]
            if graph.nodes[target]["pruned"] is not None:
                attrs += ["style=dashed", "color=gray"]
            elif rbts.choice.get(source) == data["decision"]:
                attrs.append("penwidth=2")
        else:
            attrs = [f"label={_gvquote(data['event'])}"]
        yield f"  {ids[source]} -> {ids[target]} [{' '.join(attrs)}];\n"
    yield "}\n"


def export_dot(x):
    """
    DOT text for an automaton or an RBTS

    Parameters:
    -----------
    x : Automaton or RBTS

    Returns:
    --------
    dot : str
    """
    if isinstance(x, Automaton):
        return "".join(automaton_dot(x))
    if isinstance(x, RBTS):
        return "".join(rbts_dot(x))
    raise TypeError(f"cannot export {type(x).__name__} to DOT")
