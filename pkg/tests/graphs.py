"""Hypothesis strategies for random must-graphs and the join properties checked on them."""

from hypothesis import strategies as st

from untag.must_pta import ASSIGNMENT, BRANCH, EPS, Graph, join, join_product

VARIABLES = ["a", "b", "c"]
EDGE_LABELS = [EPS, "f", "g", "u"]
MAX_INT_SET = 6


@st.composite
def graphs(draw, variables=VARIABLES) -> Graph:
    size = draw(st.integers(1, 7))
    g = Graph()
    for _ in range(size):
        g.fresh()
    roots = draw(st.lists(st.sampled_from(variables), min_size=1, unique=True))
    for v in sorted(roots):
        g.roots[v] = draw(st.integers(0, size - 1))
    for n in range(size):
        for lab in draw(st.lists(st.sampled_from(EDGE_LABELS), unique=True, max_size=3)):
            g.edges[n][lab] = draw(st.integers(0, size - 1))
        if draw(st.booleans()):
            vals = draw(st.frozensets(st.integers(0, 4), min_size=1, max_size=4))
            g.labels[n] = (vals, draw(st.sampled_from([BRANCH, ASSIGNMENT])))
        if draw(st.integers(0, 3)) == 0:
            g.written[n] = draw(st.sampled_from(["f", "g"]))
    return g


graph_pairs = st.tuples(graphs(), graphs())


def reachable_restriction(g: Graph) -> Graph:
    return g.canonical()


def idempotence_holds(g: Graph) -> bool:
    return join(g, g, MAX_INT_SET) == reachable_restriction(g)


def commutativity_holds(g1: Graph, g2: Graph) -> bool:
    return join(g1, g2, MAX_INT_SET) == join(g2, g1, MAX_INT_SET)


def join_problems(g1: Graph, g2: Graph) -> list[str]:
    """Edges or labels of the product that the two inputs do not justify."""
    out, pairs = join_product(g1, g2, MAX_INT_SET)
    problems = []
    for (a, b), n in pairs.items():
        for lab, m in out.edges[n].items():
            src = [k for k, v in pairs.items() if v == m]
            (a2, b2), = src
            if g1.edges.get(a, {}).get(lab) != a2 or g2.edges.get(b, {}).get(lab) != b2:
                problems.append(f"edge {n} -{lab}-> {m} not in both inputs")
        both = a in g1.labels and b in g2.labels
        if not both and n in out.labels:
            problems.append(f"node {n} labelled although an input is unlabelled")
        if both:
            union = g1.labels[a][0] | g2.labels[b][0]
            if len(union) <= MAX_INT_SET and out.labels.get(n, (None,))[0] != union:
                problems.append(f"node {n} label {out.labels.get(n)} is not {sorted(union)}")
            if len(union) > MAX_INT_SET and n in out.labels:
                problems.append(f"node {n} keeps a label above the cap")
    for v in set(g1.roots) & set(g2.roots):
        if out.roots.get(v) != pairs[(g1.roots[v], g2.roots[v])]:
            problems.append(f"root {v} misplaced")
    return problems
