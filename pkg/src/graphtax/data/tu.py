"""TU text-format datasets.

Layout for a dataset called ``NAME`` (all ids 1-based)::

    NAME_A.txt                 one "u, v" pair per line, global node ids
    NAME_graph_indicator.txt   graph id of node i on line i
    NAME_graph_labels.txt      class of graph j on line j
    NAME_node_labels.txt       optional, one integer per node
    NAME_node_attributes.txt   optional, comma-separated floats per node

The same layout is used for everything this package writes, plus a
``NAME_graphtax.json`` sidecar recording the task kind, class count, split and
whether node labels are prediction targets.  Without a sidecar the directory
is read as a plain graph-classification dataset.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import InputError, LoadError
from ..graph import Dataset, Graph, SplitSpec, TaskKind, canonical_edges

SIDECAR = "{name}_graphtax.json"


def _lines(path: Path):
    try:
        with open(path, encoding="utf-8") as fh:
            for i, line in enumerate(fh, start=1):
                line = line.strip()
                if line:
                    yield i, line
    except OSError as exc:
        raise LoadError(path, None, f"cannot read file: {exc}") from exc


def _read_ints(path: Path) -> list[int]:
    out = []
    for i, line in _lines(path):
        try:
            out.append(int(float(line)) if "." in line else int(line))
        except ValueError:
            raise LoadError(path, i, f"expected an integer, got {line!r}") from None
    return out


def _read_rows(path: Path, width: Optional[int] = None) -> list[list[float]]:
    rows = []
    for i, line in _lines(path):
        try:
            row = [float(tok) for tok in line.split(",")]
        except ValueError:
            raise LoadError(path, i, f"unparsable values {line!r}") from None
        if width is not None and len(row) != width:
            raise LoadError(path, i, f"expected {width} values, got {len(row)}")
        width = len(row)
        rows.append(row)
    return rows


def _read_edges(path: Path, num_nodes: int) -> np.ndarray:
    pairs = []
    for i, line in _lines(path):
        parts = line.split(",")
        if len(parts) != 2:
            raise LoadError(path, i, f"expected 'u, v', got {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise LoadError(path, i, f"unparsable edge {line!r}") from None
        if not (1 <= u <= num_nodes and 1 <= v <= num_nodes):
            raise LoadError(path, i, f"dangling node id in edge ({u}, {v}); nodes are 1..{num_nodes}")
        pairs.append((u - 1, v - 1))
    return np.array(pairs, dtype=np.int64).reshape(-1, 2)


def _dense_ids(values) -> tuple[np.ndarray, list[int]]:
    vocab = sorted(set(values))
    index = {v: i for i, v in enumerate(vocab)}
    return np.array([index[v] for v in values], dtype=np.int64), vocab


def load_tu(directory, name: str) -> Dataset:
    d = Path(directory)
    f = lambda suffix: d / f"{name}_{suffix}.txt"  # noqa: E731
    meta_path = d / SIDECAR.format(name=name)
    meta = {}
    if meta_path.exists():
        try:
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise LoadError(meta_path, exc.lineno, f"invalid JSON: {exc.msg}") from None
    task = TaskKind(meta.get("task", TaskKind.GRAPH.value))

    for required in ("A", "graph_indicator"):
        if not f(required).exists():
            raise LoadError(f(required), None, "missing required file")
    indicator = _read_ints(f("graph_indicator"))
    num_nodes = len(indicator)
    if indicator and min(indicator) < 1:
        raise LoadError(f("graph_indicator"), indicator.index(min(indicator)) + 1, "graph ids start at 1")
    num_graphs = int(meta.get("num_graphs", max(indicator, default=0)))
    if indicator and max(indicator) > num_graphs:
        raise LoadError(f("graph_indicator"), None, f"graph id {max(indicator)} exceeds {num_graphs} graphs")

    node_graph = np.array(indicator, dtype=np.int64) - 1
    local = np.zeros(num_nodes, dtype=np.int64)
    counts = np.zeros(num_graphs, dtype=np.int64)
    for i, gid in enumerate(node_graph):
        local[i] = counts[gid]
        counts[gid] += 1

    edges = _read_edges(f("A"), num_nodes)
    if len(edges):
        cross = node_graph[edges[:, 0]] != node_graph[edges[:, 1]]
        if cross.any():
            bad = int(np.flatnonzero(cross)[0])
            raise LoadError(f("A"), None, f"edge {bad + 1} joins nodes of different graphs")

    attributes = None
    if f("node_attributes").exists():
        rows = _read_rows(f("node_attributes"))
        if len(rows) != num_nodes:
            raise LoadError(f("node_attributes"), None, f"{len(rows)} rows for {num_nodes} nodes")
        attributes = np.array(rows, dtype=np.float64).reshape(num_nodes, -1)

    node_label_values = None
    if f("node_labels").exists():
        node_label_values = _read_ints(f("node_labels"))
        if len(node_label_values) != num_nodes:
            raise LoadError(f("node_labels"), None, f"{len(node_label_values)} labels for {num_nodes} nodes")

    targets_are_nodes = bool(meta.get("node_targets", False)) or task.node_level
    if targets_are_nodes and node_label_values is None:
        raise LoadError(f("node_labels"), None, "node-level task without node labels")

    if attributes is not None:
        features = attributes
    elif "feature_dim" in meta and int(meta["feature_dim"]) == 0:
        features = np.zeros((num_nodes, 0))
    elif node_label_values is not None and not targets_are_nodes:
        ids, vocab = _dense_ids(node_label_values)
        features = np.zeros((num_nodes, len(vocab)))
        features[np.arange(num_nodes), ids] = 1.0
    else:
        features = np.ones((num_nodes, 1))

    graph_labels = None
    if f("graph_labels").exists():
        graph_labels = _read_ints(f("graph_labels"))
        if len(graph_labels) != num_graphs:
            raise LoadError(f("graph_labels"), None, f"{len(graph_labels)} labels for {num_graphs} graphs")
    elif task is TaskKind.GRAPH:
        raise LoadError(f("graph_labels"), None, "missing required file")

    if meta:
        if "num_classes" not in meta:
            raise LoadError(meta_path, None, "sidecar lacks 'num_classes'")
        num_classes = int(meta["num_classes"])
        glabels = graph_labels if meta.get("graph_labels") else None
        nlabels = np.array(node_label_values, dtype=np.int64) if targets_are_nodes else None
    else:
        glabels_arr, vocab = _dense_ids(graph_labels)
        glabels = glabels_arr.tolist()
        num_classes = len(vocab)
        nlabels = None

    order = np.argsort(node_graph, kind="stable")
    starts = np.concatenate([[0], np.cumsum(counts)])
    edge_graph = node_graph[edges[:, 0]]
    edge_order = np.argsort(edge_graph, kind="stable")
    edges, edge_graph = edges[edge_order], edge_graph[edge_order]
    edge_starts = np.searchsorted(edge_graph, np.arange(num_graphs + 1))
    graphs = []
    for gid in range(num_graphs):
        nodes = order[starts[gid]:starts[gid + 1]]
        g_edges = canonical_edges(local[edges[edge_starts[gid]:edge_starts[gid + 1]]])
        graphs.append(Graph(
            n=len(nodes),
            edges=g_edges,
            features=features[nodes],
            node_labels=None if nlabels is None else nlabels[nodes],
            graph_label=None if glabels is None else glabels[gid],
        ))
    split = None
    if meta.get("split"):
        s = meta["split"]
        split = SplitSpec(s["train"], s["val"], s["test"])
    return Dataset(meta.get("name", name), graphs, task, num_classes, split)


def find_name(directory) -> str:
    """Dataset name inside ``directory``, from the sidecar or the ``*_A.txt`` file."""
    d = Path(directory)
    if not d.is_dir():
        raise InputError(f"{d}: not a directory")
    for pattern, suffix in (("*_graphtax.json", "_graphtax.json"), ("*_A.txt", "_A.txt")):
        hits = sorted(p.name[: -len(suffix)] for p in d.glob(pattern))
        if len(hits) == 1:
            return hits[0]
        if len(hits) > 1:
            raise InputError(f"{d}: several datasets present ({', '.join(hits)}); pass a name")
    raise InputError(f"{d}: no TU dataset found")


def load_dir(directory, name: Optional[str] = None) -> Dataset:
    return load_tu(directory, name or find_name(directory))


def _fmt(x: float) -> str:
    return repr(float(x))


def write_tu(dataset: Dataset, directory) -> Path:
    """Write ``dataset`` in TU layout plus sidecar; returns the directory."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    name = dataset.name
    a_lines, ind_lines, nl_lines, attr_lines, gl_lines = [], [], [], [], []
    offset = 0
    has_node_labels = all(g.node_labels is not None for g in dataset.graphs) and len(dataset.graphs) > 0
    has_graph_labels = all(g.graph_label is not None for g in dataset.graphs)
    fdim = dataset.feature_dim
    for gid, g in enumerate(dataset.graphs, start=1):
        for u, v in g.edges.tolist():
            a_lines.append(f"{u + offset + 1}, {v + offset + 1}")
            a_lines.append(f"{v + offset + 1}, {u + offset + 1}")
        ind_lines.extend([str(gid)] * g.n)
        if has_node_labels:
            nl_lines.extend(str(int(x)) for x in g.node_labels)
        if fdim:
            attr_lines.extend(", ".join(_fmt(x) for x in row) for row in g.features)
        if has_graph_labels:
            gl_lines.append(str(g.graph_label))
        offset += g.n

    def put(suffix, lines):
        (d / f"{name}_{suffix}.txt").write_text("".join(line + "\n" for line in lines), encoding="utf-8")

    put("A", a_lines)
    put("graph_indicator", ind_lines)
    for suffix in ("graph_labels", "node_labels", "node_attributes"):
        (d / f"{name}_{suffix}.txt").unlink(missing_ok=True)
    if has_graph_labels:
        put("graph_labels", gl_lines)
    if has_node_labels:
        put("node_labels", nl_lines)
    if fdim:
        put("node_attributes", attr_lines)
    meta = {
        "name": name,
        "task": dataset.task.value,
        "num_classes": dataset.num_classes,
        "num_graphs": len(dataset.graphs),
        "feature_dim": fdim,
        "node_targets": has_node_labels,
        "split": dataset.split.to_dict() if dataset.split else None,
    }
    if has_graph_labels:
        meta["graph_labels"] = True
    (d / SIDECAR.format(name=name)).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return d
