"""Multi-graph edge-list files and the synthetic desk-scale dataset.

File format::

    # comment
    graph <id> <n>
    u v
    ...

Blank lines are ignored; node ids are 0-based.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graph import Graph

log = logging.getLogger(__name__)


class DatasetParseError(ValueError):
    def __init__(self, message: str, line: int | None = None, path=None):
        where = "" if line is None else f"line {line}: "
        prefix = f"{path}: " if path else ""
        super().__init__(f"{prefix}{where}{message}")
        self.line = line


@dataclass
class Dataset:
    graphs: list[Graph]
    ids: list[str]
    duplicates: int = 0
    warnings: list[str] = field(default_factory=list)


def parse_dataset(text: str, path=None) -> Dataset:
    graphs: list[Graph] = []
    ids: list[str] = []
    dup = 0
    cur_n = None
    cur_edges: set = set()
    cur_id = None

    def flush():
        if cur_n is not None:
            graphs.append(Graph(cur_n, frozenset(cur_edges)))
            ids.append(cur_id)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "graph":
            if len(parts) != 3:
                raise DatasetParseError("expected 'graph <id> <n>'", lineno, path)
            flush()
            try:
                cur_n = int(parts[2])
            except ValueError:
                raise DatasetParseError(f"node count {parts[2]!r} is not an integer", lineno, path) from None
            if cur_n < 0:
                raise DatasetParseError("node count must be non-negative", lineno, path)
            cur_id, cur_edges = parts[1], set()
            continue
        if cur_n is None:
            raise DatasetParseError("edge line before any 'graph' header", lineno, path)
        if len(parts) != 2:
            raise DatasetParseError(f"expected 'u v', got {line!r}", lineno, path)
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise DatasetParseError(f"non-integer node id in {line!r}", lineno, path) from None
        if u == v:
            raise DatasetParseError(f"self loop on node {u}", lineno, path)
        if not (0 <= u < cur_n and 0 <= v < cur_n):
            raise DatasetParseError(f"node id out of range 0..{cur_n - 1}", lineno, path)
        e = (min(u, v), max(u, v))
        if e in cur_edges:
            dup += 1
        cur_edges.add(e)
    flush()
    ds = Dataset(graphs, ids, dup)
    if dup:
        msg = f"{dup} duplicate edge line(s) collapsed"
        ds.warnings.append(msg)
        log.warning("%s%s", f"{path}: " if path else "", msg)
    return ds


def read_dataset(path) -> Dataset:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise DatasetParseError(f"cannot read: {exc}", None, path) from exc
    return parse_dataset(text, path)


def format_dataset(graphs, ids=None) -> str:
    out = []
    for k, g in enumerate(graphs):
        gid = ids[k] if ids is not None else str(k)
        out.append(f"graph {gid} {g.n}\n")
        out.extend(f"{u} {v}\n" for u, v in sorted(g.edges))
    return "".join(out)


def write_dataset(path, graphs, ids=None) -> None:
    Path(path).write_text(format_dataset(graphs, ids), encoding="utf-8")


# synthetic graphs ------------------------------------------------------------------


def grid_graph(rows: int, cols: int) -> Graph:
    edges = set()
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edges.add((v, v + 1))
            if r + 1 < rows:
                edges.add((v, v + cols))
    return Graph(rows * cols, frozenset(edges))


def community_graph(n: int, rng: np.random.Generator, p_in: float = 0.6, n_bridges: int = 1) -> Graph:
    """Two dense random blocks joined by a few bridge edges; always connected."""
    sizes = (n // 2, n - n // 2)
    offsets = (0, sizes[0])
    while True:
        edges = set()
        for size, off in zip(sizes, offsets):
            for u in range(size):
                for v in range(u + 1, size):
                    if rng.random() < p_in:
                        edges.add((off + u, off + v))
        for _ in range(n_bridges):
            u = int(rng.integers(sizes[0]))
            v = offsets[1] + int(rng.integers(sizes[1]))
            edges.add((u, v))
        g = Graph(n, frozenset(edges))
        if g.is_connected():
            return g


def erdos_renyi(n: int, p: float, rng: np.random.Generator) -> Graph:
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(iu.size) < p
    return Graph(n, frozenset(zip(iu[keep].tolist(), ju[keep].tolist())))


GRID_SHAPES = [(r, c) for r in range(2, 6) for c in range(r, 11) if 6 <= r * c <= 20]


def synthetic_dataset(count: int, seed: int = 0, n_min: int = 6, n_max: int = 20) -> list[Graph]:
    """Alternating grids and two-community graphs with ``n_min <= n <= n_max``."""
    rng = np.random.default_rng(seed)
    shapes = [s for s in GRID_SHAPES if n_min <= s[0] * s[1] <= n_max]
    graphs = []
    for k in range(count):
        if k % 2 == 0:
            r, c = shapes[int(rng.integers(len(shapes)))]
            graphs.append(grid_graph(r, c))
        else:
            graphs.append(community_graph(int(rng.integers(n_min, n_max + 1)), rng))
    return graphs
