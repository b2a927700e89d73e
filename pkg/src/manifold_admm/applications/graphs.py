"""Weighted graphs and the plain-text formats used to exchange them.

Graph files follow the rudy / Biq Mac layout: a header line ``n m`` followed
by ``m`` lines ``i j w`` with 1-indexed endpoints. Edge lists for unweighted
networks use the same layout and may omit ``w`` (taken as 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "FormatError",
    "WeightedGraph",
    "read_graph",
    "write_graph",
    "parse_graph",
    "format_graph",
    "random_graph",
    "read_labels",
    "write_labels",
    "read_tensor",
    "write_tensor",
]


class FormatError(ValueError):
    """Malformed input file; the message names the offending line."""


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """Undirected graph with nonnegative weights and a dense symmetric weight
    matrix with zero diagonal."""

    n: int
    W: np.ndarray

    def __post_init__(self):
        W = np.asarray(self.W, dtype=float)
        if W.shape != (self.n, self.n):
            raise ValueError(f"weight matrix must be {self.n} x {self.n}")
        if not np.allclose(W, W.T):
            raise ValueError("weight matrix must be symmetric")
        if np.any(np.diag(W) != 0):
            raise ValueError("weight matrix must have a zero diagonal")
        if np.any(W < 0):
            raise ValueError("weights must be nonnegative")
        object.__setattr__(self, "W", W)

    @classmethod
    def from_edges(cls, n, edges):
        """Build from ``(i, j, w)`` triples with 1-indexed endpoints."""
        if n < 1:
            raise ValueError("graph needs at least one node")
        W = np.zeros((n, n))
        for i, j, w in edges:
            if not (1 <= i <= n and 1 <= j <= n) or i == j:
                raise ValueError(f"invalid edge ({i}, {j})")
            if w < 0:
                raise ValueError(f"negative weight on edge ({i}, {j})")
            W[i - 1, j - 1] += w
            W[j - 1, i - 1] += w
        return cls(n, W)

    @property
    def edges(self):
        iu, ju = np.nonzero(np.triu(self.W, 1))
        return [(int(i) + 1, int(j) + 1, float(self.W[i, j])) for i, j in zip(iu, ju)]

    @property
    def total_weight(self):
        return float(np.triu(self.W, 1).sum())


def parse_graph(text, default_weight=None):
    """Parse rudy-format text. With ``default_weight`` the weight column is
    optional."""
    lines = [(k + 1, ln.split()) for k, ln in enumerate(text.splitlines())]
    lines = [(k, t) for k, t in lines if t and not t[0].startswith(("#", "%"))]
    if not lines:
        raise FormatError("line 1: empty graph file")
    k0, head = lines[0]
    try:
        n, m = int(head[0]), int(head[1])
        if len(head) != 2:
            raise ValueError
    except (ValueError, IndexError):
        raise FormatError(f"line {k0}: header must be 'n m'") from None
    if n < 1 or m < 0:
        raise FormatError(f"line {k0}: invalid node or edge count")
    body = lines[1:]
    if len(body) != m:
        raise FormatError(f"line {k0}: header announces {m} edges, found {len(body)}")
    edges = []
    for k, tok in body:
        try:
            if len(tok) == 3:
                i, j, w = int(tok[0]), int(tok[1]), float(tok[2])
            elif len(tok) == 2 and default_weight is not None:
                i, j, w = int(tok[0]), int(tok[1]), float(default_weight)
            else:
                raise ValueError
        except ValueError:
            raise FormatError(f"line {k}: expected 'i j w'") from None
        if not (1 <= i <= n and 1 <= j <= n) or i == j:
            raise FormatError(f"line {k}: endpoint out of range or self-loop ({i}, {j})")
        if w < 0:
            raise FormatError(f"line {k}: negative weight")
        edges.append((i, j, w))
    return WeightedGraph.from_edges(n, edges)


def read_graph(path, default_weight=None):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return parse_graph(text, default_weight)
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from None


def _fmt_w(w):
    return str(int(w)) if float(w).is_integer() else repr(float(w))


def format_graph(g):
    edges = g.edges
    out = [f"{g.n} {len(edges)}"]
    out += [f"{i} {j} {_fmt_w(w)}" for i, j, w in edges]
    return "\n".join(out) + "\n"


def write_graph(path, g):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_graph(g))


def random_graph(n, density=0.5, rng=None, weights="unit"):
    """Erdos-Renyi graph; ``weights`` is ``"unit"`` or ``"int"`` (uniform
    integers in 1..10)."""
    rng = np.random.default_rng(0) if rng is None else rng
    mask = np.triu(rng.random((n, n)) < density, 1)
    if weights == "unit":
        w = np.ones((n, n))
    elif weights == "int":
        w = rng.integers(1, 11, size=(n, n)).astype(float)
    else:
        raise ValueError("weights must be 'unit' or 'int'")
    W = np.where(mask, w, 0.0)
    return WeightedGraph(n, W + W.T)


def read_labels(path):
    """One integer label per line."""
    labels = []
    try:
        with open(path, encoding="utf-8") as fh:
            for k, ln in enumerate(fh, 1):
                s = ln.strip()
                if not s or s.startswith("#"):
                    continue
                try:
                    labels.append(int(s.split()[-1]))
                except ValueError:
                    raise FormatError(f"{path}: line {k}: expected an integer label") from None
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc.strerror}") from None
    return np.asarray(labels, dtype=int)


def write_labels(path, labels):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("".join(f"{int(v)}\n" for v in labels))


def read_tensor(path):
    """Header ``d n_1 ... n_d`` then the values in row-major order."""
    try:
        with open(path, encoding="utf-8") as fh:
            tokens = fh.read().split()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc.strerror}") from None
    try:
        d = int(tokens[0])
        shape = tuple(int(t) for t in tokens[1:1 + d])
        if d < 1 or len(shape) != d or min(shape) < 1:
            raise ValueError
    except (ValueError, IndexError):
        raise FormatError(f"{path}: line 1: header must be 'd n_1 ... n_d'") from None
    vals = tokens[1 + d:]
    size = int(np.prod(shape))
    if len(vals) != size:
        raise FormatError(f"{path}: expected {size} values, found {len(vals)}")
    try:
        data = np.array([float(v) for v in vals])
    except ValueError:
        raise FormatError(f"{path}: non-numeric tensor entry") from None
    return data.reshape(shape)


def write_tensor(path, t):
    t = np.asarray(t, dtype=float)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(" ".join(str(s) for s in (t.ndim,) + t.shape) + "\n")
        fh.write("\n".join(repr(float(v)) for v in t.ravel()) + "\n")
