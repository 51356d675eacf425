"""Graph construction from windows of LS channel estimates.

Each antenna is a vertex carrying [Re, Im] of its current estimate; every
ordered pair of distinct antennas is a directed edge carrying the windowed
Pearson correlation of the real and imaginary parts of the two estimate
histories. Edges are stored in canonical (src, dst) lexicographic order.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput

# Denominator guard for degenerate (zero-variance) correlation windows.
CORR_DENOM_GUARD = 1e-12


def complete_edge_index(n_vertices: int):
    """(src, dst) arrays for the complete directed graph without self-loops,
    in canonical (src, dst) lexicographic order."""
    src, dst = np.nonzero(~np.eye(n_vertices, dtype=bool))
    return src, dst


@dataclass(frozen=True)
class ChannelGraph:
    """Featured graph for one time index.

    vertices: (n_vertices, F_v) float
    edge_src, edge_dst: (n_edges,) int in canonical (src, dst) order
    edges: (n_edges, F_e) float
    """

    vertices: np.ndarray
    edge_src: np.ndarray
    edge_dst: np.ndarray
    edges: np.ndarray
    time_index: int

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def vertex_dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def edge_dim(self) -> int:
        return self.edges.shape[1]


@dataclass(frozen=True)
class GraphWindow:
    """History matrix of LS estimates.

    history: (n_antennas, window_len) complex; column k holds the estimate
    at time n - k, so column 0 is the most recent sample.
    """

    history: np.ndarray

    def __post_init__(self):
        if self.history.ndim != 2 or self.history.shape[1] < 2:
            raise InvalidInput("window must have at least 2 columns")

    @property
    def window_len(self) -> int:
        return self.history.shape[1]


def ls_window(estimates: np.ndarray, n: int, window_len: int) -> GraphWindow:
    """Window [h(n), h(n-1), ..., h(n-L+1)] from a series of LS estimates.

    Indices before the start of the series are clamped to 0, duplicating
    the earliest available column.
    """
    idx = np.maximum(n - np.arange(window_len), 0)
    return GraphWindow(history=estimates[idx].T.copy())


def build_vertices(h_ls: np.ndarray) -> np.ndarray:
    """Vertex features [Re(h_i), Im(h_i)] per antenna, shape (n_antennas, 2)."""
    return np.column_stack([h_ls.real, h_ls.imag])


def _part_correlations(rows: np.ndarray) -> np.ndarray:
    # Pearson correlation matrix of the real-valued rows across window columns,
    # with zero-variance rows mapped to zero correlation.
    centered = rows - rows.mean(axis=1, keepdims=True)
    cov = centered @ centered.T
    norms = np.sqrt(np.diag(cov))
    denom = np.outer(norms, norms)
    out = np.zeros_like(cov)
    ok = denom > CORR_DENOM_GUARD
    out[ok] = cov[ok] / denom[ok]
    return out


def window_correlations(window: GraphWindow):
    """(corr_re, corr_im) full matrices over all antenna pairs."""
    return (
        _part_correlations(window.history.real),
        _part_correlations(window.history.imag),
    )


def edge_correlation(window: GraphWindow, i: int, j: int) -> np.ndarray:
    """Correlation features [corr of real parts, corr of imag parts] for one
    ordered antenna pair. Degenerate windows give 0 entries, never NaN."""
    if i == j:
        raise InvalidInput("edge endpoints must differ")
    corr_re, corr_im = window_correlations(window)
    return np.array([corr_re[i, j], corr_im[i, j]])


def build_graph(window: GraphWindow, time_index: int) -> ChannelGraph:
    """Complete correlation graph for the most recent column of the window."""
    n = window.history.shape[0]
    h_now = window.history[:, 0]
    corr_re, corr_im = window_correlations(window)
    src, dst = complete_edge_index(n)
    edges = np.column_stack([corr_re[src, dst], corr_im[src, dst]])
    return ChannelGraph(
        vertices=build_vertices(h_now),
        edge_src=src,
        edge_dst=dst,
        edges=edges,
        time_index=time_index,
    )


def concat_graphs(g_now: ChannelGraph, g_past: ChannelGraph) -> ChannelGraph:
    """Stack features of the current and lagged graphs along the feature axis."""
    if g_now.n_vertices != g_past.n_vertices:
        raise InvalidInput("graphs must have the same number of vertices")
    return ChannelGraph(
        vertices=np.hstack([g_now.vertices, g_past.vertices]),
        edge_src=g_now.edge_src,
        edge_dst=g_now.edge_dst,
        edges=np.hstack([g_now.edges, g_past.edges]),
        time_index=g_now.time_index,
    )


def readout(vertices: np.ndarray) -> np.ndarray:
    """Complex channel vector from 2-feature vertices: v[:, 0] + j v[:, 1]."""
    if vertices.ndim != 2 or vertices.shape[1] != 2:
        raise InvalidInput("readout requires exactly 2 features per vertex")
    return vertices[:, 0] + 1j * vertices[:, 1]


def permute_graph(graph: ChannelGraph, perm: np.ndarray) -> ChannelGraph:
    """Relabel antennas: vertex i of the result is vertex perm[i] of the input.

    Edges are relabeled consistently and re-sorted into canonical order.
    """
    perm = np.asarray(perm)
    n = graph.n_vertices
    if sorted(perm.tolist()) != list(range(n)):
        raise InvalidInput("perm must be a permutation of range(n_vertices)")
    # feature lookup by original ordered pair
    feat = np.zeros((n, n, graph.edge_dim))
    feat[graph.edge_src, graph.edge_dst] = graph.edges
    src, dst = complete_edge_index(n)
    edges = feat[perm[src], perm[dst]]
    return ChannelGraph(
        vertices=graph.vertices[perm],
        edge_src=src,
        edge_dst=dst,
        edges=edges,
        time_index=graph.time_index,
    )
