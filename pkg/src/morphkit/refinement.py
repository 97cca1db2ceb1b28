"""Closed-curve boundary refinement by shortest path in a layered DAG.

Each contour sample contributes one column of m candidate points (its normal
fan line); choosing one point per column yields a closed curve. The optimal
curve minimizes

    sum_j vertex_cost[j][i_j]  +  sum_j concavity_penalty(v_{j-1}, v_j, v_{j+1})

cyclically, where vertex costs are negated gradient magnitudes (strong edges
are cheap) and the concavity penalty charges ``c * (theta - pi)`` whenever the
interior angle theta at a vertex exceeds pi. Adjacent columns are coupled by
the smoothness band ``|i_{j+1} - i_j| <= s``, which also applies to the wrap
from the last column back to the first; closure is modeled by a duplicated
copy of the first column appended after the last.

Because the penalty couples two consecutive edges, first-order state is not
enough: the DP state is (column, previous index, current index).
``exact_closure=True`` fixes both wraparound triples by seeding one DP run
per feasible (start, second) index pair and requiring the path to end at its
start index on the duplicated column; the result is globally optimal. The
approximate mode makes a single free-start pass and scores the wraparound
triples afterwards.

For a clockwise contour (shoelace area <= 0) a concave vertex is a leftward
turn, ``cross(v_j - v_{j-1}, v_{j+1} - v_j) > 0``, and ``theta - pi`` equals
the unsigned turning angle there.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .contour import NormalFan, build_normal_fan, extract_contour, resample_uniform
from .errors import BadM, BadN, BadParams, DimensionMismatch, RefinementError, TooLarge
from .imaging import (
    BinaryMask,
    GradientField,
    gradient_magnitude,
    rasterize_polygon,
    sample_bilinear_many,
)

__all__ = [
    "RefinementParams",
    "RefinementGraph",
    "RefinedContour",
    "build_graph",
    "shortest_closed_path",
    "enumerate_optimal",
    "score_closed_path",
    "refine_contour",
    "refine_mask",
]


@dataclass
class RefinementParams:
    """Knobs for the refinement graph and its solver.

    n: contour columns; m: candidates per column (odd); s: smoothness band
    radius in index units; c: concavity penalty per radian; half_len: fan
    half-length in pixels; exact_closure: exact vs single-pass solver.
    """

    n: int = 100
    m: int = 15
    s: int = 2
    c: float = 1.0
    half_len: float = 5.0
    exact_closure: bool = False

    def __post_init__(self):
        if self.n < 4:
            raise BadN(f"need n >= 4, got {self.n}")
        if self.m < 3 or self.m % 2 == 0:
            raise BadM(f"need odd m >= 3, got {self.m}")
        if not (1 <= self.s <= self.m - 1):
            raise BadParams(f"need 1 <= s <= m-1, got s={self.s}, m={self.m}")
        if self.c < 0:
            raise BadParams(f"need c >= 0, got {self.c}")
        if self.half_len <= 0:
            raise BadParams(f"need half_len > 0, got {self.half_len}")


@dataclass
class RefinementGraph:
    """Vertex costs and geometry for the layered refinement DAG.

    Arrays carry n+1 rows: row n is an exact copy of row 0, the duplicated
    closure column. Only rows 0..n-1 contribute to the objective. The solver
    does not require an odd m, so hand-built cost tables of any width >= 2
    are accepted here even though fan construction enforces odd m.
    """

    vertex_cost: np.ndarray  # (n+1, m)
    geometry: np.ndarray  # (n+1, m, 2)
    s: int
    c: float

    def __post_init__(self):
        self.vertex_cost = np.asarray(self.vertex_cost, dtype=np.float64)
        self.geometry = np.asarray(self.geometry, dtype=np.float64)
        if self.vertex_cost.ndim != 2 or self.geometry.shape != (*self.vertex_cost.shape, 2):
            raise DimensionMismatch(
                f"cost {self.vertex_cost.shape} vs geometry {self.geometry.shape}"
            )
        if not np.isfinite(self.vertex_cost).all():
            raise ValueError("vertex costs must be finite")
        if not (
            np.array_equal(self.vertex_cost[-1], self.vertex_cost[0])
            and np.array_equal(self.geometry[-1], self.geometry[0])
        ):
            raise ValueError("duplicated closure column must equal column 0 exactly")
        if self.n < 3 or self.m < 2:
            raise DimensionMismatch(f"need n >= 3, m >= 2, got n={self.n}, m={self.m}")
        # s = 0 (lockstep columns) is meaningful at graph level even though
        # pipeline params require s >= 1
        if not (0 <= self.s <= self.m - 1) or self.c < 0:
            raise BadParams(f"invalid s={self.s}, c={self.c} for m={self.m}")

    @property
    def n(self) -> int:
        return self.vertex_cost.shape[0] - 1

    @property
    def m(self) -> int:
        return self.vertex_cost.shape[1]

    @classmethod
    def from_costs(cls, vertex_cost, geometry, s, c) -> "RefinementGraph":
        """Build from (n, m) per-column arrays, appending the closure column."""
        vc = np.asarray(vertex_cost, dtype=np.float64)
        gg = np.asarray(geometry, dtype=np.float64)
        return cls(
            vertex_cost=np.vstack([vc, vc[:1]]),
            geometry=np.concatenate([gg, gg[:1]], axis=0),
            s=s,
            c=c,
        )


@dataclass
class RefinedContour:
    """Solver output: chosen index per column, its geometry, and the cost."""

    indices: np.ndarray  # (n,) int
    points: np.ndarray  # (n, 2)
    total_cost: float


def build_graph(field: GradientField, fan: NormalFan, params: RefinementParams) -> RefinementGraph:
    """Assemble the refinement graph: vertex cost = -gradient at each fan point.

    Raises :class:`DimensionMismatch` when the fan shape disagrees with the
    params or fan points fall outside the field domain.
    """
    if fan.m != params.m or fan.n != params.n:
        raise DimensionMismatch(f"fan is {fan.n}x{fan.m}, params want {params.n}x{params.m}")
    pts = fan.points
    if (
        pts[..., 0].max() > field.width - 1 + 1e-9
        or pts[..., 1].max() > field.height - 1 + 1e-9
        or pts.min() < -1e-9
    ):
        raise DimensionMismatch("fan points exceed the gradient field domain")
    cost = -sample_bilinear_many(field, pts)
    return RefinementGraph.from_costs(cost, pts, s=params.s, c=params.c)


def _turn_penalties(prev_pts, pts, next_pts, c):
    """Concavity penalty for vertex triples; broadcasts over leading axes."""
    e1 = pts - prev_pts
    e2 = next_pts - pts
    cross = e1[..., 0] * e2[..., 1] - e1[..., 1] * e2[..., 0]
    dot = e1[..., 0] * e2[..., 0] + e1[..., 1] * e2[..., 1]
    tau = np.arctan2(cross, dot)
    return np.where(cross > 0, c * tau, 0.0)


def score_closed_path(graph: RefinementGraph, indices) -> float:
    """Objective value of a closed index sequence (shared by both solvers)."""
    idx = np.asarray(indices, dtype=int)
    n = graph.n
    if idx.shape != (n,):
        raise DimensionMismatch(f"expected {n} indices, got {idx.shape}")
    cols = np.arange(n)
    vc = graph.vertex_cost[cols, idx]
    pts = graph.geometry[cols, idx]
    pen = _turn_penalties(np.roll(pts, 1, axis=0), pts, np.roll(pts, -1, axis=0), graph.c)
    return float(vc.sum() + pen.sum())


def _banded_penalties(graph: RefinementGraph) -> np.ndarray:
    """PEN[j, c, a, b]: penalty at vertex j when the previous vertex sits at
    index c+a-s on column j-1 and the next at c+b-s on column j+1 (cyclic).
    Out-of-range neighbor offsets are stored as 0; callers mask feasibility.
    """
    n, m, s = graph.n, graph.m, graph.s
    G = graph.geometry[:n]
    ci = np.arange(m)
    off = np.arange(-s, s + 1)
    nb = ci[:, None] + off[None, :]  # (m, 2s+1)
    valid = (nb >= 0) & (nb < m)
    nbc = np.clip(nb, 0, m - 1)

    gprev = np.roll(G, 1, axis=0)
    gnext = np.roll(G, -1, axis=0)
    A = gprev[:, nbc, :][:, :, :, None, :]  # (n, m, 2s+1, 1, 2)
    B = G[:, :, None, None, :]
    C = gnext[:, nbc, :][:, :, None, :, :]  # (n, m, 1, 2s+1, 2)
    pen = _turn_penalties(A, B, C, graph.c)
    vmask = valid[None, :, :, None] & valid[None, :, None, :]
    return np.where(vmask, pen, 0.0)


class _BandedDP:
    """Forward DP in a banded state encoding.

    State (c, a) means the path sits at index c on the current column with
    its previous index at ``c + a - s`` (a in [0, 2s]); because the band is
    enforced by construction, no feasibility masking is needed during
    transitions. The state tensor carries a leading batch axis so the exact
    solver can advance all (start, second) seeds in one pass.
    """

    def __init__(self, graph: RefinementGraph, pen_banded: np.ndarray):
        self.g = graph
        n, m, s = graph.n, graph.m, graph.s
        self.vc = graph.vertex_cost[:n]
        self.pen = pen_banded
        self.A = 2 * s + 1
        ci = np.arange(m)
        self.prev_idx = ci[:, None] + np.arange(-s, s + 1)[None, :]  # (m, A)
        self.prev_ok = (self.prev_idx >= 0) & (self.prev_idx < m)
        # transition scatter: source (c, b) -> target (c2 = c+b-s, a2 = 2s-b)
        cg, bg = np.meshgrid(ci, np.arange(self.A), indexing="ij")
        c2 = cg + bg - s
        ok = (c2 >= 0) & (c2 < m)
        self.src_c = cg[ok]
        self.src_b = bg[ok]
        self.dst_c = c2[ok]
        self.dst_a = (2 * s - bg)[ok]
        self.vc_dst = self.vc[:, self.dst_c]  # vertex costs pre-gathered per column

    def init_free(self):
        """Every feasible (start, second) window seeded at once."""
        m = self.g.m
        start = np.clip(self.prev_idx, 0, m - 1)
        D = np.where(self.prev_ok, self.vc[0][start], np.inf) + self.vc[1][:, None]
        return D[None]

    def init_pairs(self, pairs):
        s = self.g.s
        D = np.full((len(pairs), self.g.m, self.A), np.inf)
        for k, (i1, i2) in enumerate(pairs):
            D[k, i2, i1 - i2 + s] = self.vc[0][i1] + self.vc[1][i2]
        return D

    def step(self, D: np.ndarray, j: int, out: np.ndarray):
        """One transition: score the penalty at vertex j and move the window
        from (col j-1, col j) to (col j, col j+1). ``out`` is reused."""
        cand = D[:, :, :, None] + self.pen[j][None]  # (batch, m, A, B)
        arg_a = cand.argmin(axis=2)
        best = cand.min(axis=2)  # (batch, m, B)
        out.fill(np.inf)
        out[:, self.dst_c, self.dst_a] = best[:, self.src_c, self.src_b] + self.vc_dst[j + 1]
        return out, arg_a

    def run(self, D: np.ndarray):
        """Advance (batch, m, A) from the (col 0, col 1) window to
        (col n-2, col n-1); returns the final state and backpointer stack."""
        back = []
        buf = np.empty_like(D)
        for j in range(1, self.g.n - 1):
            nxt, arg_a = self.step(D, j, buf)
            back.append(arg_a)
            D, buf = nxt, D  # the old state becomes the next scratch buffer
        return D, back

    def closure(self, i1, i2, c, a):
        """Wraparound cost for paths starting (i1, i2) and ending with state
        (c, a): penalties at vertex n-1 (triple prev, c, i1) and vertex 0
        (triple c, i1, i2); inf where the wrap edge |i1 - c| > s."""
        n, s = self.g.n, self.g.s
        i1, i2, c, a = np.broadcast_arrays(np.asarray(i1), i2, c, a)
        two_s = 2 * s
        b_wrap = i1 - c + s
        ok_wrap = (b_wrap >= 0) & (b_wrap <= two_s)
        b0 = i2 - i1 + s
        ok0 = (b0 >= 0) & (b0 <= two_s)
        ok = ok_wrap & ok0
        bw = np.clip(b_wrap, 0, two_s)
        pen_last = self.pen[n - 1][c, a, bw]
        pen_first = self.pen[0][i1, two_s - bw, np.clip(b0, 0, two_s)]
        return np.where(ok, pen_last + pen_first, np.inf)

    def backtrack(self, back, k: int, c_end: int, a_end: int) -> np.ndarray:
        n, s = self.g.n, self.g.s
        idx = np.empty(n, dtype=np.int64)
        idx[n - 1] = c_end
        idx[n - 2] = c_end + a_end - s
        c, a = c_end, a_end
        for t in range(n - 2, 0, -1):
            b = 2 * s - a
            c_prev = c + a - s
            a_prev = int(back[t - 1][k, c_prev, b])
            idx[t - 1] = c_prev + a_prev - s
            c, a = c_prev, a_prev
        return idx


def _pick_end_state(total: np.ndarray):
    """Argmin over (c, a) states; row-major order means ties resolve toward
    the smaller current index, then the smaller previous index."""
    flat = int(np.argmin(total))
    c_end, a_end = np.unravel_index(flat, total.shape)
    return int(c_end), int(a_end), float(total[c_end, a_end])


def shortest_closed_path(graph: RefinementGraph, exact_closure: bool = True) -> RefinedContour:
    """Minimum-cost closed index sequence through the refinement graph.

    With ``exact_closure`` the DP is seeded once per feasible (start, second)
    pair, the path must return to its start index on the duplicated column,
    and both wraparound triples are scored inside the optimization; the
    result is globally optimal. Without it, a single free-start pass runs;
    the best end state's path is backtracked and its two wraparound triples
    are charged post hoc (they appear in the returned total but do not steer
    the optimization), which approximates the optimum at a fraction of the
    cost. Should the free-start path fail to close within the band (rare for
    s >= 1), the solve repeats with the start pinned at the cheapest
    first-column vertex. Either way the returned sequence satisfies the
    cyclic band constraint and the curve closes on itself.

    Ties break toward the smaller current index, then the smaller previous
    index.
    """
    n, m, s = graph.n, graph.m, graph.s
    pen_banded = _banded_penalties(graph)
    dp = _BandedDP(graph, pen_banded)
    vc = graph.vertex_cost[:n]

    if exact_closure:
        pairs = [(i1, i2) for i1 in range(m) for i2 in range(max(0, i1 - s), min(m, i1 + s + 1))]
        D, back = dp.run(dp.init_pairs(pairs))
        cgrid, agrid = np.meshgrid(np.arange(m), np.arange(dp.A), indexing="ij")
        best_val, best_idx = np.inf, None
        for k, (i1, i2) in enumerate(pairs):
            total = D[k] + dp.closure(i1, i2, cgrid, agrid)
            c_end, a_end, val = _pick_end_state(total)
            if val < best_val:
                best_val = val
                best_idx = dp.backtrack(back, k, c_end, a_end)
        indices = best_idx
    else:
        D, back = dp.run(dp.init_free())
        c_end, a_end, _ = _pick_end_state(D[0])
        indices = dp.backtrack(back, 0, c_end, a_end)
        if abs(int(indices[0]) - int(indices[-1])) > s:
            # the free-start optimum cannot close; re-solve with the start
            # pinned at the cheapest first-column vertex (the constant path
            # keeps this feasible for any s >= 1)
            i1 = int(np.argmin(vc[0]))
            pairs = [(i1, i2) for i2 in range(max(0, i1 - s), min(m, i1 + s + 1))]
            Dp, backp = dp.run(dp.init_pairs(pairs))
            cgrid, agrid = np.meshgrid(np.arange(m), np.arange(dp.A), indexing="ij")
            best_val, best_idx = np.inf, None
            for k, (_, i2) in enumerate(pairs):
                tot = Dp[k] + dp.closure(i1, i2, cgrid, agrid)
                c_end, a_end, val = _pick_end_state(tot)
                if val < best_val:
                    best_val = val
                    best_idx = dp.backtrack(backp, k, c_end, a_end)
            indices = best_idx

    assert indices is not None
    wrap = np.abs(np.diff(np.concatenate([indices, indices[:1]])))
    assert (wrap <= s).all(), "cyclic band constraint violated"
    points = graph.geometry[np.arange(n), indices]
    return RefinedContour(
        indices=indices, points=points, total_cost=score_closed_path(graph, indices)
    )


def enumerate_optimal(graph: RefinementGraph) -> RefinedContour:
    """Exhaustive oracle: scores every band-feasible closed index sequence.

    Guarded to n <= 8 and m <= 5 (:class:`TooLarge` otherwise); ties are
    broken by the lexicographically smallest index sequence.
    """
    n, m, s = graph.n, graph.m, graph.s
    if n > 8 or m > 5:
        raise TooLarge(f"enumeration guard: n <= 8 and m <= 5, got n={n}, m={m}")
    seqs = np.arange(m, dtype=np.int64)[:, None]
    deltas = np.arange(-s, s + 1)
    for _ in range(n - 1):
        nxt = seqs[:, -1][:, None] + deltas[None, :]
        ok = (nxt >= 0) & (nxt < m)
        rows, cols = np.nonzero(ok)
        seqs = np.hstack([seqs[rows], nxt[rows, cols][:, None]])
    seqs = seqs[np.abs(seqs[:, 0] - seqs[:, -1]) <= s]

    cols = np.arange(n)
    vsum = graph.vertex_cost[cols, seqs].sum(axis=1)
    pts = graph.geometry[cols, seqs]
    pen = _turn_penalties(np.roll(pts, 1, axis=1), pts, np.roll(pts, -1, axis=1), graph.c)
    totals = vsum + pen.sum(axis=1)

    cand = np.nonzero(totals == totals.min())[0]
    order = np.lexsort(seqs[cand].T[::-1])
    idx = seqs[cand[order[0]]]
    return RefinedContour(
        indices=idx, points=graph.geometry[cols, idx], total_cost=score_closed_path(graph, idx)
    )


def refine_contour(crop, params: RefinementParams):
    """Full refinement pipeline on a head crop; returns (path, refined mask).

    Steps: trace the pseudo-mask boundary, resample to n points, erect the
    normal fans, build the gradient graph, solve, and rasterize the optimal
    curve. The curve lives in lattice coordinates, so it is shifted by +0.5
    per axis to land on the rasterizer's pixel-center convention.
    """
    image = crop.image
    w, h = image.width, image.height
    poly = extract_contour(crop.pseudo_mask)
    contour = resample_uniform(poly, params.n)
    fan = build_normal_fan(contour, params.m, params.half_len, (w, h))
    field = gradient_magnitude(image)
    graph = build_graph(field, fan, params)
    path = shortest_closed_path(graph, exact_closure=params.exact_closure)
    mask = rasterize_polygon(path.points + 0.5, w, h)
    _, ncomp = ndimage.label(mask.data, structure=np.ones((3, 3), dtype=int))
    if ncomp != 1:
        raise RefinementError(f"refined curve rasterized to {ncomp} components")
    return path, mask


def refine_mask(crop, params: RefinementParams) -> BinaryMask:
    """Boundary-refined mask for a head crop (see :func:`refine_contour`)."""
    return refine_contour(crop, params)[1]
