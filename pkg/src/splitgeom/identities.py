"""The divergence identities of an orthogonal k-splitting, as checks.

Every identity is evaluated as a residual LHS - RHS in which both sides run
through independent machinery: the left side differentiates an assembled
mean-curvature field exactly (jets), the right side sums curvature and
fundamental-tensor terms in the adapted frame.

Implemented identities (``k`` distributions, ``S(r, k)`` the r-subsets):

* ``main``: with ``rset = {1, k-1}`` (as a set: for k = 2 the two values
  coincide and are counted once),

      Div( sum_{r in rset} sum_{q in S(r,k)} H_q )
        = |rset| * S_mix + sum_{r in rset} sum_q (|h_q|^2 - |H_q|^2 - |T_q|^2).

  For k = 2 this is exactly the classical two-distribution identity; the
  coefficient on the mixed scalar curvature is 2 whenever k > 2.

* ``aux:r`` for 2 <= r <= k-1: with ``C = binom(k-2, r-1)``,

      Div( sum_{q in S(r,k)} H_q - C * sum_i H_i )
        = C * sum_i |H_i|^2
          + sum_q ( <sum_{i in q} H_i, sum_{j not in q} H_j>
                    - |H_q|^2 - <H_q, sum_{j not in q} H_j> ).

  The left-hand field vanishes identically (the subset mean-curvature
  vectors satisfy ``sum_q H_q = C * sum_i H_i``), so the statement is that
  the right side vanishes pointwise; both sides are still computed in full.
  An alternative form of this right-hand side that is sometimes quoted
  (``+|H_q|^2`` and a factor ``r`` on the ``H_q`` coupling, without the
  ``C`` term) does not balance; it is exposed as ``aux_printed:r`` for
  reference, reported but never asserted.

* ``companion``: ``2 Div(sum_i H_i)`` against the main right side minus the
  ``aux:k-1`` right side.

* ``smix_lemma``: ``2 S_mix = sum_i S_mix(D_i, D_i^perp)``.

Integral checks quadrate the right-hand sides over closed charts; by the
divergence theorem every integral vanishes.  Ratios are reported against
``max(L1(integrand), L1(largest constituent term))`` so that integrands
which cancel pointwise (the twisted flat tori) are judged against the size
of what cancelled rather than against float noise.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .chart import grid_points, map_batched, DEFAULT_CHUNK
from .splitting import SplitContext, SubsetIndex, subsets

__all__ = [
    "CheckReport",
    "Tolerances",
    "residual_main",
    "residual_aux",
    "residual_companion",
    "pointwise_fields",
    "pointwise_check",
    "integral_check",
    "integral_checks_batch",
    "propagation_suprema",
    "umbilicity_residual",
    "available_identities",
]


@dataclass
class Tolerances:
    pointwise: float = 1e-8   # relative to 1 + largest |term|
    integral: float = 1e-10   # |integral| / normalizer
    predicate: float = 1e-9


@dataclass
class CheckReport:
    identity: str
    scenario: str
    kind: str                      # "pointwise" | "integral" | "predicate"
    n_points: int
    tolerance: float
    verdict: str                   # "pass" | "fail"
    max_abs_residual: float | None = None
    max_rel_residual: float | None = None
    integral_value: float | None = None
    normalizer: float | None = None
    integral_ratio: float | None = None
    stokes_value: float | None = None
    stokes_ratio: float | None = None
    grid: list | None = None
    note: str = ""
    wall_time: float = 0.0

    def to_dict(self, include_timing=False):
        d = {
            "identity": self.identity,
            "scenario": self.scenario,
            "kind": self.kind,
            "n_points": self.n_points,
            "tolerance": self.tolerance,
            "verdict": self.verdict,
            "max_abs_residual": self.max_abs_residual,
            "max_rel_residual": self.max_rel_residual,
            "integral_value": self.integral_value,
            "normalizer": self.normalizer,
            "integral_ratio": self.integral_ratio,
            "stokes_value": self.stokes_value,
            "stokes_ratio": self.stokes_ratio,
            "grid": self.grid,
            "note": self.note,
        }
        if include_timing:
            d["wall_time"] = self.wall_time
        return d


def _rset(k):
    return sorted({1, k - 1})


class _Evaluator:
    """Identity terms over one shared :class:`SplitContext` (memoized)."""

    def __init__(self, ctx):
        self.ctx = ctx
        self.k = ctx.k
        self._memo = {}

    def _cached(self, key, fn):
        if key not in self._memo:
            self._memo[key] = fn()
        return self._memo[key]

    # -- building blocks ---------------------------------------------------

    def H_jets(self, q):
        return self.ctx.fundamental(q).H_jets

    def H_vals(self, q):
        return self.ctx.H_values(q)

    def field_from(self, coef_qs):
        """Coordinate jet components of ``sum coef * H_q``."""
        comps = None
        for coef, q in coef_qs:
            jets = self.H_jets(q)
            if comps is None:
                comps = [coef * j for j in jets]
            else:
                comps = [c + coef * j for c, j in zip(comps, jets)]
        return comps

    def div_field(self, coef_qs):
        return self.ctx.divergence_values(self.field_from(coef_qs))

    def inner(self, u, v):
        return self.ctx.inner_values(u, v)

    # -- main identity -------------------------------------------------------

    def main(self):
        return self._cached("main", self._main)

    def _main(self):
        ctx = self.ctx
        k = self.k
        rset = _rset(k)
        qs = [q for r in rset for q in subsets(r, k)]
        div = self.div_field([(1.0, q) for q in qs])
        smix = ctx.smix()
        rhs = len(rset) * smix
        max_term = np.abs(rhs)
        for q in qs:
            d = ctx.fundamental(q)
            rhs = rhs + d.h_norm2 - d.H_norm2 - d.t_norm2
            for t in (d.h_norm2, d.H_norm2, d.t_norm2):
                max_term = np.maximum(max_term, np.abs(t))
        max_term = np.maximum(max_term, np.abs(div))
        return {"residual": div - rhs, "div": div, "rhs": rhs, "max_term": max_term}

    # -- auxiliary identity ----------------------------------------------------

    def aux(self, r):
        return self._cached(("aux", r), lambda: self._aux(r))

    def _aux(self, r):
        ctx = self.ctx
        k = self.k
        if not 2 <= r <= k - 1:
            raise ValueError(f"r out of range: need 2 <= r <= k-1, got r={r}, k={k}")
        C = float(math.comb(k - 2, r - 1))
        qs = subsets(r, k)
        singles = subsets(1, k)
        coef_qs = [(1.0, q) for q in qs] + [(-C, q) for q in singles]
        div = self.div_field(coef_qs)

        H_single = [self.H_vals(q) for q in singles]
        H_all = np.sum(H_single, axis=0)
        rhs = np.zeros(ctx.points.shape[:-1])
        rhs_printed = np.zeros_like(rhs)
        max_term = np.abs(div).copy()
        for q in qs:
            d = ctx.fundamental(q)
            Hq = self.H_vals(q)
            V = np.sum([H_single[i - 1] for i in q], axis=0)
            W = H_all - V
            ip_vw = self.inner(V, W)
            ip_qw = self.inner(Hq, W)
            rhs = rhs + ip_vw - d.H_norm2 - ip_qw
            rhs_printed = rhs_printed + d.H_norm2 + ip_vw - r * ip_qw
            for t in (ip_vw, d.H_norm2, ip_qw):
                max_term = np.maximum(max_term, np.abs(t))
        sum_h2 = np.sum([ctx.fundamental(q).H_norm2 for q in singles], axis=0)
        rhs = rhs + C * sum_h2
        max_term = np.maximum(max_term, C * np.abs(sum_h2))
        return {
            "residual": div - rhs,
            "residual_printed": div - rhs_printed,
            "div": div,
            "rhs": rhs,
            "max_term": max_term,
        }

    # -- companion --------------------------------------------------------------

    def companion(self):
        return self._cached("companion", self._companion)

    def _companion(self):
        ctx = self.ctx
        k = self.k
        if k < 3:
            raise ValueError("companion identity needs k >= 3")
        singles = subsets(1, k)
        div2 = 2.0 * self.div_field([(1.0, q) for q in singles])
        m = self.main()
        a = self.aux(k - 1)
        rhs = m["rhs"] - a["rhs"]
        max_term = np.maximum(np.maximum(m["max_term"], a["max_term"]), np.abs(div2))
        return {"residual": div2 - rhs, "div": div2, "rhs": rhs, "max_term": max_term}

    # -- lemma: pair-split decomposition of the mixed scalar curvature ----------

    def smix_lemma(self):
        ctx = self.ctx
        total = np.zeros(ctx.points.shape[:-1])
        for i in range(1, self.k + 1):
            total = total + ctx.smix_pairsplit(i)
        smix2 = 2.0 * ctx.smix()
        max_term = np.maximum(np.abs(smix2), np.abs(total))
        return {"residual": smix2 - total, "div": smix2, "rhs": total,
                "max_term": max_term}

    # -- k=3 display of the last integral corollary ------------------------------

    def ck2_k3_display(self):
        """Pointwise value of the k=3 rewriting of the companion integrand
        (half scale): S_mix - sum |H_i|^2 - sum_{i<j} <H_i, H_j>
        + (1/2) sum (|h|^2 - |T|^2) over single and pair subsets."""
        ctx = self.ctx
        if self.k != 3:
            raise ValueError("this display is the k=3 instance")
        singles = subsets(1, 3)
        pairs = subsets(2, 3)
        val = ctx.smix()
        for q in singles:
            d = ctx.fundamental(q)
            val = val - d.H_norm2 + 0.5 * (d.h_norm2 - d.t_norm2)
        H = [self.H_vals(q) for q in singles]
        for a in range(3):
            for b in range(a + 1, 3):
                val = val - self.inner(H[a], H[b])
        for q in pairs:
            d = ctx.fundamental(q)
            val = val + 0.5 * (d.h_norm2 - d.t_norm2)
        return val


def _evaluator_at(chart, split, points):
    return _Evaluator(SplitContext(chart, split, points))


# -- operation-level API ------------------------------------------------------

def residual_main(chart, split, p):
    return _evaluator_at(chart, split, p).main()["residual"]


def residual_aux(chart, split, r, p):
    return _evaluator_at(chart, split, p).aux(r)["residual"]


def residual_companion(chart, split, p):
    return _evaluator_at(chart, split, p).companion()["residual"]


def available_identities(k):
    names = ["main", "smix_lemma"]
    for r in range(2, k):
        names.append(f"aux:{r}")
    if k >= 3:
        names.append("companion")
    return names


def _parse_identity(name, k):
    if name in ("main", "companion", "smix_lemma", "ck2_k3_display"):
        return name, None
    if name.startswith("aux:") or name.startswith("aux_printed:"):
        head, _, rtxt = name.partition(":")
        try:
            r = int(rtxt)
        except ValueError:
            raise ValueError(f"malformed identity name {name!r}")
        if not 2 <= r <= k - 1:
            raise ValueError(f"r out of range: need 2 <= r <= k-1, got r={r}, k={k}")
        return head, r
    raise ValueError(f"unknown identity {name!r}")


def pointwise_fields(chart, split, points, which, chunk=DEFAULT_CHUNK, threads=1):
    """Residual and term-scale arrays for the named identities at ``points``.

    Returns ``{name: residual_array}`` plus ``{"max_term:" + name: array}``;
    evaluation shares one frame context per chunk across all identities.
    """
    k = split.k
    parsed = [(name,) + _parse_identity(name, k) for name in which]

    def eval_chunk(pts):
        ev = _evaluator_at(chart, split, pts)
        out = {}
        for name, head, r in parsed:
            if head == "main":
                data = ev.main()
            elif head == "companion":
                data = ev.companion()
            elif head == "smix_lemma":
                data = ev.smix_lemma()
            elif head == "ck2_k3_display":
                val = ev.ck2_k3_display()
                out[name] = val
                out["max_term:" + name] = np.abs(val)
                continue
            elif head == "aux":
                data = ev.aux(r)
            elif head == "aux_printed":
                data = {"residual": ev.aux(r)["residual_printed"],
                        "max_term": ev.aux(r)["max_term"]}
            out[name] = data["residual"]
            out["max_term:" + name] = data["max_term"]
        return out

    return map_batched(eval_chunk, points, chunk=chunk, threads=threads)


def pointwise_check(chart, split, points, identity, scenario="", tol=None,
                    chunk=DEFAULT_CHUNK, threads=1):
    """One pointwise CheckReport for ``identity`` over ``points``."""
    tols = tol or Tolerances()
    t0 = time.perf_counter()
    fields = pointwise_fields(chart, split, points, [identity], chunk=chunk,
                              threads=threads)
    res = fields[identity]
    max_term = fields["max_term:" + identity]
    max_abs = float(np.max(np.abs(res)))
    rel = np.abs(res) / (1.0 + max_term)
    max_rel = float(np.max(rel))
    verdict = "pass" if max_rel <= tols.pointwise else "fail"
    return CheckReport(
        identity=identity, scenario=scenario, kind="pointwise",
        n_points=int(res.size), tolerance=tols.pointwise, verdict=verdict,
        max_abs_residual=max_abs, max_rel_residual=max_rel,
        wall_time=time.perf_counter() - t0,
    )


def integral_checks_batch(chart, split, grid, identities, scenario="", tol=None,
                          chunk=DEFAULT_CHUNK, threads=1):
    """Quadrature of several identities' right-hand sides in one grid sweep.

    Reports ``integral_ratio = |integral| / max(L1(rhs), L1(term scale))``
    (zero when the integrand vanishes identically) and the discrete Stokes
    cross-check ``|integral of Div X|`` under the same normalizer.  All
    identities share one frame context per chunk, so adding identities to a
    sweep is nearly free.
    """
    from .chart import NonClosedChartError

    if not chart.closed:
        raise NonClosedChartError("integral checks need a fully periodic chart")
    tols = tol or Tolerances()
    k = split.k
    parsed = []
    for identity in identities:
        head, r = _parse_identity(identity, k)
        if head in ("smix_lemma",):
            raise ValueError("smix_lemma is a pointwise check")
        parsed.append((identity, head, r))
    if isinstance(grid, (int, np.integer)):
        grid = [int(grid)] * chart.dim
    t0 = time.perf_counter()
    pts = grid_points(chart, grid)
    cell = 1.0
    for ax, res in zip(chart.axes, grid):
        cell *= ax.period / res

    def eval_chunk(p):
        ev = _evaluator_at(chart, split, p)
        w = ev.ctx.frame.sqrt_detg
        out = {}
        for identity, head, r in parsed:
            if head == "main":
                data = ev.main()
            elif head == "companion":
                data = ev.companion()
            elif head == "aux":
                data = ev.aux(r)
            elif head == "ck2_k3_display":
                val = ev.ck2_k3_display()
                data = {"rhs": val, "div": np.zeros_like(val),
                        "max_term": np.abs(val)}
            else:
                raise ValueError(f"unknown integral identity {identity!r}")
            out[identity + "/rhs_w"] = data["rhs"] * w
            out[identity + "/abs_rhs_w"] = np.abs(data["rhs"]) * w
            out[identity + "/term_w"] = data["max_term"] * w
            out[identity + "/div_w"] = data["div"] * w
        return out

    acc = map_batched(eval_chunk, pts, chunk=chunk, threads=threads)
    elapsed = time.perf_counter() - t0
    reports = []
    for identity, head, r in parsed:
        integral = math.fsum(acc[identity + "/rhs_w"].tolist()) * cell
        l1 = math.fsum(acc[identity + "/abs_rhs_w"].tolist()) * cell
        l1_terms = math.fsum(acc[identity + "/term_w"].tolist()) * cell
        stokes = math.fsum(acc[identity + "/div_w"].tolist()) * cell
        normalizer = max(l1, l1_terms)
        ratio = 0.0 if integral == 0.0 else (abs(integral) / normalizer
                                             if normalizer > 0.0 else float("inf"))
        stokes_ratio = 0.0 if stokes == 0.0 else (abs(stokes) / normalizer
                                                  if normalizer > 0.0 else float("inf"))
        verdict = ("pass" if ratio <= tols.integral and stokes_ratio <= tols.integral
                   else "fail")
        reports.append(CheckReport(
            identity=identity, scenario=scenario, kind="integral",
            n_points=int(np.prod(grid)), tolerance=tols.integral, verdict=verdict,
            integral_value=integral, normalizer=normalizer, integral_ratio=ratio,
            stokes_value=stokes, stokes_ratio=stokes_ratio, grid=list(grid),
            wall_time=elapsed / len(parsed),
        ))
    return reports


def integral_check(chart, split, grid, identity, scenario="", tol=None,
                   chunk=DEFAULT_CHUNK, threads=1):
    """Single-identity convenience wrapper over :func:`integral_checks_batch`."""
    return integral_checks_batch(chart, split, grid, [identity], scenario=scenario,
                                 tol=tol, chunk=chunk, threads=threads)[0]


# -- propagation and umbilicity checks ----------------------------------------

def propagation_suprema(chart, split, points, chunk=DEFAULT_CHUNK, threads=1):
    """Sup of cross-block components of ``h_q`` and ``T_q`` over subsets with
    ``2 < r < k`` (the inductive propagation of mixed flags)."""
    k = split.k

    def eval_chunk(pts):
        ctx = SplitContext(chart, split, pts)
        sup_h = np.zeros(pts.shape[0])
        sup_t = np.zeros(pts.shape[0])
        for r in range(3, k):
            for q in subsets(r, k):
                d = ctx.fundamental(q)
                arg = d.arg_idx
                blocks = [ctx.split.block_of(a) for a in arg]
                for ia in range(len(arg)):
                    for ib in range(len(arg)):
                        if blocks[ia] == blocks[ib]:
                            continue
                        sup_h = np.maximum(sup_h, np.max(
                            np.abs(d.h_frame[..., ia, ib, :]), axis=-1))
                        sup_t = np.maximum(sup_t, np.max(
                            np.abs(d.t_frame[..., ia, ib, :]), axis=-1))
        return {"sup_h": sup_h, "sup_t": sup_t}

    out = map_batched(eval_chunk, points, chunk=chunk, threads=threads)
    return float(np.max(out["sup_h"])), float(np.max(out["sup_t"]))


def umbilicity_residual(chart, split, points, qs=None):
    """Residual of the umbilic norm identity
    ``|h_q|^2 - |H_q|^2 = - sum_i ((n_i - 1)/n_i) |Pperp_q H_{q(i)}|^2``
    (valid for totally umbilical blocks, mixed totally geodesic pairs and
    orthogonal blockwise mean curvatures)."""
    ctx = SplitContext(chart, split, points)
    k = split.k
    if qs is None:
        qs = [q for r in range(1, k) for q in subsets(r, k)]
    P = ctx.projectors()
    worst = 0.0
    for q in qs:
        d = ctx.fundamental(q)
        lhs = d.h_norm2 - d.H_norm2
        rhs = np.zeros_like(lhs)
        comp = q.complement(k)
        for i in q:
            ni = split.dims[i - 1]
            Hi = ctx.H_values(SubsetIndex((i,)))
            proj = np.zeros_like(Hi)
            for j in comp:
                proj += np.einsum("...ab,...b->...a", P[..., j - 1, :, :], Hi)
            rhs = rhs - (ni - 1.0) / ni * ctx.inner_values(proj, proj)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst
