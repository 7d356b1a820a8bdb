"""Exact counting of component interactions under convolution windows.

Two grid cells *interact* when some ``k x k`` window contains both.  An
interaction is *heterogeneous* when the cells come from different source
vectors (one subject component, one relation component) and *homogeneous*
when they come from the same vector.  Pairs are ordered and counted per
window: a window holding ``x`` subject cells and ``y`` relation cells
contributes ``2xy`` heterogeneous and ``x(x-1) + y(y-1)`` homogeneous
interactions, so its total is always ``k^2 (k^2 - 1)`` when fully inside
an unpadded grid.

The brute-force counter enumerates provenance grids and is the single
source of truth.  Closed forms exist for the three unpadded layouts and
are checked against it; where a closed form's derivation premise fails,
``count_closed_form`` reports that instead of extrapolating.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .reshape import (KINDS, PAD_CIRCULAR, PAD_ZERO, SOURCE_RELATION,
                      SOURCE_SUBJECT, layout, pad_provenance)

PAD_NONE = "none"
PAD_MODES = (PAD_NONE, PAD_ZERO, PAD_CIRCULAR)

# brute-force feasibility bounds for the verification sweeps
MAX_N = 32
MAX_K = 11


@dataclass(frozen=True)
class CountQuery:
    """One counting configuration on an ``n x n`` grid.

    ``n`` is the unpadded side (even, since the grid holds ``n^2 / 2``
    components of each source), ``k`` the window side, ``tau`` the block
    height for the alternate layout, and ``p`` the padding width.
    """

    kind: str
    n: int
    k: int
    tau: int = 1
    pad_mode: str = PAD_NONE
    p: int = 0

    def validate(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.n % 2 != 0 or self.n < 2:
            raise ValueError("n must be even and >= 2")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.pad_mode not in PAD_MODES:
            raise ValueError(f"unknown pad mode {self.pad_mode!r}")
        if self.p < 0:
            raise ValueError("p must be >= 0")
        if self.pad_mode == PAD_NONE and self.p != 0:
            raise ValueError("pad_mode 'none' requires p = 0")
        if self.pad_mode != PAD_NONE and self.p == 0:
            raise ValueError(f"pad_mode {self.pad_mode!r} requires p > 0")
        if self.k > self.n + 2 * self.p:
            raise ValueError(f"k={self.k} exceeds the padded side {self.n + 2 * self.p}")

    @property
    def side(self) -> int:
        return self.n + 2 * self.p


@dataclass(frozen=True)
class InteractionCount:
    n_het: int
    n_homo: int
    n_windows: int

    @property
    def total(self) -> int:
        return self.n_het + self.n_homo


def provenance_grid(query: CountQuery):
    """The (padded) provenance grid a query counts over."""
    query.validate()
    prov = layout(query.kind, query.n // 2, query.n, query.tau)
    if query.p > 0:
        prov = pad_provenance(prov, query.p, query.pad_mode)
    return prov


def count_bruteforce(query: CountQuery) -> InteractionCount:
    """Count interactions by enumerating every window of the provenance grid.

    Pure integer arithmetic; float values never enter.
    """
    prov = provenance_grid(query)
    subj = (prov.source == SOURCE_SUBJECT).astype(np.int64)
    rel = (prov.source == SOURCE_RELATION).astype(np.int64)
    k = query.k
    xs = sliding_window_view(subj, (k, k)).sum(axis=(2, 3))
    ys = sliding_window_view(rel, (k, k)).sum(axis=(2, 3))
    n_het = int(2 * (xs * ys).sum())
    n_homo = int((xs * (xs - 1) + ys * (ys - 1)).sum())
    return InteractionCount(n_het=n_het, n_homo=n_homo, n_windows=int(xs.size))


def count_closed_form(query: CountQuery):
    """Closed-form interaction counts, or ``None`` where no form applies.

    Supported: the three layouts, unpadded, with ``tau = 1`` for
    alternate.  The stack form additionally requires ``k <= n/2 + 1``:
    its derivation assumes every partially-mixed window row-composition
    occurs, which fails for larger kernels (e.g. n=6, k=5 where the
    expression gives 2000 but enumeration gives 1200).
    """
    query.validate()
    n, k = query.n, query.k
    if query.pad_mode != PAD_NONE or query.p != 0:
        return None
    if k > n:
        return None
    if query.kind == "stack":
        if k > n // 2 + 1:
            return None
        n_het = (n - k + 1) * k ** 2 * (k * (k + 1) * (k - 1) // 3)
    elif query.kind == "alternate":
        if query.tau != 1:
            return None
        n_het = (n - k + 1) ** 2 * k ** 2 * 2 * (k // 2) * ((k + 1) // 2)
    else:
        x = (k * k + 1) // 2
        y = (k * k) // 2
        n_het = (n - k + 1) ** 2 * 2 * x * y
    n_windows = (n - k + 1) ** 2
    total = n_windows * 2 * math.comb(k * k, 2)
    return InteractionCount(n_het=n_het, n_homo=total - n_het, n_windows=n_windows)


def alt_tau_hetero_expression(n: int, k: int, tau: int) -> float:
    """Analytic heterogeneous-interaction tally for the alternate layout.

    Evaluates ``(n k^2 / 4) * (k^2 - tau^2/3 - 2/3)``, a per-column tally
    over one vertical period of window offsets.  It is *not* a full-grid
    window count (see the brute-force counter for that); its value is its
    strict monotone decrease in ``tau``, which makes ``tau = 1`` the best
    block height.  Assumption violations raise rather than extrapolate.
    """
    if tau < 1:
        raise ValueError("tau must be >= 1")
    if tau >= k - 1:
        raise ValueError(f"expression requires tau < k - 1, got tau={tau}, k={k}")
    if n % (2 * tau) != 0:
        raise ValueError(f"expression requires 2*tau to divide n, got n={n}, tau={tau}")
    if k % tau != 0:
        raise ValueError(f"expression requires tau to divide k, got k={k}, tau={tau}")
    scale = n * k ** 2 / 4.0
    return scale * (k ** 2 - tau ** 2 / 3.0 - 2.0 / 3.0)


def _alt_vs_stack_in_scope(n: int, k: int) -> bool:
    # odd k: n >= 5k/3 - 1; even k: n >= (5k + 2)(k - 1) / (3k), in exact arithmetic
    if k % 2 == 1:
        return 3 * (n + 1) >= 5 * k
    return 3 * k * n >= (5 * k + 2) * (k - 1)


@dataclass
class PropositionCheck:
    proposition: str
    params: dict
    lhs: int
    rhs: int
    holds: bool

    def to_dict(self):
        return {"proposition": self.proposition, "params": self.params,
                "lhs": self.lhs, "rhs": self.rhs, "holds": self.holds}


@dataclass
class PropositionReport:
    checks: list = field(default_factory=list)
    out_of_scope: list = field(default_factory=list)

    @property
    def violations(self):
        return [c for c in self.checks if not c.holds]

    @property
    def ok(self) -> bool:
        return not self.violations

    def counts(self):
        per = {}
        for c in self.checks:
            stats = per.setdefault(c.proposition, {"checked": 0, "violations": 0})
            stats["checked"] += 1
            stats["violations"] += 0 if c.holds else 1
        return per

    def to_dict(self):
        return {
            "ok": self.ok,
            "propositions": self.counts(),
            "violations": [c.to_dict() for c in self.violations],
            "out_of_scope": self.out_of_scope,
            "n_checks": len(self.checks),
        }


def verify_propositions(ns, ks, taus=(1, 2, 4), pads=None) -> PropositionReport:
    """Check the four layout inequalities with brute-force counts.

    For every feasible ``(n, k)`` in the sweep:

    * ``alternate_ge_stack``  -- alternate(1) >= stack, for ``n`` at or
      above the kernel-size threshold (odd k: ``n >= 5k/3 - 1``; even k:
      ``n >= (5k+2)(k-1)/(3k)``).  Below it the case is recorded as out
      of scope, not as a violation.
    * ``alternate_tau_monotone`` -- alternate counts never increase in
      ``tau`` (over constructible ``tau`` values).
    * ``chequer_max``         -- chequer >= every other layout in the sweep.
    * ``circular_ge_zero``    -- for each layout and ``p > 0``, circular
      padding >= zero padding.

    The first three compare unpadded grids, matching the setting the
    inequalities are stated in; the fourth uses the padded ones.
    ``pads=None`` checks the half-kernel width ``k // 2`` for each ``k``;
    otherwise the given widths are used for every kernel.
    """
    ns = sorted(set(int(n) for n in ns))
    ks = sorted(set(int(k) for k in ks))
    taus = sorted(set(int(t) for t in taus))
    auto_pads = pads is None
    if not auto_pads:
        pads = sorted(set(int(p) for p in pads))
    for n in ns:
        if n > MAX_N:
            raise ValueError(f"n={n} beyond brute-force feasibility bound {MAX_N}")
    for k in ks:
        if k > MAX_K:
            raise ValueError(f"k={k} beyond brute-force feasibility bound {MAX_K}")

    report = PropositionReport()
    cache = {}

    def het(kind, n, k, tau=1, pad_mode=PAD_NONE, p=0):
        key = (kind, n, k, tau, pad_mode, p)
        if key not in cache:
            cache[key] = count_bruteforce(CountQuery(kind=kind, n=n, k=k, tau=tau,
                                                     pad_mode=pad_mode, p=p)).n_het
        return cache[key]

    for n in ns:
        for k in ks:
            if k > n:
                report.out_of_scope.append(
                    {"params": {"n": n, "k": k}, "reason": "k exceeds unpadded side"})
                continue
            ctaus = [t for t in taus if (n // 2) % t == 0]

            if _alt_vs_stack_in_scope(n, k):
                lhs = het("alternate", n, k, 1)
                rhs = het("stack", n, k)
                report.checks.append(PropositionCheck(
                    "alternate_ge_stack", {"n": n, "k": k}, lhs, rhs, lhs >= rhs))
            else:
                report.out_of_scope.append(
                    {"proposition": "alternate_ge_stack", "params": {"n": n, "k": k},
                     "reason": "n below threshold"})

            for lo, hi in zip(ctaus, ctaus[1:]):
                lhs = het("alternate", n, k, lo)
                rhs = het("alternate", n, k, hi)
                report.checks.append(PropositionCheck(
                    "alternate_tau_monotone", {"n": n, "k": k, "tau": lo, "tau_next": hi},
                    lhs, rhs, lhs >= rhs))

            cheq = het("chequer", n, k)
            rivals = [("stack", 1)] + [("alternate", t) for t in ctaus]
            for kind, tau in rivals:
                rhs = het(kind, n, k, tau)
                report.checks.append(PropositionCheck(
                    "chequer_max", {"n": n, "k": k, "other": kind, "tau": tau},
                    cheq, rhs, cheq >= rhs))

            for p in ([k // 2] if auto_pads else pads):
                if p <= 0:
                    continue
                for kind, tau in [("stack", 1), ("chequer", 1)] + [("alternate", t) for t in ctaus]:
                    lhs = het(kind, n, k, tau, PAD_CIRCULAR, p)
                    rhs = het(kind, n, k, tau, PAD_ZERO, p)
                    report.checks.append(PropositionCheck(
                        "circular_ge_zero", {"n": n, "k": k, "kind": kind, "tau": tau, "p": p},
                        lhs, rhs, lhs >= rhs))
    return report


def alt_vs_stack_boundary_ns(k: int):
    """Boundary grid sides for the alternate-vs-stack threshold at odd ``k``.

    Returns the smallest even ``n`` satisfying the threshold (grids need
    even ``n``), so sweeps can pin the tightest in-scope case.
    """
    if k % 2 == 0:
        raise ValueError("boundary helper is defined for odd k")
    n = math.ceil(5 * k / 3 - 1)
    if n % 2 == 1:
        n += 1
    return n
