"""Randomized verification harnesses, one per checked identity or bound.

Every harness returns a JSON-ready report with at least ``check``, ``ok`` and
``violations``. Preconditions that make a harness meaningless raise
:class:`PreconditionError`; failures of the checked property are reported,
never raised.
"""

from __future__ import annotations

import time
from typing import Optional, Sequence

import numpy as np

from . import expressivity as ex
from . import heterophily as het
from .errors import PreconditionError
from .filters import (
    BASES, MONOMIAL, BivariatePoly, TensorDecomposition, UnivariatePoly, apply_bivariate_poly,
    apply_full_spectrum_eigen, apply_rank_S, apply_univariate, dense_bivariate_operator,
    diag_embed, eigengraph_response, project, rank1_layer, spectral_domain, tabulate,
    tensor_decompose,
)
from .graph import Graph, complete_graph, cycle_graph, disjoint_union, frucht_graph, laplacian, path_graph, random_graph
from .linalg import eigendecompose, is_simple_spectrum, kron_apply, pair_gft, vec, unvec
from .refinement import distinguishable, wl1_refine


def _report(check: str, violations, **stats) -> dict:
    out = {"check": check, "ok": not violations, "violations": violations}
    out.update(stats)
    return out


def _rel(a, b) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def _seed_for(*keys) -> int:
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


def random_simple_graph(rng, n_range=(3, 10), p=0.5, kind="combinatorial", max_tries=200):
    """Random graph whose Laplacian has a simple spectrum, with its spectrum."""
    for _ in range(max_tries):
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        g = random_graph(n, p, int(rng.integers(2**31)))
        s = eigendecompose(laplacian(g, kind), kind=kind)
        if is_simple_spectrum(s):
            return g, s
    raise PreconditionError("could not sample a simple-spectrum graph")


# --------------------------------------------------------------------------
# filtering identities


def verify_kron_identities(cases: int = 200, n_max: int = 8, seed: int = 0, tol: float = 1e-12) -> dict:
    """``vec(A X B) == (B^T kron A) vec(X)`` and ``v kron u == vec(u v^T)``."""
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    worst = worst_outer = 0.0
    violations = []
    for c in range(cases):
        n = int(rng.integers(1, n_max + 1))
        A, B, X = (rng.standard_normal((n, n)) for _ in range(3))
        err = float(np.max(np.abs(vec(kron_apply(A, B, X)) - np.kron(B.T, A) @ vec(X))))
        u, v = rng.standard_normal(n), rng.standard_normal(n)
        err_outer = float(np.max(np.abs(np.kron(v, u) - vec(np.outer(u, v)))))
        worst, worst_outer = max(worst, err), max(worst_outer, err_outer)
        if err >= tol or err_outer >= tol:
            violations.append({"case": c, "n": n, "err": err, "err_outer": err_outer})
    return _report("lemma1", violations, cases=cases, max_err=worst, max_err_outer=worst_outer,
                   seconds=time.perf_counter() - t0)


def verify_route_equivalence(cases: int = 50, K_max: int = 4, n_range=(3, 10), seed: int = 0,
                             tol: float = 1e-8) -> dict:
    """Matrix polynomial, eigengraph scaling and the dense Kronecker operator agree."""
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    worst = 0.0
    violations = []
    for c in range(cases):
        kind = ("combinatorial", "normalized")[c % 2]
        g, s = random_simple_graph(rng, n_range, kind=kind)
        L = laplacian(g, kind)
        q = BivariatePoly.random(int(rng.integers(0, K_max + 1)), rng)
        e = rng.standard_normal((g.n, g.n))
        route2 = apply_bivariate_poly(L, q, e)
        route1 = apply_full_spectrum_eigen(s, eigengraph_response(q, s), e)
        dense = unvec(dense_bivariate_operator(L, q) @ vec(e), g.n)
        err = max(_rel(route1, dense), _rel(route2, dense))
        worst = max(worst, err)
        if err >= tol:
            violations.append({"case": c, "n": g.n, "K": q.K, "rel_err": err})
    return _report("prop1", violations, cases=cases, max_rel_err=worst,
                   seconds=time.perf_counter() - t0)


def verify_diag_embed(cases: int = 50, n_range=(2, 10), K_max: int = 4, seed: int = 0,
                      tol: float = 1e-9) -> dict:
    """Projecting a filtered diagonal embedding equals filtering with ``g(lam, lam)``."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    violations = []
    repeated = 0
    for c in range(cases):
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        g = random_graph(n, 0.5, int(rng.integers(2**31)))
        s = eigendecompose(laplacian(g, "normalized"), kind="normalized")
        repeated += not is_simple_spectrum(s)
        q = BivariatePoly.random(int(rng.integers(0, K_max + 1)), rng)
        x = rng.standard_normal(n)
        lhs = project(s, apply_full_spectrum_eigen(s, tabulate(q, s), diag_embed(s, x)))
        rhs = apply_univariate(s, q(s.eigenvalues, s.eigenvalues), x)
        err = float(np.max(np.abs(lhs - rhs)) / max(1.0, float(np.max(np.abs(rhs)))))
        roundtrip = float(np.max(np.abs(project(s, diag_embed(s, x)) - x)))
        worst = max(worst, err, roundtrip)
        if err >= tol or roundtrip >= tol:
            violations.append({"case": c, "n": n, "err": err, "roundtrip": roundtrip})
    return _report("prop2", violations, cases=cases, max_err=worst, cases_with_repeated_eigenvalues=repeated)


def random_rank_matrix(rng, size: int, rank: int) -> np.ndarray:
    return rng.standard_normal((size, rank)) @ rng.standard_normal((rank, size))


def verify_rank_law(draws: int = 50, K: int = 6, max_rank: int = 4, n: int = 6, seed: int = 0,
                    exact_tol: float = 1e-9, gap_tol: float = 1e-3, gap_share: float = 0.9) -> dict:
    """Rank-``S`` decompositions reproduce the operator iff ``S >= rank(A)``."""
    rng = np.random.default_rng(seed)
    violations = []
    gaps_ok = 0
    worst_exact = 0.0
    min_short = np.inf
    for dr in range(draws):
        r = int(rng.integers(1, max_rank + 1))
        q = BivariatePoly(random_rank_matrix(rng, K + 1, r))
        g = random_graph(n, 0.5, int(rng.integers(2**31)))
        L = laplacian(g, "normalized")
        ref = dense_bivariate_operator(L, q)
        ref_norm = np.linalg.norm(ref)
        errs = {}
        for S in range(1, K + 2):
            t = tensor_decompose(q, S)
            approx = dense_bivariate_operator(L, t.to_bivariate())
            errs[S] = float(np.linalg.norm(approx - ref) / ref_norm)
            e = rng.standard_normal((n, n))
            implicit = _rel(apply_rank_S(t, L, e), unvec(approx @ vec(e), n))
            if implicit >= exact_tol:
                violations.append({"draw": dr, "S": S, "implicit_vs_dense": implicit})
        for S, err in errs.items():
            if S >= r:
                worst_exact = max(worst_exact, err)
                if err >= exact_tol:
                    violations.append({"draw": dr, "rank": r, "S": S, "err": err, "expected": "exact"})
            else:
                min_short = min(min_short, err)
                if err < exact_tol:
                    violations.append({"draw": dr, "rank": r, "S": S, "err": err, "expected": "inexact"})
        if r == 1 or errs[r - 1] > gap_tol:
            gaps_ok += 1
    share = gaps_ok / draws
    if share < gap_share:
        violations.append({"gap_share": share, "required": gap_share})
    return _report("prop3", violations, draws=draws, max_exact_err=worst_exact,
                   min_truncated_err=float(min_short), truncation_gap_share=share)


def _random_filter(rng, degree: int, domain) -> UnivariatePoly:
    basis = BASES[int(rng.integers(len(BASES)))]
    coeffs = rng.uniform(-1.0, 1.0, degree + 1)
    return UnivariatePoly(basis, tuple(coeffs), None if basis == MONOMIAL else domain)


def verify_rank1_layer(cases: int = 50, n_range=(2, 8), K_max: int = 4, d: int = 3, seed: int = 0,
                       tol: float = 1e-10, coeff_tol: float = 1e-9) -> dict:
    """Thin-matrix evaluation of ``h(L) e f(L) H`` against the Kronecker form,
    and the eigengraph coefficients of ``sum_r h_r(L) e f_r(L)``."""
    rng = np.random.default_rng(seed)
    violations = []
    worst_layer = worst_coeff = 0.0
    for c in range(cases):
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        kind = ("combinatorial", "normalized")[c % 2]
        g = random_graph(n, 0.5, int(rng.integers(2**31)))
        L = laplacian(g, kind)
        s = eigendecompose(L, kind=kind)
        dom = spectral_domain(L, kind)
        f = _random_filter(rng, int(rng.integers(0, K_max + 1)), dom)
        h = _random_filter(rng, int(rng.integers(0, K_max + 1)), dom)
        e = rng.standard_normal((n, n))
        H = rng.standard_normal((n, d))
        layer = rank1_layer(L, f, h, e, H)
        F, Hm = f.apply(L, np.eye(n)), h.apply(L, np.eye(n))
        kron_form = unvec(np.kron(F, Hm) @ vec(e), n) @ H
        err = float(np.max(np.abs(layer - kron_form)) / max(1.0, float(np.max(np.abs(kron_form)))))

        pairs = [(f, h)] + [(_random_filter(rng, 2, dom), _random_filter(rng, 2, dom))
                            for _ in range(int(rng.integers(0, 3)))]
        t = TensorDecomposition(tuple(pairs))
        out = pair_gft(s, apply_rank_S(t, L, e))
        lam = s.eigenvalues
        resp = sum(np.outer(hh(lam), ff(lam)) for ff, hh in pairs)  # [i, j] = h(lam_i) f(lam_j)
        expected = resp * pair_gft(s, e)
        cerr = float(np.max(np.abs(out - expected)) / max(1.0, float(np.max(np.abs(expected)))))
        worst_layer, worst_coeff = max(worst_layer, err), max(worst_coeff, cerr)
        if err >= tol or cerr >= coeff_tol:
            violations.append({"case": c, "n": n, "layer_err": err, "coeff_err": cerr})
    return _report("rank1", violations, cases=cases, max_layer_err=worst_layer,
                   max_coeff_err=worst_coeff)


# --------------------------------------------------------------------------
# expressivity


def verify_universality(graphs: int = 20, n_range=(2, 8), seed: int = 0, tol: float = 1e-7,
                        kind: str = "normalized") -> dict:
    """Interpolated filters reproduce random targets; degenerate inputs are rejected."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    violations = []
    for c in range(graphs):
        g, s = random_simple_graph(rng, n_range, kind=kind)
        e = rng.standard_normal((g.n, g.n))
        Y = rng.standard_normal((g.n, g.n))
        q = ex.universal_interpolate(s, e, Y)
        err = float(np.max(np.abs(apply_full_spectrum_eigen(s, tabulate(q, s), e) - Y)))
        worst = max(worst, err)
        if err >= tol:
            violations.append({"graph": c, "n": g.n, "max_err": err})

    rejections = {}
    k3 = eigendecompose(laplacian(complete_graph(3), "normalized"))
    try:
        ex.universal_interpolate(k3, np.ones((3, 3)) + np.eye(3), np.eye(3))
        rejections["repeated_eigenvalues"] = None
    except PreconditionError as exc:
        rejections["repeated_eigenvalues"] = str(exc)
    g, s = random_simple_graph(rng, (4, 6), kind=kind)
    e = rng.standard_normal((g.n, g.n))
    u0, u1 = s.U[:, 0], s.U[:, 1]
    e = e - (u0 @ e @ u1) * np.outer(u0, u1)
    try:
        ex.universal_interpolate(s, e, np.eye(g.n))
        rejections["vanishing_coefficient"] = None
    except PreconditionError as exc:
        rejections["vanishing_coefficient"] = str(exc)
    if rejections["repeated_eigenvalues"] is None or "repeated eigenvalues" not in rejections["repeated_eigenvalues"]:
        violations.append({"rejection": "repeated_eigenvalues", "message": rejections["repeated_eigenvalues"]})
    if rejections["vanishing_coefficient"] is None or "vanishing" not in rejections["vanishing_coefficient"]:
        violations.append({"rejection": "vanishing_coefficient", "message": rejections["vanishing_coefficient"]})
    return _report("thm1", violations, graphs=graphs, max_err=worst, rejections=rejections)


def random_test_graphs(count: int, n: int, seed: int, p_range=(0.25, 0.6), labels: int = 0) -> list:
    """``count`` random graphs on ``n`` vertices, optionally with random labels."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        g = random_graph(n, float(rng.uniform(*p_range)), int(rng.integers(2**31)))
        if labels:
            g = g.with_labels(rng.integers(0, labels, n))
        out.append(g)
    return out


def verify_order2_bound(graphs: Optional[Sequence[Graph]] = None, Ks=(1, 2, 3), trials: int = 20,
                        seed: int = 0, kind: str = "normalized", extra_rounds: int = 0) -> dict:
    """Aggregate pair-colour upper-bound runs over graphs and degrees."""
    if graphs is None:
        graphs = random_test_graphs(20, 8, seed)
    t0 = time.perf_counter()
    violations = []
    worst = 0.0
    cells = 0
    for gi, g in enumerate(graphs):
        for K in Ks:
            rep = ex.check_order2_bound(g, K, trials, _seed_for(seed, gi, K), kind=kind,
                                        rounds=K + extra_rounds, graph_id=gi)
            cells += 1
            worst = max(worst, rep["max_spread"])
            if rep["violations"]:
                violations.append({"graph": gi, "K": K, "count": len(rep["violations"]),
                                   "max_spread": rep["max_spread"]})
    return _report("thm2", violations, graphs=len(graphs), Ks=list(Ks), trials=trials,
                   laplacian=kind, rounds="K" if not extra_rounds else f"K+{extra_rounds}",
                   failing_cells=len(violations), cells=cells, max_spread=worst,
                   seconds=time.perf_counter() - t0)


def verify_lower_bound(graphs: int = 10, n: int = 8, seed: int = 0, kind: str = "normalized",
                       labels: int = 3, max_samples: int = 500) -> dict:
    """Separating construction on random graphs that meet its preconditions."""
    rng = np.random.default_rng(seed)
    violations = []
    accepted = rejected = nontrivial = 0
    reasons = {}
    worst = 0.0
    for _ in range(max_samples):
        if accepted == graphs:
            break
        g = random_graph(n, float(rng.uniform(0.3, 0.6)), int(rng.integers(2**31)))
        if labels:
            g = g.with_labels(rng.integers(0, labels, n))
        try:
            _, _, rep = ex.construct_separating_poly(g, seed=int(rng.integers(2**31)), kind=kind)
        except PreconditionError as exc:
            rejected += 1
            key = "repeated eigenvalues" if "repeated" in str(exc) else "vanishing eigengraph coefficient"
            reasons[key] = reasons.get(key, 0) + 1
            continue
        accepted += 1
        nontrivial += rep["has_nontrivial_class"]
        worst = max(worst, rep["max_spread"])
        if rep["violations"]:
            violations.append({"graph": accepted - 1, "violations": rep["violations"]})
    if accepted < graphs:
        violations.append({"accepted": accepted, "required": graphs})
    return _report("thm3", violations, accepted=accepted, rejected=rejected,
                   rejection_reasons=reasons, graphs_with_nontrivial_class=nontrivial,
                   max_residual=worst)


def verify_wl1_bound(graphs: Optional[Sequence[Graph]] = None, Ks=(0, 1, 2, 3), trials: int = 20,
                     seed: int = 0, kind: str = "normalized") -> dict:
    """Node-level bound on random labelled graphs plus the Frucht graph."""
    if graphs is None:
        graphs = random_test_graphs(20, 10, seed, labels=2)
    violations = []
    worst = 0.0
    for gi, g in enumerate(graphs):
        for K in Ks:
            rep = ex.check_wl1_bound(g, K, trials, _seed_for(seed, gi, K), kind=kind, graph_id=gi)
            worst = max(worst, rep["max_spread"])
            if rep["violations"]:
                violations.append({"graph": gi, "K": K, "count": len(rep["violations"])})
    frucht = frucht_graph()
    colours = len(set(wl1_refine(frucht)[0].colors))
    frucht_rep = ex.check_wl1_bound(frucht, 3, trials, seed, kind=kind, graph_id="frucht")
    if colours != 1:
        violations.append({"frucht_colours": colours})
    if frucht_rep["violations"]:
        violations.append({"frucht": frucht_rep["violations"]})
    return _report("wlspec", violations, graphs=len(graphs), Ks=list(Ks), trials=trials,
                   max_spread=worst, frucht_colours=colours,
                   frucht_max_spread=frucht_rep["max_spread"])


def verify_refinement_separation() -> dict:
    c6 = cycle_graph(6)
    two_c3 = disjoint_union(cycle_graph(3), cycle_graph(3))
    wl1 = distinguishable(c6, two_c3, "wl1")
    local2 = distinguishable(c6, two_c3, "local2")
    violations = []
    if wl1:
        violations.append("1-WL separates C6 from 2xC3")
    if not local2:
        violations.append("Local 2-GNN does not separate C6 from 2xC3")
    return _report("wlsep", violations, wl1_distinguishes=wl1, local2_distinguishes=local2)


# --------------------------------------------------------------------------
# heterophily


def _fd_gradient(f, v, step: float = 1e-6) -> np.ndarray:
    grad = np.empty_like(v)
    for i in range(v.size):
        e = np.zeros_like(v)
        e[i] = step
        grad[i] = (f(v + e) - f(v - e)) / (2 * step)
    return grad


OPCONV_MODELS = {1: ((5,), (1.0,)), 2: ((4, 3), (1.0, 0.5)), 3: ((4, 1, 3), (1.0, 0.5, 2.0))}


def verify_opconv(ks=(1, 2, 3), d: int = 50, perturbations: int = 1000, seed: int = 0,
                  grad_tol: float = 1e-6, radius: float = 0.1) -> dict:
    """Closed-form optimum: stationary, locally unbeaten, exact for one class."""
    rng = np.random.default_rng(seed)
    violations = []
    stats = {}
    for k in ks:
        sizes, taus = OPCONV_MODELS[k]
        model = het.sample_model(k, sizes, d, taus, _seed_for(seed, k))
        coeffs, C = het.optimal_convolution(model)

        def f(v):
            return het.loss_equivariant(het.EquivariantConv.from_vector(v, k), model)

        grad = float(np.linalg.norm(_fd_gradient(f, coeffs.to_vector())))
        base = het.loss(C, model)
        worst_gain = np.inf
        for _ in range(perturbations):
            D = rng.standard_normal(C.shape)
            D *= rng.uniform(0.0, radius) / np.linalg.norm(D)
            worst_gain = min(worst_gain, het.loss(C + D, model) - base)
        stats[k] = {"grad_norm": grad, "loss": base, "min_perturbation_gain": float(worst_gain)}
        if grad >= grad_tol:
            violations.append({"k": k, "grad_norm": grad})
        if worst_gain < 0:
            violations.append({"k": k, "min_perturbation_gain": float(worst_gain)})
        if k == 1:
            exact = 1.0 / (sizes[0] + taus[0])
            err = abs(coeffs.beta[0] - exact)
            stats[k]["beta_exact_err"] = float(err)
            if err >= 1e-12:
                violations.append({"k": 1, "beta": float(coeffs.beta[0]), "expected": exact})
    return _report("opconv", violations, d=d, perturbations=perturbations, per_k=stats)


def verify_hdasym(k: int = 3, size: int = 10, tau: float = 1.0, dims=None, seeds: int = 50,
                  seed: int = 0, min_ratio: float = 10.0) -> dict:
    dims = [2**j for j in range(5, 14)] if dims is None else list(dims)
    t0 = time.perf_counter()
    sweep = het.asymptotic_sweep(k, [size] * k, tau, dims, seeds, base_seed=seed)
    violations = []
    if not sweep["beta_monotone"]:
        violations.append({"beta_median": sweep["beta_median"]})
    if k > 1 and sweep["gamma_ratio"] < min_ratio:
        violations.append({"gamma_ratio": sweep["gamma_ratio"], "required": min_ratio})
    stats = {key: val for key, val in sweep.items() if key != "rows"}
    return _report("hdasym", violations, seconds=time.perf_counter() - t0, **stats), sweep["rows"]


def two_class_sizes(n: int) -> tuple:
    return (n - n // 2, n // 2)


def verify_limitedex(graphs: int = 20, n_range=(3, 12), seed: int = 0, kind: str = "combinatorial",
                     d: int = 8, min_distance: float = 0.01) -> dict:
    """Activating-list rank, constraint kernel and distance of the optimum."""
    rng = np.random.default_rng(seed)
    cases = [("P2", path_graph(2)), ("P3", path_graph(3))]
    for c in range(graphs):
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        cases.append((f"random{c}", random_graph(n, float(rng.uniform(0.3, 0.7)),
                                                 int(rng.integers(2**31)), connected=True)))
    violations = []
    rows = []
    for name, g in cases:
        s = eigendecompose(laplacian(g, kind), kind=kind)
        ob = het.spectral_obstruction(g, s)
        row = {"graph": name, "n": g.n, "K": ob.K, "stacked_rank": ob.stacked_rank,
               "null_dim": ob.null_dim, "verdict": ob.verdict}
        if not ob.verdict:
            violations.append(row)
        if g.n >= 3:
            model = het.sample_model(2, two_class_sizes(g.n), d, 1.0, _seed_for(seed, g.n, len(rows)))
            _, C = het.optimal_convolution(model)
            dist = het.distance_to_spectral_subspace(C, s)
            row["distance"] = dist
            if dist <= min_distance:
                violations.append({"graph": name, "distance": dist})
        rows.append(row)
    return _report("limitedex", violations, graphs=len(cases), cases=rows,
                   min_distance=min((r["distance"] for r in rows if "distance" in r), default=None))


def verify_jensen(draws: int = 50, ks=(2, 3), d: int = 10, seed: int = 0, slack: float = 1e-12) -> dict:
    rng = np.random.default_rng(seed)
    models = {2: ((3, 4), (1.0, 0.5)), 3: ((2, 1, 3), (1.0, 0.5, 2.0))}
    violations = []
    worst = -np.inf
    for k in ks:
        sizes, taus = models[k]
        model = het.sample_model(k, sizes, d, taus, _seed_for(seed, k))
        for dr in range(draws):
            C = rng.standard_normal((model.n, model.n))
            gap = het.loss(het.reynolds_average(C, model.partition), model) - het.loss(C, model)
            worst = max(worst, gap)
            if gap > slack:
                violations.append({"k": k, "draw": dr, "gap": gap})
    return _report("jensen", violations, draws=draws, ks=list(ks), max_gap=float(worst))


ENERGY_DEFAULTS = {"h_grid": (0.1, 0.3, 0.5, 0.7, 0.9), "sizes": (20,) * 8, "avg_degree": 8.0,
                   "d": 128, "tau": 1.0, "seeds": 10, "delta": 0.25, "kind": "normalized"}


def verify_energy_trend(seed: int = 0, **overrides) -> tuple:
    cfg = dict(ENERGY_DEFAULTS, **overrides)
    rows = het.heterophily_sweep(cfg["h_grid"], cfg["sizes"], cfg["avg_degree"], cfg["d"], cfg["tau"],
                                 cfg["seeds"], [cfg["delta"]], cfg["kind"], base_seed=seed)
    med = het.median_energy(rows, cfg["delta"])
    vals = [med[h] for h in sorted(med)]
    violations = [] if all(b < a for a, b in zip(vals, vals[1:])) else [{"medians": vals}]
    config = {k: (list(v) if isinstance(v, tuple) else v) for k, v in cfg.items()}
    return _report("energy", violations, medians={str(h): m for h, m in med.items()}, config=config), rows
