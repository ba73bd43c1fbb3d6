"""Self-verification suites: run the fast oracles against the main paths.

Used by the `verify` CLI subcommand and the service endpoint; the test suite
exercises the same ground more thoroughly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datatypes import Image, LabeledDataset, RunConfig
from .features import embed, embed_vjp, make_embedder
from .knngraph import PointCloud, build_mutual_knn
from .oracle import brute_retrieve, brute_vr_persistence, finite_diff
from .persimage import class_topology, topo_loss_grad
from .persistence import compute_persistence
from .retrieval import PatchPool, build_patch_pools, retrieve


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str


def _complete_graph(points: np.ndarray) -> tuple:
    cloud = PointCloud(points=points, side_tags=["real"] * len(points))
    return build_mutual_knn(cloud, k=len(points) - 1)


def _diagram_multiset(dgm_pair) -> list[tuple[int, float, float]]:
    out = []
    for dgm in dgm_pair:
        for pt in dgm:
            out.append((pt.degree, round(pt.birth, 9), round(pt.death, 9)))
    return sorted(out)


def _oracle_multiset(h0, h1) -> list[tuple[int, float, float]]:
    out = [(0, round(b, 9), round(d, 9)) for b, d, _ in h0]
    out += [(1, round(b, 9), round(d, 9)) for b, d, _ in h1]
    return sorted(out)


def check_persistence_equivalence(cases: int = 50) -> SuiteResult:
    """Main filtration vs full boundary-matrix reduction on random clouds."""
    rng = np.random.default_rng(2024)
    for case in range(cases):
        n = int(rng.integers(3, 8))
        dim = 2 if case % 2 == 0 else 4
        pts = rng.uniform(0.0, 1.0, size=(n, dim))
        dists = [float(np.linalg.norm(pts[i] - pts[j]))
                 for i in range(n) for j in range(i + 1, n)]
        eps_max = max(dists)
        graph = _complete_graph(pts)
        main = _diagram_multiset(compute_persistence(graph, eps_max))
        brute = _oracle_multiset(*brute_vr_persistence(pts, eps_max))
        if main != brute:
            return SuiteResult("persistence-equivalence", False,
                               f"mismatch on case {case}: {main} vs {brute}")
    return SuiteResult("persistence-equivalence", True, f"{cases} clouds matched")


def check_hand_fixtures() -> SuiteResult:
    """Diagrams worked out by hand for tiny clouds."""
    pts = np.array([[0.0], [1.0], [3.0]])
    h0, h1 = compute_persistence(_complete_graph(pts), eps_max=5.0)
    got = sorted((pt.birth, pt.death, pt.capped) for pt in h0)
    want = [(0.0, 1.0, False), (0.0, 2.0, False), (0.0, 5.0, True)]
    if got != want or h1:
        return SuiteResult("hand-fixtures", False, f"collinear cloud: H0={got}, H1={h1}")

    square = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    _, h1 = compute_persistence(_complete_graph(square), eps_max=2.0)
    if len(h1) != 1 or abs(h1[0].birth - 1.0) > 1e-9 \
            or abs(h1[0].death - np.sqrt(2.0)) > 1e-9:
        return SuiteResult("hand-fixtures", False, f"unit square: H1={h1}")

    two = np.array([[0.0], [0.75]])
    h0, h1 = compute_persistence(_complete_graph(two), eps_max=2.0)
    got = sorted((pt.birth, pt.death, pt.capped) for pt in h0)
    if got != [(0.0, 0.75, False), (0.0, 2.0, True)] or h1:
        return SuiteResult("hand-fixtures", False, f"two points: H0={got}")
    return SuiteResult("hand-fixtures", True, "3 fixtures matched")


def _toy_pool(rng: np.random.Generator, size: int, side: int = 6) -> PatchPool:
    images = [Image(rng.uniform(0.0, 1.0, size=(side, side, 1))) for _ in range(size)]
    labels = [0] * size
    data = LabeledDataset(images=images, labels=labels, class_count=1)
    embedder = make_embedder("random-projection-tanh", (side, side, 1), dim=12, seed=5)
    return build_patch_pools(data, embedder, sigma_smooth=1.0)[0]


def check_retrieval_equivalence(pools: int = 20) -> SuiteResult:
    """Cached argmin vs full rescoring from raw pixels."""
    rng = np.random.default_rng(77)
    for case in range(pools):
        pool = _toy_pool(rng, size=int(rng.integers(3, 24)))
        raw = rng.standard_normal(12)
        q = raw / np.linalg.norm(raw)
        for lam in (0.0, 0.1, 0.5, 1.0):
            idx, sc = retrieve(pool, q, lam)
            bidx, bsc = brute_retrieve(pool, q, lam)
            if idx != bidx or abs(sc - bsc) > 1e-9:
                return SuiteResult(
                    "retrieval-equivalence", False,
                    f"case {case} lambda {lam}: ({idx}, {sc}) vs ({bidx}, {bsc})")
    return SuiteResult("retrieval-equivalence", True, f"{pools} pools x 4 lambdas matched")


def check_feature_gradients(cases: int = 10) -> SuiteResult:
    """embed_vjp vs central finite differences, both kinds, both normalize flags."""
    rng = np.random.default_rng(303)
    shape = (4, 5, 1)
    embedders = [make_embedder("pixel-identity", shape),
                 make_embedder("random-projection-tanh", shape, dim=9, seed=11)]
    for embedder in embedders:
        for normalize in (False, True):
            for _ in range(cases):
                pixels = rng.uniform(0.05, 0.95, size=shape)
                cot = rng.standard_normal(embedder.dim)
                analytic = embed_vjp(embedder, pixels, cot, normalize=normalize)

                def f(p):
                    return float(cot @ embed(embedder, p, normalize=normalize))

                numeric = finite_diff(f, pixels.copy(), step=1e-5)
                denom = max(np.linalg.norm(numeric), 1e-12)
                rel = np.linalg.norm(analytic - numeric) / denom
                if rel > 1e-4:
                    return SuiteResult(
                        "feature-gradients", False,
                        f"{embedder.kind} normalize={normalize}: rel err {rel:.2e}")
    return SuiteResult("feature-gradients", True,
                       f"{2 * 2 * cases} cases within 1e-4")


def topo_grad_config() -> RunConfig:
    return RunConfig(n_c=8, k_nn=10, pi_grid=8, sigma_pi=0.1, gamma_loop=1.0,
                     budget_B=4, residual_blocks_k=1)


def untied_topo_cloud(rng: np.random.Generator, n_side: int = 8, dim: int = 4,
                      tie_gap: float = 1e-6) -> tuple[np.ndarray, np.ndarray] | None:
    """Draw an (syn, real) pair whose filtrations have no near-ties.

    Collects every pairwise distance of each side; rejects the draw when two
    consecutive sorted values sit closer than tie_gap, which is what makes
    the persistence pairing stable under finite-difference probes.
    """
    syn = rng.uniform(0.0, 1.0, size=(n_side, dim))
    real = rng.uniform(0.0, 1.0, size=(n_side, dim))
    values = []
    for pts in (syn, real):
        for i in range(n_side):
            for j in range(i + 1, n_side):
                values.append(float(np.linalg.norm(pts[i] - pts[j])))
    values.sort()
    for a, b in zip(values, values[1:]):
        if b - a < tie_gap:
            return None
    return syn, real


def check_topology_gradient(cases: int = 10) -> SuiteResult:
    """topo_loss_grad vs finite differences on tie-free 8+8 clouds."""
    rng = np.random.default_rng(909)
    config = topo_grad_config()
    done = 0
    attempts = 0
    while done < cases:
        attempts += 1
        if attempts > cases * 50:
            return SuiteResult("topology-gradient", False,
                               "could not draw enough tie-free configurations")
        drawn = untied_topo_cloud(rng)
        if drawn is None:
            continue
        syn, real = drawn
        loss, grads = topo_loss_grad(list(syn), list(real), config, seed=1234)
        if loss == 0.0:
            continue

        def f(flat):
            pts = flat.reshape(syn.shape)
            topo = class_topology(list(pts), list(real), config, seed=1234)
            return topo.loss

        numeric = finite_diff(f, syn.reshape(-1).copy(), step=1e-5).reshape(syn.shape)
        denom = max(np.linalg.norm(numeric), 1e-12)
        rel = np.linalg.norm(grads - numeric) / denom
        if rel > 1e-4:
            return SuiteResult("topology-gradient", False,
                               f"case {done}: rel err {rel:.2e}")
        done += 1
    return SuiteResult("topology-gradient", True, f"{cases} configurations within 1e-4")


def run_verify(quick: bool = False) -> list[SuiteResult]:
    scale = 1 if quick else 2
    return [
        check_hand_fixtures(),
        check_persistence_equivalence(cases=10 * scale),
        check_retrieval_equivalence(pools=5 * scale),
        check_feature_gradients(cases=3 * scale),
        check_topology_gradient(cases=2 * scale),
    ]
