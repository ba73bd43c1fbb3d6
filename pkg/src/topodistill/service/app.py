"""FastAPI service exposing distillation runs and the analysis tools.

Every endpoint is a thin adapter: parse the request, call the core package,
shape the response. Domain errors surface as HTTP 400 with a typed payload.
"""

from __future__ import annotations

import json
import os

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from ..datatypes import SALT_SUBSAMPLE, Image, SyntheticSet, new_synthetic_set
from ..distill import kappa_from_topology, run_distillation
from ..errors import DatasetError, TopoDistillError
from ..features import embed, embedder_from_spec
from ..fileio import (emit_outputs, ingest_dataset, read_image, read_pointcloud_csv,
                      write_betti_csv, write_dataset_csv, write_diagram_csv,
                      write_edges_csv, write_pi_csv)
from ..knngraph import PointCloud, build_mutual_knn
from ..manifest import ARTIFACT_VERSION, manifest_from_dict
from ..persimage import class_topology, rasterize
from ..persistence import KAPPA_GRID, betti_curve, compute_persistence
from ..retrieval import all_scores, build_patch_pools
from ..toydata import gen_toy
from ..verify import run_verify
from .schemas import (AnalyzeRequest, AnalyzeResponse, CandidateScore, DistillRequest,
                      DistillResponse, GenToyRequest, GenToyResponse, HealthResponse,
                      PhRequest, PhResponse, RetrieveRequest, RetrieveResponse,
                      SuiteReport, VerifyRequest, VerifyResponse)

app = FastAPI(title="topodistill", version=ARTIFACT_VERSION)


@app.exception_handler(TopoDistillError)
async def _domain_error(request: Request, exc: TopoDistillError) -> JSONResponse:
    return JSONResponse(status_code=400,
                        content={"error": type(exc).__name__, "message": str(exc)})


@app.exception_handler(ValueError)
async def _value_error(request: Request, exc: ValueError) -> JSONResponse:
    return JSONResponse(status_code=400,
                        content={"error": "ValueError", "message": str(exc)})


@app.exception_handler(FileNotFoundError)
async def _missing_file(request: Request, exc: FileNotFoundError) -> JSONResponse:
    return JSONResponse(status_code=400,
                        content={"error": "FileNotFoundError", "message": str(exc)})


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=ARTIFACT_VERSION)


@app.post("/distill", response_model=DistillResponse)
def distill(req: DistillRequest) -> DistillResponse:
    manifest = manifest_from_dict(req.manifest)
    data = ingest_dataset(manifest.dataset_path)
    embedder = embedder_from_spec(manifest.feature_map, data.image_shape())
    syn, diag = run_distillation(data, manifest.config, manifest.mode, embedder)
    files = emit_outputs(syn, diag, req.out_dir, manifest.to_json())
    return DistillResponse(out_dir=req.out_dir, mode=manifest.mode,
                           total_steps=diag.total_steps,
                           kappa_per_class=diag.kappa_per_class,
                           probe_accuracy=diag.probe_accuracy, files=files)


@app.post("/ph", response_model=PhResponse)
def ph(req: PhRequest) -> PhResponse:
    pts = read_pointcloud_csv(req.points_csv)
    cloud = PointCloud(points=pts, side_tags=["real"] * pts.shape[0])
    graph = build_mutual_knn(cloud, req.k)
    eps_max = req.eps_max if req.eps_max is not None else graph.max_weight()
    if eps_max <= 0:
        raise ValueError("eps_max must be positive (graph may have no edges)")
    dgms = compute_persistence(graph, eps_max)
    os.makedirs(req.out_dir, exist_ok=True)
    write_edges_csv(os.path.join(req.out_dir, "edges.csv"), graph)
    write_diagram_csv(os.path.join(req.out_dir, "diagram.csv"), dgms)
    curve0 = betti_curve(dgms[0], eps_max, KAPPA_GRID, degree=0)
    curve1 = betti_curve(dgms[1], eps_max, KAPPA_GRID, degree=1)
    write_betti_csv(os.path.join(req.out_dir, "betti.csv"), curve0, curve1)
    files = ["edges.csv", "diagram.csv", "betti.csv"]
    for q in (0, 1):
        pi = rasterize(dgms[q], req.pi_grid, req.sigma_pi, eps_max, degree=q)
        write_pi_csv(os.path.join(req.out_dir, f"pi_{q}.csv"), pi)
        files += [f"pi_{q}.csv", f"pi_{q}.json"]
    return PhResponse(out_dir=req.out_dir, eps_max=float(eps_max),
                      h0_count=len(dgms[0]), h1_count=len(dgms[1]),
                      h1_bars=[[pt.birth, pt.death] for pt in dgms[1]],
                      files=sorted(files))


@app.post("/retrieve", response_model=RetrieveResponse)
def retrieve_one(req: RetrieveRequest) -> RetrieveResponse:
    manifest = manifest_from_dict(req.manifest)
    data = ingest_dataset(manifest.dataset_path)
    config = manifest.config
    embedder = embedder_from_spec(manifest.feature_map, data.image_shape())
    if req.class_id >= data.class_count:
        raise ValueError(f"class_id {req.class_id} out of range ({data.class_count} classes)")
    if req.image_index >= config.ipc:
        raise ValueError(f"image_index {req.image_index} out of range (ipc={config.ipc})")
    syn = new_synthetic_set(data, config.ipc, config.init_mode, config.seed)
    pools = build_patch_pools(data, embedder, config.sigma_smooth)
    pool = pools[req.class_id]
    j = req.class_id * config.ipc + req.image_index
    q = embed(embedder, syn.images[j].pixels, normalize=True)
    scores = all_scores(pool, q, config.lambda_fit)
    fit = np.sum((pool.cached_z - q) ** 2, axis=1)
    chosen = int(np.argmin(scores))
    candidates = [CandidateScore(index=i, source_image=pool.source_ids[i],
                                 score=float(scores[i]), fit_sq=float(fit[i]),
                                 complexity=float(pool.cached_c[i]))
                  for i in range(len(pool))]
    return RetrieveResponse(class_id=req.class_id, image_index=req.image_index,
                            lambda_fit=config.lambda_fit, chosen_index=chosen,
                            chosen_source=pool.source_ids[chosen],
                            chosen_score=float(scores[chosen]), candidates=candidates)


def _load_synthetic_images(run_dir: str, class_count: int, ipc: int) -> SyntheticSet:
    images: list[Image] = []
    labels: list[int] = []
    for class_id in range(class_count):
        for slot in range(ipc):
            stem = os.path.join(run_dir, f"syn_c{class_id}_{slot:03d}")
            for ext in (".pgm", ".ppm"):
                if os.path.exists(stem + ext):
                    images.append(read_image(stem + ext))
                    break
            else:
                raise DatasetError(f"missing synthetic image {stem}.pgm/.ppm")
            labels.append(class_id)
    return SyntheticSet(images=images, labels=labels, ipc=ipc)


@app.post("/analyze", response_model=AnalyzeResponse)
def analyze(req: AnalyzeRequest) -> AnalyzeResponse:
    manifest_path = os.path.join(req.run_dir, "manifest.json")
    diag_path = os.path.join(req.run_dir, "diagnostics.json")
    if not os.path.exists(manifest_path) or not os.path.exists(diag_path):
        raise DatasetError(f"{req.run_dir} is not a finished run directory")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = manifest_from_dict(json.load(fh))
    with open(diag_path, "r", encoding="utf-8") as fh:
        diag = json.load(fh)
    data = ingest_dataset(manifest.dataset_path)
    config = manifest.config
    embedder = embedder_from_spec(manifest.feature_map, data.image_shape())
    syn = _load_synthetic_images(req.run_dir, data.class_count, config.ipc)
    kappas = []
    for class_id in range(data.class_count):
        idx = data.class_indices(class_id)
        real_feats = np.stack([embed(embedder, data.images[i].pixels) for i in idx])
        block = syn.class_slice(class_id)
        syn_feats = [embed(embedder, syn.images[j].pixels)
                     for j in range(block.start, block.stop)]
        topo = class_topology(syn_feats, real_feats, config,
                              seed=[config.seed, SALT_SUBSAMPLE, class_id])
        kappas.append(kappa_from_topology(topo, config.gamma_loop))
    return AnalyzeResponse(run_dir=req.run_dir, mode=diag.get("mode", manifest.mode),
                           kappa_recorded=diag.get("kappa_per_class", []),
                           kappa_recomputed=kappas,
                           contraction_ratios=diag.get("contraction_ratios", []),
                           fit_gap_delta=diag.get("fit_gap_delta", 0.0),
                           probe_accuracy=diag.get("probe_accuracy", float("nan")))


@app.post("/gen-toy", response_model=GenToyResponse)
def gen_toy_endpoint(req: GenToyRequest) -> GenToyResponse:
    data = gen_toy(req.kind, req.n_per_class, seed=req.seed, side=req.side)
    parent = os.path.dirname(os.path.abspath(req.out_path))
    os.makedirs(parent, exist_ok=True)
    write_dataset_csv(req.out_path, data)
    h, w, c = data.image_shape()
    return GenToyResponse(path=req.out_path, image_count=len(data),
                          class_count=data.class_count, height=h, width=w, channels=c)


@app.post("/verify", response_model=VerifyResponse)
def verify_endpoint(req: VerifyRequest) -> VerifyResponse:
    results = run_verify(quick=req.quick)
    return VerifyResponse(passed=all(r.passed for r in results),
                          suites=[SuiteReport(name=r.name, passed=r.passed, detail=r.detail)
                                  for r in results])
