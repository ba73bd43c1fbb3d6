"""The distillation driver.

A run splits its step budget into k+1 equal blocks. Within a block, Adam
descends the composite objective (classification loss of a frozen linear
head, feature-moment alignment, and optionally the topology term) on the
synthetic pixels. At the end of each of the first k blocks a residual stage
mixes every synthetic image toward a real anchor: one fixed patch per class
in static-anchor mode, a per-image retrieval in drc modes. Everything is a
pure function of (dataset, config, mode).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .datatypes import (SALT_ANCHOR, SALT_SUBSAMPLE, Image, LabeledDataset, RunConfig,
                        SyntheticSet, new_synthetic_set)
from .errors import EmptyClassError, NonFiniteLossError
from .features import FeatureCache, PixelEmbedder, embed, embed_vjp
from .persimage import ClassTopology, class_topology, topo_loss_grad
from .persistence import KAPPA_GRID, betti_curve, kappa
from .retrieval import PatchPool, build_patch_pools, resample, residual_update, retrieve

ADAM_EPS = 1e-8


@dataclass
class ObjectiveTerms:
    step: int
    sup_loss: float
    align_loss: float
    topo_loss: float
    total: float


@dataclass
class StageClassRecord:
    class_id: int
    pre_mean_pairwise: float
    post_mean_pairwise: float
    anchor_mean_pairwise: float
    fit_gap: float
    anchor_sources: list[int]


@dataclass
class StageRecord:
    stage_index: int
    step: int
    classes: list[StageClassRecord]
    fit_gap: float
    contraction_ratio: float


@dataclass
class DistillDiagnostics:
    mode: str
    total_steps: int
    fit_gap_delta: float
    contraction_ratios: list[float]
    kappa_per_class: list[float]
    probe_accuracy: float
    stages: list[StageRecord] = field(default_factory=list)
    step_losses: list[ObjectiveTerms] = field(default_factory=list)
    final_topology: list[ClassTopology] | None = None  # not serialized

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "total_steps": self.total_steps,
            "fit_gap_delta": self.fit_gap_delta,
            "contraction_ratios": list(self.contraction_ratios),
            "kappa_per_class": list(self.kappa_per_class),
            "probe_accuracy": self.probe_accuracy,
            "stages": [
                {
                    "stage_index": s.stage_index,
                    "step": s.step,
                    "fit_gap": s.fit_gap,
                    "contraction_ratio": s.contraction_ratio,
                    "classes": [
                        {
                            "class_id": c.class_id,
                            "pre_mean_pairwise": c.pre_mean_pairwise,
                            "post_mean_pairwise": c.post_mean_pairwise,
                            "anchor_mean_pairwise": c.anchor_mean_pairwise,
                            "fit_gap": c.fit_gap,
                            "anchor_sources": list(c.anchor_sources),
                        }
                        for c in s.classes
                    ],
                }
                for s in self.stages
            ],
            "step_losses": [
                {"step": t.step, "sup": t.sup_loss, "align": t.align_loss,
                 "topo": t.topo_loss, "total": t.total}
                for t in self.step_losses
            ],
        }


def precompute_real_stats(real: LabeledDataset, embedder) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per-class coordinate-wise mean and population variance of raw features."""
    stats = []
    for class_id in range(real.class_count):
        idx = real.class_indices(class_id)
        if not idx:
            raise EmptyClassError(f"class {class_id} has no images")
        feats = np.stack([embed(embedder, real.images[i].pixels) for i in idx])
        stats.append((feats.mean(axis=0), feats.var(axis=0)))
    return stats


def fit_ridge_head(feats: np.ndarray, labels, class_count: int,
                   ridge: float) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form centered ridge regression onto one-hot labels.

    Normalizing the Gram matrix by n makes the solution invariant to
    duplicating the dataset.
    """
    if ridge <= 0:
        raise ValueError("ridge must be > 0")
    n, d = feats.shape
    onehot = np.zeros((n, class_count))
    onehot[np.arange(n), labels] = 1.0
    x_mean = feats.mean(axis=0)
    y_mean = onehot.mean(axis=0)
    xc = feats - x_mean
    yc = onehot - y_mean
    gram = xc.T @ xc / n + ridge * np.eye(d)
    weights = np.linalg.solve(gram, xc.T @ yc / n)
    bias = y_mean - x_mean @ weights
    return weights, bias


def fit_frozen_head(real: LabeledDataset, embedder, ridge: float
                    ) -> tuple[np.ndarray, np.ndarray]:
    feats = np.stack([embed(embedder, img.pixels) for img in real.images])
    return fit_ridge_head(feats, real.labels, real.class_count, ridge)


def head_accuracy(weights: np.ndarray, bias: np.ndarray, feats: np.ndarray, labels) -> float:
    logits = feats @ weights + bias
    return float(np.mean(np.argmax(logits, axis=1) == np.asarray(labels)))


def _softmax_ce(logits: np.ndarray, labels) -> tuple[float, np.ndarray]:
    """Mean cross-entropy and its gradient in the logits."""
    n = logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    exps = np.exp(shifted)
    probs = exps / exps.sum(axis=1, keepdims=True)
    picked = probs[np.arange(n), labels]
    loss = float(-np.mean(np.log(picked)))
    grad = probs.copy()
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n


def _mean_pairwise(feats: np.ndarray) -> float:
    m = feats.shape[0]
    if m < 2:
        return 0.0
    total = 0.0
    for i in range(m):
        for j in range(i + 1, m):
            total += float(np.linalg.norm(feats[i] - feats[j]))
    return total / (m * (m - 1) / 2)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0


def adam_step(state: AdamState, grad: np.ndarray, lr: float,
              betas: tuple[float, float]) -> np.ndarray:
    """Bias-corrected Adam; returns the additive update."""
    b1, b2 = betas
    state.t += 1
    state.m = b1 * state.m + (1.0 - b1) * grad
    state.v = b2 * state.v + (1.0 - b2) * grad * grad
    m_hat = state.m / (1.0 - b1 ** state.t)
    v_hat = state.v / (1.0 - b2 ** state.t)
    return -lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


@dataclass
class RunContext:
    embedder: object
    pools: list[PatchPool]
    real_stats: list[tuple[np.ndarray, np.ndarray]]
    head_weights: np.ndarray
    head_bias: np.ndarray
    real_class_feats: list[np.ndarray]
    syn_cache: FeatureCache
    static_anchors: list[Image] | None


def build_context(real: LabeledDataset, config: RunConfig, mode: str,
                  embedder=None) -> RunContext:
    if embedder is None:
        embedder = PixelEmbedder(real.image_shape())
    pools = build_patch_pools(real, embedder, config.sigma_smooth)
    real_stats = precompute_real_stats(real, embedder)
    head_w, head_b = fit_frozen_head(real, embedder, config.head_ridge)
    real_class_feats = []
    for class_id in range(real.class_count):
        idx = real.class_indices(class_id)
        real_class_feats.append(
            np.stack([embed(embedder, real.images[i].pixels) for i in idx]))
    static_anchors = None
    if mode == "static-anchor":
        h, w, _ = real.image_shape()
        static_anchors = []
        for class_id in range(real.class_count):
            rng = np.random.default_rng([config.seed, SALT_ANCHOR, class_id])
            pick = int(rng.integers(len(pools[class_id])))
            static_anchors.append(resample(pools[class_id].patches[pick], h, w))
    return RunContext(embedder=embedder, pools=pools, real_stats=real_stats,
                      head_weights=head_w, head_bias=head_b,
                      real_class_feats=real_class_feats,
                      syn_cache=FeatureCache(config.refresh_T),
                      static_anchors=static_anchors)


def effective_lambda_topo(mode: str, config: RunConfig) -> float:
    """Residual-only modes run without the topology term."""
    if mode in ("static-anchor", "drc"):
        return 0.0
    return config.lambda_topo


def _topology_due(step: int, block_len: int, cadence: str, refresh_T: int) -> bool:
    at_refresh = step % refresh_T == 0
    at_stage_end = (step + 1) % block_len == 0
    if cadence == "refresh":
        return at_refresh
    if cadence == "stage-end":
        return at_stage_end
    return at_refresh or at_stage_end


def compute_objective(syn: SyntheticSet, config: RunConfig, ctx: RunContext,
                      step: int, lambda_topo_eff: float, topo_due: bool
                      ) -> tuple[ObjectiveTerms, np.ndarray]:
    """Total loss and its exact pixel gradient; the optimizer state is untouched."""
    n = len(syn.images)
    ipc = syn.ipc
    feats = np.stack([embed(ctx.embedder, img.pixels) for img in syn.images])
    cotangents = np.zeros_like(feats)

    logits = feats @ ctx.head_weights + ctx.head_bias
    sup_loss, dlogits = _softmax_ce(logits, syn.labels)
    cotangents += dlogits @ ctx.head_weights.T

    align_loss = 0.0
    for class_id in range(syn.class_count):
        block = slice(class_id * ipc, (class_id + 1) * ipc)
        fc = feats[block]
        mu = fc.mean(axis=0)
        var = fc.var(axis=0)
        mu_r, var_r = ctx.real_stats[class_id]
        dmu = mu - mu_r
        dvar = var - var_r
        align_loss += float(dmu @ dmu) + float(dvar @ dvar)
        cotangents[block] += config.beta_align * (
            2.0 * dmu / ipc + (4.0 / ipc) * dvar * (fc - mu))

    topo_total = 0.0
    if lambda_topo_eff > 0.0 and topo_due:
        for class_id in range(syn.class_count):
            block = slice(class_id * ipc, (class_id + 1) * ipc)
            cached = [ctx.syn_cache.get_or_embed(ctx.embedder, ("syn", j),
                                                 syn.images[j].pixels, step)
                      for j in range(block.start, block.stop)]
            loss_c, grad_c = topo_loss_grad(
                cached, ctx.real_class_feats[class_id], config,
                seed=[config.seed, SALT_SUBSAMPLE, class_id])
            topo_total += loss_c
            cotangents[block] += lambda_topo_eff * grad_c

    total = sup_loss + config.beta_align * align_loss + lambda_topo_eff * topo_total
    terms = ObjectiveTerms(step=step, sup_loss=sup_loss, align_loss=align_loss,
                           topo_loss=topo_total, total=total)
    if not np.isfinite(total):
        raise NonFiniteLossError(f"non-finite loss at step {step}", diagnostics=terms)

    pixel_grads = np.stack([
        embed_vjp(ctx.embedder, syn.images[j].pixels, cotangents[j]) for j in range(n)])
    return terms, pixel_grads


def step_gradient(syn: SyntheticSet, state: AdamState, config: RunConfig,
                  ctx: RunContext, step: int, lambda_topo_eff: float,
                  topo_due: bool) -> ObjectiveTerms:
    """One full gradient evaluation and Adam update, in place on syn."""
    terms, pixel_grads = compute_objective(syn, config, ctx, step, lambda_topo_eff, topo_due)
    stacked = syn.pixel_array()
    stacked += adam_step(state, pixel_grads, config.learn_rate, config.adam_betas)
    syn.replace_pixels(stacked)
    return terms


def _apply_residual_stage(syn: SyntheticSet, config: RunConfig, mode: str,
                          ctx: RunContext, stage_index: int, step: int) -> StageRecord:
    h, w, _ = syn.images[0].shape
    class_records: list[StageClassRecord] = []
    gaps: list[float] = []
    ratios: list[float] = []
    for class_id in range(syn.class_count):
        block = syn.class_slice(class_id)
        members = list(range(block.start, block.stop))
        pre_feats = np.stack([embed(ctx.embedder, syn.images[j].pixels) for j in members])
        anchors: list[Image] = []
        sources: list[int] = []
        for j in members:
            if mode == "static-anchor":
                anchors.append(ctx.static_anchors[class_id])
                rng_pick = -1
                sources.append(rng_pick)
            else:
                q = embed(ctx.embedder, syn.images[j].pixels, normalize=True)
                idx, _ = retrieve(ctx.pools[class_id], q, config.lambda_fit)
                anchors.append(resample(ctx.pools[class_id].patches[idx], h, w))
                sources.append(ctx.pools[class_id].source_ids[idx])
        fit_gap = float(np.mean([
            np.sum((syn.images[j].pixels - a.pixels) ** 2)
            for j, a in zip(members, anchors)]))
        for j, a in zip(members, anchors):
            syn.images[j] = residual_update(syn.images[j], a, config.alpha)
            ctx.syn_cache.invalidate(("syn", j))
        post_feats = np.stack([embed(ctx.embedder, syn.images[j].pixels) for j in members])
        anchor_feats = np.stack([embed(ctx.embedder, a.pixels) for a in anchors])
        pre = _mean_pairwise(pre_feats)
        post = _mean_pairwise(post_feats)
        spread = _mean_pairwise(anchor_feats)
        class_records.append(StageClassRecord(
            class_id=class_id, pre_mean_pairwise=pre, post_mean_pairwise=post,
            anchor_mean_pairwise=spread, fit_gap=fit_gap, anchor_sources=sources))
        gaps.append(fit_gap)
        ratios.append(post / pre if pre > 0 else 1.0)
    return StageRecord(stage_index=stage_index, step=step, classes=class_records,
                       fit_gap=float(np.mean(gaps)),
                       contraction_ratio=float(np.mean(ratios)))


def final_class_topology(syn: SyntheticSet, ctx: RunContext,
                         config: RunConfig) -> list[ClassTopology]:
    out = []
    for class_id in range(syn.class_count):
        block = syn.class_slice(class_id)
        syn_feats = [embed(ctx.embedder, syn.images[j].pixels)
                     for j in range(block.start, block.stop)]
        out.append(class_topology(syn_feats, ctx.real_class_feats[class_id], config,
                                  seed=[config.seed, SALT_SUBSAMPLE, class_id]))
    return out


def kappa_from_topology(topo: ClassTopology, gamma: float) -> float:
    real_curves = tuple(betti_curve(topo.real_dgms[q], topo.eps_max, KAPPA_GRID, degree=q)
                        for q in (0, 1))
    syn_curves = tuple(betti_curve(topo.syn_dgms[q], topo.eps_max, KAPPA_GRID, degree=q)
                       for q in (0, 1))
    return kappa(real_curves, syn_curves, gamma)


def run_distillation(real: LabeledDataset, config: RunConfig, mode: str,
                     embedder=None, ipc: int | None = None
                     ) -> tuple[SyntheticSet, DistillDiagnostics]:
    """Execute the full block schedule; deterministic in (real, config, mode)."""
    if mode not in ("none", "static-anchor", "drc", "drc+pta"):
        raise ValueError(f"unknown mode {mode!r}")
    if ipc is None:
        ipc = config.ipc
    syn = new_synthetic_set(real, ipc, config.init_mode, config.seed)
    ctx = build_context(real, config, mode, embedder)
    lam_topo = effective_lambda_topo(mode, config)
    block_len = config.block_steps()
    blocks = config.residual_blocks_k + 1

    state = AdamState(m=np.zeros((len(syn.images),) + real.image_shape()),
                      v=np.zeros((len(syn.images),) + real.image_shape()))
    losses: list[ObjectiveTerms] = []
    stages: list[StageRecord] = []
    step = 0
    try:
        for block_i in range(blocks):
            for _ in range(block_len):
                due = _topology_due(step, block_len, config.topo_cadence, config.refresh_T)
                losses.append(step_gradient(syn, state, config, ctx, step, lam_topo, due))
                step += 1
            if mode != "none" and block_i < config.residual_blocks_k:
                stages.append(_apply_residual_stage(syn, config, mode, ctx,
                                                    stage_index=block_i + 1, step=step))
    except NonFiniteLossError as err:
        err.diagnostics = DistillDiagnostics(
            mode=mode, total_steps=step, fit_gap_delta=float("nan"),
            contraction_ratios=[s.contraction_ratio for s in stages],
            kappa_per_class=[], probe_accuracy=float("nan"),
            stages=stages, step_losses=losses)
        raise

    topo_final = final_class_topology(syn, ctx, config)
    kappas = [kappa_from_topology(t, config.gamma_loop) for t in topo_final]
    syn_feats = np.stack([embed(ctx.embedder, img.pixels) for img in syn.images])
    probe_w, probe_b = fit_ridge_head(syn_feats, syn.labels, syn.class_count,
                                      config.head_ridge)
    real_feats = np.stack([embed(ctx.embedder, img.pixels) for img in real.images])
    probe_acc = head_accuracy(probe_w, probe_b, real_feats, real.labels)

    diag = DistillDiagnostics(
        mode=mode,
        total_steps=step,
        fit_gap_delta=float(np.mean([s.fit_gap for s in stages])) if stages else 0.0,
        contraction_ratios=[s.contraction_ratio for s in stages],
        kappa_per_class=kappas,
        probe_accuracy=probe_acc,
        stages=stages,
        step_losses=losses,
        final_topology=topo_final,
    )
    return syn, diag
