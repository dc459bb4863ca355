"""Training loop: per-epoch graph construction, forward passes, the joint
loss, Adam updates, the neighbor-growth schedule, and the spectral readout.

Each epoch, in order: structural + attributed forward passes; k-means on the
attributed embedding (centroids are loss constants); the local neighbor graph
from the structural embedding at the current k; the merged embedding, the
wide global graph, and its diffusion; the two cluster-indicator heads; all
loss terms; one Adam step over every parameter jointly. k grows by k_init
every t epochs, capped at floor(n/c). The run ends after the stage in which
k reaches the cap completes, or at ``iter``, whichever comes first; cluster
labels then come from NCut on the last local graph.

Graphs and centroids are rebuilt from detached values, so no gradient ever
flows through graph construction or k-means (they involve hard sorts).
"""

from __future__ import annotations

import json
import math
import struct
import time
from dataclasses import dataclass, field

import numpy as np
import torch

from . import evaluation
from .clustering import cluster_embeddings, kmeans, ncut_spectral
from .data_io import DataMatrix, RunConfig
from .diffusion import build_global_graph, merge_representations, ppr_diffusion
from .errors import ConfigError, DataError, NumericalError
from .graph import AffinityGraph, GraphRole, build_graph, neighbor_schedule, normalize_graph
from .losses import (
    CentroidSet,
    loss_ae,
    loss_cluster_contrastive,
    loss_feature_contrastive,
    loss_graph,
    total_loss,
)
from .networks import (
    AutoencoderParams,
    GcnParams,
    ModelParams,
    forward_attribute,
    forward_cluster_indicators,
    forward_structural,
    init_params,
    read_tensor_container,
    write_tensor_container,
)

MAGIC_STATE = b"DCGT"

HISTORY_COLUMNS = ("epoch", "l_ae", "l_fl", "l_gl", "l_cl", "total", "k")


@dataclass
class TrainState:
    params: ModelParams
    adam_m: dict[str, torch.Tensor]
    adam_v: dict[str, torch.Tensor]
    adam_steps: int
    epoch: int                     # completed epochs
    k: int                         # neighbor count used in the last epoch
    history: list[list[float]] = field(default_factory=list)
    seed: int = 0
    s_l_last: np.ndarray | None = None  # local graph of the last epoch


@dataclass
class RunResult:
    labels: np.ndarray
    graph: AffinityGraph           # converged local neighbor graph
    history: list[list[float]]
    metrics: dict | None
    wall_time: float
    state: TrainState
    stop_epoch: int
    negatives_per_anchor: int


def adam_step(tensors, grads, m, v, step, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update, in place over named tensors."""
    bc1 = 1.0 - beta1**step
    bc2 = 1.0 - beta2**step
    with torch.no_grad():
        for name, p in tensors.items():
            g = grads[name]
            if not torch.isfinite(g).all():
                raise NumericalError(f"non-finite gradient for {name}")
            m[name].mul_(beta1).add_(g, alpha=1.0 - beta1)
            v[name].mul_(beta2).addcmul_(g, g, value=1.0 - beta2)
            m_hat = m[name] / bc1
            v_hat = v[name] / bc2
            p.sub_(lr * m_hat / (v_hat.sqrt() + eps))
    return tensors, m, v


def _epoch_seed(seed: int, epoch: int) -> int:
    # per-epoch child seed; keeps resumed runs on the identical trajectory
    return int(np.random.SeedSequence([seed, epoch]).generate_state(1)[0])


def stop_epoch(cfg: RunConfig, n: int) -> int:
    """Last epoch of the run: the cap stage finishes its t epochs, or iter."""
    kmax = n // cfg.c
    stages = math.ceil(kmax / cfg.k_init)
    return min(cfg.iter, cfg.t * stages)


def _fresh_state(cfg: RunConfig, m: int, c: int) -> TrainState:
    params = init_params(m, cfg.l, c, cfg.hidden, cfg.hidden_ae, cfg.seed)
    params.requires_grad_(True)
    named = params.named_tensors()
    zeros = lambda: {k: torch.zeros_like(t) for k, t in named.items()}
    return TrainState(
        params=params, adam_m=zeros(), adam_v=zeros(),
        adam_steps=0, epoch=0, k=0, history=[], seed=cfg.seed,
    )


def train(data: DataMatrix, cfg: RunConfig, state: TrainState | None = None,
          dump_dir=None) -> RunResult:
    """Run the full pipeline on l2-normalized data and return cluster labels.

    Passing a ``state`` from :func:`load_checkpoint` resumes the identical
    trajectory. ``dump_dir``, when set, receives a diagnostic JSON if the
    loss turns non-finite.
    """
    cfg.validate()
    data.validate()
    if cfg.c != data.c:
        raise ConfigError(f"config c={cfg.c} does not match dataset c={data.c}")
    norms = np.linalg.norm(data.X, axis=1)
    if np.abs(norms - 1.0).max() > 1e-6:
        raise DataError("samples must be l2-normalized before training")
    n, m, c = data.n, data.m, data.c
    kmax = n // c
    if cfg.k_init > kmax:
        raise ConfigError(f"k_init={cfg.k_init} exceeds floor(n/c)={kmax}")

    t0 = time.perf_counter()
    if state is None:
        state = _fresh_state(cfg, m, c)
    tensors = state.params.named_tensors()
    X_t = torch.from_numpy(np.ascontiguousarray(data.X))

    A = build_graph(data.X, cfg.k_init, role=GraphRole.INITIAL_A)
    A_hat = torch.from_numpy(normalize_graph(A).W_hat)

    guided_fl = not cfg.disable_FL_guidance
    if cfg.disable_FL:
        negatives = 0
    else:
        negatives = c - 1 if guided_fl else n - 1

    last = stop_epoch(cfg, n)
    for epoch in range(state.epoch + 1, last + 1):
        try:
            _run_epoch(epoch, data, cfg, state, tensors, X_t, A_hat)
        except (DataError, NumericalError) as exc:
            if isinstance(exc, NumericalError) and dump_dir is not None:
                _write_dump(dump_dir, epoch, state)
            raise type(exc)(f"epoch {epoch}: {exc}") from exc

    if state.s_l_last is None:
        raise DataError("no epochs were run; nothing to read out")
    final_graph = AffinityGraph(W=state.s_l_last, k=state.k, role=GraphRole.LPG_SL)
    labels = ncut_spectral(final_graph, c, cfg.seed)

    metrics = None
    if data.labels is not None:
        metrics = {
            "acc": float(evaluation.accuracy(data.labels, labels)),
            "nmi": float(evaluation.nmi(data.labels, labels)),
        }
    return RunResult(
        labels=labels, graph=final_graph, history=state.history, metrics=metrics,
        wall_time=time.perf_counter() - t0, state=state, stop_epoch=last,
        negatives_per_anchor=negatives,
    )


def _run_epoch(epoch, data, cfg, state, tensors, X_t, A_hat):
    c = data.c
    k = neighbor_schedule(epoch, cfg.k_init, cfg.t, data.n, c)

    H1 = forward_structural(X_t, A_hat, state.params.gcn1)
    H2, X_hat = forward_attribute(X_t, state.params.ae)
    H1d = H1.detach().numpy()
    H2d = H2.detach().numpy()

    S_L = build_graph(H1d, k, role=GraphRole.LPG_SL)

    l_ae_t = loss_ae(X_t, X_hat)

    if cfg.disable_FL:
        l_fl_t = torch.zeros((), dtype=torch.float64)
    else:
        cents = None
        if not cfg.disable_FL_guidance:
            km = kmeans(H2d, c, seed=_epoch_seed(cfg.seed, epoch))
            cents = CentroidSet.from_assignment(km)
        l_fl_t = loss_feature_contrastive(
            H1, H2, cents, cfg.tau, centroid_negatives=not cfg.disable_FL_guidance
        )

    l_gl_t = loss_graph(H1, S_L, cfg.gamma)

    if cfg.disable_CL:
        l_cl_t = torch.zeros((), dtype=torch.float64)
    else:
        H_merged = merge_representations(H1d, H2d)
        G = build_global_graph(H_merged, c)
        S_G = ppr_diffusion(G, cfg.lam)
        SL_hat = torch.from_numpy(normalize_graph(S_L).W_hat)
        SG_hat = torch.from_numpy(normalize_graph(S_G).W_hat)
        F1, F2 = forward_cluster_indicators(
            H1, SL_hat, SG_hat, state.params.gcn2, state.params.gcn3
        )
        if cfg.disable_CL_guidance:
            anchors = (F1, F2)
        else:
            anchors = (cluster_embeddings(F1, H1), cluster_embeddings(F2, H1))
        l_cl_t = loss_cluster_contrastive(*anchors, cfg.tau, inside_log=cfg.cl_inside_log)

    total_t, bundle = total_loss(
        l_ae_t, l_fl_t, l_gl_t, l_cl_t, cfg.alpha, cfg.beta, cfg.gamma, cfg.tau
    )
    grad_list = torch.autograd.grad(total_t, list(tensors.values()), allow_unused=True)
    grads = {
        name: (g if g is not None else torch.zeros_like(p))
        for (name, p), g in zip(tensors.items(), grad_list)
    }
    state.adam_steps += 1
    adam_step(tensors, grads, state.adam_m, state.adam_v, state.adam_steps, cfg.lr)

    state.epoch = epoch
    state.k = k
    state.s_l_last = S_L.W
    state.history.append(
        [float(epoch), bundle.l_ae, bundle.l_fl, bundle.l_gl, bundle.l_cl,
         bundle.total, float(k)]
    )


def structural_embedding(data: DataMatrix, cfg: RunConfig, state: TrainState) -> np.ndarray:
    """Structural embedding of the data under the state's current parameters."""
    A = build_graph(data.X, cfg.k_init, role=GraphRole.INITIAL_A)
    A_hat = torch.from_numpy(normalize_graph(A).W_hat)
    X_t = torch.from_numpy(np.ascontiguousarray(data.X))
    with torch.no_grad():
        H1 = forward_structural(X_t, A_hat, state.params.gcn1)
    return H1.numpy()


def _write_dump(dump_dir, epoch, state):
    rows = state.history[-3:]
    payload = {
        "failed_epoch": epoch,
        "completed_epochs": state.epoch,
        "recent_history": {"columns": HISTORY_COLUMNS, "rows": rows},
    }
    with open(f"{dump_dir}/diagnostic_dump.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def save_checkpoint(state: TrainState, cfg: RunConfig, path):
    """Serialize the full training state; round-trips byte-identically."""
    meta = {
        "adam_steps": state.adam_steps,
        "epoch": state.epoch,
        "k": state.k,
        "seed": state.seed,
        "config": cfg.to_dict(),
    }
    blob = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    tensors: dict[str, np.ndarray] = {}
    for name, t in state.params.named_tensors().items():
        tensors[f"param.{name}"] = t.detach().numpy()
    for name, t in state.adam_m.items():
        tensors[f"adam_m.{name}"] = t.numpy()
    for name, t in state.adam_v.items():
        tensors[f"adam_v.{name}"] = t.numpy()
    tensors["history"] = np.asarray(state.history, dtype=np.float64).reshape(-1, 7)
    if state.s_l_last is not None:
        tensors["s_l_last"] = state.s_l_last
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sI", MAGIC_STATE, len(blob)))
        fh.write(blob)
        write_tensor_container(fh, tensors)


def load_checkpoint(path) -> tuple[TrainState, RunConfig]:
    try:
        fh = open(path, "rb")
    except FileNotFoundError:
        raise DataError(f"checkpoint not found: {path}")
    with fh:
        head = fh.read(8)
        if len(head) != 8:
            raise DataError("checkpoint truncated (no header)")
        magic, meta_len = struct.unpack("<4sI", head)
        if magic != MAGIC_STATE:
            raise DataError(f"bad magic {magic!r}, expected {MAGIC_STATE!r}")
        blob = fh.read(meta_len)
        if len(blob) != meta_len:
            raise DataError("checkpoint truncated (metadata)")
        meta = json.loads(blob.decode("utf-8"))
        tensors = read_tensor_container(fh)
    cfg = RunConfig.from_dict(meta["config"]).validate()
    params = _params_from_tensors(tensors)
    params.requires_grad_(True)
    named = params.named_tensors()

    def moment(prefix):
        out = {}
        for name in named:
            key = f"{prefix}.{name}"
            if key not in tensors:
                raise DataError(f"checkpoint is missing tensor {key!r}")
            out[name] = torch.from_numpy(tensors[key].copy())
        return out

    history = [list(row) for row in tensors["history"]]
    s_l_last = tensors.get("s_l_last")
    state = TrainState(
        params=params, adam_m=moment("adam_m"), adam_v=moment("adam_v"),
        adam_steps=int(meta["adam_steps"]), epoch=int(meta["epoch"]),
        k=int(meta["k"]), history=history, seed=int(meta["seed"]),
        s_l_last=s_l_last,
    )
    return state, cfg


def _params_from_tensors(tensors: dict[str, np.ndarray]) -> ModelParams:
    def grab(name):
        key = f"param.{name}"
        if key not in tensors:
            raise DataError(f"checkpoint is missing tensor {key!r}")
        return torch.from_numpy(tensors[key].copy())

    gcn1 = GcnParams([grab("gcn1.w0"), grab("gcn1.w1")], ["relu", "linear"])
    ae = AutoencoderParams(
        enc_w=[grab("enc.w0"), grab("enc.w1")],
        enc_b=[grab("enc.b0"), grab("enc.b1")],
        dec_w=[grab("dec.w0"), grab("dec.w1")],
        dec_b=[grab("dec.b0"), grab("dec.b1")],
    )
    gcn2 = GcnParams([grab("gcn2.w0")], ["softmax_rows"])
    gcn3 = GcnParams([grab("gcn3.w0")], ["softmax_rows"])
    return ModelParams(gcn1=gcn1, ae=ae, gcn2=gcn2, gcn3=gcn3)
