"""Fitting lifted linear one-step models z' = K z.

Four fitting routes share the same objective, the mean squared lifted
one-step residual over snapshot pairs:

    L(K, theta) = mean_r || psi(y'_r) - K psi(y_r) ||^2

* :func:`dmd_fit`   -- closed form on the identity lifting [1, y]
* :func:`edmd_fit`  -- closed form (ridge-regularized normal equations) on a
                       fixed dictionary
* :func:`sgd_train` -- minibatch gradient descent on K and, for parametric
                       dictionaries, the term centers and steepnesses
* :func:`matching_pursuit_fit` -- greedy dictionary growth, refitting K in
                       closed form for every scored candidate

All randomness flows through a seeded generator, so every route is
deterministic given its config.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from koopman_lift.lifting import (
    Dictionary,
    DictParams,
    PARAMETRIC_KINDS,
    _param_grad_blocks,
    dictionary_from_obj,
    dictionary_to_obj,
    lift,
    make_dictionary,
)
from koopman_lift.simulate import SnapshotSet


@dataclass
class TrainConfig:
    """Gradient-descent settings; defaults are the package's standard protocol."""

    epochs: int = 1000
    batch_size: int = 32
    learning_rate: float = 1e-2   # constant step size, plain SGD
    seed: int = 0
    alpha_floor: float = 0.05     # steepness values are clamped at this floor
    grad_clip: float = 10.0       # global gradient-norm ceiling; None disables
    log_every: int = 25           # cadence of multi-step test evaluation
    k_init: str = "identity"      # "identity", "zeros", or "edmd" (warm start)

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.learning_rate <= 0 or self.alpha_floor <= 0:
            raise ValueError("learning_rate and alpha_floor must be positive")


@dataclass(eq=False)
class KoopmanModel:
    """A dictionary plus its learned one-step matrix (column convention
    z' = K z) and the sampling interval the snapshots were taken at."""

    dictionary: Dictionary
    K: np.ndarray
    dt: float
    training_meta: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return self.dictionary.m

    @property
    def n_out(self) -> int:
        return self.dictionary.n_out


def parameter_count(model: KoopmanModel) -> int:
    """Total trainable parameters: the N x N matrix plus dictionary terms."""
    return model.n_out ** 2 + model.dictionary.n_params


def training_loss(model: KoopmanModel, X: np.ndarray, Xp: np.ndarray) -> float:
    """Mean squared lifted one-step residual over the given pairs."""
    Psi = lift(model.dictionary, X)
    Psip = lift(model.dictionary, Xp)
    E = Psip - Psi @ model.K.T
    return float(np.mean(np.sum(E * E, axis=1)))


def _solve_k(Psi: np.ndarray, Psip: np.ndarray, ridge: float) -> tuple[np.ndarray, float, bool]:
    """Ridge least-squares solve for K; returns (K, gram condition, used pinv)."""
    n = Psi.shape[1]
    G = Psi.T @ Psi
    A = Psi.T @ Psip
    cond = float(np.linalg.cond(G))
    if ridge > 0.0:
        Kt = np.linalg.solve(G + ridge * np.eye(n), A)
        return Kt.T, cond, False
    try:
        return np.linalg.solve(G, A).T, cond, False
    except np.linalg.LinAlgError:
        Kt, *_ = np.linalg.lstsq(Psi, Psip, rcond=None)
        return Kt.T, cond, True


def edmd_fit(dictionary: Dictionary, snapshots: SnapshotSet, ridge: float = 1e-8) -> KoopmanModel:
    """Closed-form fit of K for a fixed dictionary on the training pairs."""
    X, Xp = snapshots.X_train, snapshots.Xp_train
    if X.shape[0] < 1:
        raise ValueError("no training pairs")
    if ridge < 0.0:
        raise ValueError("ridge must be non-negative")
    if X.shape[0] < dictionary.n_out and ridge == 0.0:
        ridge = 1e-8  # underdetermined without regularization
    Psi = lift(dictionary, X)
    Psip = lift(dictionary, Xp)
    K, cond, used_pinv = _solve_k(Psi, Psip, ridge)
    model = KoopmanModel(dictionary=dictionary, K=K, dt=snapshots.dt)
    model.training_meta = {
        "method": "edmd",
        "ridge": ridge,
        "n_train_pairs": int(X.shape[0]),
        "gram_condition": cond,
        "used_pinv": used_pinv,
        "train_loss": training_loss(model, X, Xp),
        "parameter_count": parameter_count(model),
    }
    return model


def dmd_fit(snapshots: SnapshotSet, ridge: float = 1e-8) -> KoopmanModel:
    """Closed-form fit on the identity lifting [1, y]; the linear baseline."""
    m = snapshots.X.shape[1]
    identity = Dictionary(kind="augsill", m=m)
    model = edmd_fit(identity, snapshots, ridge)
    model.training_meta["method"] = "dmd"
    return model


def _clip_gradients(grads: list[np.ndarray], ceiling: float | None) -> None:
    if ceiling is None:
        return
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if total > ceiling:
        scale = ceiling / total
        for g in grads:
            g *= scale


def sgd_train(dict_init: Dictionary, snapshots: SnapshotSet,
              cfg: TrainConfig | None = None) -> KoopmanModel:
    """Minibatch gradient descent on K and any dictionary parameters.

    K starts at the identity (the persistence forecast, since the affine
    block repeats the state).  The per-epoch mean batch loss is recorded in
    ``training_meta['loss_trace']``; every ``log_every`` epochs (and at the
    final epoch) the five-step test error is appended to ``'test_trace'`` as
    ``[epoch, error]`` when test trajectories exist.  A non-finite loss
    aborts the run and restores the last logged checkpoint, with
    ``'diverged'`` set.
    """
    from koopman_lift.evaluate import five_step_error  # local: avoids import cycle

    cfg = cfg or TrainConfig()
    d = dict_init.copy()
    X, Xp = snapshots.X_train, snapshots.Xp_train
    r = X.shape[0]
    if r < 1:
        raise ValueError("no training pairs")
    n = d.n_out
    rng = np.random.default_rng(cfg.seed)
    if cfg.k_init == "identity":
        K = np.eye(n)
    elif cfg.k_init == "zeros":
        K = np.zeros((n, n))
    elif cfg.k_init == "edmd":
        # warm start at the closed-form solution for the initial dictionary;
        # gradient descent then refines K and dictionary parameters jointly
        K = edmd_fit(d, snapshots).K.copy()
    else:
        raise ValueError(f"unknown k_init {cfg.k_init!r}")
    parametric = d.kind in PARAMETRIC_KINDS and (d.logistic_terms or d.rbf_terms)
    has_test = len(snapshots.test_trajectories) > 0

    loss_trace: list[float] = []
    test_trace: list[list[float]] = []
    checkpoint = (K.copy(), d.copy())
    diverged = False

    def log_test(epoch: int, model_K: np.ndarray, model_d: Dictionary) -> None:
        if not has_test:
            return
        probe = KoopmanModel(dictionary=model_d, K=model_K, dt=snapshots.dt)
        rep = five_step_error(probe, snapshots.test_trajectories)
        test_trace.append([float(epoch), float(rep.mean_5step)])

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(r)
        batch_losses = []
        # divergence surfaces as a non-finite epoch loss and is handled by the
        # checkpoint restore below, so overflow warnings carry no information
        for start in range(0, r, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            b = idx.size
            Yb, Ypb = X[idx], Xp[idx]
            with np.errstate(over="ignore", invalid="ignore"):
                Psi = lift(d, Yb)
                Psip = lift(d, Ypb)
                E = Psip - Psi @ K.T
                batch_losses.append(float(np.mean(np.sum(E * E, axis=1))))
                grad_K = (-2.0 / b) * (E.T @ Psi)
                grads = [grad_K]
                if parametric:
                    blocks = _param_grad_blocks(d, Yb)
                    blocks_p = _param_grad_blocks(d, Ypb)
                    F = E @ K
                    param_grads = []
                    for (rows, dmu, dal), (_, dmu_p, dal_p) in zip(blocks, blocks_p):
                        Er = E[:, rows]
                        Fr = F[:, rows]
                        g_mu = (2.0 / b) * (np.einsum("bk,bki->ki", Er, dmu_p)
                                            - np.einsum("bk,bki->ki", Fr, dmu))
                        g_al = (2.0 / b) * (np.einsum("bk,bki->ki", Er, dal_p)
                                            - np.einsum("bk,bki->ki", Fr, dal))
                        param_grads.append((g_mu, g_al))
                        grads.extend([g_mu, g_al])
                _clip_gradients(grads, cfg.grad_clip)
                K -= cfg.learning_rate * grad_K
                if parametric:
                    groups = []
                    if d.logistic_terms and d.kind in ("augsill", "sill"):
                        groups.append(d.logistic_terms)
                    if d.rbf_terms:
                        groups.append(d.rbf_terms)
                    for terms, (g_mu, g_al) in zip(groups, param_grads):
                        for k, t in enumerate(terms):
                            t.mu -= cfg.learning_rate * g_mu[k]
                            t.alpha -= cfg.learning_rate * g_al[k]
                            np.maximum(t.alpha, cfg.alpha_floor, out=t.alpha)
        epoch_loss = float(np.mean(batch_losses))
        loss_trace.append(epoch_loss)
        if not np.isfinite(epoch_loss):
            K, d = checkpoint[0].copy(), checkpoint[1].copy()
            diverged = True
            break
        if epoch % cfg.log_every == 0 or epoch == cfg.epochs:
            log_test(epoch, K, d)
            checkpoint = (K.copy(), d.copy())

    model = KoopmanModel(dictionary=d, K=K, dt=snapshots.dt)
    model.training_meta = {
        "method": "sgd",
        "seed": cfg.seed,
        "epochs": cfg.epochs,
        "learning_rate": cfg.learning_rate,
        "batch_size": cfg.batch_size,
        "alpha_floor": cfg.alpha_floor,
        "grad_clip": cfg.grad_clip,
        "k_init": cfg.k_init,
        "diverged": diverged,
        "loss_trace": loss_trace,
        "test_trace": test_trace,
        "parameter_count": parameter_count(model),
    }
    return model


def matching_pursuit_fit(kind: str, snapshots: SnapshotSet, n_target: int, *,
                         pool_size: int = 200, alpha_range: tuple[float, float] = (0.5, 5.0),
                         ridge: float = 1e-8, seed: int = 0) -> KoopmanModel:
    """Greedy dictionary construction.

    Starting from the identity lifting, each round samples ``pool_size``
    candidate terms (centers uniform over the per-dimension training data
    range, steepness uniform over ``alpha_range``; for ``augsill`` the pool
    alternates logistic and RBF candidates), refits K in closed form with the
    candidate appended, and keeps the candidate with the lowest training
    loss.  Ties break to the lowest candidate index.  The accepted-objective
    sequence is non-increasing up to the ridge term.
    """
    if kind not in PARAMETRIC_KINDS:
        raise ValueError(f"matching pursuit needs a parametric kind, got {kind!r}")
    X, Xp = snapshots.X_train, snapshots.Xp_train
    m = X.shape[1]
    if n_target < 1 + m:
        raise ValueError(f"n_target must be at least {1 + m}")
    rng = np.random.default_rng(seed)
    lo, hi = X.min(axis=0), X.max(axis=0)
    d = Dictionary(kind=kind, m=m)
    model = edmd_fit(d, snapshots, ridge)
    objective_trace = [model.training_meta["train_loss"]]
    while d.n_out < n_target:
        Psi = lift(d, X)
        Psip = lift(d, Xp)
        candidates = []
        for c in range(pool_size):
            if kind == "augsill":
                ctype = "logistic" if c % 2 == 0 else "rbf"
            elif kind == "sill":
                ctype = "logistic"
            else:
                ctype = "summedrbf"
            candidates.append((ctype, DictParams(rng.uniform(lo, hi),
                                                 rng.uniform(alpha_range[0], alpha_range[1], m))))
        best = None
        for c, (ctype, p) in enumerate(candidates):
            col = _candidate_column(ctype, p, X)
            col_p = _candidate_column(ctype, p, Xp)
            Pa = np.column_stack([Psi, col])
            Pa_p = np.column_stack([Psip, col_p])
            Kc, _, _ = _solve_k(Pa, Pa_p, ridge)
            E = Pa_p - Pa @ Kc.T
            obj = float(np.mean(np.sum(E * E, axis=1)))
            if best is None or obj < best[0]:
                best = (obj, c, ctype, p)
        _, _, ctype, p = best
        if ctype == "logistic":
            d.logistic_terms.append(p)
        else:
            d.rbf_terms.append(p)
        objective_trace.append(best[0])
    model = edmd_fit(d, snapshots, ridge)
    model.training_meta.update({
        "method": "matching_pursuit",
        "seed": seed,
        "pool_size": pool_size,
        "alpha_range": list(alpha_range),
        "objective_trace": objective_trace,
    })
    return model


def _candidate_column(ctype: str, p: DictParams, X: np.ndarray) -> np.ndarray:
    probe = {"logistic": Dictionary(kind="sill", m=p.m, logistic_terms=[p]),
             "rbf": Dictionary(kind="augsill", m=p.m, rbf_terms=[p]),
             "summedrbf": Dictionary(kind="summedrbf", m=p.m, rbf_terms=[p])}[ctype]
    return lift(probe, X)[:, 1 + p.m]


def save_model(model: KoopmanModel, path) -> None:
    """JSON round trip is exact: floats serialize via shortest round-trip repr."""
    obj = {
        "dictionary": dictionary_to_obj(model.dictionary),
        "k_matrix": [[float(v) for v in row] for row in model.K],
        "dt": float(model.dt),
        "training_meta": model.training_meta,
    }
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path) -> KoopmanModel:
    with open(path) as fh:
        obj = json.load(fh)
    return KoopmanModel(
        dictionary=dictionary_from_obj(obj["dictionary"]),
        K=np.array(obj["k_matrix"], dtype=float),
        dt=float(obj["dt"]),
        training_meta=obj.get("training_meta", {}),
    )
