"""Trajectory generation and snapshot assembly.

Integration is fixed-step classical RK4 with an optional substep count per
output interval.  A fixed-step scheme (rather than an adaptive library
integrator) keeps runs bit-reproducible for a given (x0, dt, steps, substeps)
tuple, which the CLI's determinism guarantee relies on.

Datasets are written as one CSV per trajectory (header ``t,x1,...,xn``) plus
a JSON manifest recording the generating configuration and the train/test
split, so a dataset can be reloaded exactly.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from koopman_lift.systems import SystemDef, get_system


class IntegrationError(RuntimeError):
    """Raised when the integrator produces a non-finite state."""

    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time


@dataclass(eq=False)
class Trajectory:
    """Sampled solution: times (T+1,), states (T+1, n)."""

    times: np.ndarray
    states: np.ndarray
    system: str = ""
    truncated: bool = False

    @property
    def n_steps(self) -> int:
        return self.states.shape[0] - 1


@dataclass(eq=False)
class SnapshotSet:
    """One-step snapshot pairs plus the trajectories they came from.

    ``X`` and ``Xp`` hold every (state, next state) pair; ``split`` marks each
    pair 0 = train, 1 = test, with whole trajectories assigned to one side so
    no pair's successor leaks across the split.  The per-split trajectory
    state arrays are kept for multi-step evaluation.
    """

    dt: float
    X: np.ndarray
    Xp: np.ndarray
    split: np.ndarray
    train_trajectories: list = field(default_factory=list)
    test_trajectories: list = field(default_factory=list)

    @property
    def X_train(self) -> np.ndarray:
        return self.X[self.split == 0]

    @property
    def Xp_train(self) -> np.ndarray:
        return self.Xp[self.split == 0]

    @property
    def X_test(self) -> np.ndarray:
        return self.X[self.split == 1]

    @property
    def Xp_test(self) -> np.ndarray:
        return self.Xp[self.split == 1]


def rk4_step(rhs, x: np.ndarray, dt: float) -> np.ndarray:
    """One classical Runge-Kutta step of size dt."""
    k1 = rhs(x)
    k2 = rhs(x + 0.5 * dt * k1)
    k3 = rhs(x + 0.5 * dt * k2)
    k4 = rhs(x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def simulate(system: SystemDef, x0, dt: float, steps: int, *, substeps: int = 1,
             blowup: float = 1e6) -> Trajectory:
    """Integrate ``steps`` output intervals of length dt from x0.

    Each interval is covered by ``substeps`` RK4 steps of size dt/substeps.
    A state exceeding ``blowup`` in magnitude truncates the trajectory (the
    rows so far are kept and ``truncated`` is set); a non-finite state raises
    :class:`IntegrationError` carrying the failure time.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if dt <= 0 or substeps < 1:
        raise ValueError("dt must be positive and substeps >= 1")
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (system.n,):
        raise ValueError(f"x0 has shape {x.shape}, expected ({system.n},)")
    h = dt / substeps
    out = np.empty((steps + 1, system.n))
    out[0] = x
    kept = steps
    truncated = False
    for k in range(steps):
        for _ in range(substeps):
            x = rk4_step(system.rhs, x, h)
        t_now = (k + 1) * dt
        if not np.all(np.isfinite(x)):
            raise IntegrationError(
                f"non-finite state while integrating {system.name!r} at t={t_now:g}",
                time=t_now)
        out[k + 1] = x
        if np.max(np.abs(x)) > blowup:
            kept = k + 1
            truncated = True
            break
    times = np.arange(kept + 1) * dt
    return Trajectory(times=times, states=out[:kept + 1], system=system.name,
                      truncated=truncated)


def sample_initials(box, count: int, seed: int) -> np.ndarray:
    """Uniform samples from an (n, 2) lo/hi box; (count, n), seed-deterministic."""
    box = np.asarray(box, dtype=float)
    if box.ndim != 2 or box.shape[1] != 2 or np.any(box[:, 1] < box[:, 0]):
        raise ValueError("box must be (n, 2) with lo <= hi rows")
    rng = np.random.default_rng(seed)
    return rng.uniform(box[:, 0], box[:, 1], size=(count, box.shape[0]))


def make_dataset(system: SystemDef, *, n_trajectories: int, steps: int, dt: float,
                 substeps: int = 1, seed: int = 0, blowup: float = 1e6) -> list[Trajectory]:
    """Simulate a batch of trajectories from box-sampled initial conditions."""
    inits = sample_initials(system.init_box, n_trajectories, seed)
    return [simulate(system, x0, dt, steps, substeps=substeps, blowup=blowup)
            for x0 in inits]


def split_tags(count: int, train_fraction: float, seed: int) -> list[int]:
    """Whole-trajectory train/test assignment, 0 = train and 1 = test."""
    if not 0.0 < train_fraction <= 1.0:
        raise ValueError("train_fraction must be in (0, 1]")
    rng = np.random.default_rng(seed)
    order = rng.permutation(count)
    n_train = int(math.ceil(train_fraction * count))
    train_ids = set(order[:n_train].tolist())
    return [0 if i in train_ids else 1 for i in range(count)]


def build_snapshots(trajectories: list[Trajectory], train_fraction: float,
                    seed: int) -> SnapshotSet:
    """Assemble one-step pairs with a whole-trajectory train/test split."""
    if not trajectories:
        raise ValueError("no trajectories given")
    dts = {round(float(t.times[1] - t.times[0]), 12) for t in trajectories if t.n_steps >= 1}
    if len(dts) != 1:
        raise ValueError("trajectories must share a single sampling interval")
    dt = dts.pop()
    tags = split_tags(len(trajectories), train_fraction, seed)
    X_parts, Xp_parts, split_parts = [], [], []
    train_trajs, test_trajs = [], []
    for i, traj in enumerate(trajectories):
        s = traj.states
        if s.shape[0] < 2:
            continue
        X_parts.append(s[:-1])
        Xp_parts.append(s[1:])
        tag = tags[i]
        split_parts.append(np.full(s.shape[0] - 1, tag, dtype=int))
        (train_trajs if tag == 0 else test_trajs).append(s)
    if not X_parts:
        raise ValueError("no snapshot pairs: every trajectory is a single state")
    return SnapshotSet(dt=dt, X=np.vstack(X_parts), Xp=np.vstack(Xp_parts),
                       split=np.concatenate(split_parts),
                       train_trajectories=train_trajs, test_trajectories=test_trajs)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def save_dataset(trajectories: list[Trajectory], out_dir, *, meta: dict | None = None,
                 split: list[int] | None = None) -> str:
    """Write per-trajectory CSVs plus ``manifest.json``; returns manifest path.

    ``split`` tags each trajectory 0 = train / 1 = test for exact reload.
    """
    os.makedirs(out_dir, exist_ok=True)
    files = []
    for i, traj in enumerate(trajectories):
        name = f"traj_{i:04d}.csv"
        path = os.path.join(out_dir, name)
        n = traj.states.shape[1]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t"] + [f"x{j + 1}" for j in range(n)])
            for t, row in zip(traj.times, traj.states):
                writer.writerow([_fmt(t)] + [_fmt(v) for v in row])
        files.append(name)
    manifest = {
        "files": files,
        "truncated": [bool(t.truncated) for t in trajectories],
        "system": trajectories[0].system if trajectories else "",
    }
    if split is not None:
        manifest["split"] = [int(s) for s in split]
    if meta:
        manifest.update(meta)
    manifest_path = os.path.join(out_dir, "manifest.json")
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest_path


def load_dataset(manifest_path) -> tuple[list[Trajectory], dict]:
    """Reload a dataset written by :func:`save_dataset`."""
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    base = os.path.dirname(os.path.abspath(manifest_path))
    trajectories = []
    for i, name in enumerate(manifest["files"]):
        with open(os.path.join(base, name), newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if not header or header[0] != "t":
                raise ValueError(f"{name}: expected header starting with 't'")
            rows = np.array([[float(v) for v in row] for row in reader])
        truncated = bool(manifest.get("truncated", [False] * (i + 1))[i])
        trajectories.append(Trajectory(times=rows[:, 0], states=rows[:, 1:],
                                       system=manifest.get("system", ""),
                                       truncated=truncated))
    return trajectories, manifest


def snapshots_from_saved(manifest_path) -> SnapshotSet:
    """Rebuild a SnapshotSet from a saved dataset using its recorded split."""
    trajectories, manifest = load_dataset(manifest_path)
    split = manifest.get("split")
    if split is None:
        return build_snapshots(trajectories, train_fraction=1.0, seed=0)
    dt = float(manifest.get("dt", trajectories[0].times[1] - trajectories[0].times[0]))
    X_parts, Xp_parts, split_parts = [], [], []
    train_trajs, test_trajs = [], []
    for tag, traj in zip(split, trajectories):
        s = traj.states
        if s.shape[0] < 2:
            continue
        X_parts.append(s[:-1])
        Xp_parts.append(s[1:])
        split_parts.append(np.full(s.shape[0] - 1, int(tag), dtype=int))
        (train_trajs if tag == 0 else test_trajs).append(s)
    return SnapshotSet(dt=dt, X=np.vstack(X_parts), Xp=np.vstack(Xp_parts),
                       split=np.concatenate(split_parts),
                       train_trajectories=train_trajs, test_trajectories=test_trajs)
