"""Branched sigmoid MLP: a shared trunk feeding task-specific branches.

Parameters live in a flat ``dict[str, ndarray]`` keyed ``<layer>.W`` /
``<layer>.b`` where ``<layer>`` is ``trunk.<i>`` or ``<branch>.<i>`` (the
branch output layer is ``<branch>.out``).  Weight matrices are stored
``(fan_in, fan_out)`` so a layer maps ``a -> sigmoid(a @ W + b)``.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

TARGETS = ("O2", "T")
CHECKPOINT_FORMAT = "mtlsense-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class Branch:
    name: str
    hidden: tuple[int, ...]
    outputs: tuple[str, ...]
    loss_weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        object.__setattr__(self, "outputs", tuple(self.outputs))


@dataclass(frozen=True)
class NetworkSpec:
    trunk: tuple[int, ...]
    branches: tuple[Branch, ...]
    input_dim: int = 16

    def __post_init__(self):
        object.__setattr__(self, "trunk", tuple(int(h) for h in self.trunk))
        object.__setattr__(self, "branches", tuple(
            b if isinstance(b, Branch) else Branch(**b) for b in self.branches))
        self.validate()

    def validate(self) -> None:
        if self.input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        if not self.branches:
            raise ValueError("a network needs at least one branch")
        names = [b.name for b in self.branches]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate branch names: {names}")
        widths = list(self.trunk) + [h for b in self.branches for h in b.hidden]
        if any(w < 1 for w in widths):
            raise ValueError("all layer widths must be >= 1")
        emitted = set()
        for b in self.branches:
            if not b.outputs:
                raise ValueError(f"branch {b.name!r} has no outputs")
            bad = set(b.outputs) - set(TARGETS)
            if bad:
                raise ValueError(f"branch {b.name!r}: unknown targets {sorted(bad)}")
            if b.loss_weight < 0:
                raise ValueError(f"branch {b.name!r}: loss weight must be >= 0")
            emitted.update(b.outputs)
        if emitted != set(TARGETS):
            raise ValueError(f"targets {sorted(set(TARGETS) - emitted)} are not emitted by any branch")

    @property
    def alphas(self) -> tuple[float, ...]:
        return tuple(b.loss_weight for b in self.branches)

    def with_alphas(self, alphas) -> "NetworkSpec":
        if len(alphas) != len(self.branches):
            raise ValueError(f"expected {len(self.branches)} loss weights, got {len(alphas)}")
        branches = tuple(
            Branch(b.name, b.hidden, b.outputs, float(a)) for b, a in zip(self.branches, alphas))
        return NetworkSpec(self.trunk, branches, self.input_dim)

    def layers(self) -> list[tuple[str, int, int]]:
        """(name, fan_in, fan_out) for every layer in initialization order."""
        out = []
        width = self.input_dim
        for i, h in enumerate(self.trunk):
            out.append((f"trunk.{i}", width, h))
            width = h
        shared = width
        for b in self.branches:
            width = shared
            for i, h in enumerate(b.hidden):
                out.append((f"{b.name}.{i}", width, h))
                width = h
            out.append((f"{b.name}.out", width, len(b.outputs)))
        return out

    def n_params(self) -> int:
        return sum(fi * fo + fo for _, fi, fo in self.layers())

    def reporting_branch(self, target: str) -> Branch:
        """Branch whose output is reported for ``target``: the deepest emitter.

        Ties go to the first branch listed.
        """
        best = None
        for b in self.branches:
            if target in b.outputs and (best is None or len(b.hidden) > len(best.hidden)):
                best = b
        return best

    def to_dict(self) -> dict:
        d = asdict(self)
        d["trunk"] = list(self.trunk)
        for b in d["branches"]:
            b["hidden"] = list(b["hidden"])
            b["outputs"] = list(b["outputs"])
        return d

    @classmethod
    def from_dict(cls, d) -> "NetworkSpec":
        return cls(trunk=tuple(d["trunk"]),
                   branches=tuple(Branch(**b) for b in d["branches"]),
                   input_dim=int(d.get("input_dim", 16)))


def sigmoid(z):
    """Logistic function 1 / (1 + exp(-z)), overflow-safe."""
    return expit(z)


def build(spec: NetworkSpec, seed: int) -> dict[str, np.ndarray]:
    """Glorot-uniform weights, zero biases, drawn layer by layer from ``seed``."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, fan_in, fan_out in spec.layers():
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        params[f"{name}.W"] = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        params[f"{name}.b"] = np.zeros(fan_out)
    return params


def _check_batch(spec, x):
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != spec.input_dim:
        raise ValueError(f"expected batch of shape (n, {spec.input_dim}), got {x.shape}")
    return x


def _forward_cached(spec, params, x):
    trunk_acts = [x]
    a = x
    for i in range(len(spec.trunk)):
        a = sigmoid(a @ params[f"trunk.{i}.W"] + params[f"trunk.{i}.b"])
        trunk_acts.append(a)
    branch_acts = {}
    for b in spec.branches:
        acts = [a]
        h = a
        for i in range(len(b.hidden)):
            h = sigmoid(h @ params[f"{b.name}.{i}.W"] + params[f"{b.name}.{i}.b"])
            acts.append(h)
        acts.append(sigmoid(h @ params[f"{b.name}.out.W"] + params[f"{b.name}.out.b"]))
        branch_acts[b.name] = acts
    return trunk_acts, branch_acts


def forward(spec: NetworkSpec, params, x) -> dict[str, np.ndarray]:
    """Per-branch outputs, each of shape (n, len(branch.outputs))."""
    x = _check_batch(spec, x)
    _, branch_acts = _forward_cached(spec, params, x)
    return {name: acts[-1] for name, acts in branch_acts.items()}


def branch_targets(branch: Branch, targets: np.ndarray) -> np.ndarray:
    """Select ``branch``'s target columns from an (n, 2) [O2, T] matrix."""
    return targets[:, [TARGETS.index(t) for t in branch.outputs]]


def loss(spec: NetworkSpec, outputs, targets) -> tuple[float, dict[str, float]]:
    """Weighted multi-task MSE: global = sum(alpha_i * L_i).

    ``L_i`` is the batch mean of the per-observation sum of squared errors
    over the branch's outputs.
    """
    targets = np.asarray(targets, dtype=float)
    per_branch = {}
    total = 0.0
    for b in spec.branches:
        err = outputs[b.name] - branch_targets(b, targets)
        li = float(np.mean(np.sum(err * err, axis=1)))
        per_branch[b.name] = li
        total += b.loss_weight * li
    return total, per_branch


def backward(spec: NetworkSpec, params, x, targets, return_loss=False):
    """Gradient of the global loss w.r.t. every parameter.

    With ``return_loss`` the forward-pass losses come back too, so a training
    step needs a single forward pass.
    """
    x = _check_batch(spec, x)
    targets = np.asarray(targets, dtype=float)
    n = x.shape[0]
    trunk_acts, branch_acts = _forward_cached(spec, params, x)
    grads = {}
    per_branch = {}
    total = 0.0
    d_shared = np.zeros_like(trunk_acts[-1])
    for b in spec.branches:
        acts = branch_acts[b.name]
        y = acts[-1]
        err = y - branch_targets(b, targets)
        li = float(np.mean(np.sum(err * err, axis=1)))
        per_branch[b.name] = li
        total += b.loss_weight * li
        # delta = dL/dz at the output layer; sigmoid' = y(1-y)
        delta = (2.0 * b.loss_weight / n) * err * y * (1.0 - y)
        names = [f"{b.name}.{i}" for i in range(len(b.hidden))] + [f"{b.name}.out"]
        for k in range(len(names) - 1, -1, -1):
            a_in = acts[k]
            grads[f"{names[k]}.W"] = a_in.T @ delta
            grads[f"{names[k]}.b"] = delta.sum(axis=0)
            da = delta @ params[f"{names[k]}.W"].T
            if k > 0:
                delta = da * a_in * (1.0 - a_in)
        d_shared += da
    da = d_shared
    for i in range(len(spec.trunk) - 1, -1, -1):
        a_out = trunk_acts[i + 1]
        delta = da * a_out * (1.0 - a_out)
        grads[f"trunk.{i}.W"] = trunk_acts[i].T @ delta
        grads[f"trunk.{i}.b"] = delta.sum(axis=0)
        if i > 0:
            da = delta @ params[f"trunk.{i}.W"].T
    grads = {k: grads[k] for k in params}
    if return_loss:
        return grads, total, per_branch
    return grads


def predict(spec: NetworkSpec, params, x) -> np.ndarray:
    """Normalized (n, 2) [O2, T] predictions from the reporting branches."""
    outputs = forward(spec, params, x)
    cols = []
    for target in TARGETS:
        b = spec.reporting_branch(target)
        cols.append(outputs[b.name][:, b.outputs.index(target)])
    return np.column_stack(cols)


def save_checkpoint(path, spec: NetworkSpec, params) -> None:
    """Write a versioned JSON checkpoint.

    Layout::

        {"format": "mtlsense-checkpoint", "version": 1,
         "spec": {...},
         "tensors": [{"name": "trunk.0.W", "shape": [16, 50],
                      "values": [... row-major ...]}, ...]}

    Floats are written with ``repr`` precision so loading is lossless.
    """
    tensors = [{"name": k, "shape": list(v.shape), "values": v.ravel(order="C").tolist()}
               for k, v in params.items()]
    doc = {"format": CHECKPOINT_FORMAT, "version": CHECKPOINT_VERSION,
           "spec": spec.to_dict(), "tensors": tensors}
    Path(path).write_text(json.dumps(doc))


def load_checkpoint(path) -> tuple[NetworkSpec, dict[str, np.ndarray]]:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a {CHECKPOINT_FORMAT} file")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {doc.get('version')}")
    spec = NetworkSpec.from_dict(doc["spec"])
    params = {t["name"]: np.array(t["values"], dtype=float).reshape(t["shape"])
              for t in doc["tensors"]}
    expected = {f"{name}.{p}" for name, _, _ in spec.layers() for p in "Wb"}
    if set(params) != expected:
        raise ValueError(f"{path}: tensor manifest does not match the stored spec")
    return spec, params
