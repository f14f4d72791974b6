"""Seeded random computation graphs and a central finite-difference oracle."""

import numpy as np

from timecf import autodiff as ad

OPS = ["add", "sub", "mul", "matmul", "tanh", "sigmoid", "relu", "conv1d", "concat_time",
       "slice_time", "square", "sqrt", "abs", "mean_axis", "gru_sequence", "gru_step", "global_mean"]
LOSSES = ["sum", "mean", "mse", "bce_logits", "bce_prob"]


def _away_from_zero(rng, shape):
    # keep kinks of relu/abs out of the finite-difference stencil
    x = rng.uniform(0.2, 1.5, size=shape)
    return x * rng.choice([-1.0, 1.0], size=shape)


def build_graph(seed):
    """Return (leaves, fn) where fn(leaves) rebuilds the scalar loss from scratch."""
    rng = np.random.default_rng(seed)
    B = int(rng.integers(1, 3))
    T = int(rng.integers(3, 7))
    C = int(rng.integers(1, 5))
    depth = int(rng.integers(1, 6))
    forced = OPS[seed % len(OPS)]
    plan = [forced] + [OPS[int(i)] for i in rng.integers(0, len(OPS), size=depth - 1)]
    rng.shuffle(plan)
    loss_kind = LOSSES[(seed // len(OPS)) % len(LOSSES)]

    leaves = {"x": ad.Tensor(_away_from_zero(rng, (B, T, C)), requires_grad=True)}
    steps = []
    shape = (B, T, C)
    for k, op in enumerate(plan):
        name = f"p{k}"
        ndim = len(shape)
        if op in ("add", "sub", "mul"):
            leaves[name] = ad.Tensor(_away_from_zero(rng, shape[-1:] if rng.random() < 0.3 else shape),
                                     requires_grad=True)
        elif op == "matmul":
            c_out = int(rng.integers(1, 5))
            leaves[name] = ad.Tensor(rng.normal(size=(shape[-1], c_out)), requires_grad=True)
            shape = shape[:-1] + (c_out,)
        elif op == "conv1d":
            if ndim != 3 or shape[1] < 2:
                op = "tanh"
            else:
                k_w = int(rng.integers(1, min(3, shape[1]) + 1))
                c_out = int(rng.integers(1, 4))
                leaves[name] = ad.Tensor(rng.normal(size=(k_w, shape[2], c_out)), requires_grad=True)
                leaves[name + "b"] = ad.Tensor(rng.normal(size=(c_out,)), requires_grad=True)
                shape = (shape[0], shape[1] - k_w + 1, c_out)
        elif op == "concat_time":
            if ndim != 3:
                op = "sigmoid"
            else:
                extra = int(rng.integers(1, 3))
                leaves[name] = ad.Tensor(rng.normal(size=(shape[0], extra, shape[2])), requires_grad=True)
                shape = (shape[0], shape[1] + extra, shape[2])
        elif op == "slice_time":
            if ndim != 3 or shape[1] < 2:
                op = "square"
            else:
                start = int(rng.integers(0, shape[1] - 1))
                stop = int(rng.integers(start + 1, shape[1] + 1))
                leaves[name] = (start, stop)
                shape = (shape[0], stop - start, shape[2])
        elif op in ("mean_axis", "global_mean"):
            if ndim != 3:
                op = "abs"
            else:
                shape = (shape[0], shape[2])
        elif op in ("gru_sequence", "gru_step"):
            if ndim != 3:
                op = "tanh"
            else:
                hid = int(rng.integers(1, 5))
                cell = ad.GruCell(shape[2], hid, np.random.default_rng(seed + 1000 * k))
                for pname, p in cell.named_parameters():
                    leaves[f"{name}.{pname}"] = p
                leaves[name] = cell
                if op == "gru_step":
                    leaves[name + "h"] = ad.Tensor(rng.uniform(-0.9, 0.9, size=(shape[0], hid)),
                                                   requires_grad=True)
                    shape = (shape[0], hid)
                else:
                    shape = (shape[0], shape[1], hid)
        steps.append((op, name))
    if loss_kind in ("mse", "bce_logits"):
        leaves["target"] = ad.Tensor(rng.uniform(0, 1, size=shape), requires_grad=loss_kind == "mse")

    def fn(L):
        cur = L["x"]
        for op, name in steps:
            if op in ("add", "sub", "mul"):
                cur = getattr(ad, op)(cur, L[name])
            elif op == "matmul":
                cur = ad.matmul(cur, L[name])
            elif op in ("tanh", "sigmoid", "relu", "square"):
                cur = getattr(ad, op)(cur)
            elif op == "abs":
                cur = ad.abs_(cur)
            elif op == "sqrt":
                cur = ad.sqrt(ad.add(ad.square(cur), 0.5))
            elif op == "conv1d":
                cur = ad.conv1d(cur, L[name], L[name + "b"])
            elif op == "concat_time":
                cur = ad.concat_time([cur, L[name]])
            elif op == "slice_time":
                cur = ad.slice_time(cur, *L[name])
            elif op == "mean_axis":
                cur = ad.mean(cur, axis=1)
            elif op == "global_mean":
                cur = ad.global_mean_over_time(cur)
            elif op == "gru_sequence":
                cur = ad.gru_sequence(L[name], cur)
            elif op == "gru_step":
                h = L[name + "h"]
                for t in range(cur.shape[1]):
                    h = ad.gru_step(L[name], ad.reshape(ad.slice_time(cur, t, t + 1), (cur.shape[0], -1)), h)
                cur = h
        if loss_kind == "sum":
            return ad.sum_(cur)
        if loss_kind == "mean":
            return ad.mean(cur)
        if loss_kind == "mse":
            return ad.mse_loss(cur, L["target"])
        if loss_kind == "bce_logits":
            return ad.bce_loss(cur, L["target"], from_logits=True)
        return ad.bce_loss(ad.sigmoid(cur), ad.Tensor(np.full(cur.shape, 0.3)), from_logits=False)

    params = {k: v for k, v in leaves.items() if isinstance(v, ad.Tensor) and v.requires_grad}
    ops_used = {op for op, _ in steps} | {loss_kind}
    return leaves, params, fn, ops_used


def finite_difference(params, fn, leaves, h=1e-5):
    """Central differences of fn w.r.t. every entry of every parameter."""
    grads = {}
    for name, p in params.items():
        base = p.data.copy()
        g = np.zeros_like(base)
        for idx in np.ndindex(base.shape):
            for sign in (1.0, -1.0):
                bumped = base.copy()
                bumped[idx] += sign * h
                p.data = ad.Tensor(bumped).data
                with ad.no_grad():
                    val = fn(leaves).item()
                g[idx] += sign * val
            g[idx] /= 2 * h
        p.data = ad.Tensor(base).data
        grads[name] = g
    return grads


def max_relative_error(seed):
    leaves, params, fn, ops_used = build_graph(seed)
    for p in params.values():
        p.grad = None
    fn(leaves).backward()
    analytic = {k: (p.grad if p.grad is not None else np.zeros(p.shape)) for k, p in params.items()}
    numeric = finite_difference(params, fn, leaves)
    worst = 0.0
    for k in params:
        scale = max(np.abs(numeric[k]).max(), np.abs(analytic[k]).max(), 1e-6)
        worst = max(worst, np.abs(analytic[k] - numeric[k]).max() / scale)
    return worst, ops_used
