# kind: pde_loss
# target: external-runtime
# provides: loss/2, residual/2
# requires: forward/1
# >>> residual
# {{residual}}
# <<< residual
import math

import torch

from model import forward

RESIDUAL = "{{residual}}"
AXES = {{axes}}
BOUNDARY_PENALTY = {{penalty}}
CONSTANTS = {"pi": math.pi, "e": math.e}
FUNCTIONS = {
    "sin": torch.sin,
    "cos": torch.cos,
    "exp": torch.exp,
    "log": torch.log,
    "tanh": torch.tanh,
    "sqrt": torch.sqrt,
}


def _tokens(text):
    return text.replace("(", " ( ").replace(")", " ) ").split()


def _read(tokens):
    tok = tokens.pop(0)
    if tok != "(":
        return tok
    out = []
    while tokens[0] != ")":
        out.append(_read(tokens))
    tokens.pop(0)
    return out


TREE = _read(_tokens(RESIDUAL))


def _grad(y, x, axis):
    g = torch.autograd.grad(y.sum(), x, create_graph=True)[0]
    return g[:, axis : axis + 1]


def _eval(node, u, x):
    if isinstance(node, str):
        if node in CONSTANTS:
            return torch.full_like(u, CONSTANTS[node])
        if node in AXES:
            i = AXES.index(node)
            return x[:, i : i + 1]
        try:
            return torch.full_like(u, float(node))
        except ValueError:
            return u
    op, args = node[0], node[1:]
    if op == "D":
        axis, order, child = args
        if axis not in AXES:
            raise NameError(f"undefined derivative axis: {axis}")
        val = _eval(child, u, x)
        for _ in range(int(order)):
            val = _grad(val, x, AXES.index(axis))
        return val
    vals = [_eval(a, u, x) for a in args]
    if op == "+":
        return sum(vals[1:], vals[0])
    if op == "*":
        out = vals[0]
        for v in vals[1:]:
            out = out * v
        return out
    if op == "^":
        return vals[0] ** vals[1]
    if op in FUNCTIONS:
        return FUNCTIONS[op](vals[0])
    raise NameError(f"undefined symbol: {op}")


def residual(params, points):
    x = points.clone().requires_grad_(True)
    u = forward(x)
    return _eval(TREE, u, x)


def loss(params, batch):
    r = residual(params, batch["interior"])
    total = (r**2).mean()
    if batch["boundary"].shape[0] > 0:
        ub = forward(batch["boundary"])
        total = total + BOUNDARY_PENALTY * ((ub - batch["boundary_values"]) ** 2).mean()
    return total
