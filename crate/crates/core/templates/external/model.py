# kind: model
# target: external-runtime
# provides: forward/1, init/1
# requires:
import torch

ARCH = "{{arch}}"
INPUTS = {{inputs}}
DEPTH = {{depth}}
WIDTH = {{width}}
ACTIVATION = "{{activation}}"

_NET = None


class Sine(torch.nn.Module):
    def forward(self, x):
        return torch.sin(x)


def init(seed):
    global _NET
    torch.manual_seed(seed)
    act = Sine if ACTIVATION == "sine" else torch.nn.Tanh
    layers, fan_in = [], INPUTS
    for _ in range(DEPTH):
        layers += [torch.nn.Linear(fan_in, WIDTH), act()]
        fan_in = WIDTH
    layers.append(torch.nn.Linear(fan_in, 1))
    _NET = torch.nn.Sequential(*layers).double()
    return _NET


def forward(x):
    if _NET is None:
        raise RuntimeError("shape mismatch: model used before init")
    if x.shape[-1] != INPUTS:
        raise RuntimeError(f"shape mismatch: expected {INPUTS}, got {x.shape[-1]}")
    return _NET(x)
