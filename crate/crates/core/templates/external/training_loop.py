# kind: training_loop
# target: external-runtime
# provides: train/2
# requires: loss/2, sample_batch/1, init/1
import json
import math

import torch

from model import init
from pde_loss import loss
from preprocessing import sample_batch

LR = {{lr}}
STEPS = {{steps}}
BETAS = ({{beta1}}, {{beta2}})
EPS = {{adam_eps}}


def train(seed, trace_path):
    net = init(seed)
    batch = sample_batch(seed)
    opt = torch.optim.Adam(net.parameters(), lr=LR, betas=BETAS, eps=EPS)
    with open(trace_path, "w") as out:
        for t in range(1, STEPS + 1):
            opt.zero_grad()
            value = loss(net, batch)
            value.backward()
            grad_norm = math.sqrt(sum(float((p.grad**2).sum()) for p in net.parameters()))
            lv = float(value)
            if not math.isfinite(lv):
                raise FloatingPointError(f"non-finite loss at step {t}")
            out.write(json.dumps({"t": t, "loss": lv, "grad_norm": grad_norm}) + "\n")
            opt.step()
    return net
