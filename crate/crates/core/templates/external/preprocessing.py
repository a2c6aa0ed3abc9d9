# kind: preprocessing
# target: external-runtime
# provides: sample_batch/1
# requires:
import json

import torch

DOMAIN = json.loads('{{domain_json}}')
INTERIOR = {{interior}}
BOUNDARY = {{boundary}}


def _extents():
    ext = [tuple(e) for e in DOMAIN["extents"]]
    if DOMAIN.get("time"):
        ext.append(tuple(DOMAIN["time"]))
    return ext


def sample_batch(seed):
    gen = torch.Generator().manual_seed(seed)
    ext = _extents()
    lo = torch.tensor([a for a, _ in ext], dtype=torch.float64)
    hi = torch.tensor([b for _, b in ext], dtype=torch.float64)
    interior = lo + (hi - lo) * torch.rand(INTERIOR, len(ext), generator=gen, dtype=torch.float64)
    faces = []
    for axis in range(len(DOMAIN["extents"])):
        for bound in (lo[axis], hi[axis]):
            pts = lo + (hi - lo) * torch.rand(max(BOUNDARY // 2, 1), len(ext), generator=gen, dtype=torch.float64)
            pts[:, axis] = bound
            faces.append(pts)
    boundary = torch.cat(faces) if faces else torch.zeros(0, len(ext), dtype=torch.float64)
    return {
        "interior": interior,
        "boundary": boundary,
        "boundary_values": torch.zeros(boundary.shape[0], 1, dtype=torch.float64),
    }
