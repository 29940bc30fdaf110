"""Plain-text model files.

Layout, one item per line::

    meteonn-model 1
    arch LSTM_PC
    testing_id 3
    norm <t_min> <t_max> <h_min> <h_max>
    array <name> <ndim> <dim0> [<dim1> ...]
    <row-major values>
    ...
    end

Numbers are written with ``%.17e`` so every float64 round-trips exactly.
ELM ensembles store member ``j`` arrays as ``m<j>.w``, ``m<j>.b``, ``m<j>.alpha``.
"""
from __future__ import annotations

import re

import numpy as np

from .dataset import NormalizationParams, WindowSpec
from .models import ElmParams, FeedforwardParams, LstmParams, LstmPcParams, ModelKind
from .training import ElmEnsemble

MAGIC = "meteonn-model"
FORMAT_VERSION = 1


class ModelFileError(ValueError):
    pass


def _fmt(values) -> str:
    return " ".join("%.17e" % v for v in np.asarray(values, dtype=np.float64).ravel())


def _model_arrays(model):
    if isinstance(model, ElmEnsemble):
        out = {}
        for j, m in enumerate(model.members):
            out.update({f"m{j}.{k}": v for k, v in m.named_arrays().items()})
        return ModelKind.ELM, out
    if isinstance(model, ElmParams):
        return ModelKind.ELM, model.named_arrays()
    if isinstance(model, (FeedforwardParams, LstmParams)):
        return model.kind, model.named_arrays()
    raise TypeError(f"cannot save {type(model).__name__}")


def save_model(path, model, spec: WindowSpec, norm: NormalizationParams) -> None:
    kind, arrays = _model_arrays(model)
    lines = [f"{MAGIC} {FORMAT_VERSION}", f"arch {kind.value}", f"testing_id {spec.testing_id}",
             "norm " + _fmt([norm.t_min, norm.t_max, norm.h_min, norm.h_max])]
    for name, a in arrays.items():
        lines.append(f"array {name} {a.ndim} " + " ".join(str(d) for d in a.shape))
        lines.append(_fmt(a))
    lines.append("end")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path):
    """Returns ``(model, WindowSpec, NormalizationParams)``."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    try:
        magic, version = lines[0].split()
        if magic != MAGIC or int(version) != FORMAT_VERSION:
            raise ModelFileError(f"unsupported model file header {lines[0]!r}")
        kind = ModelKind.parse(lines[1].split()[1])
        spec = WindowSpec(int(lines[2].split()[1]))
        norm = NormalizationParams(*map(float, lines[3].split()[1:5]))
        arrays = {}
        i = 4
        while lines[i] != "end":
            head = lines[i].split()
            if head[0] != "array":
                raise ModelFileError(f"expected 'array', got {lines[i]!r}")
            name, ndim = head[1], int(head[2])
            shape = tuple(int(d) for d in head[3:3 + ndim])
            values = np.array([float(v) for v in lines[i + 1].split()])
            arrays[name] = values.reshape(shape)
            i += 2
    except (IndexError, ValueError) as exc:
        if isinstance(exc, ModelFileError):
            raise
        raise ModelFileError(f"{path}: malformed model file ({exc})") from None
    return _build(kind, arrays), spec, norm


def _build(kind: ModelKind, a: dict):
    if kind.is_feedforward:
        depth = len([k for k in a if k.startswith("W")])
        return FeedforwardParams(kind, tuple((a[f"W{k}"], a[f"b{k}"]) for k in range(depth)))
    if kind is ModelKind.ELM:
        if "w" in a:
            return ElmParams(a["w"], a["b"], a["alpha"])
        ids = sorted({int(re.match(r"m(\d+)\.", k).group(1)) for k in a})
        return ElmEnsemble(tuple(ElmParams(a[f"m{j}.w"], a[f"m{j}.b"], a[f"m{j}.alpha"]) for j in ids))
    base = LstmParams(a["w_x"], a["w_h"], a["b"], a["w_out"], a["b_out"])
    return LstmPcParams.from_lstm(base, a["w_peep"]) if kind is ModelKind.LSTM_PC else base
