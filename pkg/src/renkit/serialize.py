"""JSON persistence for models, parameters and training checkpoints.

Floats are written with Python's shortest round-trip repr, so finite doubles
survive save/load bit-exactly.  Array shapes are implied by the stored
dimensions, which keeps zero-sized blocks unambiguous.
"""

from __future__ import annotations

import json
from typing import Optional

import numpy as np

from .errors import FormatError
from .types import Certificate, DirectParams, Dims, ExplicitModel, IQCSpec

FORMAT_VERSION = 1

_MODEL_SHAPES = {
    "A": ("n", "n"),
    "B1": ("n", "q"),
    "B2": ("n", "m"),
    "C1": ("q", "n"),
    "D11": ("q", "q"),
    "D12": ("q", "m"),
    "C2": ("p", "n"),
    "D21": ("p", "q"),
    "D22": ("p", "m"),
    "bx": ("n",),
    "bv": ("q",),
    "by": ("p",),
}

_PARAM_SHAPES = {
    "X": ("s2", "s2"),
    "Y1": ("n", "n"),
    "g": ("q",),
    "Y2": ("q", "q"),
    "X3": ("s", "s"),
    "Y3": ("s", "s"),
    "B2til": ("n", "m"),
    "C2": ("p", "n"),
    "D12til": ("q", "m"),
    "D21": ("p", "q"),
    "bx": ("n",),
    "bv": ("q",),
    "by": ("p",),
}


def _check_finite(name: str, arr: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise FormatError(f"{name} contains non-finite values; only finite doubles serialize")
    return arr


def _resolve(shape_spec, dims: Dims) -> tuple[int, ...]:
    n, m, p, q = dims
    sizes = {"n": n, "m": m, "p": p, "q": q, "s2": 2 * n + q, "s": max(p, m)}
    return tuple(sizes[k] for k in shape_spec)


def _decode_array(obj, shape: tuple[int, ...], name: str) -> np.ndarray:
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError):
        raise FormatError(f"{name}: not a numeric array")
    expected = int(np.prod(shape))
    if arr.size != expected:
        raise FormatError(f"{name}: has {arr.size} entries, expected {expected} for shape {shape}")
    return _check_finite(name, arr.reshape(shape))


def _iqc_to_dict(iqc: Optional[IQCSpec]) -> Optional[dict]:
    if iqc is None:
        return None
    if iqc.kind == "lipschitz":
        return {"kind": "lipschitz", "gamma": iqc.param}
    if iqc.kind == "input_passive":
        return {"kind": "input_passive", "nu": iqc.param}
    if iqc.kind == "output_passive":
        return {"kind": "output_passive", "rho": iqc.param}
    return {
        "kind": "general",
        "Q": _check_finite("iqc.Q", iqc.Q).tolist(),
        "S": _check_finite("iqc.S", iqc.S).tolist(),
        "R": _check_finite("iqc.R", iqc.R).tolist(),
    }


def _iqc_from_dict(obj, dims: Dims) -> Optional[IQCSpec]:
    if obj is None:
        return None
    n, m, p, q = dims
    try:
        kind = obj["kind"]
    except (TypeError, KeyError):
        raise FormatError("iqc: missing kind")
    if kind == "lipschitz":
        return IQCSpec.lipschitz(float(obj["gamma"]), m=m, p=p)
    if kind == "input_passive":
        return IQCSpec.input_passive(float(obj["nu"]), m=m)
    if kind == "output_passive":
        return IQCSpec.output_passive(float(obj["rho"]), m=m)
    if kind == "general":
        return IQCSpec.general(
            _decode_array(obj.get("Q"), (p, p), "iqc.Q"),
            _decode_array(obj.get("S"), (m, p), "iqc.S"),
            _decode_array(obj.get("R"), (m, m), "iqc.R"),
        )
    raise FormatError(f"iqc: unknown kind {kind!r}")


def model_to_dict(model: ExplicitModel) -> dict:
    n, m, p, q = model.dims
    doc = {
        "format_version": FORMAT_VERSION,
        "type": "explicit_model",
        "kind": model.kind,
        "dims": {"n": n, "m": m, "p": p, "q": q},
        "activation": model.activation,
        "epsilon": model.epsilon,
        "alpha_bar": model.alpha_bar,
        "iqc": _iqc_to_dict(model.iqc),
        "matrices": {
            name: _check_finite(name, getattr(model, name)).tolist()
            for name in ("A", "B1", "B2", "C1", "D11", "D12", "C2", "D21", "D22")
        },
        "biases": {
            name: _check_finite(name, getattr(model, name)).tolist()
            for name in ("bx", "bv", "by")
        },
        "certificate": None,
    }
    cert = model.certificate
    if cert is not None:
        doc["certificate"] = {
            "P": _check_finite("P", cert.P).tolist(),
            "lam": _check_finite("lam", cert.lam).tolist(),
            "alpha": cert.alpha,
            "lmi_min_eig": cert.lmi_min_eig,
            "wellposed_min_eig": cert.wellposed_min_eig,
        }
    return doc


def model_from_dict(doc: dict) -> ExplicitModel:
    if not isinstance(doc, dict):
        raise FormatError("model document must be a JSON object")
    if doc.get("type") != "explicit_model":
        raise FormatError("not an explicit-model document")
    if doc.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"unsupported format_version {doc.get('format_version')!r}")
    try:
        d = doc["dims"]
        dims = Dims(int(d["n"]), int(d["m"]), int(d["p"]), int(d["q"]))
    except (KeyError, TypeError, ValueError):
        raise FormatError("missing or malformed dims")
    if min(dims) < 0:
        raise FormatError("dims must be nonnegative")
    mats = doc.get("matrices")
    biases = doc.get("biases")
    if not isinstance(mats, dict) or not isinstance(biases, dict):
        raise FormatError("missing matrices/biases")
    arrays = {}
    for name, spec in _MODEL_SHAPES.items():
        src = biases if name.startswith("b") else mats
        if name not in src:
            raise FormatError(f"missing array {name}")
        arrays[name] = _decode_array(src[name], _resolve(spec, dims), name)
    cert = None
    cdoc = doc.get("certificate")
    if cdoc is not None:
        if not isinstance(cdoc, dict):
            raise FormatError("certificate must be an object")
        n, _, _, q = dims

        def opt_float(v):
            return None if v is None else float(v)

        cert = Certificate(
            P=_decode_array(cdoc.get("P"), (n, n), "certificate.P"),
            lam=_decode_array(cdoc.get("lam"), (q,), "certificate.lam"),
            alpha=float(cdoc.get("alpha", 1.0)),
            lmi_min_eig=opt_float(cdoc.get("lmi_min_eig")),
            wellposed_min_eig=opt_float(cdoc.get("wellposed_min_eig")),
        )
    kind = doc.get("kind")
    model = ExplicitModel(
        **arrays,
        activation=str(doc.get("activation", "relu")),
        certificate=cert,
        kind=kind,
        epsilon=float(doc.get("epsilon", 1e-3)),
        alpha_bar=float(doc.get("alpha_bar", 1.0)),
        iqc=_iqc_from_dict(doc.get("iqc"), dims),
    )
    try:
        model.validate()
    except ValueError as exc:
        raise FormatError(str(exc))
    return model


def params_to_dict(theta: DirectParams) -> dict:
    n, m, p, q = theta.dims
    return {
        "format_version": FORMAT_VERSION,
        "type": "direct_params",
        "dims": {"n": n, "m": m, "p": p, "q": q},
        "acyclic": bool(theta.acyclic),
        "epsilon": theta.epsilon,
        "alpha_bar": theta.alpha_bar,
        "arrays": {
            name: _check_finite(name, arr).tolist() for name, arr in theta.free_arrays()
        },
    }


def params_from_dict(doc: dict) -> DirectParams:
    if not isinstance(doc, dict):
        raise FormatError("parameter document must be a JSON object")
    if doc.get("type") != "direct_params":
        raise FormatError("not a direct-params document")
    if doc.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"unsupported format_version {doc.get('format_version')!r}")
    try:
        d = doc["dims"]
        dims = Dims(int(d["n"]), int(d["m"]), int(d["p"]), int(d["q"]))
    except (KeyError, TypeError, ValueError):
        raise FormatError("missing or malformed dims")
    arrays_doc = doc.get("arrays")
    if not isinstance(arrays_doc, dict):
        raise FormatError("missing arrays")
    kwargs = {}
    for name, spec in _PARAM_SHAPES.items():
        if name in arrays_doc:
            kwargs[name] = _decode_array(arrays_doc[name], _resolve(spec, dims), name)
        elif name in ("g", "Y2", "X3", "Y3"):
            kwargs[name] = None
        else:
            raise FormatError(f"missing array {name}")
    theta = DirectParams(
        dims=dims,
        acyclic=bool(doc.get("acyclic", True)),
        epsilon=float(doc.get("epsilon", 1e-3)),
        alpha_bar=float(doc.get("alpha_bar", 1.0)),
        **kwargs,
    )
    try:
        theta.validate()
    except ValueError as exc:
        raise FormatError(str(exc))
    return theta


def _dump(doc: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, allow_nan=False, indent=1)
        fh.write("\n")


def _load(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})")


def save_model(model: ExplicitModel, path) -> None:
    _dump(model_to_dict(model), path)


def load_model(path) -> ExplicitModel:
    return model_from_dict(_load(path))


def save_params(theta: DirectParams, path) -> None:
    _dump(params_to_dict(theta), path)


def load_params(path) -> DirectParams:
    return params_from_dict(_load(path))


def save_checkpoint(path, theta: DirectParams, *, optimizer_state=None, epoch=0,
                    activation="relu", iqc: Optional[IQCSpec] = None) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "type": "checkpoint",
        "params": params_to_dict(theta),
        "iqc": _iqc_to_dict(iqc),
        "activation": activation,
        "optimizer": optimizer_state,
        "epoch": int(epoch),
    }
    _dump(doc, path)


def load_checkpoint(path) -> dict:
    doc = _load(path)
    if doc.get("type") != "checkpoint":
        raise FormatError("not a checkpoint document")
    theta = params_from_dict(doc.get("params"))
    return {
        "theta": theta,
        "iqc": _iqc_from_dict(doc.get("iqc"), theta.dims),
        "activation": str(doc.get("activation", "relu")),
        "optimizer": doc.get("optimizer"),
        "epoch": int(doc.get("epoch", 0)),
    }
