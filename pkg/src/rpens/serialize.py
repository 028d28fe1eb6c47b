"""Versioned, bit-exact model serialization.

Models are stored as canonical JSON: keys sorted, no insignificant
whitespace, one trailing newline.  Arrays travel as base64-encoded raw
little-endian bytes in row-major order with their shape and dtype, floats
as JSON numbers (Python's float repr round-trips exactly), and the voting
threshold as an integer numerator/denominator pair, so a load followed by
a save reproduces the original file byte for byte.
"""

from __future__ import annotations

import base64
import json
from fractions import Fraction

import numpy as np

from .base_classifiers import KnnModel, LdaModel, QdaModel
from .ensemble import EnsembleConfig, EnsembleModel
from .errors import DataFormatError
from .projections import Projection

FORMAT_NAME = "rpens-ensemble"
FORMAT_VERSION = 1

# Only these dtypes ever appear in a model.
_DTYPES = ("<f8", "<i8")


def _encode_array(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(a)
    if a.dtype == np.float64:
        dtype = "<f8"
    elif a.dtype == np.int64:
        dtype = "<i8"
    else:
        raise TypeError(f"unsupported array dtype {a.dtype}")
    payload = a.astype(dtype, copy=False).tobytes(order="C")
    return {
        "shape": list(a.shape),
        "dtype": dtype,
        "data": base64.b64encode(payload).decode("ascii"),
    }


def _decode_array(obj: dict) -> np.ndarray:
    dtype = obj["dtype"]
    if dtype not in _DTYPES:
        raise DataFormatError(f"unsupported array dtype {dtype!r}")
    raw = base64.b64decode(obj["data"].encode("ascii"))
    a = np.frombuffer(raw, dtype=dtype).reshape(obj["shape"])
    return a.astype(dtype.replace("<", "="), copy=True)


def _encode_base_model(model) -> dict:
    if isinstance(model, LdaModel):
        return {
            "kind": "lda",
            "pi_hat_1": model.pi_hat_1,
            "pi_hat_2": model.pi_hat_2,
            "mu_hat_1": _encode_array(model.mu_hat_1),
            "mu_hat_2": _encode_array(model.mu_hat_2),
            "sigma_hat": _encode_array(model.sigma_hat),
            "omega_hat": _encode_array(model.omega_hat),
        }
    if isinstance(model, QdaModel):
        return {
            "kind": "qda",
            "pi_hat_1": model.pi_hat_1,
            "pi_hat_2": model.pi_hat_2,
            "mu_hat_1": _encode_array(model.mu_hat_1),
            "mu_hat_2": _encode_array(model.mu_hat_2),
            "sigma_hat_1": _encode_array(model.sigma_hat_1),
            "sigma_hat_2": _encode_array(model.sigma_hat_2),
            "omega_hat_1": _encode_array(model.omega_hat_1),
            "omega_hat_2": _encode_array(model.omega_hat_2),
            "log_det_1": model.log_det_1,
            "log_det_2": model.log_det_2,
        }
    if isinstance(model, KnnModel):
        return {
            "kind": "knn",
            "points": _encode_array(model.points),
            "labels": _encode_array(model.labels),
            "k": model.k,
            "tie_seed": model.tie_seed,
            "point_ids": _encode_array(model.point_ids),
        }
    raise TypeError(f"unknown base model type {type(model).__name__}")


def _decode_base_model(obj: dict):
    kind = obj.get("kind")
    if kind == "lda":
        return LdaModel(
            pi_hat_1=obj["pi_hat_1"],
            pi_hat_2=obj["pi_hat_2"],
            mu_hat_1=_decode_array(obj["mu_hat_1"]),
            mu_hat_2=_decode_array(obj["mu_hat_2"]),
            sigma_hat=_decode_array(obj["sigma_hat"]),
            omega_hat=_decode_array(obj["omega_hat"]),
        )
    if kind == "qda":
        return QdaModel(
            pi_hat_1=obj["pi_hat_1"],
            pi_hat_2=obj["pi_hat_2"],
            mu_hat_1=_decode_array(obj["mu_hat_1"]),
            mu_hat_2=_decode_array(obj["mu_hat_2"]),
            sigma_hat_1=_decode_array(obj["sigma_hat_1"]),
            sigma_hat_2=_decode_array(obj["sigma_hat_2"]),
            omega_hat_1=_decode_array(obj["omega_hat_1"]),
            omega_hat_2=_decode_array(obj["omega_hat_2"]),
            log_det_1=obj["log_det_1"],
            log_det_2=obj["log_det_2"],
        )
    if kind == "knn":
        return KnnModel(
            points=_decode_array(obj["points"]),
            labels=_decode_array(obj["labels"]),
            k=obj["k"],
            tie_seed=obj["tie_seed"],
            point_ids=_decode_array(obj["point_ids"]),
        )
    raise DataFormatError(f"unknown base model kind {kind!r}")


def model_to_dict(model: EnsembleModel) -> dict:
    cfg = model.config
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "config": {
            "B1": cfg.B1,
            "B2": cfg.B2,
            "d": cfg.d,
            "base": cfg.base,
            "knn_k": cfg.knn_k,
            "estimator": cfg.estimator,
            "projection_kind": cfg.projection_kind,
            "alpha": cfg.alpha,
            "master_seed": cfg.master_seed,
        },
        "alpha_hat": {
            "num": model.alpha_hat.numerator,
            "den": model.alpha_hat.denominator,
        },
        "projections": [
            {"kind": proj.kind, "entries": _encode_array(proj.entries)}
            for proj in model.projections
        ],
        "base_models": [_encode_base_model(bm) for bm in model.base_models],
        "train_vote_counts": _encode_array(model.train_vote_counts),
        "train_labels": _encode_array(model.train_labels),
        "winner_indices": list(model.winner_indices),
        "block_error_counts": _encode_array(model.block_error_counts),
        "block_m": model.block_m,
    }


def model_from_dict(obj: dict) -> EnsembleModel:
    if obj.get("format") != FORMAT_NAME:
        raise DataFormatError(
            f"not an ensemble model container (format={obj.get('format')!r})"
        )
    version = obj.get("version")
    if version != FORMAT_VERSION:
        raise DataFormatError(f"unsupported container version {version!r}")
    cfg = EnsembleConfig(**obj["config"])
    projections = tuple(
        Projection(_decode_array(p["entries"]), kind=p["kind"])
        for p in obj["projections"]
    )
    return EnsembleModel(
        config=cfg,
        projections=projections,
        base_models=tuple(_decode_base_model(bm) for bm in obj["base_models"]),
        alpha_hat=Fraction(obj["alpha_hat"]["num"], obj["alpha_hat"]["den"]),
        train_vote_counts=_decode_array(obj["train_vote_counts"]),
        train_labels=_decode_array(obj["train_labels"]),
        winner_indices=tuple(obj["winner_indices"]),
        block_error_counts=_decode_array(obj["block_error_counts"]),
        block_m=obj["block_m"],
    )


def dumps(model: EnsembleModel) -> str:
    return json.dumps(model_to_dict(model), sort_keys=True, separators=(",", ":")) + "\n"


def loads(text: str) -> EnsembleModel:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"invalid model container: {exc}") from None
    return model_from_dict(obj)


def save_model(model: EnsembleModel, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(dumps(model))


def load_model(path) -> EnsembleModel:
    with open(path, "r", encoding="ascii") as fh:
        return loads(fh.read())
