"""Versioned JSON serialization for trained models.

A model file carries the full structure (trees or weight matrices), the
training hyperparameters, the min-max scaler fitted alongside it, and the
schema fingerprint, so evaluation and explanation can run on saved models
without the original dataset object.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import MinMaxScaler
from .forest import DecisionTree, Forest, ForestParams
from .mlp import Mlp, MlpParams

FORMAT_NAME = "flowlens-model"
FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    pass


@dataclass
class SavedModel:
    model: Forest | Mlp
    scaler: MinMaxScaler | None
    feature_names: list[str] | None
    meta: dict

    @property
    def kind(self) -> str:
        return "rf" if isinstance(self.model, Forest) else "mlp"


def _forest_payload(forest: Forest) -> dict:
    return {
        "n_features": forest.n_features,
        "params": {
            "n_trees": forest.params.n_trees,
            "max_depth": forest.params.max_depth,
            "min_samples_split": forest.params.min_samples_split,
            "feature_subsample": forest.params.feature_subsample,
            "seed": forest.params.seed,
            "bootstrap": forest.params.bootstrap,
        },
        "trees": [
            {
                "feature": t.feature.tolist(),
                "threshold": t.threshold.tolist(),
                "left": t.left.tolist(),
                "right": t.right.tolist(),
                "count": t.count.tolist(),
                "prob": t.prob.tolist(),
            }
            for t in forest.trees
        ],
    }


def _mlp_payload(mlp: Mlp) -> dict:
    return {
        "n_features": mlp.n_features,
        "params": {
            "hidden": list(mlp.params.hidden),
            "learning_rate": mlp.params.learning_rate,
            "epochs": mlp.params.epochs,
            "batch_size": mlp.params.batch_size,
            "seed": mlp.params.seed,
        },
        "weights": [w.tolist() for w in mlp.weights],
        "biases": [b.tolist() for b in mlp.biases],
        "loss_history": list(mlp.loss_history),
    }


def save_model(
    path: str | Path,
    model: Forest | Mlp,
    scaler: MinMaxScaler | None = None,
    feature_names: list[str] | None = None,
    meta: dict | None = None,
):
    doc: dict = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "schema_fingerprint": model.schema_fingerprint,
        "feature_names": feature_names,
        "meta": meta or {},
    }
    if scaler is not None:
        doc["scaler"] = {"mins": scaler.mins.tolist(), "maxs": scaler.maxs.tolist()}
    else:
        doc["scaler"] = None
    if isinstance(model, Forest):
        doc["kind"] = "rf"
        doc["forest"] = _forest_payload(model)
    elif isinstance(model, Mlp):
        doc["kind"] = "mlp"
        doc["mlp"] = _mlp_payload(model)
    else:
        raise ModelFormatError(f"cannot serialize {type(model).__name__}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_model(path: str | Path) -> SavedModel:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != FORMAT_NAME:
        raise ModelFormatError(f"{path}: not a {FORMAT_NAME} file")
    if doc.get("version") != FORMAT_VERSION:
        raise ModelFormatError(f"{path}: unsupported version {doc.get('version')}")
    fingerprint = doc.get("schema_fingerprint")

    if doc["kind"] == "rf":
        payload = doc["forest"]
        params = ForestParams(**payload["params"])
        trees = [
            DecisionTree(
                feature=np.array(t["feature"], dtype=np.int64),
                threshold=np.array(t["threshold"], dtype=float),
                left=np.array(t["left"], dtype=np.int64),
                right=np.array(t["right"], dtype=np.int64),
                count=np.array(t["count"], dtype=np.int64),
                prob=np.array(t["prob"], dtype=float),
            )
            for t in payload["trees"]
        ]
        model: Forest | Mlp = Forest(
            trees=trees, params=params, n_features=payload["n_features"],
            schema_fingerprint=fingerprint,
        )
    elif doc["kind"] == "mlp":
        payload = doc["mlp"]
        raw = dict(payload["params"])
        raw["hidden"] = tuple(raw["hidden"])
        params = MlpParams(**raw)
        model = Mlp(
            weights=[np.array(w, dtype=float) for w in payload["weights"]],
            biases=[np.array(b, dtype=float) for b in payload["biases"]],
            params=params,
            n_features=payload["n_features"],
            loss_history=list(payload["loss_history"]),
            schema_fingerprint=fingerprint,
        )
    else:
        raise ModelFormatError(f"{path}: unknown model kind {doc['kind']!r}")

    scaler = None
    if doc.get("scaler") is not None:
        scaler = MinMaxScaler(
            mins=np.array(doc["scaler"]["mins"], dtype=float),
            maxs=np.array(doc["scaler"]["maxs"], dtype=float),
        )
    return SavedModel(
        model=model, scaler=scaler, feature_names=doc.get("feature_names"),
        meta=doc.get("meta", {}),
    )
