"""Run manifests: everything needed to reproduce a trained model."""

from __future__ import annotations

import hashlib
import json
import os
from datetime import datetime, timezone

from .. import __version__
from ..errors import ConfigError


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_atomic(path, text: str) -> None:
    path = os.fspath(path)
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def manifest_path(model_path) -> str:
    return os.fspath(model_path) + ".manifest.json"


def build_manifest(config, data_source: dict, outputs: dict, started: datetime) -> dict:
    return {
        "kind": "dartboost-run",
        "library_version": __version__,
        "config": config.to_dict(),
        "seed": config.seed,
        "data": data_source,
        "outputs": outputs,
        "started": started.isoformat(),
        "finished": datetime.now(timezone.utc).isoformat(),
    }


def read_manifest(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read manifest {path}: {e}") from e
    if not isinstance(doc, dict) or doc.get("kind") != "dartboost-run":
        raise ConfigError(f"{path} is not a dartboost run manifest")
    return doc
