"""Run manifests: content digests that make batch reruns verifiable."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def text_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class RunManifest:
    command: str
    inputs: dict[str, str]  # path -> sha256
    config_digest: str
    engine_version: str
    timestamp: str = field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat()
    )

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "inputs": dict(self.inputs),
            "config_digest": self.config_digest,
            "engine_version": self.engine_version,
            "timestamp": self.timestamp,
        }

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def build_manifest(command: str, input_paths, config_text: str = "") -> RunManifest:
    from . import __version__

    inputs = {str(p): file_digest(p) for p in input_paths}
    return RunManifest(
        command=command,
        inputs=inputs,
        config_digest=text_digest(config_text),
        engine_version=__version__,
    )
