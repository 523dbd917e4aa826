# core/checkpoint.py
from pathlib import Path
from typing import Any, Dict, Optional
import json
import logging

from core.errors import CheckpointError

CHECKPOINT_VERSION = 1


def encode_checkpoint(kind: str, payload: Dict[str, Any], seed: int, config_hash: str,
                      metadata: Optional[Dict[str, Any]] = None) -> str:
    """Serialize a model payload as canonical JSON text

    Floats are written with their shortest round-trip representation and keys
    are sorted, so save -> load -> save reproduces the same bytes.
    """
    document = {
        'format_version': CHECKPOINT_VERSION,
        'kind': kind,
        'seed': int(seed),
        'config_hash': config_hash,
        'metadata': metadata or {},
        'payload': payload,
    }
    try:
        return json.dumps(document, sort_keys=True, indent=1, allow_nan=False) + "\n"
    except ValueError as e:
        raise CheckpointError(f"cannot serialize {kind} checkpoint: {e}") from e


def decode_checkpoint(text: str, expected_kind: Optional[str] = None) -> Dict[str, Any]:
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise CheckpointError(f"corrupt or truncated checkpoint: {e}") from None
    if not isinstance(document, dict) or 'format_version' not in document:
        raise CheckpointError("not a ratbench checkpoint (missing format_version)")
    if document['format_version'] != CHECKPOINT_VERSION:
        raise CheckpointError(f"checkpoint format version {document['format_version']} "
                              f"is not supported (expected {CHECKPOINT_VERSION})")
    if expected_kind is not None and document.get('kind') != expected_kind:
        raise CheckpointError(f"expected a '{expected_kind}' checkpoint, found '{document.get('kind')}'")
    for key in ('payload', 'metadata', 'seed', 'config_hash'):
        if key not in document:
            raise CheckpointError(f"checkpoint is missing '{key}'")
    return document


def save_checkpoint(path, kind: str, payload: Dict[str, Any], seed: int, config_hash: str,
                    metadata: Optional[Dict[str, Any]] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(encode_checkpoint(kind, payload, seed, config_hash, metadata), encoding='utf-8')
    return path


def load_checkpoint(path, expected_kind: Optional[str] = None) -> Dict[str, Any]:
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except FileNotFoundError:
        raise CheckpointError(f"checkpoint not found: {path}") from None
    except UnicodeDecodeError as e:
        raise CheckpointError(f"checkpoint {path} is not UTF-8 text: {e}") from None
    return decode_checkpoint(text, expected_kind)


class CheckpointManager:
    """Names, stores and reloads run artifacts under one output directory

    Checkpoints are ``<kind>_<env>_<seed>.ckpt``; each gets a small
    ``.meta.json`` sidecar with its metadata for quick inspection.
    """

    def __init__(self, base_path, env_id: str, seed: int, config_hash: str):
        self.logger = logging.getLogger(__name__)
        self.base_path = Path(base_path)
        self.base_path.mkdir(parents=True, exist_ok=True)
        self.env_id = env_id
        self.seed = int(seed)
        self.config_hash = config_hash

    def path_for(self, kind: str) -> Path:
        return self.base_path / f"{kind}_{self.env_id}_{self.seed}.ckpt"

    def sidecar_for(self, kind: str) -> Path:
        return self.base_path / f"{kind}_{self.env_id}_{self.seed}.meta.json"

    def save(self, kind: str, payload: Dict[str, Any], metadata: Optional[Dict[str, Any]] = None) -> Path:
        metadata = metadata or {}
        path = save_checkpoint(self.path_for(kind), kind, payload, self.seed, self.config_hash, metadata)
        sidecar = {
            'format_version': CHECKPOINT_VERSION,
            'seed': self.seed,
            'config_hash': self.config_hash,
            'kind': kind,
            **metadata,
        }
        self.sidecar_for(kind).write_text(json.dumps(sidecar, sort_keys=True, indent=2) + "\n",
                                          encoding='utf-8')
        self.logger.info(f"Saved {kind} checkpoint to {path}")
        return path

    def load(self, kind: str) -> Dict[str, Any]:
        return load_checkpoint(self.path_for(kind), expected_kind=kind)

    def load_if_current(self, kind: str) -> Optional[Dict[str, Any]]:
        """Return a stored checkpoint only if it was produced by this exact config"""
        path = self.path_for(kind)
        if not path.exists():
            return None
        try:
            document = load_checkpoint(path, expected_kind=kind)
        except CheckpointError as e:
            self.logger.warning(f"Ignoring unreadable checkpoint {path}: {e}")
            return None
        if document['config_hash'] != self.config_hash or document['seed'] != self.seed:
            return None
        self.logger.info(f"Reusing {kind} checkpoint {path}")
        return document
