"""Run configuration: packaged defaults, user config files, CLI overrides and manifests."""

import dataclasses
import hashlib
import json
import logging
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import List, Optional

import psutil

from folkgather._version import __version__
from folkgather.errors import InputError

logger = logging.getLogger(__name__)

STRATEGIES = ('m1', 'm2', 'm3')


def default_threads():
    """Physical core count (logical count if unknown)."""
    return psutil.cpu_count(logical=False) or psutil.cpu_count() or 1


@dataclass
class RunConfig:
    # paths
    corpus: Optional[str] = None
    corpus_format: Optional[str] = None
    labels: Optional[str] = None
    reference: Optional[str] = None
    output_dir: str = '.'
    # rap
    damping: float = 0.5
    max_sweeps: int = 2000
    stable_window: int = 10
    f_constraint: str = 'modified'
    polish: bool = True
    # similarity
    top_k: int = 40
    divisor: float = 4.0
    # strategy
    seed_term: Optional[str] = None
    strategy: str = 'm3'
    expert_multiplier: float = 2.0
    max_rounds: int = 5
    # classifier
    reg: float = 0.1
    folds: int = 10
    max_iter: int = 8
    # sweeps
    multipliers: List[float] = field(default_factory=lambda: [0.0, 0.5, 1.0, 1.5, 2.0, 3.0])
    swap_percents: List[float] = field(default_factory=lambda: [0.0, 25.0, 50.0, 75.0, 100.0])
    rng_seed: int = 0
    threads: int = 1

    def validate(self):
        if not 0 <= self.damping < 1:
            raise InputError(f"damping must be in [0, 1), got {self.damping}")
        if self.max_sweeps < 1 or self.stable_window < 1:
            raise InputError("max_sweeps and stable_window must be >= 1")
        if self.f_constraint not in ('modified', 'original'):
            raise InputError(f"f_constraint must be 'modified' or 'original', got {self.f_constraint!r}")
        if self.top_k < 1 or self.divisor <= 0:
            raise InputError("top_k must be >= 1 and divisor > 0")
        if self.strategy not in STRATEGIES:
            raise InputError(f"strategy must be one of {', '.join(STRATEGIES)}")
        if self.expert_multiplier < 0:
            raise InputError("expert_multiplier must be >= 0")
        if self.max_rounds < 1:
            raise InputError("max_rounds must be >= 1")
        if self.threads < 1:
            raise InputError("threads must be >= 1")
        if list(self.multipliers) != sorted(self.multipliers):
            raise InputError("multipliers must be sorted ascending")
        if any(not 0 <= p <= 100 for p in self.swap_percents):
            raise InputError("swap percents must lie in [0, 100]")
        return self

    def to_dict(self):
        return dataclasses.asdict(self)

    def replaced(self, **changes):
        return dataclasses.replace(self, **changes)


FIELD_NAMES = {f.name for f in fields(RunConfig)}
# Keys that do not change results and are left out of the config hash.
UNHASHED = ('threads', 'output_dir')


def _load_packaged_defaults():
    """Read the shipped defaults.json; empty dict when unreadable."""
    defaults_file = Path(__file__).parent / 'defaults.json'
    try:
        with open(defaults_file, 'r', encoding='utf-8') as f:
            data = json.load(f)
        return data.get('defaults', {})
    except (FileNotFoundError, json.JSONDecodeError, AttributeError):
        logger.warning(f"Could not load packaged defaults: {defaults_file}")
        return {}


def _check_keys(data, source):
    unknown = sorted(set(data) - FIELD_NAMES)
    if unknown:
        raise InputError(f"{source}: unknown config key(s): {', '.join(unknown)}")


def load_config(config_file=None, overrides=None):
    """Resolve RunConfig from packaged defaults, then config_file, then overrides.

    Override values of None are ignored.
    """
    values = {}
    packaged = _load_packaged_defaults()
    _check_keys(packaged, 'defaults.json')
    values.update(packaged)
    if config_file:
        try:
            with open(config_file, 'r', encoding='utf-8') as f:
                user = json.load(f)
        except (OSError, ValueError) as e:
            raise InputError(f"{config_file}: cannot read config ({e})")
        if not isinstance(user, dict):
            raise InputError(f"{config_file}: config must be a JSON object")
        _check_keys(user, config_file)
        values.update(user)
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    if values.get('threads') is None:
        values['threads'] = default_threads()
    return RunConfig(**values).validate()


def config_hash(config):
    data = {k: v for k, v in config.to_dict().items() if k not in UNHASHED}
    text = json.dumps(data, sort_keys=True)
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


def write_manifest(path, command, config, outputs):
    """Record what is needed to replay a run: argv, resolved config and its hash."""
    manifest = {
        'version': __version__,
        'command': list(command),
        'config': config.to_dict(),
        'config_hash': config_hash(config),
        'outputs': {k: str(v) for k, v in sorted(outputs.items())},
    }
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write('\n')
    logger.debug(f"Wrote manifest {path}")
    return path


def read_manifest(path):
    try:
        with open(path, 'r', encoding='utf-8') as f:
            manifest = json.load(f)
    except (OSError, ValueError) as e:
        raise InputError(f"{path}: cannot read manifest ({e})")
    for key in ('command', 'config', 'config_hash'):
        if key not in manifest:
            raise InputError(f"{path}: manifest lacks '{key}'")
    config = RunConfig(**manifest['config'])
    if config_hash(config) != manifest['config_hash']:
        raise InputError(f"{path}: config hash mismatch (manifest was edited)")
    return manifest
