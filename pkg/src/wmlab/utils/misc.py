import hashlib
import json
from pathlib import Path

from wmlab.types import PathLike


def read_json(path: PathLike) -> dict:
    """Read a JSON file from the given path."""
    return json.loads(Path(path).read_text())


def derive_seed(global_seed: int, stage: str) -> int:
    """Derives the seed of a pipeline stage from the global seed.

    The first four bytes of ``sha256(f"{global_seed}:{stage}")`` are read as a little-endian
    unsigned integer, so each stage can be re-run on its own and still see the same randomness.
    """
    digest = hashlib.sha256(f"{global_seed}:{stage}".encode()).digest()
    return int.from_bytes(digest[:4], "little")


def get_project_root() -> Path:
    """Get the root directory of the project."""
    return Path(__file__).parent.parent.parent.parent.resolve()


def get_resource_dir() -> Path:
    """Get the directory containing the project's resources."""
    return (get_project_root() / "resources").resolve()
