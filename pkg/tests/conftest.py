import json
import shutil
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parents[1]
DATA_DIR = REPO_ROOT / "data"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR


def copy_fixture(name: str, destination: Path, edits=None) -> Path:
    """Copy a shipped problem directory and apply per-document edit hooks.

    edits maps a document name ("boundary", ...) to a callable mutating the
    parsed document in place.
    """
    src = DATA_DIR / name
    dst = destination / name
    shutil.copytree(src / "problem", dst / "problem")
    for doc_name, hook in (edits or {}).items():
        path = dst / "problem" / f"{doc_name}.json"
        doc = json.loads(path.read_text())
        hook(doc)
        path.write_text(json.dumps(doc, indent=1) + "\n")
    return dst
