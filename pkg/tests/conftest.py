import json
import pathlib
import subprocess
import sys

import pytest

from jcop.classtable import build_class_table
from jcop.parser import parse_program

CORPUS = pathlib.Path(__file__).parent / "corpus"


def corpus_files(kind: str) -> list[pathlib.Path]:
    return sorted((CORPUS / kind).glob("*.jcop"))


def load_manifest(kind: str) -> dict:
    return json.loads((CORPUS / kind / "manifest.json").read_text())


def run_cli(*argv: str, stdin: str | None = None) -> subprocess.CompletedProcess:
    return subprocess.run([sys.executable, "-m", "jcop", *argv],
                          capture_output=True, text=True, input=stdin)


@pytest.fixture(scope="session")
def cube_source() -> str:
    return (CORPUS / "ok" / "cube.jcop").read_text()


@pytest.fixture(scope="session")
def cube_program(cube_source):
    return parse_program(cube_source)


@pytest.fixture(scope="session")
def cube_table(cube_program):
    return build_class_table(cube_program)
