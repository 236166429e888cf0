# --------------------------------------------------------------------------------------
# Copyright (c) 2026, L0bse contributors, see git history for details
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# --------------------------------------------------------------------------------------
"""Test that the math-to-code map only names existing objects"""

import importlib
import re
from pathlib import Path

import pytest

MAP = Path(__file__).parents[1] / "docs" / "source" / "math_map.rst"

TARGET = re.compile(r":(?:func|class|meth):`([^`]+)`")


def _targets() -> list[str]:
    return TARGET.findall(MAP.read_text(encoding="utf-8"))


def _resolve(path: str):
    parts = path.split(".")
    for i in range(len(parts) - 1, 0, -1):
        try:
            obj = importlib.import_module(".".join(parts[:i]))
        except ImportError:
            continue
        for name in parts[i:]:
            obj = getattr(obj, name)
        return obj
    raise ImportError(path)


def test_map_rows_have_a_status():
    rows = re.findall(r"^     - (in scope|out of scope)$", MAP.read_text(encoding="utf-8"), re.M)
    assert len(rows) == len(re.findall(r"^   \* - ", MAP.read_text(encoding="utf-8"), re.M)) - 1
    assert rows.count("in scope") == len(_targets())


@pytest.mark.parametrize("path", [pytest.param(p, id=p) for p in sorted(set(_targets()))])
def test_map_targets_exist(path):
    assert callable(_resolve(path))
