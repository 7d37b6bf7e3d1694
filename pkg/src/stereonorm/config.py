"""Plain-text configuration files: camera rigs and synthetic scenes.

Rig files are flat ``key value`` pairs::

    fx 1024
    fy 1024
    u0 511.5
    v0 511.5
    baseline 0.3

Scene files add brace-delimited blocks, one per primitive::

    rig { fx 1024  fy 1024  u0 511.5  v0 511.5  baseline 0.3 }
    image { width 1024  height 1024 }
    sphere { center 0 0 3  radius 1.4 }
    box { min -2 -1 13.5  max 2 2 17.5 }
    plane { normal 0 1 0  offset 2 }

``#`` starts a comment that runs to the end of the line.
"""

from __future__ import annotations

from pathlib import Path

from .formats import FormatError
from .geometry import StereoRig
from .synth import Box, Plane, SceneSpec, Sphere

_RIG_KEYS = ("fx", "fy", "u0", "v0", "baseline")


def _tokenize(text: str) -> list[str]:
    tokens: list[str] = []
    for line in text.splitlines():
        line = line.split("#", 1)[0]
        tokens.extend(line.replace("{", " { ").replace("}", " } ").split())
    return tokens


def _take_floats(tokens: list[str], pos: int, n: int, what: str):
    vals = []
    for _ in range(n):
        if pos >= len(tokens) or tokens[pos] in ("{", "}"):
            raise FormatError(f"expected {n} number(s) for {what}")
        try:
            vals.append(float(tokens[pos]))
        except ValueError:
            raise FormatError(f"bad number {tokens[pos]!r} for {what}") from None
        pos += 1
    return (vals[0] if n == 1 else vals), pos


def _parse_block(tokens: list[str], pos: int, what: str) -> tuple[dict, int]:
    if pos >= len(tokens) or tokens[pos] != "{":
        raise FormatError(f"expected '{{' after {what}")
    pos += 1
    fields: dict = {}
    arity = {"center": 3, "min": 3, "max": 3, "normal": 3}
    while True:
        if pos >= len(tokens):
            raise FormatError(f"unterminated {what} block")
        tok = tokens[pos]
        if tok == "}":
            return fields, pos + 1
        pos += 1
        fields[tok], pos = _take_floats(tokens, pos, arity.get(tok, 1),
                                        f"{what}.{tok}")


def _require(fields: dict, keys: tuple, what: str) -> None:
    missing = [k for k in keys if k not in fields]
    if missing:
        raise FormatError(f"{what} block is missing {', '.join(missing)}")


def parse_rig(text: str) -> StereoRig:
    tokens = _tokenize(text)
    fields: dict = {}
    pos = 0
    while pos < len(tokens):
        key = tokens[pos]
        fields[key], pos = _take_floats(tokens, pos + 1, 1, f"rig.{key}")
    _require(fields, _RIG_KEYS, "rig")
    try:
        return StereoRig(**{k: fields[k] for k in _RIG_KEYS})
    except ValueError as exc:
        raise FormatError(f"invalid rig: {exc}") from None


def load_rig(path) -> StereoRig:
    return parse_rig(Path(path).read_text(encoding="utf-8"))


def parse_scene(text: str) -> SceneSpec:
    tokens = _tokenize(text)
    rig = None
    width = height = None
    primitives = []
    pos = 0
    while pos < len(tokens):
        kind = tokens[pos]
        fields, pos = _parse_block(tokens, pos + 1, kind)
        try:
            if kind == "rig":
                _require(fields, _RIG_KEYS, "rig")
                rig = StereoRig(**{k: fields[k] for k in _RIG_KEYS})
            elif kind == "image":
                _require(fields, ("width", "height"), "image")
                width, height = int(fields["width"]), int(fields["height"])
            elif kind == "sphere":
                _require(fields, ("center", "radius"), "sphere")
                primitives.append(Sphere(fields["center"], fields["radius"]))
            elif kind == "box":
                _require(fields, ("min", "max"), "box")
                primitives.append(Box(fields["min"], fields["max"]))
            elif kind == "plane":
                _require(fields, ("normal", "offset"), "plane")
                primitives.append(Plane(fields["normal"], fields["offset"]))
            else:
                raise FormatError(f"unknown scene block {kind!r}")
        except ValueError as exc:
            raise FormatError(f"invalid {kind} block: {exc}") from None
    if rig is None:
        raise FormatError("scene file has no rig block")
    if width is None:
        raise FormatError("scene file has no image block")
    return SceneSpec(rig=rig, width=width, height=height, primitives=primitives)


def load_scene(path) -> SceneSpec:
    return parse_scene(Path(path).read_text(encoding="utf-8"))
