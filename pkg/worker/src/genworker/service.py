"""Request handling for the newline-delimited JSON protocol.

Every response carries the request's id (null when the request was too broken
to have one), and a malformed request never takes the service down: the reply
is ok=false and the next request is handled normally.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field

from . import filters, png

CAPABILITIES = ("canny", "segment", "depth", "color", "nerf", "scramble", "embed")

# Import names probed when real mode is requested; all of them must be
# available for a backend to count as present.
REAL_BACKEND_IMPORTS = ("torch", "diffusers")


@dataclass
class WorkerConfig:
    mode: str = "fake"  # "fake" or "real"
    tcp_port: int | None = None  # None: stdio transport
    backend_settings: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in ("fake", "real"):
            raise ValueError(f"mode must be 'fake' or 'real', got {self.mode!r}")


def resolve_mode(requested: str) -> tuple[str, str | None]:
    """Validate backend availability; degrade to fake with a warning message."""
    if requested == "fake":
        return "fake", None
    missing = []
    for name in REAL_BACKEND_IMPORTS:
        try:
            __import__(name)
        except ImportError:
            missing.append(name)
    if missing:
        return "fake", (
            f"real mode requested but backends missing ({', '.join(missing)}); "
            "running in fake mode"
        )
    return "real", None


class Service:
    def __init__(self, mode: str = "fake"):
        self.mode = mode

    def handle_line(self, line: str) -> str:
        return json.dumps(self.handle(self._parse(line)), separators=(",", ":"))

    def _parse(self, line: str) -> dict:
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            return {"_broken": "request line is not valid JSON"}
        if not isinstance(obj, dict):
            return {"_broken": "request must be a JSON object"}
        return obj

    def handle(self, req: dict) -> dict:
        rid = req.get("id")
        if not isinstance(rid, str):
            rid = None
        try:
            if "_broken" in req:
                return self._error(rid, req["_broken"])
            kind = req.get("kind")
            if kind == "capabilities":
                return {
                    "id": rid,
                    "ok": True,
                    "capabilities": list(CAPABILITIES),
                    "mode": self.mode,
                }
            if kind == "augment":
                return self._augment(rid, req)
            if kind == "embed":
                return self._embed(rid, req)
            return self._error(rid, f"unknown kind {kind!r}")
        except Exception as exc:  # noqa: BLE001 - the service must never crash
            return self._error(rid, f"internal error: {exc}")

    @staticmethod
    def _error(rid: str | None, message: str) -> dict:
        return {"id": rid, "ok": False, "error": message}

    def _decode_image(self, req: dict):
        payload = req.get("image_png_b64")
        if not isinstance(payload, str):
            raise ValueError("missing field 'image_png_b64'")
        try:
            blob = base64.b64decode(payload, validate=True)
        except Exception as exc:
            raise ValueError(f"image_png_b64 is not valid base64: {exc}") from exc
        return png.decode(blob)

    def _augment(self, rid: str | None, req: dict) -> dict:
        operator = req.get("operator")
        if operator not in CAPABILITIES or operator == "embed":
            return self._error(rid, f"unknown operator {operator!r}")
        arr = self._decode_image(req)
        seed = req.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
            return self._error(rid, "seed must be an unsigned 64-bit integer")
        params = req.get("params") or {}
        if operator == "nerf":
            rotation = params.get("rotation")
            if not isinstance(rotation, (int, float)) or float(rotation) not in filters.NERF_ROTATIONS:
                return self._error(
                    rid, f"nerf rotation must be one of {list(filters.NERF_ROTATIONS)}"
                )
            out = filters.nerf(arr, seed, float(rotation))
        else:
            out = filters.AUGMENTERS[operator](arr, seed)
        return {
            "id": rid,
            "ok": True,
            "image_png_b64": base64.b64encode(png.encode(out)).decode("ascii"),
        }

    def _embed(self, rid: str | None, req: dict) -> dict:
        arr = self._decode_image(req)
        return {"id": rid, "ok": True, "embedding": filters.embed(arr)}
