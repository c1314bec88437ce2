from __future__ import annotations

import math
import time

from ..readings import DAY, METRIC, PRIVACY_FLOOR_SECONDS, NoiseReading, parse_rfc3339
from ..rollup import ALL_ROOMS

VALUE_MIN = 0.0
VALUE_MAX = 140.0
CLOCK_SKEW_SECONDS = 60

MALFORMED = "malformed"
BAD_METRIC = "bad_metric"
BAD_WINDOW = "bad_window"
BAD_ALIGNMENT = "bad_alignment"
BAD_VALUE = "bad_value"
FUTURE_TIMESTAMP = "future_timestamp"

_STR_FIELDS = ("node_id", "school_id", "room_id")


class Rejected(ValueError):
    def __init__(self, code: str, detail: str = ""):
        super().__init__(f"{code}: {detail}" if detail else code)
        self.code = code


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def validate_reading(obj, now: float | None = None) -> NoiseReading:
    """Decode one wire object into a ``NoiseReading`` or raise ``Rejected``.

    Checks run in a fixed order and the first failing rule names the code.
    Window lengths must divide the day so that midnight alignment is the
    same every day.
    """
    if not isinstance(obj, dict):
        raise Rejected(MALFORMED, "not an object")
    for f in _STR_FIELDS:
        v = obj.get(f)
        if not isinstance(v, str) or not v:
            raise Rejected(MALFORMED, f"{f} must be a non-empty string")
    if obj["room_id"] == ALL_ROOMS:
        raise Rejected(MALFORMED, f"room_id {ALL_ROOMS!r} is reserved for the school-wide scope")
    ws_text = obj.get("window_start")
    if not isinstance(ws_text, str):
        raise Rejected(MALFORMED, "window_start must be an RFC 3339 string")
    try:
        ws = parse_rfc3339(ws_text)
    except ValueError:
        raise Rejected(MALFORMED, "unparseable window_start") from None
    wsec = obj.get("window_seconds")
    sc = obj.get("sample_count")
    value = obj.get("value")
    if not _is_int(wsec) or not _is_int(sc) or sc < 1:
        raise Rejected(MALFORMED, "window_seconds and sample_count must be integers, sample_count >= 1")
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise Rejected(MALFORMED, "value must be a number")
    if obj.get("metric") != METRIC:
        raise Rejected(BAD_METRIC, repr(obj.get("metric")))
    if wsec < PRIVACY_FLOOR_SECONDS or DAY % wsec:
        raise Rejected(BAD_WINDOW, str(wsec))
    if (ws % DAY) % wsec:
        raise Rejected(BAD_ALIGNMENT, ws_text)
    if not (math.isfinite(value) and VALUE_MIN <= value <= VALUE_MAX):
        raise Rejected(BAD_VALUE, str(value))
    if ws > (time.time() if now is None else now) + CLOCK_SKEW_SECONDS:
        raise Rejected(FUTURE_TIMESTAMP, ws_text)
    return NoiseReading(obj["node_id"], obj["school_id"], obj["room_id"], ws, wsec, float(value), sc)
