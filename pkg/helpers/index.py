import time
import uuid
from contextlib import contextmanager


def convert_seconds_to_hms(seconds: float) -> str:
    """Wall time as HH:MM:SS, prefixed with the day count for long runs."""
    days, rest = divmod(int(seconds), 86400)
    hours, rest = divmod(rest, 3600)
    minutes, secs = divmod(rest, 60)
    clock = f"{hours:02d}:{minutes:02d}:{secs:02d}"
    return f"{days} days {clock}" if days > 0 else clock


def new_run_id() -> str:
    return uuid.uuid4().hex


@contextmanager
def stopwatch(timings: dict, key: str):
    """Accumulate the wall time of the block into timings[key]."""
    start = time.perf_counter()
    try:
        yield
    finally:
        timings[key] = timings.get(key, 0.0) + time.perf_counter() - start
