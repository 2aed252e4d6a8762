"""Registry of acceptance outcomes, printed by the terminal-summary hook."""

import functools

RESULTS = {}


def criterion(number, title):
    """Record the wrapped test's outcome under ``number``.

    The test may return a short detail string for the summary line.
    """

    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            try:
                detail = fn(*args, **kwargs)
            except BaseException as exc:
                msg = str(exc).splitlines()[0] if str(exc) else ""
                RESULTS[number] = (title, False, f"{type(exc).__name__} {msg}".strip())
                raise
            RESULTS[number] = (title, True, detail or "")

        return run

    return wrap
