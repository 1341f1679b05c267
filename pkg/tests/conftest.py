import functools
import time

ACCEPTANCE = {}


def criterion(number, title):
    """Record a PASS/FAIL line for an acceptance test and print it as it finishes."""

    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            start = time.perf_counter()
            try:
                fn(*args, **kwargs)
            except BaseException as exc:
                line = f"criterion {number:>2} FAIL  {title}: {type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
                ACCEPTANCE[number] = line
                print(line)
                raise
            line = f"criterion {number:>2} PASS  {title} ({time.perf_counter() - start:.1f} s)"
            ACCEPTANCE[number] = line
            print(line)

        return run

    return wrap


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
