"""Collects one pass/fail line per acceptance criterion for the terminal summary."""

CRITERIA = range(1, 11)
LINES = {}


def record(number, ok, detail):
    LINES[number] = (bool(ok), detail)
    line = format_line(number)
    print(line)
    return line


def format_line(number):
    if number not in LINES:
        return f"criterion {number:2d}: FAIL  (no result recorded; the test errored or was skipped)"
    ok, detail = LINES[number]
    return f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
