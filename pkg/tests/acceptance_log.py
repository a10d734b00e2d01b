"""Collects one verdict line per acceptance criterion for the terminal summary."""

LINES = []


def record(number, title, ok, detail):
    LINES.append(f"{'PASS' if ok else 'FAIL'} criterion {number:>2} {title}: {detail}")
