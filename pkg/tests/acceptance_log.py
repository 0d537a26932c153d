"""Shared record of acceptance outcomes, printed at the end of the session."""

LOG = {}


def report(number, passed, detail):
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    LOG[number] = line
    print(line)
    return passed
