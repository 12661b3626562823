import numpy as np

from diracweyl.ode import fd_derivative


class Formula:
    """Solution given by a formula, with the ``z``/``derivative`` interface of a trajectory."""

    def __init__(self, fn, z, span):
        self.fn, self.z, self.span = fn, complex(z), span

    def __call__(self, x):
        return np.asarray(self.fn(x))

    def derivative(self, x, h=None):
        lo, hi = self.span
        if h is None:
            h = min(0.002 / (1.0 + abs(self.z)), (hi - lo) / 8, x / 8)
        return fd_derivative(self, float(x), lo, hi, h)


# one line per acceptance criterion, echoed in the terminal summary
VERDICTS = []


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance")
        for line in sorted(VERDICTS, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
