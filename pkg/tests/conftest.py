import numpy as np
import pytest

from nowpac.blackbox import BlackBoxProblem

ACCEPTANCE_LINES = []


def report(number, ok, detail):
    line = f"ACCEPTANCE {number:>2}: {'PASS' if ok else 'FAIL'} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[-1])):
            terminalreporter.write_line(line)


def make_problem(name, n, f, c=None, x0=None, r=0, grad=None):
    def eval_(x):
        return f(x), (np.asarray(c(x), dtype=float) if c else np.zeros(0))

    return BlackBoxProblem(name, n, r, eval_, np.zeros(n) if x0 is None else np.asarray(x0, float),
                           analytic_grad=grad)


@pytest.fixture
def sphere():
    return make_problem("sphere", 2, lambda x: float(x @ x), x0=[1.0, 1.0])
