import pytest

from blowup_lab.model import InitialData, ProblemConfig, constant_data
from blowup_lab.solver import solve_characteristic

REFERENCE = dict(p=2, mu=1, gamma1=5, gamma2=5, r_star=0.5, t_star=0.25, eps0=1, eps1=1)
REFERENCE_P3 = dict(p=3, mu=0.01, gamma1=1, gamma2=1, r_star=0.5, t_star=0.6, eps0=1, eps1=50)
BUMP_F = "5+exp(-10*x^2)"
BUMP_G = "5+exp(-10*(x-0.2)^2)"


def reference_cfg(**kw):
    return ProblemConfig(**{**REFERENCE, **kw})


@pytest.fixture(scope="session")
def ref_cfg():
    return reference_cfg()


@pytest.fixture(scope="session")
def ref_sol(ref_cfg):
    return solve_characteristic(ref_cfg, constant_data(ref_cfg))


@pytest.fixture(scope="session")
def bump_data():
    return InitialData.from_strings(BUMP_F, BUMP_G)


@pytest.fixture(scope="session")
def bump_sol(ref_cfg, bump_data):
    return solve_characteristic(ref_cfg, bump_data)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
