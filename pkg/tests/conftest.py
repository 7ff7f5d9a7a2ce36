import pytest

from secureview.harness import gen_fig1, gen_oneone_chain
from secureview.model import WorkflowDef, execute_workflow, module_table


@pytest.fixture
def fig1():
    return gen_fig1().workflow


@pytest.fixture
def fig1_relation(fig1):
    return execute_workflow(fig1)


@pytest.fixture
def m1_alone(fig1):
    """m1 as its own workflow, with its full function table."""
    m1 = fig1.module("m1")
    return m1, WorkflowDef.single(m1, fig1.attributes), module_table(fig1, "m1")


@pytest.fixture
def chain2():
    return gen_oneone_chain(2).workflow


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_log():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
