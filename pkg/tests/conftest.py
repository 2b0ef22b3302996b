import pytest

from parsrec import corpus, experiment
from parsrec.meta import MetaConfig
from parsrec.learn import ForestParams
from parsrec.parserpool import builtin_pool

HEADLINE_N = 5000
HEADLINE_SEED = 42


@pytest.fixture(scope="session")
def pool():
    return builtin_pool()


@pytest.fixture(scope="session")
def small_corpus():
    return corpus.generate(600, seed=7)


@pytest.fixture(scope="session")
def small_model(small_corpus, pool):
    cfg = MetaConfig(k_ngrams=40, forest=ForestParams(n_trees=20))
    return experiment.train_on_corpus(small_corpus, pool, seed=7, config=cfg)


@pytest.fixture(scope="session")
def small_test_split(small_corpus):
    return corpus.split(small_corpus, corpus.SplitSpec(seed=7))[2]


@pytest.fixture(scope="session")
def headline_run(pool):
    data = corpus.generate(HEADLINE_N, seed=HEADLINE_SEED)
    return experiment.run(data, pool, seed=HEADLINE_SEED)


# ------------------------------------------------- acceptance reporting

_criteria: dict[int, tuple[str, bool]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when != "call" and not report.failed:
        return
    number, title = mark.args
    _, ok = _criteria.get(number, (title, True))
    _criteria[number] = (title, ok and report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, ok = _criteria[number]
        terminalreporter.write_line(f"A{number:<3}{'PASS' if ok else 'FAIL'}  {title}")
