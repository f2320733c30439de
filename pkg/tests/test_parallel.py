import os

from squidjpa.parallel import THREADS_ENV, default_workers, pmap


def _square(x):
    return x * x


def test_pmap_order_and_equivalence():
    xs = list(range(20))
    assert pmap(_square, xs, 1) == pmap(_square, xs, 3) == [x * x for x in xs]
    assert pmap(_square, [], 4) == []


def test_env_workers(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "3")
    assert default_workers() == 3
    monkeypatch.delenv(THREADS_ENV)
    assert default_workers() == (os.cpu_count() or 1)
