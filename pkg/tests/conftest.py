from pathlib import Path

import pytest

from momentbound.lang import parse_program

CORPUS = Path(__file__).resolve().parent.parent / "corpus"


def load_corpus(name: str):
    return parse_program((CORPUS / f"{name}.appl").read_text())


@pytest.fixture(scope="session")
def rdwalk():
    return load_corpus("rdwalk")


@pytest.fixture(scope="session")
def geo():
    return load_corpus("geo")


@pytest.fixture(scope="session")
def coupon2():
    return load_corpus("coupon2")


@pytest.fixture(scope="session")
def rdwalk_int():
    return load_corpus("rdwalk_int")
