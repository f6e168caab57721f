import math

import numpy as np
import pytest

from fano3 import LineShapeParams, ModelConfig
from fano3.model import LAYOUTS, ContinuumPosition, SystemKind

LABELS = [f"{k.value}-{p.value}" for k, p in LAYOUTS]

# (criterion, passed, detail) recorded by the acceptance suite
ACCEPTANCE: list[tuple[str, bool, str]] = []


def random_config(rng: np.random.Generator, label: str) -> ModelConfig:
    """A valid configuration with levels in [-5, 5] MHz and widths in [0.05, 2] MHz."""
    kind, position = label.split("-")
    lay = LAYOUTS[(SystemKind(kind), ContinuumPosition(position))]
    energies = {n: float(rng.uniform(-5, 5)) for n in lay.bound}
    couplings = {n: math.sqrt(rng.uniform(0.05, 2.0) / (2 * math.pi)) for n in lay.channels}
    g = None
    if lay.g_pair is not None:
        g = float(rng.uniform(0.05, 1.5) * rng.choice([-1.0, 1.0]))
    return ModelConfig(kind, position, energies, couplings, g)


def random_params(rng: np.random.Generator, config: ModelConfig) -> LineShapeParams:
    lay = config.layout
    q = {n: float(rng.uniform(-3, 3)) for n in lay.channels}
    return LineShapeParams(q, None if lay.two_channel else float(rng.uniform(-1, 1)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def record():
    def add(criterion: str, passed: bool, detail: str) -> None:
        line = f"{criterion} {'PASS' if passed else 'FAIL'}  {detail}"
        print(line)
        ACCEPTANCE.append((criterion, passed, detail))

    return add


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"{criterion} {'PASS' if passed else 'FAIL'}  {detail}")
