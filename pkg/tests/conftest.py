import numpy as np
import pytest


class Bits:
    """Toy problem: pick ``width`` symbols out of ``arity``; score counts matches with ``goal``.

    Codes are shared across positions when ``shared`` is set, so that the
    adapt step sees repeated codes.
    """

    family = "bits"

    def __init__(self, arity=3, shared=False):
        self.arity = arity
        self.shared = shared

    def root(self, instance):
        return ()

    def is_terminal(self, state):
        return len(state) == len(self._goal)

    def legal_moves(self, state):
        return list(range(self.arity))

    def play(self, state, move):
        return state + (move,)

    def score(self, state):
        return float(sum(a == b for a, b in zip(state, self._goal)))

    def solved_score(self, instance):
        return float(len(instance))

    def policy_code(self, state, move):
        return move if self.shared else len(state) * self.arity + move

    def prior_code(self, state, move):
        return move

    def solution_move(self, state, solution):
        return solution[len(state)]

    def check_solution(self, instance, solution):
        return None

    def bind(self, goal):
        self._goal = tuple(goal)
        return tuple(goal)


@pytest.fixture
def bits():
    p = Bits()
    inst = p.bind((0, 1, 2, 0, 1))
    return p, inst


ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE):
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
