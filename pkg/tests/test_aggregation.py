import math
import threading

import numpy as np
import pytest

from signvote.aggregation import (
    DimensionMismatch,
    DuplicateVote,
    StaleRound,
    UnknownWorker,
    VoteServer,
    adversary_count,
    vote_outcome_distribution,
)
from signvote.codec import pack, unpack

GRID_M = (1, 3, 9, 27)
GRID_ALPHA = (0.0, 1 / 9, 1 / 3)
GRID_P = (0.55, 0.7, 0.9)


def realized(M, alpha):
    return math.floor(alpha * M + 1e-9) / M


def monte_carlo_failure(M, n_bad, p, q, trials, rng):
    """Draw every worker's bit independently and count majority failures."""
    good = rng.random((trials, M - n_bad)) < p
    bad = rng.random((trials, n_bad)) < q
    correct = good.sum(axis=1) + bad.sum(axis=1)
    return float(np.mean(correct <= M / 2))


def test_third_vote_triggers_broadcast():
    srv = VoteServer(3, 4)
    s = pack(np.array([1, -1, 1, -1]))
    assert srv.submit(0, 0, s) is None
    assert srv.submit(2, 0, s) is None
    assert srv.pending == 2
    out = srv.submit(1, 0, pack(np.array([-1, -1, -1, -1])))
    assert unpack(out).tolist() == [1, -1, 1, -1]
    assert srv.round == 1 and srv.pending == 0
    assert srv.last_tally.counts.tolist() == [1, -3, 1, -3]


def test_protocol_errors():
    srv = VoteServer(3, 4)
    s = pack(np.ones(4, dtype=np.int8))
    srv.submit(0, 0, s)
    with pytest.raises(DuplicateVote):
        srv.submit(0, 0, s)
    with pytest.raises(StaleRound):
        srv.submit(1, 1, s)
    with pytest.raises(DimensionMismatch):
        srv.submit(1, 0, pack(np.ones(5, dtype=np.int8)))
    with pytest.raises(UnknownWorker):
        srv.submit(3, 0, s)
    srv.submit(1, 0, s)
    srv.submit(2, 0, s)
    with pytest.raises(StaleRound):
        srv.submit(0, 0, s)


def test_unanimous_broadcast_equals_input():
    rng = np.random.default_rng(0)
    s = pack(np.where(rng.random(100) < 0.5, -1, 1))
    srv = VoteServer(27, 100)
    outs = [srv.submit(m, 0, s) for m in range(27)]
    assert outs[:-1] == [None] * 26 and outs[-1] == s


def test_concurrent_submit_yields_one_broadcast():
    M, d, rounds = 16, 64, 20
    srv = VoteServer(M, d)
    rng = np.random.default_rng(5)
    votes = [[pack(np.where(rng.random(d) < 0.5, -1, 1)) for _ in range(M)] for _ in range(rounds)]
    results = [[] for _ in range(rounds)]
    barrier = threading.Barrier(M)

    def run(m):
        for k in range(rounds):
            barrier.wait()
            out = srv.submit(m, k, votes[k][m])
            if out is not None:
                results[k].append(out)
            barrier.wait()

    threads = [threading.Thread(target=run, args=(m,)) for m in range(M)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert [len(r) for r in results] == [1] * rounds
    for k in range(rounds):
        total = sum(unpack(v).astype(int) for v in votes[k])
        assert unpack(results[k][0]).tolist() == np.where(total < 0, -1, 1).tolist()


def test_exact_failure_examples():
    assert vote_outcome_distribution(1, 0, 0.9) == pytest.approx(0.1)
    assert vote_outcome_distribution(3, 0, 0.9) == pytest.approx(0.028)
    assert vote_outcome_distribution(3, 1 / 3, 1.0) == 0.0


def test_tie_counts_as_failure():
    # M=2, p=1/2: ties have probability 1/2, both-wrong 1/4
    assert vote_outcome_distribution(2, 0, 0.5) == pytest.approx(0.75)


def test_non_integral_adversary_count_rejected():
    with pytest.raises(ValueError):
        adversary_count(3, 1 / 9)
    with pytest.raises(ValueError):
        vote_outcome_distribution(27, 0.1, 0.7)
    assert adversary_count(27, 1 / 3) == 9
    with pytest.raises(ValueError):
        vote_outcome_distribution(3, 0, 1.5)


@pytest.mark.parametrize("M", GRID_M)
def test_exact_matches_monte_carlo(M):
    rng = np.random.default_rng(M)
    trials = 100_000
    for alpha in GRID_ALPHA:
        a = realized(M, alpha)
        n_bad = round(a * M)
        for p in GRID_P:
            exact = vote_outcome_distribution(M, a, p, "invert")
            mc = monte_carlo_failure(M, n_bad, p, 1 - p, trials, rng)
            se = math.sqrt(max(exact * (1 - exact), 1e-12) / trials)
            assert abs(mc - exact) <= 4 * se, (M, a, p, exact, mc)


def test_failure_monotone_in_p_and_alpha():
    for M in GRID_M:
        for alpha in GRID_ALPHA:
            a = realized(M, alpha)
            vals = [vote_outcome_distribution(M, a, p) for p in np.linspace(0.5, 1.0, 51)]
            assert all(x >= y - 1e-15 for x, y in zip(vals, vals[1:]))
    for p in GRID_P:
        vals = [vote_outcome_distribution(27, b / 27, p) for b in range(14)]
        assert all(x <= y + 1e-15 for x, y in zip(vals, vals[1:]))


def test_invert_is_worst_case():
    for M in GRID_M:
        for alpha in GRID_ALPHA:
            a = realized(M, alpha)
            for p in np.linspace(0.5, 1.0, 11):
                worst = vote_outcome_distribution(M, a, p, "invert")
                for other in ("rescale", "sign_randomize"):
                    assert vote_outcome_distribution(M, a, p, other) <= worst + 1e-15


def test_sign_randomize_calculator_matches_monte_carlo():
    rng = np.random.default_rng(9)
    M, n_bad, trials = 9, 3, 100_000
    for p in GRID_P:
        exact = vote_outcome_distribution(M, n_bad / M, p, "sign_randomize")
        mc = monte_carlo_failure(M, n_bad, p, 0.5, trials, rng)
        assert abs(mc - exact) <= 4 * math.sqrt(exact * (1 - exact) / trials)
