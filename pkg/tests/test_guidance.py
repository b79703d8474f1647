import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from seqbeam.guidance import (
    ObjectiveSet,
    ObjectiveSpec,
    ScorerFailure,
    guided_rank,
    nds_rank,
    orient_and_zscore,
    sts_scalarize,
    threshold_filter,
    zscore_columns,
)


def _objs(*directions):
    return [
        ObjectiveSpec(f"obj{i}", d, scorer=lambda s: 0.0)
        for i, d in enumerate(directions)
    ]


def test_zscore_hand_values():
    m = orient_and_zscore(["a", "b", "c"], _objs("minimize"), raw=np.array([[1.0], [2.0], [3.0]]))
    assert np.allclose(m.standardized[:, 0], [-1.2247448, 0.0, 1.2247448], atol=1e-6)


def test_zscore_constant_column():
    m = orient_and_zscore(["a", "b", "c"], _objs("minimize"), raw=np.array([[5.0]] * 3))
    assert np.all(m.standardized == 0.0)


def test_maximize_orientation_sign():
    m = orient_and_zscore(["a", "b"], _objs("maximize"), raw=np.array([[1.0], [2.0]]))
    # raw 2 is better; minimize-oriented z must rank it lower
    assert m.standardized[1, 0] == pytest.approx(-1.0)
    assert m.standardized[0, 0] == pytest.approx(1.0)


def test_zscore_mean_zero_unit_std():
    rng = np.random.default_rng(3)
    z = zscore_columns(rng.standard_normal((40, 4)))
    assert np.allclose(z.mean(axis=0), 0.0, atol=1e-9)
    assert np.allclose(z.std(axis=0), 1.0, atol=1e-9)


def test_sts_single_objective_is_monotone():
    raw = np.array([[3.0], [1.0], [2.0]])
    m = orient_and_zscore(["a", "b", "c"], _objs("minimize"), raw=raw)
    scores = sts_scalarize(m, [1.0])
    assert np.argsort(scores).tolist() == np.argsort(raw[:, 0]).tolist()


def test_sts_closed_form_equal_weights():
    m = orient_and_zscore(
        ["a"], _objs("minimize", "minimize"), raw=np.array([[0.0, 0.0]])
    )
    assert sts_scalarize(m, [1.0, 1.0])[0] == pytest.approx(math.log(2.0))


def test_sts_weighted_default_configuration():
    # weights (1, 2): candidate better on the weight-2 objective wins
    z = np.array([[0.0, -1.0], [-1.0, 0.0]])
    m = orient_and_zscore(["a", "b"], _objs("minimize", "minimize"), raw=z)
    m.standardized = z  # use the stated z-scores directly
    scores = sts_scalarize(m, [1.0, 2.0])
    assert scores[0] == pytest.approx(math.log(1.0 + 2.0 * math.exp(-1.0)))
    assert scores[1] == pytest.approx(math.log(math.exp(-1.0) + 2.0))
    assert scores[0] < scores[1]


def test_sts_adversarial_negated_objective_symmetric():
    z = np.array([[1.0], [0.0], [-1.0]])
    std = np.hstack([z, -z])
    scores = np.log(np.exp(std[:, 0]) + np.exp(std[:, 1]))
    # log(e^x + e^-x) is even: all pair scores with x and -x coincide
    assert scores[0] == pytest.approx(scores[2])


def brute_force_pareto(values):
    n = len(values)
    front = []
    for i in range(n):
        dominated = any(
            j != i
            and all(values[j][m] <= values[i][m] for m in range(len(values[i])))
            and any(values[j][m] < values[i][m] for m in range(len(values[i])))
            for j in range(n)
        )
        if not dominated:
            front.append(i)
    return set(front)


def test_nds_hand_example():
    vals = np.array([[1.0, 2.0], [2.0, 1.0], [3.0, 3.0]])
    ranks = nds_rank(vals, tie_break_column=0)
    assert ranks[0][0] == 0 and ranks[1][0] == 0
    assert ranks[2][0] == 1


def test_nds_all_identical_orders_by_tie_break():
    vals = np.tile([[1.0, 1.0]], (4, 1))
    ranks = nds_rank(vals, tie_break_column=0)
    assert all(f == 0 for f, _ in ranks)
    assert sorted(r for _, r in ranks) == [0, 1, 2, 3]


def test_nds_single_dominator():
    vals = np.array([[0.0, 0.0], [1.0, 2.0], [2.0, 1.0]])
    ranks = nds_rank(vals, tie_break_column=0)
    assert ranks[0] == (0, 0)
    assert ranks[1][0] >= 1 and ranks[2][0] >= 1


def test_nds_front0_matches_brute_force():
    rng = np.random.default_rng(12)
    for _ in range(100):
        n = int(rng.integers(2, 64))
        m = int(rng.integers(1, 5))
        vals = rng.standard_normal((n, m))
        ranks = nds_rank(vals, tie_break_column=0)
        assert {i for i, (f, _) in enumerate(ranks) if f == 0} == brute_force_pareto(vals)


def test_nds_tie_break_respected_within_front():
    rng = np.random.default_rng(5)
    vals = rng.standard_normal((32, 3))
    ranks = nds_rank(vals, tie_break_column=1)
    by_front = {}
    for i, (f, r) in enumerate(ranks):
        by_front.setdefault(f, []).append((r, vals[i, 1]))
    for members in by_front.values():
        members.sort()
        tie_vals = [v for _, v in members]
        assert tie_vals == sorted(tie_vals)


def test_guided_rank_pll_only_equals_unguided():
    seqs = ["AAAA", "AAAC", "AACC", "ACCC"]
    plls = [-10.0, -8.0, -12.0, -9.0]
    objective_set = ObjectiveSet(
        (ObjectiveSpec("pseudo_perplexity", "minimize"),), aggregation="sts"
    )
    perm = guided_rank(seqs, plls, 4, objective_set)
    unguided = sorted(range(4), key=lambda i: (-plls[i], seqs[i]))
    assert perm == unguided


def test_guided_rank_vanishing_weights_converge_to_unguided():
    rng = np.random.default_rng(8)
    seqs = [f"{'ACDE'[i % 4] * 4}" for i in range(4)]
    seqs = ["AAAA", "CCCC", "DDDD", "EEEE"]
    plls = list(rng.standard_normal(4) * 3 - 10)
    noise = {s: float(rng.standard_normal()) for s in seqs}
    objective_set = ObjectiveSet(
        (
            ObjectiveSpec("pseudo_perplexity", "minimize"),
            ObjectiveSpec("noise", "minimize", scorer=lambda s: noise[s], weight=1e-9),
        ),
        aggregation="sts",
    )
    perm = guided_rank(seqs, plls, 4, objective_set)
    unguided = sorted(range(4), key=lambda i: (-plls[i], seqs[i]))
    assert perm == unguided


def test_guided_rank_shift_invariance():
    rng = np.random.default_rng(4)
    seqs = ["AAAA", "CCCC", "DDDD", "EEEE", "FFFF"]
    plls = list(rng.standard_normal(5) - 8)
    base = {s: float(rng.standard_normal()) for s in seqs}
    for shift in (0.0, 100.0, -3.5):
        objective_set = ObjectiveSet(
            (
                ObjectiveSpec("pseudo_perplexity", "minimize"),
                ObjectiveSpec("aux", "minimize",
                              scorer=lambda s, shift=shift: base[s] + shift),
            ),
            aggregation="sts",
        )
        perm = guided_rank(seqs, plls, 4, objective_set)
        if shift == 0.0:
            ref = perm
        else:
            assert perm == ref


def test_sts_monotone_in_each_objective():
    z = np.array([[0.3, -0.2, 0.1]])
    better = z.copy()
    better[0, 1] -= 0.5
    w = np.array([1.0, 2.0, 0.5])
    s0 = np.log(np.sum(w * np.exp(z[0])))
    s1 = np.log(np.sum(w * np.exp(better[0])))
    assert s1 < s0


def test_scorer_failure_aborts():
    def bad(seq):
        raise RuntimeError("boom")

    objective_set = ObjectiveSet(
        (
            ObjectiveSpec("pseudo_perplexity", "minimize"),
            ObjectiveSpec("bad", "minimize", scorer=bad),
        ),
        aggregation="sts",
    )
    with pytest.raises(ScorerFailure):
        guided_rank(["AAAA", "CCCC"], [-1.0, -2.0], 4, objective_set)


def test_threshold_filter():
    scores = {"a": 0.5, "b": 0.7}
    kept = threshold_filter(["a", "b"], scores.__getitem__, 0.6, "greater")
    assert kept == ["b"]
    assert threshold_filter(["a", "b"], scores.__getitem__, -math.inf, "greater") == ["a", "b"]
    assert threshold_filter([], scores.__getitem__, 0.6, "greater") == []


@settings(max_examples=50)
@given(
    st.lists(
        st.integers(-5000, -100).map(lambda v: v / 100.0),
        min_size=2, max_size=12, unique=True,
    )
)
def test_guided_rank_single_objective_matches_pll_order(plls):
    seqs = [f"{'ACDEFGHIKLMN'[i]}AAA" for i in range(len(plls))]
    objective_set = ObjectiveSet(
        (ObjectiveSpec("pseudo_perplexity", "minimize"),), aggregation="sts"
    )
    perm = guided_rank(seqs, plls, 4, objective_set)
    assert [plls[i] for i in perm] == sorted(plls, reverse=True)
