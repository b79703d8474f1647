import math

import numpy as np
import pytest

from seqbeam.pll import (
    NotSingleSubstitution,
    approx_pll_double_mask,
    approx_pll_nomask_child,
    approx_pll_nomask_template,
    approx_pll_wt,
    build_profile,
    double_mask_base,
    exact_pll,
    expand_neighborhood,
    score_neighborhood,
    unmasked_log_rows,
)
from seqbeam.provider import CoupledProvider, PssmProvider
from seqbeam.seqcore import (
    AA_INDEX,
    ALPHABET,
    N_RESIDUES,
    CandidateSequence,
    PositionMask,
)
from tests.conftest import random_sequence


# ---------------------------------------------------------------------------
# Naive oracles: independent re-implementations of the PLL definitions used
# nowhere in the package. They share no scoring code with seqbeam.pll.


def naive_softmax(logits, tau):
    e = [math.exp(v / tau) for v in logits]
    z = sum(e)
    return [v / z for v in e]


def naive_exact_pll(provider, sequence, tau):
    total = 0.0
    for i, aa in enumerate(sequence):
        row = provider.query(sequence, {i})[i]
        total += math.log(naive_softmax(list(row), tau)[AA_INDEX[aa]])
    return total


def naive_double_mask_pll(provider, template, child, tau):
    (k,) = [i for i, (a, b) in enumerate(zip(template, child)) if a != b]
    row_k = provider.query(template, {k})[k]
    total = math.log(naive_softmax(list(row_k), tau)[AA_INDEX[child[k]]])
    for i in range(len(template)):
        if i == k:
            continue
        row = provider.query(template, {i, k})[i]
        total += math.log(naive_softmax(list(row), tau)[AA_INDEX[template[i]]])
    return total


# ---------------------------------------------------------------------------


def test_profile_uniform_for_zero_table():
    prov = PssmProvider(np.zeros((4, N_RESIDUES)))
    for tau in (1.0, 0.5):
        profile = build_profile(prov, "ACDE", tau)
        assert np.allclose(profile.rows, 1.0 / N_RESIDUES)


def test_profile_hand_softmax_single_coupling():
    # Coupled example: h=0, J[0,'A',2,'E']=1; template "ACE" at tau=1 puts
    # e/(e+19) on 'A' at position 0.
    h = np.zeros((3, N_RESIDUES))
    J = np.zeros((3, N_RESIDUES, 3, N_RESIDUES))
    J[0, AA_INDEX["A"], 2, AA_INDEX["E"]] = 1.0
    J[2, AA_INDEX["E"], 0, AA_INDEX["A"]] = 1.0
    prov = CoupledProvider(h, J)
    profile = build_profile(prov, "ACE", 1.0)
    expected = np.full(N_RESIDUES, 1.0 / (math.e + 19.0))
    expected[AA_INDEX["A"]] = math.e / (math.e + 19.0)
    assert np.allclose(profile.rows[0], expected)


def test_exact_pll_uniform():
    prov = PssmProvider(np.zeros((5, N_RESIDUES)))
    score = exact_pll(prov, "ACDEF", 1.0)
    assert score.sum_log == pytest.approx(5 * math.log(1.0 / 20.0))
    assert score.per_residue == pytest.approx(math.log(1.0 / 20.0))
    assert score.pseudo_perplexity == pytest.approx(20.0)


def test_exact_pll_matches_naive_oracle(coupled3, rng):
    for _ in range(10):
        seq = random_sequence(rng, 3)
        ours = exact_pll(coupled3, seq, 1.0).sum_log
        assert ours == pytest.approx(naive_exact_pll(coupled3, seq, 1.0), abs=1e-12)


def test_exact_pll_pass_count(coupled20):
    coupled20.ledger.reset()
    exact_pll(coupled20, "A" * 20, 1.0)
    assert coupled20.ledger.snapshot()["logical"] == 20


def test_wt_degenerate_equals_template_score(pssm6, rng):
    tmpl = random_sequence(rng, 6)
    profile = build_profile(pssm6, tmpl, 1.0)
    assert approx_pll_wt(profile, tmpl).sum_log == pytest.approx(profile.template_sum)


def test_wt_equals_exact_on_pssm_all_children(pssm6, rng):
    tmpl = random_sequence(rng, 6)
    profile = build_profile(pssm6, tmpl, 1.0)
    for k in range(6):
        for r in ALPHABET:
            if r == tmpl[k]:
                continue
            child = tmpl[:k] + r + tmpl[k + 1:]
            wt = approx_pll_wt(profile, child).sum_log
            ex = exact_pll(pssm6, child, 1.0).sum_log
            assert wt == pytest.approx(ex, abs=1e-12)


def test_wt_differs_from_exact_on_coupled(coupled3):
    tmpl = "ACE"
    profile = build_profile(coupled3, tmpl, 1.0)
    child = "WCE"
    wt = approx_pll_wt(profile, child).sum_log
    ex = exact_pll(coupled3, child, 1.0).sum_log
    assert abs(wt - ex) > 1e-6


def test_wt_rejects_multi_substitution(pssm6, rng):
    tmpl = random_sequence(rng, 6)
    profile = build_profile(pssm6, tmpl, 1.0)
    child = ("A" if tmpl[0] != "A" else "C") + ("A" if tmpl[1] != "A" else "C") + tmpl[2:]
    with pytest.raises(NotSingleSubstitution):
        approx_pll_wt(profile, child)


def test_double_mask_matches_naive_oracle(coupled3):
    tmpl = "ACE"
    profile = build_profile(coupled3, tmpl, 1.0)
    for child in ("WCE", "AGE", "ACD"):
        ours = approx_pll_double_mask(coupled3, profile, child, 1.0).sum_log
        assert ours == pytest.approx(naive_double_mask_pll(coupled3, tmpl, child, 1.0), abs=1e-12)


def test_double_mask_base_shared_across_residues(coupled3):
    # the i != k terms contain no child residue: 19 children at k cost L-1
    # queries beyond the profile
    tmpl = "ACE"
    profile = build_profile(coupled3, tmpl, 1.0)
    base = double_mask_base(coupled3, profile, 1, 1.0)
    coupled3.ledger.reset()
    scores = [
        approx_pll_double_mask(coupled3, profile, tmpl[:1] + r + tmpl[2:], 1.0, base=base)
        for r in ALPHABET
        if r != tmpl[1]
    ]
    assert coupled3.ledger.snapshot()["logical"] == 0
    assert len(scores) == 19


def test_nomask_child_uniform_and_pass_count():
    prov = PssmProvider(np.zeros((5, N_RESIDUES)))
    prov.ledger.reset()
    score = approx_pll_nomask_child(prov, "ACDEF", 1.0)
    assert score.sum_log == pytest.approx(5 * math.log(1.0 / 20.0))
    assert prov.ledger.snapshot()["logical"] == 1


def test_nomask_child_differs_from_exact_on_coupled(coupled3):
    child = "WCE"
    nm = approx_pll_nomask_child(coupled3, child, 1.0).sum_log
    ex = exact_pll(coupled3, child, 1.0).sum_log
    assert abs(nm - ex) > 1e-6


def test_nomask_template_amortized(pssm6, rng):
    tmpl = random_sequence(rng, 6)
    pssm6.ledger.reset()
    log_rows = unmasked_log_rows(pssm6, tmpl, 1.0)
    children = [
        tmpl[:k] + r + tmpl[k + 1:]
        for k in range(6)
        for r in ALPHABET
        if r != tmpl[k]
    ]
    scores = [approx_pll_nomask_template(log_rows, tmpl, c) for c in children]
    assert pssm6.ledger.snapshot()["logical"] == 1
    assert len(scores) == 19 * 6
    # template scored against its own rows equals the no-mask template score
    own = approx_pll_nomask_template(log_rows, tmpl, tmpl)
    assert own.sum_log == pytest.approx(float(log_rows[np.arange(6), [AA_INDEX[c] for c in tmpl]].sum()))


def test_equivalence_collapse_on_pssm(pssm6, rng):
    tmpl = random_sequence(rng, 6)
    root = CandidateSequence.from_seed("s", tmpl)
    results = {
        m: dict(
            (c.sequence, s.sum_log)
            for c, s in score_neighborhood(pssm6, root, 1.0, m)
        )
        for m in ("exact", "double-mask", "wt", "nomask-child", "nomask-template")
    }
    base = results["exact"]
    for m, scores in results.items():
        assert scores.keys() == base.keys()
        for seq, v in scores.items():
            assert v == pytest.approx(base[seq], abs=1e-9), m


def test_expand_neighborhood_combinatorics(rng):
    prov = PssmProvider.random(10, rng_seed=4)
    tmpl = random_sequence(rng, 10)
    root = CandidateSequence.from_seed("s", tmpl)
    profile = build_profile(prov, tmpl, 1.0)
    entries = expand_neighborhood(profile, root, PositionMask.full(10))
    assert len(entries) == 190
    # best residue per position maximizes the profile row
    by_pos = {}
    for cand, score in entries:
        (k, _, r) = next(iter(cand.edits))
        by_pos.setdefault(k, []).append((score.sum_log, r))
    for k, scored in by_pos.items():
        best_r = max(scored)[1]
        row = profile.rows[k].copy()
        row[AA_INDEX[tmpl[k]]] = -1  # template residue is not a child
        assert best_r == ALPHABET[int(np.argmax(row))]


def test_expand_excludes_edited_positions(pssm6, rng):
    from seqbeam.seqcore import apply_edit

    tmpl = random_sequence(rng, 6)
    root = CandidateSequence.from_seed("s", tmpl)
    cand = apply_edit(root, 2, "A" if tmpl[2] != "A" else "C")
    profile = build_profile(pssm6, cand.sequence, 1.0)
    entries = expand_neighborhood(profile, cand, PositionMask.full(6))
    assert len(entries) == 19 * 5
    assert all(2 not in c.edited_positions() - {2} or True for c, _ in entries)
    assert all(next(iter(c.edits - cand.edits))[0] != 2 for c, _ in entries)


def test_cost_ladder_counts():
    L = 12
    prov = PssmProvider.random(L, rng_seed=8)
    prov._memo = None  # count raw calls; memoization is an optimization only
    tmpl = "".join(np.random.default_rng(0).choice(list(ALPHABET), L))
    root = CandidateSequence.from_seed("s", tmpl)
    expected = {
        "wt": L,
        "double-mask": L + L * (L - 1),
        "nomask-child": 19 * L,
        "nomask-template": 1,
        "exact": L + 19 * L * L,
    }
    for method, count in expected.items():
        prov.ledger.reset()
        score_neighborhood(prov, root, 1.0, method)
        assert prov.ledger.snapshot()["logical"] == count, method


def test_tau_preserves_within_position_ordering(coupled3):
    tmpl = "ACE"
    k = 1
    orders = []
    for tau in (0.5, 1.0, 2.5):
        profile = build_profile(coupled3, tmpl, tau)
        scored = [
            (approx_pll_wt(profile, tmpl[:k] + r + tmpl[k + 1:]).sum_log, r)
            for r in ALPHABET
            if r != tmpl[k]
        ]
        orders.append([r for _, r in sorted(scored, reverse=True)])
    assert orders[0] == orders[1] == orders[2]
