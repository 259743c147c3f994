import itertools
import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixbalance.classifiers import ClassifierSpec
from mixbalance.ga import (FitnessContext, GaConfig, GaResult, MixRatio, assemble_balanced_set,
                           decode_genotype, evaluate_fitness, largest_remainder, mutate,
                           next_generation, ratio_key, roulette_select, run_ga,
                           single_point_crossover, str_to_bits)
from mixbalance.generators import SyntheticPool

from conftest import make_dataset

ALL_GENOTYPES = np.array(list(itertools.product((0, 1), repeat=12)), dtype=np.int8)
bits12 = st.lists(st.integers(0, 1), min_size=12, max_size=12)


def oracle_ratio(bits):
    """Exact rational decode, written independently of the package."""
    w = [int("".join(map(str, bits[i:i + 4])), 2) for i in (0, 4, 8)]
    if sum(w) == 0:
        return (Fraction(1, 3),) * 3
    return tuple(Fraction(x, sum(w)) for x in w)


# --- decoding ---------------------------------------------------------------

def test_decode_examples():
    assert decode_genotype(str_to_bits("0110 0000 0001")).r == pytest.approx((6 / 7, 0, 1 / 7))
    assert decode_genotype(np.zeros(12)).r == (1 / 3, 1 / 3, 1 / 3)
    assert decode_genotype(str_to_bits("0001 0001 0001")).r == (1 / 3, 1 / 3, 1 / 3)


@pytest.mark.parametrize("weights,target", [
    ((7, 0, 10), (0.412, 0.0, 0.588)),
    ((6, 0, 1), (0.857, 0.0, 0.143)),
    ((6, 2, 7), (0.400, 0.133, 0.467)),
    ((13, 8, 2), (0.565, 0.348, 0.087)),
    ((1, 1, 4), (0.167, 0.167, 0.667)),
])
def test_published_optimal_ratios_are_representable(weights, target):
    bits = "".join(format(w, "04b") for w in weights)
    r = decode_genotype(str_to_bits(bits))
    assert [round(x, 3) for x in r] == list(target)


def test_every_genotype_decodes_onto_simplex_exactly():
    keys = set()
    for g in ALL_GENOTYPES:
        r = decode_genotype(g)
        assert abs(sum(r) - 1) <= 1e-12 and min(r) >= 0
        assert [Fraction(x) for x in r] == pytest.approx([float(q) for q in oracle_ratio(g.tolist())],
                                                         abs=1e-15)
        keys.add(oracle_ratio(g.tolist()))
    assert len(keys) == 3313
    assert len({ratio_key(g) for g in ALL_GENOTYPES}) == 3313


def test_wrong_length_rejected():
    with pytest.raises(ValueError):
        decode_genotype(np.zeros(11))
    with pytest.raises(ValueError):
        decode_genotype(np.full(12, 2))


@given(bits12, bits12)
def test_equal_keys_mean_equal_ratios(a, b):
    assert (ratio_key(a) == ratio_key(b)) == (oracle_ratio(a) == oracle_ratio(b))
    if ratio_key(a) == ratio_key(b):
        assert decode_genotype(a).r == decode_genotype(b).r


def test_mix_ratio_validation():
    with pytest.raises(ValueError):
        MixRatio((0.5, 0.5, 0.5))
    with pytest.raises(ValueError):
        MixRatio((1.2, -0.2, 0.0))


# --- apportionment and assembly ---------------------------------------------

def test_largest_remainder_examples():
    assert largest_remainder((0.5, 0.3, 0.2), 100).tolist() == [50, 30, 20]
    assert largest_remainder((1, 0, 0), 17228).tolist() == [17228, 0, 0]
    thirds = largest_remainder((1 / 3, 1 / 3, 1 / 3), 10)
    assert thirds.sum() == 10 and set(thirds.tolist()) <= {3, 4}
    assert thirds.tolist() == [4, 3, 3]


@given(st.lists(st.integers(0, 15), min_size=3, max_size=3), st.integers(1, 5000))
def test_largest_remainder_properties(w, total):
    r = MixRatio.from_weights(w)
    counts = largest_remainder(r, total)
    assert counts.sum() == total and (counts >= 0).all()
    quotas = np.array(r.r) * total
    assert (np.abs(counts - quotas) < 1).all()


def real_train(n_pos, n_neg, seed=0):
    rng = np.random.default_rng(seed)
    rows = rng.uniform(-1, 1, size=(n_pos + n_neg, 11))
    return make_dataset(rows, np.r_[np.ones(n_pos), np.zeros(n_neg)])


def pools_of(*sizes, seed=99):
    rng = np.random.default_rng(seed)
    return [SyntheticPool(rng.uniform(-1, 1, (n, 11)), "external") for n in sizes]


def test_assemble_counts_and_balance():
    train = real_train(10, 110)
    out = assemble_balanced_set(train, pools_of(200, 200, 200), MixRatio((0.5, 0.3, 0.2)), seed=0)
    assert out.n_positive == out.n_negative == 110
    synth = out.ids < 0
    assert synth.sum() == 100
    assert len(set(out.ids.tolist())) == len(out)
    np.testing.assert_array_equal(out.rows[:len(train)], train.rows)


def test_assemble_draws_from_the_right_pools():
    train = real_train(10, 110)
    pools = [SyntheticPool(np.full((200, 11), v), "external") for v in (-0.5, 0.0, 0.5)]
    out = assemble_balanced_set(train, pools, MixRatio((0.5, 0.3, 0.2)), seed=1)
    synth = out.rows[out.ids < 0, 0]
    assert [(synth == v).sum() for v in (-0.5, 0.0, 0.5)] == [50, 30, 20]


def test_assemble_training_composition_at_full_scale():
    train = real_train(172, 17400)
    out = assemble_balanced_set(train, pools_of(17228, 5, 5), MixRatio((1, 0, 0)), seed=0)
    assert (out.n_positive, out.n_negative) == (17400, 17400)


def test_assemble_small_pool_uses_replacement_with_note():
    notes = []
    out = assemble_balanced_set(real_train(5, 25), pools_of(3, 3, 3), MixRatio((1, 0, 0)), 0, notes)
    assert out.n_positive == 25 and notes and "replacement" in notes[0]


def test_assemble_errors():
    with pytest.raises(ValueError, match="positives"):
        assemble_balanced_set(real_train(20, 20), pools_of(5, 5, 5), MixRatio((1, 0, 0)), 0)
    empty = [SyntheticPool(np.zeros((0, 11)), "external")] + pools_of(5, 5)
    with pytest.raises(ValueError, match="empty"):
        assemble_balanced_set(real_train(5, 20), empty, MixRatio((0.5, 0.5, 0)), 0)
    # a zero share never touches an empty pool
    assemble_balanced_set(real_train(5, 20), empty, MixRatio((0, 0.5, 0.5)), 0)


def test_assemble_deterministic():
    args = (real_train(5, 60), pools_of(100, 100, 100), MixRatio((0.2, 0.3, 0.5)))
    a = assemble_balanced_set(*args, seed=4)
    b = assemble_balanced_set(*args, seed=4)
    np.testing.assert_array_equal(a.rows, b.rows)


# --- fitness ----------------------------------------------------------------

class ConstantModel:
    def __init__(self, label):
        self.label = label

    def predict(self, rows):
        return np.full(len(rows), self.label)


class LookupModel:
    """Reads true labels straight from a table of real rows."""

    def __init__(self, table):
        self.table = table

    def predict(self, rows):
        return np.array([self.table[r.tobytes()] for r in np.asarray(rows)])


def context(classifier, seed=0, **kw):
    train = real_train(20, 200, seed=seed)
    return FitnessContext(train, pools_of(300, 300, 300), classifier, seed=seed, **kw), train


def test_majority_classifier_scores_zero():
    ctx, _ = context(lambda ds, seed: ConstantModel(0))
    assert ctx(np.ones(12, dtype=np.int8)) == 0.0


def test_label_reading_classifier_scores_one():
    train = real_train(20, 200)
    table = {r.tobytes(): int(l) for r, l in zip(train.rows, train.labels)}
    ctx = FitnessContext(train, pools_of(300, 300, 300), lambda ds, s: LookupModel(table))
    assert evaluate_fitness(np.ones(12, dtype=np.int8), ctx) == 1.0


def test_equivalent_genotypes_train_once():
    ctx, _ = context(ClassifierSpec("gaussian_nb"))
    a = ctx(str_to_bits("0001 0010 0011"))
    b = ctx(str_to_bits("0010 0100 0110"))
    assert a == b and ctx.trainings == 1 and ctx.cache_hits == 1


def test_cached_value_equals_fresh_computation():
    g = str_to_bits("0101 0011 1000")
    ctx1, _ = context(ClassifierSpec("decision_tree"))
    for other in ALL_GENOTYPES[::97]:
        ctx1(other)
    ctx2, _ = context(ClassifierSpec("decision_tree"))
    assert ctx1(g) == ctx2(g)


def test_validation_rows_are_real_and_never_synthetic():
    seen = []

    def spy(ds, seed):
        seen.append(ds)
        return ConstantModel(1)

    ctx, train = context(spy)
    ctx(str_to_bits("0001 0001 0001"))
    assert (ctx.validation.ids >= 0).all()
    assert not set(ctx.validation.ids) & set(ctx.inner_train.ids)
    assert set(ctx.validation.ids) <= set(train.ids)
    fitted = seen[0]
    assert not set(ctx.validation.ids) & set(fitted.ids[fitted.ids >= 0])
    pool_rows = {r.tobytes() for p in ctx.pools for r in p.rows}
    assert not any(r.tobytes() in pool_rows for r in ctx.validation.rows)


def test_default_validation_split_is_a_quarter():
    ctx, train = context(ClassifierSpec("gaussian_nb"))
    assert (ctx.validation.n_positive, ctx.validation.n_negative) == (5, 50)


def test_failed_fit_scores_zero_with_note():
    def broken(ds, seed):
        raise RuntimeError("boom")

    ctx, _ = context(broken)
    assert ctx(np.ones(12, dtype=np.int8)) == 0.0
    assert ctx.errors and "boom" in ctx.errors[0]


def test_fold_average():
    train = real_train(20, 200)
    pools = pools_of(300, 300, 300)
    halves = [(train, pools, train.subset(np.arange(0, 220, 2))),
              (train, pools, train.subset(np.arange(1, 220, 2)))]
    table = {r.tobytes(): int(l) for r, l in zip(train.rows, train.labels)}
    calls = iter([lambda rows: LookupModel(table).predict(rows), lambda rows: np.zeros(len(rows))])

    class Model:
        def __init__(self):
            self.predict = next(calls)

    ctx = FitnessContext.from_folds(halves, lambda ds, s: Model())
    assert ctx(np.ones(12, dtype=np.int8)) == 0.5


# --- operators --------------------------------------------------------------

def test_roulette_frequency():
    picks = roulette_select(np.array([1.0, 3.0]), 10_000, np.random.default_rng(0))
    assert abs((picks == 1).mean() - 0.75) <= 0.03


def test_roulette_all_zero_falls_back_to_uniform():
    picks = roulette_select(np.zeros(4), 8000, np.random.default_rng(1))
    assert np.abs(np.bincount(picks, minlength=4) / 8000 - 0.25).max() < 0.03
    events = []
    next_generation(ALL_GENOTYPES[:10].copy(), np.zeros(10), GaConfig(population_size=10),
                    np.random.default_rng(0), events)
    assert events and "uniform" in events[0]


def test_crossover_swaps_tails():
    a, b = np.zeros(12, dtype=np.int8), np.ones(12, dtype=np.int8)
    c, d = single_point_crossover(a, b, 5)
    assert c.tolist() == [0] * 5 + [1] * 7 and d.tolist() == [1] * 5 + [0] * 7


def test_mutation_extremes():
    rng = np.random.default_rng(0)
    g = ALL_GENOTYPES[1234]
    assert (mutate(g, 0.0, rng) == g).all()
    assert (mutate(g, 1.0, rng) == 1 - g).all()


def test_mutation_rate():
    rng = np.random.default_rng(2)
    g = np.zeros((20_000, 12), dtype=np.int8)
    assert abs(mutate(g, 0.01, rng).mean() - 0.01) < 0.001


def test_next_generation_keeps_elites_in_position_order():
    pop = ALL_GENOTYPES[[5, 9, 100, 2000]].copy()
    fit = np.array([0.2, 0.9, 0.1, 0.8])
    cfg = GaConfig(population_size=4, elite_count=2)
    new = next_generation(pop, fit, cfg, np.random.default_rng(0))
    assert new.shape == pop.shape
    np.testing.assert_array_equal(new[:2], pop[[1, 3]])


def test_next_generation_all_elite_is_identity():
    pop = ALL_GENOTYPES[:6].copy()
    cfg = GaConfig(population_size=6, elite_count=6)
    new = next_generation(pop, np.arange(6.0), cfg, np.random.default_rng(0))
    np.testing.assert_array_equal(new, pop)


def test_no_variation_keeps_only_selected_parents():
    pop = ALL_GENOTYPES[[3, 700, 1500, 4000]].copy()
    cfg = GaConfig(population_size=4, crossover_probability=0.0, mutation_probability=0.0,
                   elite_count=0)
    new = next_generation(pop, np.array([0.0, 1.0, 0.0, 0.0]), cfg, np.random.default_rng(0))
    assert (new == pop[1]).all()


def test_ga_config_validation():
    GaConfig()
    for bad in ({"population_size": 3}, {"crossover_probability": 1.5},
                {"mutation_probability": -0.1}, {"elite_count": 152}, {"iterations": -1}):
        with pytest.raises(ValueError):
            GaConfig(**bad)


def test_ga_defaults():
    cfg = GaConfig()
    assert (cfg.population_size, cfg.iterations, cfg.crossover_probability,
            cfg.mutation_probability, cfg.elite_count) == (150, 50, 0.8, 0.01, 2)


# --- driver -----------------------------------------------------------------

TARGET = np.array([0.5, 0.3, 0.2])


def landscape(bits):
    return 1.0 - float(np.abs(np.array(decode_genotype(bits).r) - TARGET).max())


def test_run_ga_finds_landscape_optimum():
    res = run_ga(GaConfig(population_size=60, iterations=20, seed=1), landscape)
    assert np.abs(np.array(res.best_ratio) - TARGET).max() <= 0.07
    assert len(res.history) == 20 and res.evaluations == 60 * 21
    best = [h["best"] for h in res.history]
    assert all(b2 >= b1 for b1, b2 in zip(best, best[1:]))
    assert res.best_fitness == landscape(str_to_bits(res.best_genotype))


def test_run_ga_deterministic_and_serializable():
    cfg = GaConfig(population_size=20, iterations=5, seed=3)
    a, b = run_ga(cfg, landscape), run_ga(cfg, landscape)
    assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())
    back = GaResult.from_dict(json.loads(json.dumps(a.to_dict())))
    assert back == a and back.ratio.r == tuple(a.best_ratio)


def test_zero_iterations_scores_initial_population():
    res = run_ga(GaConfig(population_size=10, iterations=0), landscape)
    assert res.history == [] and res.evaluations == 10


def test_parallel_matches_sequential():
    cfg = GaConfig(population_size=16, iterations=4, seed=7)
    seq_ctx, _ = context(ClassifierSpec("decision_tree"), seed=2)
    par_ctx, _ = context(ClassifierSpec("decision_tree"), seed=2)
    seq = run_ga(cfg, seq_ctx, workers=1)
    par = run_ga(cfg, par_ctx, workers=4)
    assert seq.history == par.history
    assert seq.best_genotype == par.best_genotype
    assert seq.trainings == par.trainings


def test_progress_lines_go_to_stderr(capsys):
    run_ga(GaConfig(population_size=4, iterations=3), landscape, progress=True)
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 3 and err[0].startswith("generation 1 best")


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 4))
def test_history_monotone_with_elitism(seed, elite):
    res = run_ga(GaConfig(population_size=12, iterations=6, elite_count=elite, seed=seed),
                 landscape)
    best = [h["best"] for h in res.history]
    assert all(b2 >= b1 for b1, b2 in zip(best, best[1:]))
