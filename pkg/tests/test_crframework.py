"""Resource-allocation framework: pool, retraining, gating, full runs."""

import math

import numpy as np
import pytest

import crblea.crframework as crf
from crblea import (
    ContractViolationError,
    HarnessConfig,
    NetConfig,
    Normalizer,
    OptimizerConfig,
    RankNetParams,
    SolutionPool,
    TerminationRule,
    UpperIndividual,
    maybe_retrain,
    pgr,
    run_cr_blea,
    run_nested_blea,
)
from crblea.problems import get_problem

TOY = get_problem("tq")
IDENTITY = Normalizer(np.tile([0.0, 1.0], (2, 1)))


def small_config(mode="cr", **kwargs):
    defaults = dict(
        problem="tq",
        mode=mode,
        upper=OptimizerConfig(pop_size=6),
        termination=TerminationRule(fes_u_max=150, fes_u_var_window=40),
        net=NetConfig(q=2),
    )
    defaults.update(kwargs)
    return HarnessConfig(**defaults)


def evaluated(x, F):
    return UpperIndividual(x_u=np.asarray(x, dtype=float), x_l_star=np.zeros(2),
                           F=float(F), f_star=0.0)


class TestSolutionPool:
    def test_extend_requires_evaluated(self):
        pool = SolutionPool(capacity_trigger=3)
        with pytest.raises(ContractViolationError):
            pool.extend([UpperIndividual(x_u=np.zeros(2))])

    def test_full_and_clear(self):
        pool = SolutionPool(capacity_trigger=2)
        pool.extend([evaluated([0, 0], 1.0)])
        assert not pool.full
        pool.extend([evaluated([1, 1], 2.0)])
        assert pool.full and len(pool) == 2
        pool.clear()
        assert len(pool) == 0


class TestMaybeRetrain:
    def setup_method(self):
        self.rng = np.random.default_rng(0)
        self.params = RankNetParams.init(2, 2, 2, self.rng)
        self.net_cfg = NetConfig(q=2, epochs=30)

    def fill(self, pool, n):
        X = self.rng.uniform(0, 1, (n, 2))
        pool.extend([evaluated(x, float(x[0])) for x in X])

    def test_identity_below_trigger(self):
        pool = SolutionPool(capacity_trigger=10)
        self.fill(pool, 9)
        params, acc = maybe_retrain(pool, self.params, IDENTITY, self.net_cfg, self.rng)
        assert params is self.params and acc is None
        assert len(pool) == 9

    def test_first_training_clears_pool_no_accuracy_entry(self):
        pool = SolutionPool(capacity_trigger=8)
        self.fill(pool, 8)
        params, acc = maybe_retrain(pool, self.params, IDENTITY, self.net_cfg, self.rng)
        assert acc is None  # nothing trained yet, so nothing to test
        assert params.generation_id == 1
        assert len(pool) == 0

    def test_second_refill_reports_old_model_accuracy(self):
        pool = SolutionPool(capacity_trigger=8)
        self.fill(pool, 8)
        params, _ = maybe_retrain(pool, self.params, IDENTITY, self.net_cfg, self.rng)
        self.fill(pool, 8)
        params2, acc = maybe_retrain(pool, params, IDENTITY, self.net_cfg, self.rng)
        assert params2.generation_id == 2
        assert acc is not None and 0.0 <= acc <= 1.0


class FixedScores:
    """Deterministic stand-in for the network scoring used by pgr."""

    def __init__(self, mapping):
        self.mapping = mapping  # x[0] value -> score

    def __call__(self, params, X):
        return np.array([self.mapping[round(float(x[0]), 6)] for x in X])


def make_parents(scores):
    out = []
    for i, s in enumerate(scores):
        ind = evaluated([i, i], float(i))
        ind.rank_score = s
        out.append(ind)
    return out


class TestPgr:
    def variation_factory(self, batches):
        batches = iter(batches)

        def variation():
            xs = next(batches)
            X = np.array([[x, x] for x in xs], dtype=float)
            return list(X), X

        return variation

    def test_returns_ceil_half(self, monkeypatch):
        scores = {float(i): float(i) for i in range(10)}
        monkeypatch.setattr(crf, "ranking_scores", FixedScores(scores))
        parents = make_parents([0.1] * 5)
        variation = self.variation_factory([[0.0, 1.0, 2.0, 3.0, 4.0]])
        kept, resampled = pgr(None, parents, variation, N_u=5)
        assert len(kept) == math.ceil(5 / 2) == 3
        assert not resampled
        assert [k[1] for k in kept] == [4.0, 3.0, 2.0]

    def test_no_resample_when_offspring_beat_parents(self, monkeypatch):
        monkeypatch.setattr(crf, "ranking_scores",
                            FixedScores({1.0: 0.9, 2.0: 0.2, 3.0: 0.1, 4.0: 0.1}))
        parents = make_parents([0.5, 0.4, 0.3, 0.2])
        variation = self.variation_factory([[1.0, 2.0, 3.0, 4.0]])
        kept, resampled = pgr(None, parents, variation, N_u=4)
        assert not resampled and len(kept) == 2

    def test_single_resample_merges_both_batches(self, monkeypatch):
        monkeypatch.setattr(crf, "ranking_scores", FixedScores({
            1.0: 0.10, 2.0: 0.20, 3.0: 0.05, 4.0: 0.01,  # first batch, all poor
            5.0: 0.90, 6.0: 0.15, 7.0: 0.01, 8.0: 0.02,  # resampled batch
        }))
        parents = make_parents([0.5, 0.4, 0.3, 0.2])
        variation = self.variation_factory([[1.0, 2.0, 3.0, 4.0],
                                            [5.0, 6.0, 7.0, 8.0]])
        kept, resampled = pgr(None, parents, variation, N_u=4)
        assert resampled
        assert [k[1] for k in kept] == [0.90, 0.20]

    def test_resample_disabled(self, monkeypatch):
        monkeypatch.setattr(crf, "ranking_scores",
                            FixedScores({1.0: 0.1, 2.0: 0.05, 3.0: 0.01, 4.0: 0.0}))
        parents = make_parents([0.5, 0.4, 0.3, 0.2])
        variation = self.variation_factory([[1.0, 2.0, 3.0, 4.0]])
        kept, resampled = pgr(None, parents, variation, N_u=4, allow_resample=False)
        assert not resampled and [k[1] for k in kept] == [0.1, 0.05]

    def test_unscored_parents_rejected(self):
        parents = make_parents([0.5, 0.4, None, 0.2])
        with pytest.raises(ContractViolationError):
            pgr(None, parents, lambda: ([], np.zeros((0, 2))), N_u=4)


class TestFullRun:
    def test_mode_validation(self):
        with pytest.raises(ContractViolationError):
            run_cr_blea(TOY, small_config(mode="nested"), seed=0)

    @pytest.mark.parametrize("mode", ["cr", "cr_no_net", "cr_no_resample"])
    def test_modes_complete(self, mode):
        record = run_cr_blea(TOY, small_config(mode=mode), seed=1)
        assert record.mode == mode
        assert record.fes_t == record.fes_u + record.fes_l
        assert record.stop_reason in ("budget", "stagnation", "target")

    def test_seeded_determinism(self):
        r1 = run_cr_blea(TOY, small_config(), seed=5)
        r2 = run_cr_blea(TOY, small_config(), seed=5)
        assert r1.to_dict() == r2.to_dict()

    def test_no_net_mode_never_trains(self):
        record = run_cr_blea(TOY, small_config(mode="cr_no_net"), seed=2)
        assert record.trainings_done == 0
        assert record.model_acc_history == []

    def test_no_resample_mode_never_resamples(self):
        record = run_cr_blea(TOY, small_config(mode="cr_no_resample"), seed=2)
        assert record.resamplings == 0

    def test_trainings_recorded(self):
        record = run_cr_blea(TOY, small_config(), seed=3)
        assert record.trainings_done >= 1
        assert record.pool_trigger >= 2
        # the old network is scored once per retraining after the first
        assert len(record.model_acc_history) <= max(0, record.trainings_done - 1)


def capped_problem_and_config(n_u=6):
    """A setup whose lower-level tasks always run to the exact FE cap.

    The lower stagnation window never fires (epsilon is tiny and the
    landscape is nondegenerate), so every task costs exactly fes_l_max and
    per-generation lower-FE spending is directly observable in the trace.
    """
    p = get_problem("tq")
    rule = TerminationRule(
        fes_u_max=20 * n_u,
        fes_u_var_window=10**6,  # never stagnates within the budget
        upper_var_eps=1e-300,
        fes_l_max=40,
        lower_var_eps=1e-300,
        target_acc=1e-300,
    )
    cfg = HarnessConfig(problem="tq", mode="cr",
                        upper=OptimizerConfig(pop_size=n_u),
                        termination=rule, net=NetConfig(q=2, epochs=20))
    return p, cfg


def test_lower_fe_cap_halves_after_transition():
    n_u = 6
    p, cfg = capped_problem_and_config(n_u)
    record = run_cr_blea(p, cfg, seed=0)
    assert record.trainings_done >= 1
    deltas = [b[0] - a[0] for a, b in zip(record.trace, record.trace[1:])]
    # warm-up generation: N_u tasks of exactly 40 lower FEs + N_u upper FEs;
    # allocated generation: N_u/2 tasks -> exactly half the lower-FE spend
    full = n_u * 40 + n_u
    half = (n_u // 2) * 40 + n_u // 2
    assert set(deltas) <= {full, half}
    assert half in deltas
    first_half = deltas.index(half)
    assert all(d == half for d in deltas[first_half:])
