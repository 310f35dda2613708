"""Resource-allocation framework around the nested baseline.

The run starts as a plain nested BLEA while evaluated solutions accumulate in
a pool.  Once the pool can supply enough training pairs, a contrastive
ranking network is trained on it and the loop switches permanently to the
allocated phase: each generation, offspring are scored against a fixed zero
reference and only the top half receive a lower-level search, with one
optional resampling when the offspring look worse than the parents.  The
network is retrained every time the pool refills.
"""

import math

import numpy as np

from .errors import ContractViolationError, TrainingDivergenceError
from .ledger import EvalLedger
from .nested import (
    BestTracker,
    check_upper_termination,
    environmental_selection,
    init_upper_population,
    resolve_individual,
    upper_variation,
)
from .ranknet import (
    Normalizer,
    RankNetParams,
    model_accuracy,
    pdp,
    pool_trigger_size,
    ranking_scores,
    scale_init_to_batch,
    train,
)

CR_MODES = ("cr", "cr_no_net", "cr_no_resample")


class SolutionPool:
    """Evaluated upper-level individuals pending use as training data."""

    def __init__(self, capacity_trigger):
        self.entries = []
        self.capacity_trigger = capacity_trigger

    def extend(self, individuals):
        for ind in individuals:
            ind.require_evaluated()
        self.entries.extend(individuals)

    def clear(self):
        self.entries = []

    def __len__(self):
        return len(self.entries)

    @property
    def full(self):
        return len(self.entries) >= self.capacity_trigger


def maybe_retrain(pool: SolutionPool, params: RankNetParams, normalizer, net_cfg, rng):
    """Retrain on a full pool; otherwise identity.

    Returns ``(params, accuracy_entry)`` where ``accuracy_entry`` is the old
    network's pairwise accuracy on the fresh dataset (None when the pool was
    not full, the old network was untrained, or every pair tied).  The pool is
    cleared after a training event; on divergence the previous network is
    kept and the pool is still cleared.
    """
    if not pool.full:
        return params, None
    dataset = pdp(pool.entries, normalizer)
    acc = model_accuracy(params, dataset) if params.generation_id > 0 else None
    if net_cfg.init_mode == "fresh":
        base = RankNetParams.init(params.m, params.n, params.q, rng,
                                  psi_relu=params.psi_relu, generation_id=params.generation_id)
        scale_init_to_batch(base, dataset.xa, rng)
    else:
        base = params
    try:
        params = train(base, dataset, epochs=net_cfg.epochs, lr=net_cfg.lr)
    except TrainingDivergenceError:
        pass  # keep the previous network generation
    pool.clear()
    return params, acc


def pgr(params, P_u, variation, N_u, allow_resample=True):
    """Population generation with ranking and resampling.

    ``variation`` produces a list of offspring x_u vectors together with their
    normalized form.  Returns the ceil(N_u / 2) top-scoring offspring as
    ``(x_u, score)`` pairs plus a flag telling whether resampling fired.
    Parents must carry scores from the current network generation.
    """
    parent_scores = [ind.rank_score for ind in P_u]
    if any(s is None for s in parent_scores):
        raise ContractViolationError("pgr requires parents scored by the current network")
    k = math.ceil(N_u / 2)

    offspring, offspring_norm = variation()
    scores = ranking_scores(params, offspring_norm)
    order = sorted(range(len(offspring)), key=lambda i: -scores[i])
    kept = [(offspring[i], float(scores[i])) for i in order[:k]]

    resampled = False
    if allow_resample and max(s for _, s in kept) < max(parent_scores):
        resampled = True
        extra, extra_norm = variation()
        extra_scores = ranking_scores(params, extra_norm)
        merged = kept + [(extra[i], float(extra_scores[i])) for i in range(len(extra))]
        order = sorted(range(len(merged)), key=lambda i: -merged[i][1])
        kept = [merged[i] for i in order[:k]]
    return kept, resampled


def _refresh_scores(params, P_u, normalizer):
    scores = ranking_scores(params, np.array([normalizer(ind.x_u) for ind in P_u]))
    for ind, s in zip(P_u, scores):
        ind.rank_score = float(s)
        ind.net_generation = params.generation_id


def run_cr_blea(p, cfg, seed):
    """Run the resource-allocated bilevel EA and return a RunRecord.

    ``cfg.mode`` selects the full framework ("cr") or one of its ablations:
    "cr_no_net" replaces ranking with a uniformly random task choice and
    "cr_no_resample" disables the resampling step.
    """
    from .stats import build_run_record

    cfg = cfg.resolved(p)
    if cfg.mode not in CR_MODES:
        raise ContractViolationError(f"run_cr_blea called with mode {cfg.mode!r}")
    rule = cfg.termination
    rng = np.random.default_rng(seed)
    net_rng = np.random.default_rng(rng.integers(2**63))
    ledger = EvalLedger()
    tracker = BestTracker()
    normalizer = Normalizer(p.upper_bounds)

    q = cfg.net.width_for(p.m, p.n)
    params = RankNetParams.init(p.m, p.n, q, net_rng, psi_relu=cfg.net.psi_relu)
    pool = SolutionPool(pool_trigger_size(params))

    P_u = init_upper_population(p, cfg, ledger, tracker, rng)
    N_u = cfg.upper.pop_size
    pool.extend(P_u)
    ledger.checkpoint(tracker.best.F)

    allocated = False
    trainings_done = 0
    model_acc_history = []
    resamplings = 0
    stop_reason = None

    def variation():
        offspring = upper_variation(P_u, cfg.upper, p.upper_bounds, rng, count=N_u)
        return offspring, np.array([normalizer(x) for x in offspring])

    while True:
        stop_reason = check_upper_termination(
            ledger, tracker.history, rule, p.optimum, tracker.best.feasible
        )
        if stop_reason:
            break

        if not pool.full and not allocated:
            # warm-up: typical nested generation, pooling all evaluated offspring
            offspring = []
            for x_u in upper_variation(P_u, cfg.upper, p.upper_bounds, rng):
                if ledger.fes_u >= rule.fes_u_max:
                    break
                ind = resolve_individual(p, x_u, cfg, ledger, rng)
                tracker.observe(ind)
                offspring.append(ind)
            pool.extend(offspring)
            if offspring:
                P_u = environmental_selection(P_u + offspring, N_u)
            ledger.checkpoint(tracker.best.F)
            continue

        if cfg.mode == "cr_no_net":
            if pool.full:
                pool.clear()
            candidates, _ = variation()
            k = math.ceil(N_u / 2)
            chosen = rng.choice(len(candidates), size=k, replace=False)
            selected = [(candidates[i], None) for i in chosen]
        else:
            if pool.full:
                old_gen = params.generation_id
                params, acc = maybe_retrain(pool, params, normalizer, cfg.net, net_rng)
                if acc is not None:
                    model_acc_history.append(acc)
                if params.generation_id > old_gen:
                    trainings_done += 1
                _refresh_scores(params, P_u, normalizer)
            selected, resampled = pgr(
                params, P_u, variation, N_u,
                allow_resample=(cfg.mode != "cr_no_resample"),
            )
            resamplings += int(resampled)

        evaluated = []
        for x_u, score in selected:
            if ledger.fes_u >= rule.fes_u_max:
                break
            ind = resolve_individual(p, x_u, cfg, ledger, rng)
            ind.rank_score = score
            ind.net_generation = params.generation_id
            tracker.observe(ind)
            evaluated.append(ind)
        allocated = True
        pool.extend(evaluated)
        if evaluated:
            P_u = environmental_selection(P_u + evaluated, N_u)
        ledger.checkpoint(tracker.best.F)

    return build_run_record(
        p, cfg, seed, ledger, tracker,
        stop_reason=stop_reason,
        model_acc_history=model_acc_history,
        trainings_done=trainings_done,
        resamplings=resamplings,
        pool_trigger=pool.capacity_trigger,
    )
