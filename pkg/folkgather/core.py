"""Pipeline orchestration: ingestion, snowball sampling and learning strategies."""

import logging

from folkgather.errors import InputError
from folkgather.folksonomy import assemble_folksonomy
from folkgather.formats import get_format, guess_format
from folkgather.model import stem
from folkgather.rap import AssignmentMatrix, RapProblem, RapResult, run
from folkgather.similarity import (
    EXPERT_BOOSTED, UNIFORM_MEAN, PreferenceStrategy, assign_preferences, build_similarity,
)

logger = logging.getLogger(__name__)

# Strategy -> (add every expert sapling, preference mode)
STRATEGY_SETTINGS = {
    'm1': (False, UNIFORM_MEAN),
    'm2': (True, UNIFORM_MEAN),
    'm3': (True, EXPERT_BOOSTED),
}


def ingest_saplings(path, format_name=None):
    """Read a corpus file into a Corpus (format guessed from the suffix when not given)."""
    return get_format(format_name or guess_format(path)).read(path)


class SnowballSample:
    """Saplings reached from a seed term, with the round each was acquired in."""

    def __init__(self, seed):
        self.seed = seed
        self.saplings = []      # (sapling_id, round), in acquisition order
        self.rounds = 0

    @property
    def sapling_ids(self):
        return [sid for sid, _ in self.saplings]

    def __len__(self):
        return len(self.saplings)

    def __repr__(self):
        return f"SnowballSample(seed={self.seed!r}, saplings={len(self)}, rounds={self.rounds})"


def snowball(corpus, seed, max_rounds=5):
    """Breadth-first retrieval of saplings whose root names match the frontier.

    Round 1 takes saplings rooted at the seed; each later round takes saplings
    rooted at a direct child name of the previous round's roots.
    """
    seed = stem(seed)
    sample = SnowballSample(seed)
    included = set()
    seen_names = set()
    frontier = {seed}
    for round_no in range(1, max_rounds + 1):
        added = []
        for name in sorted(frontier):
            for sapling in corpus.roots_named(name):
                if sapling.sapling_id not in included:
                    included.add(sapling.sapling_id)
                    added.append(sapling)
                    sample.saplings.append((sapling.sapling_id, round_no))
        seen_names |= frontier
        if not added:
            break
        sample.rounds = round_no
        frontier = {sapling.nodes[c].name
                    for sapling in added for c in sapling.root_node.children} - seen_names
        if not frontier:
            break
    logger.info(f"Snowball '{seed}': {len(sample)} sapling(s) in {sample.rounds} round(s)")
    return sample


def strategy_saplings(corpus, sample, strategy, expert_users):
    """Sapling ids a strategy learns from: the sample, plus all expert saplings for m2/m3."""
    if strategy not in STRATEGY_SETTINGS:
        raise InputError(f"unknown strategy '{strategy}'")
    ids = list(sample.sapling_ids)
    add_experts, _ = STRATEGY_SETTINGS[strategy]
    if add_experts:
        chosen = set(ids)
        for user_id in sorted(expert_users):
            if user_id not in corpus.users:
                continue
            for sapling_id in corpus.users[user_id].saplings:
                if sapling_id not in chosen:
                    chosen.add(sapling_id)
                    ids.append(sapling_id)
    return ids


def expert_node_ids(corpus, sapling_ids, expert_users):
    experts = set(expert_users)
    return {node.node_id for sid in sapling_ids for node in corpus.saplings[sid].nodes.values()
            if node.owner in experts}


def percent_expert(tree, expert_users):
    """Share of the tree's nodes contributed by experts alone, in percent.

    A node merged from expert and novice members is not counted.
    """
    if tree is None:
        return 0.0
    nodes = list(tree.walk())
    experts = set(expert_users)
    owned = sum(1 for n in nodes if n.owners() and n.owners() <= experts)
    return 100.0 * owned / len(nodes)


class StrategyOutcome:
    """Everything one strategy run produced."""

    def __init__(self, seed, strategy, sapling_ids, matrix, result, folksonomy, pct_expert):
        self.seed = seed
        self.strategy = strategy
        self.sapling_ids = sapling_ids
        self.matrix = matrix
        self.result = result
        self.folksonomy = folksonomy
        self.pct_expert = pct_expert

    @property
    def tree(self):
        return self.folksonomy.popular

    @property
    def converged(self):
        return self.result.converged

    def __repr__(self):
        depth = self.tree.depth() if self.tree else 0
        return (f"StrategyOutcome(seed={self.seed!r}, strategy={self.strategy}, "
                f"depth={depth}, pct_expert={self.pct_expert:.2f})")


def _singletons(matrix):
    """Forest of the original saplings when no merge is possible."""
    return AssignmentMatrix(list(range(matrix.n)), matrix.nodes)


def run_strategy(corpus, seed, strategy, expert_users, config, sample=None,
                 multiplier=None, preference_transform=None):
    """Learn a folksonomy for seed with strategy m1, m2 or m3.

    `multiplier` overrides config.expert_multiplier; `preference_transform`
    (matrix -> matrix) is applied after preferences are assigned.
    """
    seed = stem(seed)
    if sample is None:
        sample = snowball(corpus, seed, config.max_rounds)
    if not len(sample):
        raise InputError(f"seed '{seed}' matches no sapling root")
    sapling_ids = strategy_saplings(corpus, sample, strategy, expert_users)
    nodes = [node for sid in sapling_ids for node in corpus.saplings[sid].nodes.values()]

    matrix = build_similarity(nodes, k=config.top_k, divisor=config.divisor)
    _, mode = STRATEGY_SETTINGS[strategy]
    factor = config.expert_multiplier if multiplier is None else multiplier
    problem_matrix = matrix
    if matrix.nnz:
        problem_matrix = assign_preferences(
            matrix, PreferenceStrategy(mode, factor),
            expert_node_ids(corpus, sapling_ids, expert_users))
        if preference_transform is not None:
            problem_matrix = preference_transform(problem_matrix)
    problem = RapProblem(problem_matrix, f_mode=config.f_constraint)

    if matrix.nnz:
        result = run(problem, damping=config.damping, max_sweeps=config.max_sweeps,
                     stable_window=config.stable_window, threads=config.threads,
                     polish_result=config.polish)
    else:
        logger.warning(f"No merge candidates for '{seed}' ({strategy}); keeping saplings as-is")
        assignment = _singletons(matrix)
        result = RapResult(assignment, True, 0, config.damping, [], 0.0)

    folksonomy = assemble_folksonomy(result.assignment, problem, seed=seed, strategy=strategy)
    pct = percent_expert(folksonomy.popular, expert_users)
    outcome = StrategyOutcome(seed, strategy, sapling_ids, problem_matrix, result, folksonomy, pct)
    logger.info(f"{strategy.upper()} '{seed}': {len(sapling_ids)} sapling(s), "
                f"%EXP={pct:.2f}, converged={result.converged}")
    return outcome
