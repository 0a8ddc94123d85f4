"""Relational affinity propagation over a SimilarityMatrix.

Binary affinity propagation on candidate pairs with an extra relational
factor per column that keeps merged nodes' parents in one cluster, so the
clusters assemble into trees.

Messages live on edges: the diagonal (i, i) plus every stored similarity
entry, ordered by row then column. A sweep reads only the previous
sweep's messages. Row reductions run over contiguous segments; column
reductions run over a fixed column-major permutation, so results do not
depend on how the work is split among threads.
"""

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pandas as pd
from scipy import sparse

from folkgather.errors import InputError, InvariantError

logger = logging.getLogger(__name__)

MODIFIED = 'modified'
ORIGINAL = 'original'
F_MODES = (MODIFIED, ORIGINAL)

# max over an empty set of messages
EMPTY_MAX = -1e6
NET_TOLERANCE = 1e-6
MAX_DAMPING = 0.9
DAMPING_STEP = 0.1
POLISH_PASSES = 50
EXHAUSTIVE_LIMIT = 12
FLAT_EXHAUSTIVE_LIMIT = 16

MESSAGE_NAMES = ('beta', 'eta', 'rho', 'alpha', 'sigma', 'tau')


class RapProblem:
    """Edge layout, similarities and tree structure for one RAP run."""

    def __init__(self, matrix, parents=None, f_mode=MODIFIED):
        if f_mode not in F_MODES:
            raise InputError(f"unknown F-constraint mode '{f_mode}'")
        self.matrix = matrix
        self.f_mode = f_mode
        n = self.n = matrix.n
        if parents is None:
            parents = parents_from_nodes(matrix.nodes, matrix.index)
        self.parents = np.asarray(parents, dtype=int).reshape(n)

        pattern = (matrix.entries + sparse.identity(n, format='csr')).tocsr()
        pattern.sort_indices()
        self.row_ptr = pattern.indptr.astype(np.int64)
        self.cols = pattern.indices.astype(np.int64)
        self.rows = np.repeat(np.arange(n), np.diff(self.row_ptr))
        self.is_diag = self.rows == self.cols

        # stored similarities never sit on the diagonal, so the identity only adds it
        s = pattern.data.astype(float)
        s[self.is_diag] = matrix.preferences[self.rows[self.is_diag]]
        self.s = s
        self.diag = np.flatnonzero(self.is_diag)          # edge index of (i, i), by i

        self.col_order = np.lexsort((self.rows, self.cols))
        counts = np.bincount(self.cols, minlength=n)
        self.col_ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        self.edge_of = {(int(i), int(j)): e for e, (i, j) in enumerate(zip(self.rows, self.cols))}

        self.children = [[] for _ in range(n)]
        for i, p in enumerate(self.parents):
            if p >= 0:
                self.children[p].append(i)

    @property
    def n_edges(self):
        return len(self.s)

    def similarity(self, i, j):
        e = self.edge_of.get((i, j))
        return None if e is None else self.s[e]

    def neighbors(self, i):
        """Candidate exemplars of i other than i, ascending."""
        lo, hi = self.row_ptr[i], self.row_ptr[i + 1]
        return [int(j) for j in self.cols[lo:hi] if j != i]


def parents_from_nodes(nodes, index):
    """Local parent index per node, -1 for roots or parents outside the matrix."""
    return [index.get(node.parent, -1) if node.parent is not None else -1 for node in nodes]


class AssignmentMatrix:
    """c_ij = 1 iff node i selects exemplar j; stored as exemplar_of[i] = j."""

    def __init__(self, exemplar_of, nodes=None):
        self.exemplar_of = np.asarray(exemplar_of, dtype=int)
        self.nodes = nodes

    @property
    def n(self):
        return len(self.exemplar_of)

    def exemplars(self):
        return sorted({int(e) for e in self.exemplar_of})

    def members(self, exemplar):
        return [int(i) for i in np.flatnonzero(self.exemplar_of == exemplar)]

    def clusters(self):
        """Exemplar -> member list (ascending), exemplars ascending."""
        result = {}
        for i, e in enumerate(self.exemplar_of):
            result.setdefault(int(e), []).append(i)
        return dict(sorted(result.items()))

    def copy(self):
        return AssignmentMatrix(self.exemplar_of.copy(), self.nodes)

    def __eq__(self, other):
        return isinstance(other, AssignmentMatrix) and \
            np.array_equal(self.exemplar_of, other.exemplar_of)

    def __repr__(self):
        return f"AssignmentMatrix(n={self.n}, exemplars={len(self.exemplars())})"


class MessageState:
    """The six message arrays over the problem's edges."""

    def __init__(self, n_edges, damping=0.5):
        if not 0 <= damping < 1:
            raise InputError(f"damping must be in [0, 1), got {damping}")
        for name in MESSAGE_NAMES:
            setattr(self, name, np.zeros(n_edges))
        self.damping = damping
        self.sweeps = 0
        self.assignment = None

    def check_finite(self, problem):
        for name in MESSAGE_NAMES:
            values = getattr(self, name)
            bad = np.flatnonzero(~np.isfinite(values))
            if len(bad):
                e = bad[0]
                raise InvariantError(f"non-finite {name} message at "
                                     f"({problem.rows[e]}, {problem.cols[e]})")


# --- validity and objective -------------------------------------------------

def parent_clusters(exemplar_of, parents, exemplar):
    """Exemplars of the parents of a cluster's members."""
    members = np.flatnonzero(exemplar_of == exemplar)
    return {int(exemplar_of[parents[m]]) for m in members if parents[m] >= 0}


def violations(assignment, problem):
    """List human-readable constraint violations (empty when valid)."""
    ex = assignment.exemplar_of
    parents = problem.parents
    found = []
    for i, e in enumerate(ex):
        if ex[e] != e:
            found.append(f"E: node {i} picked {e}, which is not its own exemplar")
        if i != e and (i, int(e)) not in problem.edge_of:
            found.append(f"I: node {i} picked non-candidate {e}")
    if found:
        return found

    cluster_parent = {}
    for e, members in assignment.clusters().items():
        if problem.f_mode == MODIFIED:
            targets = {int(ex[parents[m]]) for m in members if parents[m] >= 0}
            if len(targets) > 1:
                found.append(f"F: cluster {e} has parents in clusters {sorted(targets)}")
        else:
            targets = set()
            anchor = int(ex[parents[e]]) if parents[e] >= 0 else None
            if anchor is not None:
                targets.add(anchor)
            for m in members:
                if m == e or parents[m] < 0:
                    continue
                if anchor is None or ex[parents[m]] != anchor:
                    found.append(f"F: member {m} of cluster {e} has an incompatible parent")
                else:
                    targets.add(int(ex[parents[m]]))
        cluster_parent[e] = targets

    if not found:
        cycle = _find_cycle(cluster_parent)
        if cycle:
            found.append(f"F: exemplar-parent cycle through {cycle}")
    return found


def _find_cycle(cluster_parent):
    """Return exemplars on one cycle of the exemplar -> parent-exemplar graph, or []."""
    state = {}
    for start in cluster_parent:
        if start in state:
            continue
        path = []
        node = start
        while node is not None and node not in state:
            state[node] = 'open'
            path.append(node)
            nxt = sorted(cluster_parent.get(node, ()))
            node = nxt[0] if nxt else None
            if node is not None and state.get(node) == 'open':
                return path[path.index(node):]
        for visited in path:
            state[visited] = 'done'
    return []


def is_valid(assignment, problem):
    return not violations(assignment, problem)


def net_similarity(assignment, problem):
    """Preferences of exemplars plus similarities of members to their exemplars.

    Returns -inf for an assignment that violates any constraint.
    """
    if not is_valid(assignment, problem):
        return float('-inf')
    total = 0.0
    for i, e in enumerate(assignment.exemplar_of):
        total += problem.s[problem.edge_of[(i, int(e))]]
    return float(total)


# --- message passing --------------------------------------------------------

def _chunks(n_segments, threads):
    k = max(1, min(threads, n_segments))
    bounds = np.linspace(0, n_segments, k + 1).astype(int)
    return [(int(bounds[c]), int(bounds[c + 1])) for c in range(k) if bounds[c] < bounds[c + 1]]


def _run_chunks(func, n_segments, threads, executor):
    chunks = _chunks(n_segments, threads)
    if executor is None or len(chunks) == 1:
        for lo, hi in chunks:
            func(lo, hi)
    else:
        list(executor.map(lambda c: func(*c), chunks))


def _damp(old, computed, damping):
    return damping * old + (1.0 - damping) * computed


def _compat_edges(problem, exemplar_of):
    """Edge mask: both ends have parents whose exemplars coincide."""
    parents = problem.parents
    has_parent = parents >= 0
    parent_ex = np.where(has_parent, exemplar_of[np.maximum(parents, 0)], -1)
    rows, cols = problem.rows, problem.cols
    return has_parent[rows] & has_parent[cols] & (parent_ex[rows] == parent_ex[cols])


def sweep(state, problem, threads=1, executor=None):
    """One synchronous sweep: all six messages are computed from the previous
    sweep's values, damped, then committed together.

    The relational messages use the assignment extracted after the previous
    sweep (all singletons before the first one).
    """
    lam = state.damping
    s = problem.s
    ex = state.assignment.exemplar_of if state.assignment is not None \
        else np.arange(problem.n)
    root = problem.parents < 0
    old_beta, old_eta, old_rho = state.beta, state.eta, state.rho
    old_alpha, old_sigma, old_tau = state.alpha, state.sigma, state.tau

    # row stage: beta, eta, rho
    row_ptr = problem.row_ptr
    beta, eta, rho = (np.empty_like(s) for _ in range(3))

    def row_stage(lo, hi):
        a, b = row_ptr[lo], row_ptr[hi]
        starts = row_ptr[lo:hi] - a
        seg = np.repeat(np.arange(hi - lo), np.diff(row_ptr[lo:hi + 1]))
        idx = np.arange(b - a)

        beta[a:b] = _damp(old_beta[a:b], s[a:b] + old_alpha[a:b] + old_tau[a:b], lam)

        bt = old_beta[a:b]
        top = np.maximum.reduceat(bt, starts)
        first = np.minimum.reduceat(np.where(bt == top[seg], idx, len(idx)), starts)
        masked = bt.copy()
        masked[first] = -np.inf
        second = np.maximum.reduceat(masked, starts)
        second = np.where(np.isfinite(second), second, EMPTY_MAX)
        excl_max = np.where(idx == first[seg], second[seg], top[seg])
        eta[a:b] = _damp(old_eta[a:b], -excl_max, lam)

        rho[a:b] = _damp(old_rho[a:b], s[a:b] + old_eta[a:b] + old_tau[a:b], lam)

    _run_chunks(row_stage, problem.n, threads, executor)

    # column stage: alpha, sigma, tau, in column-major order
    order = problem.col_order
    col_ptr = problem.col_ptr
    rows_p, cols_p, diag_p = problem.rows[order], problem.cols[order], problem.is_diag[order]
    s_p, rho_p, eta_p = s[order], old_rho[order], old_eta[order]
    alpha_old_p, sigma_old_p, tau_old_p = old_alpha[order], old_sigma[order], old_tau[order]
    compat_p = _compat_edges(problem, ex)[order]
    rho_diag = old_rho[problem.diag]
    alpha_p, sigma_p, tau_p = (np.empty_like(s_p) for _ in range(3))

    def column_stage(lo, hi):
        a, b = col_ptr[lo], col_ptr[hi]
        starts = col_ptr[lo:hi] - a
        col = cols_p[a:b]
        diag = diag_p[a:b]

        positive = np.where(diag, 0.0, np.maximum(rho_p[a:b], 0.0))
        colsum = np.add.reduceat(positive, starts)[col - lo]
        computed = np.where(diag, colsum, np.minimum(0.0, rho_diag[col] + colsum - positive))
        alpha_p[a:b] = _damp(alpha_old_p[a:b], computed, lam)

        sigma_p[a:b] = _damp(sigma_old_p[a:b], s_p[a:b] + eta_p[a:b] + alpha_old_p[a:b], lam)

        support = np.where(compat_p[a:b] & ~diag, np.maximum(sigma_old_p[a:b], 0.0), 0.0)
        total = np.add.reduceat(support, starts)[col - lo]
        computed = np.where(diag, total, np.minimum(0.0, rho_diag[col] + total - support))
        computed = np.where(root[rows_p[a:b]] | root[col], 0.0, computed)
        tau_p[a:b] = _damp(tau_old_p[a:b], computed, lam)

    _run_chunks(column_stage, problem.n, threads, executor)

    alpha, sigma, tau = (np.empty_like(s) for _ in range(3))
    alpha[order], sigma[order], tau[order] = alpha_p, sigma_p, tau_p
    state.beta, state.eta, state.rho = beta, eta, rho
    state.alpha, state.sigma, state.tau = alpha, sigma, tau
    state.sweeps += 1
    state.check_finite(problem)
    return state


# --- extraction -------------------------------------------------------------

def exemplar_evidence(state, problem):
    d = problem.diag
    return state.rho[d] + state.alpha[d] + state.tau[d]


def _dissolve(ex, node):
    """Make node its own exemplar."""
    ex[node] = node


def _break_cycle(ex, parents, cycle):
    """Detach the members that close an exemplar-parent cycle.

    The cycle is cut at its largest multi-member cluster: members whose parent
    cluster lies on the cycle fall back to themselves. When the exemplar itself
    closes the loop the whole cluster is dissolved.
    """
    clusters = AssignmentMatrix(ex).clusters()
    on_cycle = set(cycle)
    shared = [e for e in cycle if len(clusters[e]) > 1]
    victim = max(shared) if shared else max(cycle)
    members = clusters[victim]
    if parents[victim] >= 0 and ex[parents[victim]] in on_cycle:
        closing = members
    else:
        closing = [m for m in members
                   if m != victim and parents[m] >= 0 and ex[parents[m]] in on_cycle]
    for m in closing or members:
        _dissolve(ex, m)


def repair(assignment, problem):
    """Force a valid assignment: F-violators and E-violators fall back to themselves,
    and exemplar-parent cycles are cut at a shared cluster.
    """
    ex = assignment.exemplar_of.copy()
    parents = problem.parents
    for _ in range(problem.n + 1):
        changed = False
        for i in range(problem.n):
            if ex[ex[i]] != ex[i]:
                _dissolve(ex, i)
                changed = True
        for e, members in AssignmentMatrix(ex).clusters().items():
            if problem.f_mode == MODIFIED:
                with_parent = [m for m in members if parents[m] >= 0]
                if not with_parent:
                    continue
                anchor = e if parents[e] >= 0 else with_parent[0]
                wanted = ex[parents[anchor]]
                for m in with_parent:
                    if m != e and ex[parents[m]] != wanted:
                        _dissolve(ex, m)
                        changed = True
            else:
                for m in members:
                    if m == e or parents[m] < 0:
                        continue
                    if parents[e] < 0 or ex[parents[m]] != ex[parents[e]]:
                        _dissolve(ex, m)
                        changed = True
        if changed:
            continue
        cluster_parent = {e: parent_clusters(ex, parents, e)
                          for e in AssignmentMatrix(ex).exemplars()}
        cycle = _find_cycle(cluster_parent)
        if not cycle:
            break
        _break_cycle(ex, parents, cycle)
    result = AssignmentMatrix(ex, assignment.nodes)
    if violations(result, problem):
        raise InvariantError(f"repair left violations: {violations(result, problem)[:3]}")
    return result


def extract_assignment(state, problem):
    """Round messages to a valid assignment.

    j is an exemplar iff rho_jj + alpha_jj + tau_jj > 0; every other node joins
    the candidate exemplar maximizing s(i, j) + tau_ij, or itself when none is
    available. The result is then repaired.
    """
    evidence = exemplar_evidence(state, problem)
    is_exemplar = evidence > 0
    ex = np.arange(problem.n)
    if is_exemplar.any():
        score = problem.s + state.tau
        for i in range(problem.n):
            if is_exemplar[i]:
                continue
            lo, hi = problem.row_ptr[i], problem.row_ptr[i + 1]
            best, best_score = i, -np.inf
            for e in range(lo, hi):
                j = problem.cols[e]
                if j != i and is_exemplar[j] and score[e] > best_score:
                    best, best_score = int(j), score[e]
            ex[i] = best
    nodes = problem.matrix.nodes
    return repair(AssignmentMatrix(ex, nodes), problem)


# --- local improvement ------------------------------------------------------

def _cluster_value(problem, members, exemplar):
    total = 0.0
    for m in members:
        value = problem.similarity(m, exemplar)
        if value is None:
            return None
        total += value
    return total


def _moves(problem, ex, i):
    """Candidate (gain, new exemplar_of) moves touching node i, best gain first."""
    moves = []
    e = int(ex[i])
    if e != i:
        current = problem.similarity(i, e)
        for j in [i] + problem.neighbors(i):
            if j == e or (j != i and ex[j] != j):
                continue
            trial = ex.copy()
            trial[i] = j
            moves.append((problem.similarity(i, j) - current, j, trial))
        return moves

    members = [int(m) for m in np.flatnonzero(ex == i)]
    current = _cluster_value(problem, members, i)
    for j in problem.neighbors(i):
        if ex[j] == j:
            merged = _cluster_value(problem, members, j)
            if merged is not None:
                trial = ex.copy()
                trial[members] = j
                moves.append((merged - current, j, trial))
    for m in members:
        if m == i:
            continue
        switched = _cluster_value(problem, members, m)
        if switched is not None:
            trial = ex.copy()
            trial[members] = m
            moves.append((switched - current, m, trial))
    return moves


def _reassigned(problem, ex, opened=None, closed=None):
    """Trial exemplar_of after opening and/or closing one exemplar.

    Members of the closed cluster move to their most similar remaining
    exemplar; other non-exemplars move to the opened one when it is more
    similar than their current exemplar. None when a member of the closed
    cluster has no exemplar left to join.
    """
    trial = ex.copy()
    is_exemplar = ex == np.arange(len(ex))
    if closed is not None:
        is_exemplar[closed] = False
    if opened is not None:
        is_exemplar[opened] = True
        trial[opened] = opened
    if closed is not None:
        for m in np.flatnonzero(ex == closed):
            m = int(m)
            if m == opened:
                continue
            options = [j for j in problem.neighbors(m) if is_exemplar[j]]
            if not options:
                return None
            trial[m] = max(options, key=lambda j: (problem.similarity(m, j), -j))
    if opened is not None:
        for m in problem.neighbors(opened):
            if is_exemplar[m]:
                continue
            there = problem.similarity(m, opened)
            if there is not None and there > problem.similarity(m, int(trial[m])):
                trial[m] = opened
    return trial


def _gain(problem, ex, trial):
    total = 0.0
    for m in np.flatnonzero(trial != ex):
        new = problem.similarity(int(m), int(trial[m]))
        if new is None:
            return None
        total += new - problem.similarity(int(m), int(ex[m]))
    return total


def _exemplar_moves(problem, ex, i):
    """Open i as an exemplar, close it, or hand its cluster to another node."""
    if ex[i] != i:
        trials = [_reassigned(problem, ex, opened=i)]
    else:
        members = [int(m) for m in np.flatnonzero(ex == i)]
        successors = sorted({j for m in members for j in [m] + problem.neighbors(m)
                             if ex[j] != j})
        trials = [_reassigned(problem, ex, closed=i)]
        trials += [_reassigned(problem, ex, opened=j, closed=i) for j in successors]
    moves = []
    for trial in trials:
        if trial is None:
            continue
        gain = _gain(problem, ex, trial)
        if gain is not None:
            moves.append((gain, int(trial[i]), trial))
    return moves


def _detach_move(problem, ex, i):
    """Send a merged node and its merged descendants back to themselves.

    Clusters left inconsistent by the detachment are repaired.
    """
    if ex[i] == i or not problem.children[i]:
        return []
    trial = ex.copy()
    stack = [i]
    while stack:
        node = stack.pop()
        trial[node] = node
        stack.extend(problem.children[node])
    trial = repair(AssignmentMatrix(trial), problem).exemplar_of
    gain = _gain(problem, ex, trial)
    return [] if gain is None else [(gain, i, trial)]


def polish(assignment, problem, max_passes=POLISH_PASSES):
    """Apply improving moves while net similarity strictly rises and the
    assignment stays valid.

    Moves reassign one node, detach a merged branch, merge or re-center a
    cluster, and open, close or swap exemplars with the affected nodes
    following their best exemplar.
    """
    ex = assignment.exemplar_of.copy()
    moved = 0
    for _ in range(max_passes):
        improved = False
        for i in range(problem.n):
            moves = (_moves(problem, ex, i) + _exemplar_moves(problem, ex, i)
                     + _detach_move(problem, ex, i))
            for gain, _, trial in sorted(moves, key=lambda m: (-m[0], m[1])):
                if gain <= 1e-12:
                    break
                if is_valid(AssignmentMatrix(trial), problem):
                    ex = trial
                    improved = True
                    moved += 1
                    break
        if not improved:
            break
    if moved:
        logger.debug(f"Polish applied {moved} move(s)")
    return AssignmentMatrix(ex, assignment.nodes)


# --- driver -----------------------------------------------------------------

class RapResult:
    """Outcome of run(): assignment, convergence flag and per-sweep diagnostics."""

    def __init__(self, assignment, converged, sweeps, damping, diagnostics, net):
        self.assignment = assignment
        self.converged = converged
        self.sweeps = sweeps
        self.damping = damping
        self.diagnostics = diagnostics
        self.net_similarity = net

    def diagnostics_table(self):
        return pd.DataFrame(self.diagnostics,
                            columns=['sweep', 'exemplar_count', 'net_similarity', 'lambda'])

    def __repr__(self):
        return (f"RapResult(exemplars={len(self.assignment.exemplars())}, "
                f"converged={self.converged}, sweeps={self.sweeps})")


def run(problem, damping=0.5, max_sweeps=2000, stable_window=10, threads=1,
        polish_result=True):
    """Sweep until the exemplar set and net similarity are stable for stable_window sweeps.

    Period-2 oscillation lasting longer than stable_window raises damping by
    0.1 (up to 0.9).
    """
    state = MessageState(problem.n_edges, damping)
    state.assignment = AssignmentMatrix(np.arange(problem.n), problem.matrix.nodes)
    diagnostics = []
    history = []
    streak = 0
    oscillating = 0
    converged = False
    previous_net = None

    executor = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for sweep_no in range(1, max_sweeps + 1):
            sweep(state, problem, threads=threads, executor=executor)
            state.assignment = extract_assignment(state, problem)
            exemplars = tuple(state.assignment.exemplars())
            net = net_similarity(state.assignment, problem)
            diagnostics.append({'sweep': sweep_no, 'exemplar_count': len(exemplars),
                                'net_similarity': net, 'lambda': state.damping})
            logger.debug(f"Sweep {sweep_no}: {len(exemplars)} exemplar(s), net={net:.6f}")

            if history and exemplars == history[-1] and abs(net - previous_net) < NET_TOLERANCE:
                streak += 1
            else:
                streak = 0
            if len(history) >= 2 and exemplars == history[-2] and exemplars != history[-1]:
                oscillating += 1
            else:
                oscillating = 0
            history.append(exemplars)
            previous_net = net

            if streak >= stable_window:
                converged = True
                break
            if oscillating > stable_window and state.damping < MAX_DAMPING:
                state.damping = round(min(MAX_DAMPING, state.damping + DAMPING_STEP), 10)
                oscillating = 0
                logger.warning(f"Exemplar set oscillating; damping raised to {state.damping}")
    finally:
        if executor is not None:
            executor.shutdown()

    if not converged:
        logger.warning(f"RAP did not converge within {max_sweeps} sweep(s)")
    assignment = state.assignment
    if polish_result:
        assignment = polish(assignment, problem)
    net = net_similarity(assignment, problem)
    logger.info(f"RAP finished after {state.sweeps} sweep(s): "
                f"{len(assignment.exemplars())} exemplar(s), net similarity {net:.6f}")
    return RapResult(assignment, converged, state.sweeps, state.damping, diagnostics, net)


def write_diagnostics(result, path):
    result.diagnostics_table().to_csv(path, index=False, float_format='%.10g')
    return path


def exhaustive_assignment(problem, limit=EXHAUSTIVE_LIMIT):
    """Best valid assignment by enumerating every node's options ({i} plus candidates).

    Ties keep the first assignment in enumeration order.
    """
    if problem.n > limit:
        raise InputError(f"exhaustive search is limited to {limit} nodes, got {problem.n}")
    options = [[i] + problem.neighbors(i) for i in range(problem.n)]
    best, best_net = None, float('-inf')
    for combo in itertools.product(*options):
        candidate = AssignmentMatrix(np.array(combo, dtype=int), problem.matrix.nodes)
        net = net_similarity(candidate, problem)
        if net > best_net:
            best, best_net = candidate, net
    return best, best_net


def exhaustive_flat(problem, limit=FLAT_EXHAUSTIVE_LIMIT):
    """Best assignment of a root-only problem by enumerating exemplar sets.

    Every non-exemplar joins its most similar candidate in the set (lowest id
    on ties); sets that leave a node without a candidate are skipped.
    """
    if (problem.parents >= 0).any():
        raise InputError("exemplar-set search needs a problem without parent links")
    if problem.n > limit:
        raise InputError(f"exemplar-set search is limited to {limit} nodes, got {problem.n}")
    best, best_net = None, float('-inf')
    for mask in range(1, 2 ** problem.n):
        chosen = [(mask >> j) & 1 == 1 for j in range(problem.n)]
        ex = np.arange(problem.n)
        net = sum(float(problem.s[problem.diag[j]]) for j in range(problem.n) if chosen[j])
        for i in range(problem.n):
            if chosen[i]:
                continue
            options = [j for j in problem.neighbors(i) if chosen[j]]
            if not options:
                break
            ex[i] = max(options, key=lambda j: (problem.similarity(i, j), -j))
            net += problem.similarity(i, int(ex[i]))
        else:
            if net > best_net:
                best, best_net = AssignmentMatrix(ex, problem.matrix.nodes), net
    return best, float(best_net)
