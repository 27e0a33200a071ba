"""Compiled BAMCP / BA-UCT search for tabular Dirichlet beliefs.

Each transition row ``r`` has Dirichlet parameters derived from root counts
``counts[r]`` (plus path counts ``delta[r]`` in BA-UCT mode):

* kind 0: ``prior[r] + n``; zero prior entries are impossible successors
* kind 1 (sparse): ``n + alpha`` for observed successors, unobserved ones
  share ``new_mass`` uniformly

Lazy rows pool the zero-count successors that share one parameter ``b``:
the pooled total is one Gamma(|U| b) draw, and which pooled successor comes
up is drawn from a Polya urn over the pool.  Integrating out the within-pool
Dirichlet split this way gives the same joint law as a full row draw.
Eager rows draw one gamma per successor and materialise every row at the
start of a simulation.

Random numbers come from xoshiro256** so that a search is a pure function
of its seed.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit, uint64

# Refcounting is off throughout: every array is allocated by the caller, and
# with it on, each call that passes arrays pays for atomic increments.
kjit = njit(_nrt=False, cache=True)
kjit_inline = njit(_nrt=False, cache=True, inline="always")

# ---------------------------------------------------------------- rng


@kjit_inline
def _rotl(x, k):
    return (x << uint64(k)) | (x >> uint64(64 - k))


@kjit_inline
def next_u64(st):
    s0 = st[0]
    s1 = st[1]
    s2 = st[2]
    s3 = st[3]
    result = _rotl(s1 * uint64(5), 7) * uint64(9)
    t = s1 << uint64(17)
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    s3 = _rotl(s3, 45)
    st[0] = s0
    st[1] = s1
    st[2] = s2
    st[3] = s3
    return result


@kjit_inline
def uniform(st):
    """Uniform on [0, 1)."""
    return float(next_u64(st) >> uint64(11)) * (1.0 / 9007199254740992.0)


@kjit_inline
def randint(st, n):
    return min(int(uniform(st) * n), n - 1)


@kjit_inline
def normal(st):
    u = 0.0
    s = 0.0
    while True:
        u = 2.0 * uniform(st) - 1.0
        v = 2.0 * uniform(st) - 1.0
        s = u * u + v * v
        if 0.0 < s < 1.0:
            break
    return u * math.sqrt(-2.0 * math.log(s) / s)


@kjit
def gamma(st, a):
    """Gamma(a, 1) by Marsaglia-Tsang, boosted for a < 1.

    Small integer shapes use the sum of ``a`` exponentials instead, which is
    exact and several times cheaper.
    """
    if a <= 12.0 and a == math.floor(a):
        prod = 1.0
        for _ in range(int(a)):
            prod *= 1.0 - uniform(st)
        return -math.log(prod)
    boost = 1.0
    if a < 1.0:
        u = 1.0 - uniform(st)
        boost = u ** (1.0 / a)
        a += 1.0
    d = a - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    v = 1.0
    while True:
        x = normal(st)
        v = 1.0 + c * x
        if v <= 0.0:
            continue
        v = v * v * v
        u = uniform(st)
        x2 = x * x
        if u < 1.0 - 0.0331 * x2 * x2:
            break
        if math.log(u) < 0.5 * x2 + d * (1.0 - v + math.log(v)):
            break
    return d * v * boost


@kjit
def beta(st, a, b):
    x = gamma(st, a)
    y = gamma(st, b)
    if x + y == 0.0:
        return 1.0 if a >= b else 0.0
    return x / (x + y)


@kjit
def dirichlet_into(st, params, out):
    total = 0.0
    for i in range(params.shape[0]):
        g = gamma(st, params[i]) if params[i] > 0.0 else 0.0
        out[i] = g
        total += g
    if total == 0.0:
        # all draws underflowed: put the mass on the largest parameter
        out[np.argmax(params)] = 1.0
        total = 1.0
    for i in range(params.shape[0]):
        out[i] /= total


# ---------------------------------------------------------------- rows


@kjit
def _row_weights(r, counts, delta, prior, kind, alpha, new_mass, w, member):
    """Posterior parameters of row ``r`` split into explicit and pooled parts.

    On return ``w[s']`` holds the explicit parameter (0 if pooled or
    impossible) and ``member[s']`` is True for pooled successors.  Returns
    ``(pooled_count, pooled_param)``.
    """
    S = counts.shape[1]
    n_pool = 0
    if kind == 1:
        for s in range(S):
            n = counts[r, s] + delta[r, s]
            if n > 0.0:
                w[s] = n + alpha
                member[s] = False
            else:
                w[s] = 0.0
                member[s] = True
                n_pool += 1
        b = new_mass / n_pool if n_pool > 0 else 0.0
    else:
        # kind 0: pool zero-count successors only if every possible successor
        # shares one prior value
        b = -1.0
        uniform_prior = True
        n_positive = 0
        for s in range(S):
            p = prior[r, s]
            if p > 0.0:
                n_positive += 1
                if b < 0.0:
                    b = p
                elif p != b:
                    uniform_prior = False
        pool = uniform_prior and n_positive >= 3
        for s in range(S):
            n = counts[r, s] + delta[r, s]
            p = prior[r, s]
            if pool and n == 0.0 and p > 0.0:
                w[s] = 0.0
                member[s] = True
                n_pool += 1
            else:
                w[s] = p + n
                member[s] = False
    return n_pool, b


@kjit
def _collapsed_draw(st, r, counts, delta, prior, kind, alpha, new_mass, w, member):
    """Successor drawn from the posterior predictive of row ``r``."""
    S = counts.shape[1]
    n_pool, b = _row_weights(r, counts, delta, prior, kind, alpha, new_mass, w, member)
    total = 0.0
    for s in range(S):
        total += w[s] + (b if member[s] else 0.0)
    x = uniform(st) * total
    out = -1
    for s in range(S):
        ws = w[s] + (b if member[s] else 0.0)
        if ws > 0.0:
            out = s
            x -= ws
            if x < 0.0:
                break
    return out


@kjit
def _setup_row(r, lazy, counts, delta, prior, kind, alpha, new_mass, w, member,
               exp_idx, exp_w, n_exp, pool_idx, n_pool_arr, pool_b):
    """Which successors of row ``r`` get their own gamma draw, and their shapes.

    Lazy rows pool the zero-count successors; eager rows draw one gamma per
    possible successor.
    """
    S = counts.shape[1]
    n_pool, b = _row_weights(r, counts, delta, prior, kind, alpha, new_mass, w, member)
    k = 0
    m = 0
    for s in range(S):
        ws = w[s]
        if member[s]:
            if lazy:
                pool_idx[r, m] = s
                m += 1
                ws = 0.0
            else:
                ws = b
        if ws > 0.0:
            exp_idx[r, k] = s
            exp_w[r, k] = ws
            k += 1
    n_exp[r] = k
    n_pool_arr[r] = m
    pool_b[r] = b


@kjit
def _redraw(st, r, exp_w, exp_cum, n_exp, n_pool_arr, pool_b, n_items, urn_tot):
    """Fresh Dirichlet draw for a row set up by :func:`_setup_row`, stored as a CDF."""
    k = n_exp[r]
    total = 0.0
    for i in range(k):
        g = gamma(st, exp_w[r, i])
        exp_cum[r, i] = g
        total += g
    if n_pool_arr[r] > 0:
        total += gamma(st, n_pool_arr[r] * pool_b[r])
    if total == 0.0:
        # every gamma underflowed; keep the row well defined
        if k > 0:
            exp_cum[r, 0] = 1.0
        total = 1.0
    acc = 0.0
    for i in range(k):
        acc += exp_cum[r, i] / total
        exp_cum[r, i] = acc
    n_items[r] = 0
    urn_tot[r] = 0


@kjit
def _materialise(st, r, lazy, counts, delta, prior, kind, alpha, new_mass, w, member,
                 exp_idx, exp_w, exp_cum, n_exp, pool_idx, n_pool_arr, pool_b, n_items, urn_tot):
    _setup_row(r, lazy, counts, delta, prior, kind, alpha, new_mass, w, member,
               exp_idx, exp_w, n_exp, pool_idx, n_pool_arr, pool_b)
    _redraw(st, r, exp_w, exp_cum, n_exp, n_pool_arr, pool_b, n_items, urn_tot)


@kjit
def _pool_draw(st, r, pool_idx, n_pool_arr, pool_b, urn_items, urn_cnt, n_items, urn_tot):
    """Polya-urn draw among the pooled successors of row ``r`` (weights b + draws so far)."""
    n_pool = n_pool_arr[r]
    seen = urn_tot[r]
    s = -1
    if seen > 0 and uniform(st) * (n_pool * pool_b[r] + seen) < seen:
        x = randint(st, seen)
        for i in range(n_items[r]):
            x -= urn_cnt[r, i]
            if x < 0:
                urn_cnt[r, i] += 1
                s = urn_items[r, i]
                break
    else:
        s = pool_idx[r, randint(st, n_pool)]
        found = False
        for i in range(n_items[r]):
            if urn_items[r, i] == s:
                urn_cnt[r, i] += 1
                found = True
                break
        if not found:
            i = n_items[r]
            urn_items[r, i] = s
            urn_cnt[r, i] = 1
            n_items[r] = i + 1
    urn_tot[r] = seen + 1
    return s


@kjit
def _row_draw(st, r, exp_idx, exp_cum, n_exp, pool_idx, n_pool_arr, pool_b,
              urn_items, urn_cnt, n_items, urn_tot):
    # single exit and a branch-free scan: both matter for speed under numba
    u = uniform(st)
    k = n_exp[r]
    c = 0
    for i in range(k):
        c += u >= exp_cum[r, i]
    if c < k:
        out = exp_idx[r, c]
    elif n_pool_arr[r] == 0:
        out = exp_idx[r, k - 1]
    else:
        out = _pool_draw(st, r, pool_idx, n_pool_arr, pool_b, urn_items, urn_cnt, n_items, urn_tot)
    return out


@kjit_inline
def _argmax_random(st, values):
    best = values[0]
    n_best = 1
    choice = 0
    for i in range(1, values.shape[0]):
        v = values[i]
        if v > best:
            best = v
            n_best = 1
            choice = i
        elif v == best:
            # reservoir sampling over the tied maxima
            n_best += 1
            if randint(st, n_best) == 0:
                choice = i
    return choice


@kjit_inline
def _rollout_action(st, s, eps, A, best_a, best_n):
    # one uniform decides explore-vs-greedy and, rescaled, which action
    u = uniform(st)
    explore = u < eps
    x = u / eps if explore else (u - eps) / (1.0 - eps)
    ra = min(int(x * A), A - 1)
    nb = best_n[s]
    ga = best_a[s, min(int(x * nb), nb - 1)]
    return ra if explore else ga


@kjit
def search_kernel(row_of, counts, prior, kind, alpha, new_mass, reward,
                  qro, ro_eps, gamma_, max_d, c, n_sims, lazy, bauct, root_state, st,
                  visits, edge_n, edge_q, child,
                  best_a, best_n, delta, w, member, stamp, exp_idx, exp_w, exp_cum, n_exp, pool_idx, n_pool,
                  pool_b, urn_items, urn_cnt, n_items, urn_tot, undo_r, undo_s, path_node, path_act,
                  path_rew, scores):
    """Run ``n_sims`` simulations from ``root_state``; returns (action, nodes used).

    The trailing arguments are scratch space, see :func:`workspace`.
    """
    S, A = row_of.shape
    R = counts.shape[0]
    # greedy rollout actions per state
    for s in range(S):
        best_n[s] = 0
        m = qro[s, 0]
        for a in range(1, A):
            if qro[s, a] > m:
                m = qro[s, a]
        for a in range(A):
            if qro[s, a] == m:
                best_a[s, best_n[s]] = a
                best_n[s] += 1
    for r in range(R):
        stamp[r] = 0
        for s in range(S):
            delta[r, s] = 0.0
    # with root sampling and lazy rows the row structure is fixed for the
    # whole search, so only the gamma draws are repeated per simulation
    static = lazy and not bauct
    if static:
        for r in range(R):
            _setup_row(r, True, counts, delta, prior, kind, alpha, new_mass, w, member,
                       exp_idx, exp_w, n_exp, pool_idx, n_pool, pool_b)

    n_nodes = 1
    visits[0] = 0
    for a in range(A):
        edge_n[0, a] = 0
        edge_q[0, a] = 0.0

    for sim in range(1, n_sims + 1):
        if not bauct and not lazy:
            for r in range(R):
                _materialise(st, r, False, counts, delta, prior, kind, alpha, new_mass, w, member,
                             exp_idx, exp_w, exp_cum, n_exp, pool_idx, n_pool, pool_b, n_items, urn_tot)
                stamp[r] = sim
        n_undo = 0
        node = 0
        s = root_state
        d = 0
        depth_path = 0
        tail = 0.0
        while True:
            if d >= max_d:
                tail = 0.0
                break
            first = visits[node] == 0
            if first:
                a = _rollout_action(st, s, ro_eps, A, best_a, best_n)
            else:
                n_zero = 0
                for b in range(A):
                    if edge_n[node, b] == 0:
                        n_zero += 1
                if n_zero > 0:
                    pick = randint(st, n_zero) if n_zero > 1 else 0
                    a = 0
                    for b in range(A):
                        if edge_n[node, b] == 0:
                            if pick == 0:
                                a = b
                                break
                            pick -= 1
                else:
                    logn = math.log(visits[node])
                    for b in range(A):
                        scores[b] = edge_q[node, b] + c * math.sqrt(logn / edge_n[node, b])
                    a = _argmax_random(st, scores)
            # tree transition
            r = row_of[s, a]
            if bauct:
                s2 = _collapsed_draw(st, r, counts, delta, prior, kind, alpha, new_mass, w, member)
                delta[r, s2] += 1.0
                undo_r[n_undo] = r
                undo_s[n_undo] = s2
                n_undo += 1
            else:
                if stamp[r] != sim:
                    if static:
                        _redraw(st, r, exp_w, exp_cum, n_exp, n_pool, pool_b, n_items, urn_tot)
                    else:
                        _materialise(st, r, lazy, counts, delta, prior, kind, alpha, new_mass, w, member,
                                     exp_idx, exp_w, exp_cum, n_exp, pool_idx, n_pool, pool_b, n_items, urn_tot)
                    stamp[r] = sim
                s2 = _row_draw(st, r, exp_idx, exp_cum, n_exp, pool_idx, n_pool, pool_b,
                               urn_items, urn_cnt, n_items, urn_tot)
            rew = reward[s, a, s2]
            if first:
                # rollout from the successor at the same depth
                total = 0.0
                disc = 1.0
                s_ro = s2
                d_ro = d
                # in BA-UCT mode delta now holds the leaf's path counts, so the
                # rows drawn below form one model from the leaf posterior
                while d_ro < max_d:
                    a_ro = _rollout_action(st, s_ro, ro_eps, A, best_a, best_n)
                    r_ro = row_of[s_ro, a_ro]
                    if stamp[r_ro] != sim:
                        if static:
                            _redraw(st, r_ro, exp_w, exp_cum, n_exp, n_pool, pool_b, n_items, urn_tot)
                        else:
                            _materialise(st, r_ro, True, counts, delta, prior, kind, alpha, new_mass, w, member,
                                         exp_idx, exp_w, exp_cum, n_exp, pool_idx, n_pool, pool_b, n_items,
                                         urn_tot)
                        stamp[r_ro] = sim
                    s_next = _row_draw(st, r_ro, exp_idx, exp_cum, n_exp, pool_idx, n_pool, pool_b,
                                       urn_items, urn_cnt, n_items, urn_tot)
                    total += disc * reward[s_ro, a_ro, s_next]
                    disc *= gamma_
                    s_ro = s_next
                    d_ro += 1
                ret = rew + gamma_ * total
                visits[node] = 1
                edge_n[node, a] = 1
                edge_q[node, a] = ret
                tail = ret
                break
            path_node[depth_path] = node
            path_act[depth_path] = a
            path_rew[depth_path] = rew
            depth_path += 1
            if d + 1 >= max_d:
                tail = 0.0
                break
            nxt = child[node, a, s2]
            if nxt < 0:
                nxt = n_nodes
                n_nodes += 1
                child[node, a, s2] = nxt
                visits[nxt] = 0
                for b in range(A):
                    edge_n[nxt, b] = 0
                    edge_q[nxt, b] = 0.0
            node = nxt
            s = s2
            d += 1
        ret = tail
        for i in range(depth_path - 1, -1, -1):
            nd = path_node[i]
            a = path_act[i]
            ret = path_rew[i] + gamma_ * ret
            visits[nd] += 1
            edge_n[nd, a] += 1
            edge_q[nd, a] += (ret - edge_q[nd, a]) / edge_n[nd, a]
        for i in range(n_undo):
            delta[undo_r[i], undo_s[i]] -= 1.0

    for a in range(A):
        scores[a] = edge_q[0, a]
    return _argmax_random(st, scores), n_nodes


def workspace(R, S, A, max_d):
    """Scratch arrays for :func:`search_kernel`, in argument order."""
    return (
        np.zeros((S, A), np.int64), np.zeros(S, np.int64),
        np.zeros((R, S)), np.empty(S), np.empty(S, np.bool_), np.zeros(R, np.int64),
        np.empty((R, S), np.int64), np.empty((R, S)), np.empty((R, S)), np.zeros(R, np.int64),
        np.empty((R, S), np.int64), np.zeros(R, np.int64), np.zeros(R),
        np.empty((R, S), np.int64), np.empty((R, S), np.int64), np.zeros(R, np.int64), np.zeros(R, np.int64),
        np.empty(max_d + 2, np.int64), np.empty(max_d + 2, np.int64),
        np.empty(max_d + 2, np.int64), np.empty(max_d + 2, np.int64), np.empty(max_d + 2),
        np.empty(A),
    )
