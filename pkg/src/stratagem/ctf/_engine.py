"""Compiled capture-the-flag engine.

All functions operate on plain arrays so that the same code serves two
drivers: the Python episode loop in :mod:`stratagem.ctf.world` (arbitrary
policy objects) and :func:`run_batch` below (controllers and scripted tactics
compiled to arrays).  Robots are indexed globally, blue ``0..nb-1`` then red.

State arrays
    pos (N, 2)      cell of each robot
    macro (N,)      active team-local macro id, -1 when a decision is due
    stage (N,)      leg index inside the macro
    msteps (N,)     primitive steps spent in the macro
    budget (N,)     step budget before the macro times out
    flag (2, 2)     flag cell per team
    meta (3,)       clock, done, winner (-1 none)
"""
import numpy as np
from numba import njit

from ..rng import ACTION, EDGE, FLAG, GATE, NODE, SLIP, episode_key, uniform
from .config import (
    F_CAPTURE, F_GAMMA, F_SLIP, F_STEP, F_TAG, F_TAGGED,
    P_A, P_CLOSE, P_DC, P_DL, P_DR_A, P_DR_B, P_FAR, P_FLAG_BLUE, P_H, P_HORIZON,
    P_MID, P_NB, P_NCAND, P_NR, P_NSCOUT, P_PN, P_S, P_SAFE, P_SIGHT, P_TAG, P_V, P_W,
)

STAY, UP, DOWN, LEFT, RIGHT, TAG_INTENT = 0, 1, 2, 3, 4, 5
K_MOVE, K_SENTRY, K_PINCER, K_TAG = 0, 1, 2, 3
DL, DR, DC, AS, AA = 0, 1, 2, 3, 4
N_OBS = 64

_DX = np.array([0, 0, 0, -1, 1], dtype=np.int64)
_DY = np.array([0, 1, -1, 0, 0], dtype=np.int64)


@njit(cache=True)
def team_of(ip, i):
    return 0 if i < ip[P_NB] else 1


@njit(cache=True)
def role_of(ip, i):
    return i if i < ip[P_NB] else i - ip[P_NB]


@njit(cache=True)
def owns(ip, team, y):
    if team == 0:
        return y < ip[P_MID]
    return y >= ip[P_MID]


@njit(cache=True)
def dist(ax, ay, bx, by):
    return abs(ax - bx) + abs(ay - by)


@njit(cache=True)
def macro_kind(ip, a):
    v2 = 2 * ip[P_V]
    if a < v2:
        return K_MOVE
    if a < v2 + ip[P_S]:
        return K_SENTRY
    if a < v2 + ip[P_S] + ip[P_PN]:
        return K_PINCER
    return K_TAG


@njit(cache=True)
def leg_target(ip, vp, sentry, pincer, team, role, a, stage):
    """Cell the macro ``a`` is heading to at leg ``stage`` (-1, -1 for Tag)."""
    v = ip[P_V]
    k = macro_kind(ip, a)
    if k == K_MOVE:
        if a < v:
            return vp[team, a, 0], vp[team, a, 1]
        return vp[1 - team, a - v, 0], vp[1 - team, a - v, 1]
    if k == K_SENTRY:
        s = a - 2 * v
        j = sentry[s, stage % 3]
        return vp[team, j, 0], vp[team, j, 1]
    if k == K_PINCER:
        q = a - 2 * v - ip[P_S]
        j = pincer[q, role] if stage == 0 else pincer[q, 3]
        return vp[1 - team, j, 0], vp[1 - team, j, 1]
    return -1, -1


@njit(cache=True)
def tag_eligible(ip, pos, i):
    t = team_of(ip, i)
    if not owns(ip, t, pos[i, 1]):
        return False
    n = ip[P_NB] + ip[P_NR]
    for j in range(n):
        if team_of(ip, j) != t and owns(ip, t, pos[j, 1]):
            if dist(pos[i, 0], pos[i, 1], pos[j, 0], pos[j, 1]) <= ip[P_TAG]:
                return True
    return False


@njit(cache=True)
def eligible(ip, pos, i, a):
    if a < 0 or a >= ip[P_A]:
        return False
    k = macro_kind(ip, a)
    if k == K_TAG:
        return tag_eligible(ip, pos, i)
    if k == K_PINCER:
        return role_of(ip, i) < 3
    return True


@njit(cache=True)
def eligible_mask(ip, pos, i, out):
    for a in range(ip[P_A]):
        out[a] = eligible(ip, pos, i, a)


@njit(cache=True)
def observe(ip, vp, pos, flag, macro, i):
    """Six-bit macro-observation index of robot ``i`` (bit (a) least significant)."""
    t = team_of(ip, i)
    x, y = pos[i, 0], pos[i, 1]
    n = ip[P_NB] + ip[P_NR]
    close, far = ip[P_CLOSE], ip[P_FAR]
    pincer_lo = 2 * ip[P_V] + ip[P_S]
    pincer_hi = pincer_lo + ip[P_PN]
    bits = 0
    if owns(ip, t, y):
        bits |= 1
    if dist(x, y, flag[1 - t, 0], flag[1 - t, 1]) <= ip[P_SIGHT]:
        bits |= 2
    for j in range(n):
        if j == i:
            continue
        d = dist(x, y, pos[j, 0], pos[j, 1])
        if team_of(ip, j) != t:
            if d <= close:
                bits |= 4
            elif d <= far:
                bits |= 8
        else:
            if d <= close:
                bits |= 16
            if d <= far and pincer_lo <= macro[j] < pincer_hi:
                bits |= 32
    return bits


@njit(cache=True)
def _plan_length(ip, vp, sentry, pincer, pos, i, a):
    t, r = team_of(ip, i), role_of(ip, i)
    k = macro_kind(ip, a)
    x, y = pos[i, 0], pos[i, 1]
    if k == K_TAG:
        return 0
    if k == K_MOVE:
        tx, ty = leg_target(ip, vp, sentry, pincer, t, r, a, 0)
        return dist(x, y, tx, ty)
    legs = 4 if k == K_SENTRY else 2
    total = 0
    for s in range(legs):
        tx, ty = leg_target(ip, vp, sentry, pincer, t, r, a, s)
        total += dist(x, y, tx, ty)
        x, y = tx, ty
    return total


@njit(cache=True)
def advance(ip, vp, sentry, pincer, pos, macro, stage, msteps, budget, i, after_step):
    """Progress macro legs of robot ``i``; True when its termination rule holds."""
    a = macro[i]
    k = macro_kind(ip, a)
    if k == K_TAG:
        return msteps[i] >= 1
    t, r = team_of(ip, i), role_of(ip, i)
    x, y = pos[i, 0], pos[i, 1]
    done = False
    if k == K_MOVE:
        tx, ty = leg_target(ip, vp, sentry, pincer, t, r, a, 0)
        done = x == tx and y == ty
    elif k == K_SENTRY:
        if after_step and tag_eligible(ip, pos, i):
            return True
        while stage[i] < 3:
            tx, ty = leg_target(ip, vp, sentry, pincer, t, r, a, stage[i])
            if x != tx or y != ty:
                break
            stage[i] += 1
        if stage[i] == 3:
            tx, ty = leg_target(ip, vp, sentry, pincer, t, r, a, 3)
            done = x == tx and y == ty
    else:
        tx, ty = leg_target(ip, vp, sentry, pincer, t, r, a, stage[i])
        if stage[i] == 0 and x == tx and y == ty:
            stage[i] = 1
            tx, ty = leg_target(ip, vp, sentry, pincer, t, r, a, 1)
        done = stage[i] == 1 and x == tx and y == ty
    if done:
        return True
    return msteps[i] >= budget[i]


@njit(cache=True)
def start_macro(ip, vp, sentry, pincer, pos, macro, stage, msteps, budget, i, a):
    """Begin macro ``a`` for robot ``i``; True if it terminated on the spot."""
    macro[i] = a
    stage[i] = 0
    msteps[i] = 0
    if macro_kind(ip, a) == K_TAG:
        budget[i] = 1
        return False
    budget[i] = 2 * _plan_length(ip, vp, sentry, pincer, pos, i, a) + 8
    if advance(ip, vp, sentry, pincer, pos, macro, stage, msteps, budget, i, False):
        macro[i] = -1
        return True
    return False


@njit(cache=True)
def _occupied(pos, n, x, y, skip):
    for j in range(n):
        if j != skip and pos[j, 0] == x and pos[j, 1] == y:
            return True
    return False


@njit(cache=True)
def macro_intent(ip, vp, sentry, pincer, pos, macro, stage, i):
    """Next primitive intent of the low-level policy of robot ``i``."""
    a = macro[i]
    if a < 0:
        return STAY
    if macro_kind(ip, a) == K_TAG:
        return TAG_INTENT
    t, r = team_of(ip, i), role_of(ip, i)
    tx, ty = leg_target(ip, vp, sentry, pincer, t, r, a, stage[i])
    x, y = pos[i, 0], pos[i, 1]
    dx, dy = tx - x, ty - y
    if dx == 0 and dy == 0:
        return STAY
    vert = STAY
    if dy > 0:
        vert = UP
    elif dy < 0:
        vert = DOWN
    horiz = STAY
    if dx > 0:
        horiz = RIGHT
    elif dx < 0:
        horiz = LEFT
    if abs(dy) >= abs(dx):
        first, second = vert, horiz
    else:
        first, second = horiz, vert
    n = ip[P_NB] + ip[P_NR]
    # sidestep a robot standing on the preferred cell
    if _occupied(pos, n, x + _DX[first], y + _DY[first], i) and second != STAY:
        if not _occupied(pos, n, x + _DX[second], y + _DY[second], i):
            return second
    return first


@njit(cache=True)
def _relocate(ip, spawn, pos, i):
    t, r = team_of(ip, i), role_of(ip, i)
    n = ip[P_NB] + ip[P_NR]
    sx, sy = spawn[t, r, 0], spawn[t, r, 1]
    best_d = -1
    bx, by = sx, sy
    for radius in range(ip[P_W] + ip[P_H]):
        for x in range(ip[P_W]):
            for y in range(ip[P_H]):
                if dist(x, y, sx, sy) != radius or not owns(ip, t, y):
                    continue
                if not _occupied(pos, n, x, y, i):
                    best_d = radius
                    bx, by = x, y
                    break
            if best_d >= 0:
                break
        if best_d >= 0:
            break
    pos[i, 0] = bx
    pos[i, 1] = by


@njit(cache=True)
def reset(ip, vp, spawn, cand, key, pos, macro, stage, msteps, budget, flag, meta):
    n = ip[P_NB] + ip[P_NR]
    for i in range(n):
        t, r = team_of(ip, i), role_of(ip, i)
        pos[i, 0] = spawn[t, r, 0]
        pos[i, 1] = spawn[t, r, 1]
        macro[i] = -1
        stage[i] = 0
        msteps[i] = 0
        budget[i] = 0
    for t in range(2):
        rule = ip[P_FLAG_BLUE + t]
        if rule < 0:
            c = int(uniform(key, 0, t, FLAG) * ip[P_NCAND])
            rule = cand[min(c, ip[P_NCAND] - 1)]
        flag[t, 0] = vp[t, rule, 0]
        flag[t, 1] = vp[t, rule, 1]
    meta[0] = 0
    meta[1] = 1 if ip[P_HORIZON] <= 0 else 0
    meta[2] = -1


@njit(cache=True)
def step_world(ip, fp, spawn, pos, flag, meta, intents, key, rew, tagged, events):
    """Resolve one primitive step: tags, movement, capture, rewards, clock.

    ``events[0] = (n_tags, capture_team)``, followed by ``(tagger, tagged)``
    pairs.  ``tagged`` flags robots sent back to spawn this step.
    """
    n = ip[P_NB] + ip[P_NR]
    t_now = meta[0]
    rew[0] = 0.0
    rew[1] = 0.0
    events[0, 0] = 0
    events[0, 1] = -1
    for i in range(n):
        tagged[i] = 0
    # tags resolve on pre-move positions, in robot-id order
    for i in range(n):
        if intents[i] != TAG_INTENT or tagged[i]:
            continue
        ti = team_of(ip, i)
        if not owns(ip, ti, pos[i, 1]):
            continue
        best = -1
        best_d = 1 << 30
        for j in range(n):
            if team_of(ip, j) == ti or tagged[j] or not owns(ip, ti, pos[j, 1]):
                continue
            d = dist(pos[i, 0], pos[i, 1], pos[j, 0], pos[j, 1])
            if d <= ip[P_TAG] and d < best_d:
                best, best_d = j, d
        if best >= 0:
            tagged[best] = 1
            rew[ti] += fp[F_TAG]
            rew[1 - ti] += fp[F_TAGGED]
            k = events[0, 0] + 1
            events[k, 0] = i
            events[k, 1] = best
            events[0, 0] = k
    for i in range(n):
        if tagged[i]:
            _relocate(ip, spawn, pos, i)
    # simultaneous movement; blocked or slipped moves become stay
    want = np.empty((n, 2), dtype=np.int64)
    for i in range(n):
        want[i, 0] = pos[i, 0]
        want[i, 1] = pos[i, 1]
        m = intents[i]
        if tagged[i] or m == STAY or m == TAG_INTENT:
            continue
        if uniform(key, t_now, i, SLIP) < fp[F_SLIP]:
            continue
        nx, ny = pos[i, 0] + _DX[m], pos[i, 1] + _DY[m]
        if 0 <= nx < ip[P_W] and 0 <= ny < ip[P_H]:
            want[i, 0] = nx
            want[i, 1] = ny
    changed = True
    while changed:
        changed = False
        for i in range(n):
            if want[i, 0] == pos[i, 0] and want[i, 1] == pos[i, 1]:
                continue
            blocked = False
            for j in range(n):
                if j == i:
                    continue
                if want[j, 0] == want[i, 0] and want[j, 1] == want[i, 1]:
                    staying = want[j, 0] == pos[j, 0] and want[j, 1] == pos[j, 1]
                    if staying or j < i:
                        blocked = True
                        break
                # no swapping through each other
                if (want[j, 0] == pos[i, 0] and want[j, 1] == pos[i, 1]
                        and want[i, 0] == pos[j, 0] and want[i, 1] == pos[j, 1]):
                    blocked = True
                    break
            if blocked:
                want[i, 0] = pos[i, 0]
                want[i, 1] = pos[i, 1]
                changed = True
    for i in range(n):
        pos[i, 0] = want[i, 0]
        pos[i, 1] = want[i, 1]
    for i in range(n):
        ti = team_of(ip, i)
        if pos[i, 0] == flag[1 - ti, 0] and pos[i, 1] == flag[1 - ti, 1]:
            rew[ti] += fp[F_CAPTURE]
            rew[1 - ti] -= fp[F_CAPTURE]
            meta[2] = ti
            events[0, 1] = ti
            break
    rew[0] += ip[P_NB] * fp[F_STEP]
    rew[1] += ip[P_NR] * fp[F_STEP]
    meta[0] = t_now + 1
    if meta[2] >= 0 or meta[0] >= ip[P_HORIZON]:
        meta[1] = 1


@njit(cache=True)
def post_step(ip, vp, sentry, pincer, pos, macro, stage, msteps, budget, tagged, terminated):
    """Update macro progress after a step; mark robots whose macro ended."""
    n = ip[P_NB] + ip[P_NR]
    for i in range(n):
        terminated[i] = 0
        if macro[i] < 0:
            continue
        msteps[i] += 1
        if tagged[i] or advance(ip, vp, sentry, pincer, pos, macro, stage, msteps, budget, i, True):
            terminated[i] = 1
            macro[i] = -1


@njit(cache=True)
def advance_world(ip, fp, vp, spawn, sentry, pincer, pos, macro, stage, msteps, budget,
                  flag, meta, key, intents, rew, tagged, events, terminated):
    n = ip[P_NB] + ip[P_NR]
    for i in range(n):
        intents[i] = macro_intent(ip, vp, sentry, pincer, pos, macro, stage, i)
    step_world(ip, fp, spawn, pos, flag, meta, intents, key, rew, tagged, events)
    post_step(ip, vp, sentry, pincer, pos, macro, stage, msteps, budget, tagged, terminated)


# ---------------------------------------------------------------- policies

@njit(cache=True)
def categorical(row, n, u):
    """Inverse-CDF draw from ``row[:n]`` with uniform ``u``."""
    c = 0.0
    last = -1
    for j in range(n):
        p = row[j]
        if p > 0.0:
            last = j
        c += p
        if u < c:
            return j
    return last


@njit(cache=True)
def masked_categorical(row, mask, n, u):
    """Draw from ``row`` restricted to ``mask``; -1 if the mask has no mass."""
    total = 0.0
    for j in range(n):
        if mask[j]:
            total += row[j]
    if total <= 0.0:
        return -1
    target = u * total
    c = 0.0
    last = -1
    for j in range(n):
        if mask[j] and row[j] > 0.0:
            c += row[j]
            last = j
            if target < c:
                return j
    return last


@njit(cache=True)
def nearest_vantage_move(ip, vp, pos, i):
    """Move to the closest vantage point on either side (ties: lowest id)."""
    t = team_of(ip, i)
    v = ip[P_V]
    best, best_d = 0, 1 << 30
    for a in range(2 * v):
        side = t if a < v else 1 - t
        j = a if a < v else a - v
        d = dist(pos[i, 0], pos[i, 1], vp[side, j, 0], vp[side, j, 1])
        if d < best_d:
            best, best_d = a, d
    return best


@njit(cache=True)
def controller_choice(ip, vp, pos, i, row, mask, u):
    """Macro drawn from output row ``row``; falls back to an eligible macro."""
    a = categorical(row, ip[P_A], u)
    if a >= 0 and mask[a]:
        return a
    b = masked_categorical(row, mask, ip[P_A], u)
    if b >= 0:
        return b
    return nearest_vantage_move(ip, vp, pos, i)


@njit(cache=True)
def script_decide(ip, vp, pincer, cand, scout, tactic, i, pos, obs, tag_ok, mem):
    """Scripted macro choice for tactics DL, DR, DC, AS, AA.

    ``mem`` is the robot's script memory: [1] scout pointer, [2] bitmask of
    ruled-out flag candidates, [3] DR toggle.
    """
    v = ip[P_V]
    tag_a = ip[P_A] - 1
    t, r = team_of(ip, i), role_of(ip, i)
    x, y = pos[i, 0], pos[i, 1]
    if tactic == DL or tactic == DC:
        if tag_ok:
            return tag_a
        return 2 * v + (ip[P_DL] if tactic == DL else ip[P_DC])
    if tactic == DR:
        if tag_ok:
            return tag_a
        p = ip[P_DR_A] if mem[3] == 0 else ip[P_DR_B]
        mem[3] ^= 1
        if vp[t, p, 0] == x and vp[t, p, 1] == y:
            p = ip[P_DR_A] if mem[3] == 0 else ip[P_DR_B]
            mem[3] ^= 1
        return p
    # AS / AA: scout enemy vantage points, pincer the estimated flag point
    e = 1 - t
    own = obs & 1
    seen = (obs >> 1) & 1
    close = (obs >> 2) & 1
    nc = ip[P_NCAND]
    if not own and not seen:
        for k in range(nc):
            if dist(x, y, vp[e, cand[k], 0], vp[e, cand[k], 1]) <= ip[P_SIGHT]:
                mem[2] |= 1 << k
    if mem[2] == (1 << nc) - 1:
        mem[2] = 0
    if tactic == AA and not own and close:
        return ip[P_SAFE]
    if seen and not own:
        best, best_d = -1, 1 << 30
        for k in range(nc):
            d = dist(x, y, vp[e, cand[k], 0], vp[e, cand[k], 1])
            if d <= ip[P_SIGHT] and not (mem[2] >> k) & 1 and d < best_d:
                best, best_d = k, d
        if best < 0:
            for k in range(nc):
                d = dist(x, y, vp[e, cand[k], 0], vp[e, cand[k], 1])
                if d < best_d:
                    best, best_d = k, d
        mem[2] |= 1 << best
        target = cand[best]
        for q in range(ip[P_PN]):
            if pincer[q, 3] == target and r < 3:
                return 2 * v + ip[P_S] + q
        return v + target
    ns = ip[P_NSCOUT]
    fallback = -1
    for step in range(ns):
        sp = scout[(mem[1] + r + step) % ns]
        if vp[e, sp, 0] == x and vp[e, sp, 1] == y:
            continue
        if fallback < 0:
            fallback = sp
        useful = False
        for k in range(nc):
            if not (mem[2] >> k) & 1:
                if dist(vp[e, sp, 0], vp[e, sp, 1], vp[e, cand[k], 0], vp[e, cand[k], 1]) <= ip[P_SIGHT]:
                    useful = True
        if useful:
            mem[1] = (mem[1] + step) % ns
            return v + sp
    if fallback < 0:
        fallback = scout[0]
    return v + fallback


@njit(cache=True)
def compiled_decide(ip, vp, pincer, cand, scout, pos, i, obs, mask, key, t,
                    kind, lam, dlt, gate, edge, init_sub, nsub, nnode,
                    roster, switch, init_tac, ntac,
                    started, csub, cnode, stac, smem):
    """Macro choice of a compiled robot (controller or scripted tactic)."""
    if kind[i] == 0:
        k = nnode[i]
        if not started[i]:
            started[i] = 1
            csub[i] = init_sub[i]
            cnode[i] = 0
        else:
            s = csub[i]
            v2 = categorical(dlt[i, s, cnode[i], obs], k, uniform(key, t, i, NODE))
            if nsub[i] > 1 and uniform(key, t, i, GATE) < gate[i, s, v2]:
                g = categorical(edge[i, s * k + v2], nsub[i] * k, uniform(key, t, i, EDGE))
                csub[i] = g // k
                cnode[i] = g % k
            else:
                cnode[i] = v2
        row = lam[i, csub[i], cnode[i]]
        return controller_choice(ip, vp, pos, i, row, mask, uniform(key, t, i, ACTION))
    if not started[i]:
        started[i] = 1
        if init_tac[i] >= 0:
            stac[i] = init_tac[i]
        else:
            # one draw per team: the opposition opens with a whole team tactic
            first = 0 if team_of(ip, i) == 0 else ip[P_NB]
            stac[i] = min(int(uniform(key, 0, first, EDGE) * ntac[i]), ntac[i] - 1)
    else:
        s2 = categorical(switch[i, stac[i]], ntac[i], uniform(key, t, i, EDGE))
        if s2 != stac[i]:
            stac[i] = s2
            for m in range(smem.shape[1]):
                smem[i, m] = 0
    tag_ok = mask[ip[P_A] - 1]
    return script_decide(ip, vp, pincer, cand, scout, roster[i, stac[i]], i, pos, obs, tag_ok, smem[i])


@njit(cache=True)
def run_one(ip, fp, vp, spawn, sentry, pincer, cand, scout,
            kind, lam, dlt, gate, edge, init_sub, nsub, nnode,
            roster, switch, init_tac, ntac, key, ret):
    """Play one episode with compiled policies; returns (steps, winner)."""
    n = ip[P_NB] + ip[P_NR]
    pos = np.empty((n, 2), dtype=np.int64)
    macro = np.empty(n, dtype=np.int64)
    stage = np.empty(n, dtype=np.int64)
    msteps = np.empty(n, dtype=np.int64)
    budget = np.empty(n, dtype=np.int64)
    flag = np.empty((2, 2), dtype=np.int64)
    meta = np.empty(3, dtype=np.int64)
    reset(ip, vp, spawn, cand, key, pos, macro, stage, msteps, budget, flag, meta)
    started = np.zeros(n, dtype=np.int64)
    csub = np.zeros(n, dtype=np.int64)
    cnode = np.zeros(n, dtype=np.int64)
    stac = np.zeros(n, dtype=np.int64)
    smem = np.zeros((n, 4), dtype=np.int64)
    mask = np.zeros(ip[P_A], dtype=np.bool_)
    intents = np.zeros(n, dtype=np.int64)
    rew = np.zeros(2)
    tagged = np.zeros(n, dtype=np.int64)
    events = np.zeros((n + 1, 2), dtype=np.int64)
    terminated = np.zeros(n, dtype=np.int64)
    ret[0] = 0.0
    ret[1] = 0.0
    disc = 1.0
    while meta[1] == 0:
        t = meta[0]
        for i in range(n):
            if macro[i] >= 0:
                continue
            obs = observe(ip, vp, pos, flag, macro, i)
            eligible_mask(ip, pos, i, mask)
            a = compiled_decide(ip, vp, pincer, cand, scout, pos, i, obs, mask, key, t,
                                kind, lam, dlt, gate, edge, init_sub, nsub, nnode,
                                roster, switch, init_tac, ntac,
                                started, csub, cnode, stac, smem)
            start_macro(ip, vp, sentry, pincer, pos, macro, stage, msteps, budget, i, a)
        advance_world(ip, fp, vp, spawn, sentry, pincer, pos, macro, stage, msteps, budget,
                      flag, meta, key, intents, rew, tagged, events, terminated)
        ret[0] += disc * rew[0]
        ret[1] += disc * rew[1]
        disc *= fp[F_GAMMA]
    return meta[0], meta[2]


@njit(cache=True)
def run_batch(ip, fp, vp, spawn, sentry, pincer, cand, scout,
              kind, lam, dlt, gate, edge, init_sub, nsub, nnode,
              roster, switch, init_tac, ntac, base_key, first, count, out):
    """Episodes ``first .. first+count-1``; ``out[e] = (blue, red, steps, winner)``."""
    ret = np.zeros(2)
    for e in range(count):
        key = episode_key(base_key, first + e)
        steps, winner = run_one(ip, fp, vp, spawn, sentry, pincer, cand, scout,
                                kind, lam, dlt, gate, edge, init_sub, nsub, nnode,
                                roster, switch, init_tac, ntac, key, ret)
        out[e, 0] = ret[0]
        out[e, 1] = ret[1]
        out[e, 2] = steps
        out[e, 3] = winner
