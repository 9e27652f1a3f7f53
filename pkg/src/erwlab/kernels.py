"""Hot loops, each in a numba flavour (``*_nb``) and a numpy flavour (``*_np``).

Conventions shared by every pair:

* ``rows`` independent replicates are produced.  A numba kernel receives a
  single generator and fills its rows one after another; the public
  wrappers at the bottom call it once per generator when each replicate owns
  a stream.  A numpy kernel receives the list of generators and vectorises
  across rows with :class:`~erwlab._backend.Blocks`.
* Every row draws from its stream in the same order in both flavours, so
  with one stream per replicate the two flavours agree to the last bit.
* A step from absolute time ``t`` at position ``s`` goes up with
  probability ``0.5 + (2p - 1) * s / (2t)`` (``0.5`` at ``t = 0``).
"""

import math

import numpy as np

from ._backend import Blocks, njit, resolve
from .errors import NumericError, ResourceError

INV_SQRT2 = 1.0 / math.sqrt(2.0)

OK, EXIT_BUDGET, CELL_BUDGET = 0, 1, 2


# --------------------------------------------------------------------------
# walk: full paths, marginal law
# --------------------------------------------------------------------------

@njit
def walk_paths_nb(gen, rows, p, k, n):
    out = np.empty((rows, n + 1), np.int64)
    c = 2.0 * p - 1.0
    for r in range(rows):
        s = 0
        out[r, 0] = 0
        for j in range(n):
            t = k + j
            u = gen.random()
            if t == 0:
                q = 0.5
            else:
                q = 0.5 + c * s / (2.0 * t)
            if u < q:
                s += 1
            else:
                s -= 1
            out[r, j + 1] = s
    return out


def walk_paths_np(gens, rows, p, k, n):
    blocks = Blocks(gens, rows, "random", block=min(max(n, 1), 4096))
    out = np.empty((rows, n + 1), np.int64)
    out[:, 0] = 0
    s = np.zeros(rows, np.int64)
    idx = np.arange(rows)
    c = 2.0 * p - 1.0
    for j in range(n):
        t = k + j
        u = blocks.take(idx)
        q = 0.5 if t == 0 else 0.5 + c * s / (2.0 * t)
        s = np.where(u < q, s + 1, s - 1)
        out[:, j + 1] = s
    return out


# --------------------------------------------------------------------------
# walk: full paths, uniform memory recall
# --------------------------------------------------------------------------

@njit
def walk_memory_nb(gen, rows, p, k, n):
    out = np.empty((rows, n + 1), np.int64)
    hist = np.empty(k + n, np.int64)
    for r in range(rows):
        for i in range(k):
            hist[i] = 1 if i % 2 == 0 else -1
        s = 0
        out[r, 0] = 0
        for j in range(n):
            m = k + j
            if m == 0:
                x = 1 if gen.random() < 0.5 else -1
            else:
                i = int(gen.random() * m)
                if i >= m:
                    i = m - 1
                e = 1 if gen.random() < p else -1
                x = e * hist[i]
            hist[m] = x
            s += x
            out[r, j + 1] = s
    return out


def walk_memory_np(gens, rows, p, k, n):
    blocks = Blocks(gens, rows, "random", block=min(max(2 * n, 2), 4096))
    out = np.empty((rows, n + 1), np.int64)
    out[:, 0] = 0
    hist = np.empty((rows, k + n), np.int64)
    hist[:, :k] = np.where(np.arange(k) % 2 == 0, 1, -1)
    idx = np.arange(rows)
    s = np.zeros(rows, np.int64)
    for j in range(n):
        m = k + j
        if m == 0:
            x = np.where(blocks.take(idx) < 0.5, 1, -1)
        else:
            i = np.minimum((blocks.take(idx) * m).astype(np.int64), m - 1)
            e = np.where(blocks.take(idx) < p, 1, -1)
            x = e * hist[idx, i]
        hist[:, m] = x
        s = s + x
        out[:, j + 1] = s
    return out


# --------------------------------------------------------------------------
# walk: zero counts at checkpoints (no path storage)
# --------------------------------------------------------------------------

@njit
def zero_counts_nb(gen, rows, p, k, checkpoints):
    ncp = checkpoints.shape[0]
    n = checkpoints[ncp - 1] if ncp > 0 else 0
    out = np.zeros((rows, ncp), np.int64)
    c = 2.0 * p - 1.0
    for r in range(rows):
        s = 0
        z = 0
        ci = 0
        while ci < ncp and checkpoints[ci] == 0:
            ci += 1
        for j in range(n):
            t = k + j
            u = gen.random()
            if t == 0:
                q = 0.5
            else:
                q = 0.5 + c * s / (2.0 * t)
            if u < q:
                s += 1
            else:
                s -= 1
            if s == 0:
                z += 1
            while ci < ncp and checkpoints[ci] == j + 1:
                out[r, ci] = z
                ci += 1
    return out


def zero_counts_np(gens, rows, p, k, checkpoints):
    checkpoints = np.asarray(checkpoints, np.int64)
    ncp = checkpoints.shape[0]
    n = int(checkpoints[-1]) if ncp else 0
    blocks = Blocks(gens, rows, "random", block=min(max(n, 1), 4096))
    out = np.zeros((rows, ncp), np.int64)
    s = np.zeros(rows, np.int64)
    z = np.zeros(rows, np.int64)
    idx = np.arange(rows)
    c = 2.0 * p - 1.0
    for j in range(n):
        t = k + j
        u = blocks.take(idx)
        q = 0.5 if t == 0 else 0.5 + c * s / (2.0 * t)
        s = np.where(u < q, s + 1, s - 1)
        z += s == 0
        for ci in np.flatnonzero(checkpoints == j + 1):
            out[:, ci] = z
    return out


# --------------------------------------------------------------------------
# walk: first return time, censored at cap
# --------------------------------------------------------------------------

@njit
def first_return_nb(gen, rows, p, k, cap):
    values = np.empty(rows, np.int64)
    censored = np.zeros(rows, np.bool_)
    c = 2.0 * p - 1.0
    for r in range(rows):
        s = 0
        m = 0
        while m < cap:
            t = k + m
            u = gen.random()
            if t == 0:
                q = 0.5
            else:
                q = 0.5 + c * s / (2.0 * t)
            if u < q:
                s += 1
            else:
                s -= 1
            m += 1
            if s == 0:
                break
        values[r] = m
        censored[r] = s != 0
    return values, censored


def first_return_np(gens, rows, p, k, cap):
    blocks = Blocks(gens, rows, "random", block=min(max(cap, 1), 1024))
    values = np.full(rows, cap, np.int64)
    censored = np.ones(rows, np.bool_)
    active = np.arange(rows)
    s = np.zeros(rows, np.int64)
    c = 2.0 * p - 1.0
    for m in range(cap):
        if active.size == 0:
            break
        t = k + m
        u = blocks.take(active)
        sa = s[active]
        q = 0.5 if t == 0 else 0.5 + c * sa / (2.0 * t)
        sa = np.where(u < q, sa + 1, sa - 1)
        s[active] = sa
        hit = sa == 0
        done = active[hit]
        values[done] = m + 1
        censored[done] = False
        active = active[~hit]
    return values, censored


# --------------------------------------------------------------------------
# walk: absolute times of the first `count` zeros
# --------------------------------------------------------------------------

@njit
def zero_times_nb(gen, rows, p, k, count, max_steps):
    out = np.full((rows, count), -1, np.int64)
    c = 2.0 * p - 1.0
    for r in range(rows):
        s = 0
        found = 0
        m = 0
        while found < count and m < max_steps:
            t = k + m
            u = gen.random()
            if t == 0:
                q = 0.5
            else:
                q = 0.5 + c * s / (2.0 * t)
            if u < q:
                s += 1
            else:
                s -= 1
            m += 1
            if s == 0:
                out[r, found] = k + m
                found += 1
    return out


def zero_times_np(gens, rows, p, k, count, max_steps):
    blocks = Blocks(gens, rows, "random", block=1024)
    out = np.full((rows, count), -1, np.int64)
    found = np.zeros(rows, np.int64)
    s = np.zeros(rows, np.int64)
    active = np.arange(rows) if count > 0 else np.arange(0)
    c = 2.0 * p - 1.0
    for m in range(max_steps):
        if active.size == 0:
            break
        t = k + m
        u = blocks.take(active)
        sa = s[active]
        q = 0.5 if t == 0 else 0.5 + c * sa / (2.0 * t)
        sa = np.where(u < q, sa + 1, sa - 1)
        s[active] = sa
        hit = active[sa == 0]
        out[hit, found[hit]] = k + m + 1
        found[hit] += 1
        active = active[found[active] < count]
    return out


# --------------------------------------------------------------------------
# exact forward propagation of the chain (n, S(n))
# --------------------------------------------------------------------------

@njit
def exact_dp_nb(p, k, horizon, killed, keep):
    size = horizon + 2
    mass = np.zeros(size)
    new = np.zeros(size)
    mass[0] = 1.0
    survival = np.empty(horizon + 1)
    p_zero = np.empty(horizon + 1)
    survival[0] = 1.0
    p_zero[0] = 1.0
    flat = np.empty((horizon + 1) * (horizon + 2) // 2 if keep else 0)
    if keep:
        flat[0] = 1.0
    c = 2.0 * p - 1.0
    for m in range(horizon):
        t = k + m
        for i in range(m + 2):
            new[i] = 0.0
        for i in range(m + 1):
            if t == 0:
                q = 0.5
            else:
                q = 0.5 + c * (2 * i - m) / (2.0 * t)
            new[i + 1] += mass[i] * q
            new[i] += mass[i] * (1.0 - q)
        m1 = m + 1
        if m1 % 2 == 0:
            z = m1 // 2
            p_zero[m1] = new[z]
            if killed:
                new[z] = 0.0
        else:
            p_zero[m1] = 0.0
        tot = 0.0
        for i in range(m1 + 1):
            tot += new[i]
        survival[m1] = tot
        if keep:
            off = m1 * (m1 + 1) // 2
            for i in range(m1 + 1):
                flat[off + i] = new[i]
        mass, new = new, mass
    return survival, p_zero, flat


def exact_dp_np(p, k, horizon, killed, keep):
    mass = np.array([1.0])
    survival = np.empty(horizon + 1)
    p_zero = np.empty(horizon + 1)
    survival[0] = 1.0
    p_zero[0] = 1.0
    flat = np.empty((horizon + 1) * (horizon + 2) // 2 if keep else 0)
    if keep:
        flat[0] = 1.0
    c = 2.0 * p - 1.0
    for m in range(horizon):
        t = k + m
        if t == 0:
            q = np.full(m + 1, 0.5)
        else:
            q = 0.5 + c * np.arange(-m, m + 1, 2) / (2.0 * t)
        new = np.zeros(m + 2)
        new[1:] += mass * q
        new[:-1] += mass * (1.0 - q)
        m1 = m + 1
        if m1 % 2 == 0:
            z = m1 // 2
            p_zero[m1] = new[z]
            if killed:
                new[z] = 0.0
        else:
            p_zero[m1] = 0.0
        survival[m1] = np.cumsum(new)[-1]
        if keep:
            off = m1 * (m1 + 1) // 2
            flat[off:off + m1 + 1] = new
        mass = new
    return survival, p_zero, flat


# --------------------------------------------------------------------------
# Brownian exit from (-x, x) started at offset y
# --------------------------------------------------------------------------
#
# Adaptive Gaussian steps of variance d^2/res, d the distance to the nearer
# barrier.  Once d <= shell*x the side is drawn by gambler's ruin from the
# current point and the expected residual time x^2 - w^2 is added; a step
# that jumps a barrier adds the (negative) correction x^2 - w^2 too.  By
# optional stopping for w^2 - t the mean exit time is exactly x^2 - y^2 and
# the exit side is exactly Bernoulli((x + y) / 2x).

@njit
def _exit_core(gen, x, y, res, shell, max_steps, target):
    # target = 0: free exit; target = +-1: redo until that side comes out
    if abs(y) >= x:
        side = 1 if y > 0.0 else -1
        return 0.0, side, y - side * x, 0.0, OK
    eps = shell * x
    steps = 0
    while True:
        w = y
        t = 0.0
        dlt = 0.0
        side = 0
        err = 0.0
        tol = 0.0
        while True:
            d = x - abs(w)
            if d <= eps:
                z = gen.standard_normal()
                u = 0.5 * math.erfc(-z * INV_SQRT2)
                side = 1 if u < (x + w) / (2.0 * x) else -1
                t += x * x - w * w
                err = w - side * x
                tol = max(eps, 2.0 * math.sqrt(dlt))
                break
            if steps >= max_steps:
                return t, 0, 0.0, 0.0, EXIT_BUDGET
            dlt = d * d / res
            w += math.sqrt(dlt) * gen.standard_normal()
            t += dlt
            steps += 1
            if abs(w) >= x:
                side = 1 if w > 0.0 else -1
                t += x * x - w * w
                if t < 0.0:
                    t = 0.0
                err = w - side * x
                tol = 2.0 * math.sqrt(dlt)
                break
        if target == 0 or side == target:
            return t, side, err, tol, OK


@njit
def exits_nb(gen, rows, x, y, res, shell, max_steps, exact_side):
    times = np.empty(rows)
    sides = np.empty(rows, np.int64)
    errs = np.empty(rows)
    status = OK
    for r in range(rows):
        target = 0
        if exact_side and abs(y) < x:
            u = 0.5 * math.erfc(-gen.standard_normal() * INV_SQRT2)
            target = 1 if u < (x + y) / (2.0 * x) else -1
        t, side, err, tol, st = _exit_core(gen, x, y, res, shell, max_steps, target)
        if st != OK:
            status = st
            break
        times[r] = t
        sides[r] = side
        errs[r] = err
    return times, sides, errs, status


class _ExitState:
    """Vectorised state of one exit problem per row (numpy flavour)."""

    def __init__(self, rows, res, shell, max_steps, exact_side):
        self.res, self.shell, self.max_steps = res, shell, max_steps
        self.exact_side = exact_side
        self.x = np.ones(rows)
        self.y = np.zeros(rows)
        self.w = np.zeros(rows)
        self.t = np.zeros(rows)
        self.dlt = np.zeros(rows)
        self.steps = np.zeros(rows, np.int64)
        self.target = np.zeros(rows, np.int64)
        self.pending_target = np.zeros(rows, np.bool_)

    def start(self, rows, x, y):
        """Begin a fresh problem for ``rows``; returns rows resolved at once."""
        self.x[rows] = x
        self.y[rows] = y
        self.w[rows] = y
        self.t[rows] = 0.0
        self.dlt[rows] = 0.0
        self.steps[rows] = 0
        self.target[rows] = 0
        degenerate = np.abs(y) >= x
        self.pending_target[rows] = self.exact_side & ~degenerate
        return rows[degenerate]

    def step(self, rows, z):
        """Consume one normal per row.

        Returns (finished_rows, sides, errs, tols, over_budget_rows).
        """
        x, w = self.x[rows], self.w[rows]
        # rows still waiting for their exact-side target use z for it
        pend = self.pending_target[rows]
        if pend.any():
            pr = rows[pend]
            u = np.array([0.5 * math.erfc(-v * INV_SQRT2) for v in z[pend]])
            self.target[pr] = np.where(
                u < (self.x[pr] + self.y[pr]) / (2.0 * self.x[pr]), 1, -1)
            self.pending_target[pr] = False
        live = ~pend
        rows_l, z_l, x_l, w_l = rows[live], z[live], x[live], w[live]
        d = x_l - np.abs(w_l)
        eps = self.shell * x_l
        shell = d <= eps
        budget = (~shell) & (self.steps[rows_l] >= self.max_steps)
        fin_rows, fin_side, fin_err, fin_tol = [], [], [], []
        if shell.any():
            sr = rows_l[shell]
            ws, xs = w_l[shell], x_l[shell]
            u = np.array([0.5 * math.erfc(-v * INV_SQRT2) for v in z_l[shell]])
            side = np.where(u < (xs + ws) / (2.0 * xs), 1, -1)
            self.t[sr] += xs * xs - ws * ws
            fin_rows.append(sr)
            fin_side.append(side)
            fin_err.append(ws - side * xs)
            fin_tol.append(np.maximum(eps[shell], 2.0 * np.sqrt(self.dlt[sr])))
        mv = ~shell & ~budget
        if mv.any():
            mr = rows_l[mv]
            dl = d[mv] * d[mv] / self.res
            wn = w_l[mv] + np.sqrt(dl) * z_l[mv]
            self.w[mr] = wn
            self.t[mr] += dl
            self.dlt[mr] = dl
            self.steps[mr] += 1
            xm = x_l[mv]
            out = np.abs(wn) >= xm
            if out.any():
                orr = mr[out]
                wo, xo = wn[out], xm[out]
                side = np.where(wo > 0.0, 1, -1)
                self.t[orr] = np.maximum(self.t[orr] + (xo * xo - wo * wo), 0.0)
                fin_rows.append(orr)
                fin_side.append(side)
                fin_err.append(wo - side * xo)
                fin_tol.append(2.0 * np.sqrt(self.dlt[orr]))
        if fin_rows:
            fr = np.concatenate(fin_rows)
            fs = np.concatenate(fin_side)
            fe = np.concatenate(fin_err)
            ft = np.concatenate(fin_tol)
            # exact-side mode: a wrong side restarts the same problem
            tgt = self.target[fr]
            redo = (tgt != 0) & (fs != tgt)
            if redo.any():
                rr = fr[redo]
                self.w[rr] = self.y[rr]
                self.t[rr] = 0.0
                self.dlt[rr] = 0.0
            keep = ~redo
            fr, fs, fe, ft = fr[keep], fs[keep], fe[keep], ft[keep]
        else:
            fr = np.empty(0, np.int64)
            fs = np.empty(0, np.int64)
            fe = fr.astype(float)
            ft = fe
        return fr, fs, fe, ft, rows_l[budget]


def exits_np(gens, rows, x, y, res, shell, max_steps, exact_side):
    times = np.empty(rows)
    sides = np.empty(rows, np.int64)
    errs = np.empty(rows)
    st = _ExitState(rows, res, shell, max_steps, exact_side)
    allrows = np.arange(rows)
    instant = st.start(allrows, np.full(rows, float(x)), np.full(rows, float(y)))
    if instant.size:
        side = 1 if y > 0.0 else -1
        times[instant] = 0.0
        sides[instant] = side
        errs[instant] = y - side * x
    active = np.setdiff1d(allrows, instant)
    blocks = Blocks(gens, rows, "normal", block=512)
    while active.size:
        z = blocks.take(active)
        fr, fs, fe, _, over = st.step(active, z)
        if over.size:
            return times, sides, errs, EXIT_BUDGET
        times[fr] = st.t[fr]
        sides[fr] = fs
        errs[fr] = fe
        active = np.setdiff1d(active, fr, assume_unique=True)
    return times, sides, errs, OK


# --------------------------------------------------------------------------
# embedded martingale path: iterated exits driving a coupled walk
# --------------------------------------------------------------------------

@njit
def embed_nb(gen, rows, p, k, n, a, res, shell, max_steps, exact_side):
    times = np.zeros((rows, n + 1))
    comp = np.zeros((rows, n + 1))
    pos = np.zeros((rows, n + 1), np.int64)
    errs = np.zeros((rows, n + 1))
    tols = np.zeros((rows, n + 1))
    lin = 1.0 - 2.0 * p
    status = OK
    for r in range(rows):
        s = 0
        T = 0.0
        V = 0.0
        for j in range(n):
            ta = k + j
            x = a[ta + 1]
            if s == 0:
                c = 0.0
            else:
                c = lin / (ta + 2.0 * p - 1.0) * (a[ta] * s)
            y = -c
            target = 0
            if exact_side and abs(y) < x:
                u = 0.5 * math.erfc(-gen.standard_normal() * INV_SQRT2)
                target = 1 if u < (x + y) / (2.0 * x) else -1
            tau, side, err, tol, st = _exit_core(gen, x, y, res, shell, max_steps, target)
            if st != OK:
                return times, comp, pos, errs, tols, st
            s += side
            T += tau
            V += c * c
            times[r, j + 1] = T
            comp[r, j + 1] = V
            pos[r, j + 1] = s
            errs[r, j + 1] = err
            tols[r, j + 1] = tol
    return times, comp, pos, errs, tols, status


def embed_np(gens, rows, p, k, n, a, res, shell, max_steps, exact_side):
    times = np.zeros((rows, n + 1))
    comp = np.zeros((rows, n + 1))
    pos = np.zeros((rows, n + 1), np.int64)
    errs = np.zeros((rows, n + 1))
    tols = np.zeros((rows, n + 1))
    lin = 1.0 - 2.0 * p
    j = np.zeros(rows, np.int64)
    s = np.zeros(rows, np.int64)
    T = np.zeros(rows)
    V = np.zeros(rows)
    cur_c = np.zeros(rows)
    st = _ExitState(rows, res, shell, max_steps, exact_side)
    blocks = Blocks(gens, rows, "normal", block=1024)

    def setup(rr):
        # start problem j[rr]; degenerate ones resolve at once, so loop
        while rr.size:
            ta = k + j[rr]
            x = a[ta + 1]
            sr = s[rr]
            # s = 0 has no shift; the guard also covers t + 2p - 1 = 0 at the origin
            den = np.where(sr == 0, 1.0, ta + 2.0 * p - 1.0)
            c = np.where(sr == 0, 0.0, lin / den * (a[ta] * sr))
            cur_c[rr] = c
            inst = st.start(rr, x, -c)
            if inst.size == 0:
                return
            yi, xi = -cur_c[inst], st.x[inst]
            side = np.where(yi > 0.0, 1, -1)
            finish(inst, side, yi - side * xi, np.zeros(inst.size), np.zeros(inst.size))
            rr = inst[j[inst] < n]

    def finish(fr, fs, fe, ft, tau):
        s[fr] += fs
        T[fr] += tau
        V[fr] += cur_c[fr] ** 2
        j[fr] += 1
        jj = j[fr]
        times[fr, jj] = T[fr]
        comp[fr, jj] = V[fr]
        pos[fr, jj] = s[fr]
        errs[fr, jj] = fe
        tols[fr, jj] = ft

    if n > 0:
        setup(np.arange(rows))
    active = np.flatnonzero(j < n)
    while active.size:
        z = blocks.take(active)
        fr, fs, fe, ft, over = st.step(active, z)
        if over.size:
            return times, comp, pos, errs, tols, EXIT_BUDGET
        if fr.size:
            finish(fr, fs, fe, ft, st.t[fr].copy())
            nxt = fr[j[fr] < n]
            setup(nxt)
        active = np.flatnonzero(j < n)
    return times, comp, pos, errs, tols, OK


# --------------------------------------------------------------------------
# stable-1/2 subordinator on a local-time grid: H-type integrals and inverses
# --------------------------------------------------------------------------
#
# lambda(u_i) is the running sum of i.i.d. du^2 / Z^2 increments.  Cells are
# consumed in pairs.  Along one path two Riemann sums of lambda^gamma are
# kept: f on the grid du and c on the grid 2 du (right endpoints; the first
# cell of each integrates a linear ramp from 0, a factor 1 / (1 + gamma)).
# For gamma < 0 the sums are biased by O(du^(1 + 2 gamma)) from the
# singularity at lambda = 0, so they are combined as
#
#     (rich * f - c) / (rich - 1),    rich = 2^min(1, 1 + 2 gamma),
#
# which cancels the leading term (for gamma >= 0 it is O(du)).  rich <= 1 returns f alone.  Values are read at
# even cells only, where the combination is non-decreasing.

@njit
def _combine(f, c, rich):
    if rich <= 1.0:
        return f
    v = (rich * f - c) / (rich - 1.0)
    return v if v > 0.0 else 0.0


@njit
def h_levels_nb(gen, rows, levels, gamma, du, rich, max_cells):
    nl = levels.shape[0]
    out = np.zeros((rows, nl))
    du2 = du * du
    w1 = 1.0 / (1.0 + gamma)
    for r in range(rows):
        lam = 0.0
        f = 0.0
        c = 0.0
        i = 0
        li = 0
        while li < nl:
            z1 = gen.standard_normal()
            z2 = gen.standard_normal()
            lam1 = lam + du2 / (z1 * z1)
            lam = lam1 + du2 / (z2 * z2)
            while li < nl and lam > levels[li]:
                out[r, li] = _combine(f, c, rich)
                li += 1
            if li == nl:
                break
            i += 2
            if i > max_cells:
                return out, CELL_BUDGET
            g1 = lam1 ** gamma
            g2 = lam ** gamma
            if i == 2:
                f += (g1 * w1 + g2) * du
                c += g2 * w1 * 2.0 * du
            else:
                f += (g1 + g2) * du
                c += g2 * 2.0 * du
    return out, OK


def _pair_terms(lam1, lam2, first, gamma, du):
    w1 = 1.0 / (1.0 + gamma)
    g1 = lam1 ** gamma
    g2 = lam2 ** gamma
    if first:
        return (g1 * w1 + g2) * du, g2 * w1 * 2.0 * du
    return (g1 + g2) * du, g2 * 2.0 * du


def _combine_np(f, c, rich):
    if rich <= 1.0:
        return f
    return np.maximum((rich * f - c) / (rich - 1.0), 0.0)


def h_levels_np(gens, rows, levels, gamma, du, rich, max_cells):
    levels = np.asarray(levels, float)
    nl = levels.shape[0]
    out = np.zeros((rows, nl))
    blocks = Blocks(gens, rows, "normal", block=1024)
    lam = np.zeros(rows)
    f = np.zeros(rows)
    c = np.zeros(rows)
    li = np.zeros(rows, np.int64)
    active = np.arange(rows) if nl else np.arange(0)
    du2 = du * du
    i = 0
    while active.size:
        z1 = blocks.take(active)
        z2 = blocks.take(active)
        lam1 = lam[active] + du2 / (z1 * z1)
        la = lam1 + du2 / (z2 * z2)
        lam[active] = la
        # close every level the new value jumped over
        while True:
            lv = li[active] < nl
            hit = np.zeros(active.size, np.bool_)
            hit[lv] = la[lv] > levels[li[active][lv]]
            if not hit.any():
                break
            hr = active[hit]
            out[hr, li[hr]] = _combine_np(f[hr], c[hr], rich)
            li[hr] += 1
        keep = li[active] < nl
        active, la, lam1 = active[keep], la[keep], lam1[keep]
        if not active.size:
            break
        i += 2
        if i > max_cells:
            return out, CELL_BUDGET
        df, dc = _pair_terms(lam1, la, i == 2, gamma, du)
        f[active] += df
        c[active] += dc
    return out, OK


@njit
def eta_targets_nb(gen, rows, targets, gamma, du, rich, inv_beta, max_cells):
    nt = targets.shape[0]
    out = np.zeros((rows, nt))
    du2 = du * du
    w1 = 1.0 / (1.0 + gamma)
    for r in range(rows):
        lam = 0.0
        f = 0.0
        c = 0.0
        i = 0
        li = 0
        while li < nt and targets[li] < 0.0:
            li += 1
        while li < nt:
            z1 = gen.standard_normal()
            z2 = gen.standard_normal()
            lam1 = lam + du2 / (z1 * z1)
            lam = lam1 + du2 / (z2 * z2)
            i += 2
            if i > max_cells:
                return out, CELL_BUDGET
            g1 = lam1 ** gamma
            g2 = lam ** gamma
            if i == 2:
                f += (g1 * w1 + g2) * du
                c += g2 * w1 * 2.0 * du
            else:
                f += (g1 + g2) * du
                c += g2 * 2.0 * du
            acc = _combine(f, c, rich)
            while li < nt and acc > targets[li]:
                out[r, li] = lam ** inv_beta
                li += 1
    return out, OK


def eta_targets_np(gens, rows, targets, gamma, du, rich, inv_beta, max_cells):
    targets = np.asarray(targets, float)
    nt = targets.shape[0]
    out = np.zeros((rows, nt))
    blocks = Blocks(gens, rows, "normal", block=1024)
    lam = np.zeros(rows)
    f = np.zeros(rows)
    c = np.zeros(rows)
    start = int(np.searchsorted(targets, 0.0, side="left"))
    li = np.full(rows, start, np.int64)
    active = np.arange(rows) if start < nt else np.arange(0)
    du2 = du * du
    i = 0
    while active.size:
        z1 = blocks.take(active)
        z2 = blocks.take(active)
        lam1 = lam[active] + du2 / (z1 * z1)
        la = lam1 + du2 / (z2 * z2)
        lam[active] = la
        i += 2
        if i > max_cells:
            return out, CELL_BUDGET
        df, dc = _pair_terms(lam1, la, i == 2, gamma, du)
        f[active] += df
        c[active] += dc
        acc = np.zeros(rows)
        acc[active] = _combine_np(f[active], c[active], rich)
        while True:
            lv = li[active] < nt
            hit = np.zeros(active.size, np.bool_)
            hit[lv] = acc[active][lv] > targets[li[active][lv]]
            if not hit.any():
                break
            hr = active[hit]
            out[hr, li[hr]] = lam[hr] ** inv_beta
            li[hr] += 1
        active = active[li[active] < nt]
    return out, OK


# --------------------------------------------------------------------------
# dispatch
# --------------------------------------------------------------------------

def _stack(parts):
    first = parts[0]
    if isinstance(first, tuple):
        return tuple(np.concatenate([q[i] for q in parts]) for i in range(len(first)))
    return np.concatenate(parts)


def run(name, gens, rows, *args, backend=None):
    """Run kernel ``name`` for ``rows`` replicates drawn from ``gens``.

    ``gens`` is either one generator shared by all rows or one per row.
    Kernels that report a status code have it checked and stripped here.
    """
    backend = resolve(backend)
    gens = list(gens)
    if backend == "numpy":
        result = globals()[name + "_np"](gens, rows, *args)
    else:
        kern = globals()[name + "_nb"]
        if len(gens) == 1:
            result = kern(gens[0], rows, *args)
        else:
            result = _merge_status([kern(g, 1, *args) for g in gens], name)
    return _check(name, result)


_WITH_STATUS = {"exits", "embed", "h_levels", "eta_targets"}


def _merge_status(parts, name):
    if name not in _WITH_STATUS:
        return _stack(parts)
    bad = [q[-1] for q in parts if q[-1] != OK]
    body = _stack([tuple(q[:-1]) for q in parts])
    return (*body, bad[0] if bad else OK)


def _check(name, result):
    if name not in _WITH_STATUS:
        return result
    *body, status = result
    if status == EXIT_BUDGET:
        raise ResourceError("exit-time sampler exceeded its step budget")
    if status == CELL_BUDGET:
        raise ResourceError("subordinator sampler exceeded its cell budget")
    for arr in body:
        if arr.dtype.kind == "f" and not np.all(np.isfinite(arr)):
            raise NumericError(f"non-finite output from kernel {name}")
    return body[0] if len(body) == 1 else tuple(body)
