"""JIT kernels for bit-packed counter rows and bulk stream processing.

Everything here operates on raw numpy buffers so the hot loops compile once
(numba, cached on disk) and are shared by every sketch flavor. These functions
do no argument validation; the classes in slot_array.py and sketch.py own the
contracts.

All row-level functions take the whole (d, nbytes) buffer plus a row index
rather than a row view: creating array views inside per-update loops costs
more than the bit arithmetic itself.

Storage layout of one row:
  slots       uint8[w*s/8], slot j occupies bits [j*s, (j+1)*s), little-endian
              bit order. A merged counter spanning slots [off, off+2^lev) is
              the little-endian integer over that contiguous bit range, so the
              low-index slot holds the least significant bits.
  merge_bits  uint8[ceil(w/8)], bit j at byte j>>3, bit j&7. Bit j marks the
              aligned block of 2^L slots merged, where L-1 is the number of
              trailing one bits of j (each index serves exactly one level).
"""

import numpy as np
from numba import njit

U64 = np.uint64
I64 = np.int64
U8 = np.uint8
MASK64 = U64(0xFFFFFFFFFFFFFFFF)

POLICY_SUM = 0
POLICY_MAX = 1

_GAMMA = U64(0x9E3779B97F4A7C15)
_MIX1 = U64(0xBF58476D1CE4E5B9)
_MIX2 = U64(0x94D049BB133111EB)


# ---------------------------------------------------------------------------
# hashing

@njit(cache=True, inline="always")
def mix64(x):
    """splitmix64 finalizer: 64-bit avalanche mix."""
    x = (x + _GAMMA) & MASK64
    x ^= x >> U64(30)
    x = (x * _MIX1) & MASK64
    x ^= x >> U64(27)
    x = (x * _MIX2) & MASK64
    x ^= x >> U64(31)
    return x


# ---------------------------------------------------------------------------
# merge bitmap

@njit(cache=True, inline="always")
def get_mbit(mb, row, j):
    return (mb[row, j >> 3] >> (j & 7)) & 1


@njit(cache=True, inline="always")
def set_mbit(mb, row, j):
    mb[row, j >> 3] |= U8(1 << (j & 7))


@njit(cache=True, inline="always")
def clear_mbit(mb, row, j):
    mb[row, j >> 3] &= U8(0xFF ^ (1 << (j & 7)))


@njit(cache=True, inline="always")
def locate_level(mb, row, j, max_level):
    """Merge level of the counter containing slot j (bottom-up bit scan)."""
    lev = 0
    L = 1
    while L <= max_level:
        block = j & ~((1 << L) - 1)
        if get_mbit(mb, row, block + (1 << (L - 1)) - 1) == 0:
            break
        lev = L
        L += 1
    return lev


# ---------------------------------------------------------------------------
# counter read/write

@njit(cache=True, inline="always")
def read_ctr(slots, row, s, offset, level):
    nbits = s << level
    bit0 = offset * s
    if nbits >= 8:
        b0 = bit0 >> 3
        v = U64(0)
        for q in range(nbits >> 3):
            v |= U64(slots[row, b0 + q]) << U64(8 * q)
        return v
    # sub-byte counters (s < 8, level 0) never straddle a byte boundary
    b = slots[row, bit0 >> 3]
    return U64((b >> (bit0 & 7)) & ((1 << nbits) - 1))


@njit(cache=True, inline="always")
def write_ctr(slots, row, s, offset, level, val):
    nbits = s << level
    bit0 = offset * s
    if nbits >= 8:
        b0 = bit0 >> 3
        for q in range(nbits >> 3):
            slots[row, b0 + q] = U8((val >> U64(8 * q)) & U64(0xFF))
        return
    sh = bit0 & 7
    mask = ((1 << nbits) - 1) << sh
    b = slots[row, bit0 >> 3]
    slots[row, bit0 >> 3] = U8((b & (0xFF ^ mask)) | ((I64(val) << sh) & mask))


@njit(cache=True, inline="always")
def cap_minus_1(s, level):
    """Largest representable unsigned value at this width."""
    nbits = s << level
    if nbits >= 64:
        return MASK64
    return (U64(1) << U64(nbits)) - U64(1)


@njit(cache=True, inline="always")
def mag_cap(s, level):
    """Largest representable magnitude in sign-magnitude mode."""
    nbits = s << level
    return I64((U64(1) << U64(nbits - 1)) - U64(1))


@njit(cache=True, inline="always")
def read_ctr_signed(slots, row, s, offset, level):
    raw = read_ctr(slots, row, s, offset, level)
    nbits = s << level
    sbit = U64(1) << U64(nbits - 1)
    v = I64(raw & (sbit - U64(1)))
    if raw & sbit:
        return -v
    return v


@njit(cache=True, inline="always")
def write_ctr_signed(slots, row, s, offset, level, val):
    nbits = s << level
    sbit = U64(1) << U64(nbits - 1)
    if val < 0:
        raw = U64(-val) | sbit
    else:
        raw = U64(val)
    write_ctr(slots, row, s, offset, level, raw)


# ---------------------------------------------------------------------------
# merging

@njit(cache=True)
def block_value(slots, mb, row, s, max_level, offset, level, policy):
    """Policy-combined value over the aligned block [offset, offset + 2^level).

    An unmerged constituent block resolves per live sub-counter: sum of them
    under sum policy, max of them under max policy.
    """
    lev0 = locate_level(mb, row, offset, max_level)
    if lev0 >= level:
        return read_ctr(slots, row, s, offset, lev0)
    acc = U64(0)
    j = offset
    end = offset + (1 << level)
    while j < end:
        lv = locate_level(mb, row, j, max_level)
        v = read_ctr(slots, row, s, j, lv)
        if policy == POLICY_SUM:
            acc += v
        elif v > acc:
            acc = v
        j += 1 << lv
    return acc


@njit(cache=True)
def block_value_signed(slots, mb, row, s, max_level, offset, level):
    lev0 = locate_level(mb, row, offset, max_level)
    if lev0 >= level:
        return read_ctr_signed(slots, row, s, offset, lev0)
    acc = I64(0)
    j = offset
    end = offset + (1 << level)
    while j < end:
        lv = locate_level(mb, row, j, max_level)
        acc += read_ctr_signed(slots, row, s, j, lv)
        j += 1 << lv
    return acc


@njit(cache=True)
def merge_block(slots, mb, row, s, max_level, offset, level, policy, signed_mode):
    """Unify the aligned 2^level block into one counter.

    Sets every merge bit inside the span except the top index, which keeps the
    bitmap downward closed at all levels below `level` in one pass.
    """
    if signed_mode:
        sv = block_value_signed(slots, mb, row, s, max_level, offset, level)
        for j in range(offset, offset + (1 << level) - 1):
            set_mbit(mb, row, j)
        write_ctr_signed(slots, row, s, offset, level, sv)
    else:
        v = block_value(slots, mb, row, s, max_level, offset, level, policy)
        for j in range(offset, offset + (1 << level) - 1):
            set_mbit(mb, row, j)
        write_ctr(slots, row, s, offset, level, v)


@njit(cache=True)
def split_block(slots, mb, row, s, max_level, offset, level):
    """Undo one merge level: both halves receive the current value.

    Caller guarantees the value fits the half width and the policy is max.
    Only the block's own merge bit is cleared; sub-merges stay intact.
    """
    val = read_ctr(slots, row, s, offset, level)
    clear_mbit(mb, row, offset + (1 << (level - 1)) - 1)
    half = level - 1
    write_ctr(slots, row, s, offset, half, val)
    write_ctr(slots, row, s, offset + (1 << half), half, val)


# ---------------------------------------------------------------------------
# adds (merge-before-add on overflow)

@njit(cache=True, inline="always")
def add_unsigned(slots, mb, flags, row, s, max_level, j, v, policy):
    """Add v >= 0 to the counter containing slot j, growing it as needed.

    Returns the final merge level. Saturates (sticky flags[row]) at the widest
    representable value once the maximum level is exhausted.
    """
    lev = locate_level(mb, row, j, max_level)
    off = j & ~((1 << lev) - 1)
    cur = read_ctr(slots, row, s, off, lev)
    while True:
        capm1 = cap_minus_1(s, lev)
        if v <= capm1 - cur:
            write_ctr(slots, row, s, off, lev, cur + v)
            return lev
        if lev == max_level:
            write_ctr(slots, row, s, off, lev, capm1)
            flags[row] = 1
            return lev
        lev += 1
        off = j & ~((1 << lev) - 1)
        merge_block(slots, mb, row, s, max_level, off, lev, policy, False)
        cur = read_ctr(slots, row, s, off, lev)


@njit(cache=True, inline="always")
def raise_to(slots, mb, flags, row, s, max_level, j, target, policy):
    """Conservative update primitive: grow counter at j to at least `target`.

    Merges first whenever the target cannot be represented; if merging alone
    lifts the counter past the target, nothing more is written.
    """
    lev = locate_level(mb, row, j, max_level)
    off = j & ~((1 << lev) - 1)
    cur = read_ctr(slots, row, s, off, lev)
    if cur >= target:
        return lev
    while True:
        capm1 = cap_minus_1(s, lev)
        if target <= capm1:
            if cur < target:
                write_ctr(slots, row, s, off, lev, target)
            return lev
        if lev == max_level:
            if cur < capm1:
                write_ctr(slots, row, s, off, lev, capm1)
            flags[row] = 1
            return lev
        lev += 1
        off = j & ~((1 << lev) - 1)
        merge_block(slots, mb, row, s, max_level, off, lev, policy, False)
        cur = read_ctr(slots, row, s, off, lev)
        if cur >= target:
            return lev


@njit(cache=True, inline="always")
def add_signed(slots, mb, flags, row, s, max_level, j, dv):
    """Signed add in sign-magnitude mode; overflow threshold is symmetric.

    Merging combines constituents by signed sum (max is unsound for mixed
    signs). Saturates at +/- the magnitude cap once growth is exhausted.
    """
    lev = locate_level(mb, row, j, max_level)
    off = j & ~((1 << lev) - 1)
    cur = read_ctr_signed(slots, row, s, off, lev)
    while True:
        mc = mag_cap(s, lev)
        if dv >= 0:
            fits = cur <= mc - dv
        else:
            fits = cur >= -mc - dv
        if fits:
            write_ctr_signed(slots, row, s, off, lev, cur + dv)
            return lev
        if lev == max_level:
            if dv >= 0:
                write_ctr_signed(slots, row, s, off, lev, mc)
            else:
                write_ctr_signed(slots, row, s, off, lev, -mc)
            flags[row] = 1
            return lev
        lev += 1
        off = j & ~((1 << lev) - 1)
        merge_block(slots, mb, row, s, max_level, off, lev, POLICY_SUM, True)
        cur = read_ctr_signed(slots, row, s, off, lev)


# ---------------------------------------------------------------------------
# whole-row maintenance

@njit(cache=True, inline="always")
def _binomial_half(v):
    # Bin(a+b, 1/2) == Bin(a, 1/2) + Bin(b, 1/2); chunk so n fits int64
    total = U64(0)
    rem = v
    chunk = U64(1) << U64(62)
    while rem > chunk:
        total += U64(np.random.binomial(I64(chunk), 0.5))
        rem -= chunk
    total += U64(np.random.binomial(I64(rem), 0.5))
    return total


@njit(cache=True)
def scale_down_row(slots, mb, row, s, max_level, w, deterministic):
    """Halve every live counter (floor or Binomial(C, 1/2)); layout unchanged."""
    j = 0
    while j < w:
        lev = locate_level(mb, row, j, max_level)
        v = read_ctr(slots, row, s, j, lev)
        if v > U64(0):
            if deterministic:
                nv = v >> U64(1)
            else:
                nv = _binomial_half(v)
            write_ctr(slots, row, s, j, lev, nv)
        j += 1 << lev
    return 0


@njit(cache=True)
def seed_rng(seed):
    np.random.seed(seed)


@njit(cache=True)
def split_pass(slots, mb, row, s, max_level, w):
    """Split every merged counter whose value fits the half width (one level)."""
    j = 0
    while j < w:
        lev = locate_level(mb, row, j, max_level)
        if lev >= 1:
            v = read_ctr(slots, row, s, j, lev)
            if v <= cap_minus_1(s, lev - 1):
                split_block(slots, mb, row, s, max_level, j, lev)
        j += 1 << lev
    return 0


@njit(cache=True)
def row_total(slots, mb, row, s, max_level, w):
    acc = U64(0)
    j = 0
    while j < w:
        lev = locate_level(mb, row, j, max_level)
        acc += read_ctr(slots, row, s, j, lev)
        j += 1 << lev
    return acc


@njit(cache=True)
def row_max_level(mb, row, w, max_level):
    m = 0
    j = 0
    while j < w:
        lev = locate_level(mb, row, j, max_level)
        if lev > m:
            m = lev
        j += 1 << lev
    return m


@njit(cache=True)
def zero_slot_stats(slots, mb, row, s, max_level, w):
    """(unmerged count, unmerged zero count, residual sub-slots of merged counters)."""
    unmerged = 0
    unmerged_zero = 0
    residual = 0
    j = 0
    while j < w:
        lev = locate_level(mb, row, j, max_level)
        if lev == 0:
            unmerged += 1
            if read_ctr(slots, row, s, j, 0) == U64(0):
                unmerged_zero += 1
        else:
            residual += (1 << lev) - 1
        j += 1 << lev
    return unmerged, unmerged_zero, residual


@njit(cache=True)
def coarsen_row(slots, mb, row, s, max_level, w, level, signed_mode):
    """Sum-merge every aligned 2^level block into a single counter."""
    off = 0
    while off < w:
        if locate_level(mb, row, off, max_level) < level:
            merge_block(slots, mb, row, s, max_level, off, level, POLICY_SUM,
                        signed_mode)
        off += 1 << level
    return 0


# ---------------------------------------------------------------------------
# generic drivers (any s; fall-backs for the specialized fast paths above)

@njit(cache=True, inline="always")
def _median_int64(buf, d):
    # insertion sort; d is small and odd
    for a in range(1, d):
        key = buf[a]
        b = a - 1
        while b >= 0 and buf[b] > key:
            buf[b + 1] = buf[b]
            b -= 1
        buf[b + 1] = key
    return buf[d // 2]


@njit(cache=True, inline="always")
def _min_l1(slots, mb, s, max_level, shift, seeds, x):
    d = seeds.shape[0]
    e = MASK64
    for i in range(d):
        j = I64(mix64(x ^ seeds[i]) >> shift)
        lv = locate_level(mb, i, j, max_level)
        off = j & ~((1 << lv) - 1)
        c = read_ctr(slots, i, s, off, lv)
        if c < e:
            e = c
    return e


@njit(cache=True)
def drive_l1(slots, mb, flags, rowlev, s, max_level, shift, seeds, policy,
             conservative, items, values, ests, want_est):
    """Sequential update loop for count-min / conservative-update rows.

    values must be non-negative. When want_est, ests[t] receives the
    min-over-rows estimate immediately after update t (on-arrival model).
    """
    d = seeds.shape[0]
    n = items.shape[0]
    idx = np.empty(d, np.int64)
    for t in range(n):
        x = items[t]
        v = U64(values[t])
        for i in range(d):
            idx[i] = I64(mix64(x ^ seeds[i]) >> shift)
        if conservative:
            fhat = MASK64
            for i in range(d):
                lv = locate_level(mb, i, idx[i], max_level)
                off = idx[i] & ~((1 << lv) - 1)
                c = read_ctr(slots, i, s, off, lv)
                if c < fhat:
                    fhat = c
            tgt = fhat + v
            if tgt < fhat:
                tgt = MASK64
            for i in range(d):
                lv = raise_to(slots, mb, flags, i, s, max_level, idx[i], tgt,
                              policy)
                if lv > rowlev[i]:
                    rowlev[i] = lv
        else:
            for i in range(d):
                lv = add_unsigned(slots, mb, flags, i, s, max_level, idx[i],
                                  v, policy)
                if lv > rowlev[i]:
                    rowlev[i] = lv
        if want_est:
            e = MASK64
            for i in range(d):
                lv = locate_level(mb, i, idx[i], max_level)
                off = idx[i] & ~((1 << lv) - 1)
                c = read_ctr(slots, i, s, off, lv)
                if c < e:
                    e = c
            ests[t] = e
    return 0


@njit(cache=True)
def query_many_l1(slots, mb, s, max_level, shift, seeds, items, out):
    for t in range(items.shape[0]):
        out[t] = _min_l1(slots, mb, s, max_level, shift, seeds, items[t])
    return 0


@njit(cache=True)
def drive_l1_baseline(counters, capm1, shift, seeds, conservative, items,
                      values, ests, want_est):
    """Fixed-width rows: plain saturating adds or conservative updates."""
    d = seeds.shape[0]
    n = items.shape[0]
    idx = np.empty(d, np.int64)
    for t in range(n):
        x = items[t]
        v = U64(values[t])
        for i in range(d):
            idx[i] = I64(mix64(x ^ seeds[i]) >> shift)
        if conservative:
            fhat = MASK64
            for i in range(d):
                c = counters[i, idx[i]]
                if c < fhat:
                    fhat = c
            tgt = fhat + v
            if tgt < fhat or tgt > capm1:
                tgt = capm1
            for i in range(d):
                if counters[i, idx[i]] < tgt:
                    counters[i, idx[i]] = tgt
        else:
            for i in range(d):
                c = counters[i, idx[i]]
                if v <= capm1 - c:
                    counters[i, idx[i]] = c + v
                else:
                    counters[i, idx[i]] = capm1
        if want_est:
            e = MASK64
            for i in range(d):
                c = counters[i, idx[i]]
                if c < e:
                    e = c
            ests[t] = e
    return 0


@njit(cache=True)
def query_many_l1_baseline(counters, shift, seeds, items, out):
    d = seeds.shape[0]
    for t in range(items.shape[0]):
        x = items[t]
        e = MASK64
        for i in range(d):
            j = I64(mix64(x ^ seeds[i]) >> shift)
            c = counters[i, j]
            if c < e:
                e = c
        out[t] = e
    return 0


@njit(cache=True)
def drive_cs(slots, mb, flags, rowlev, s, max_level, shift, seeds, items,
             values, ests, want_est):
    """Count-sketch rows over sign-magnitude counters (sum merging)."""
    d = seeds.shape[0]
    n = items.shape[0]
    buf = np.empty(d, np.int64)
    for t in range(n):
        x = items[t]
        v = I64(values[t])
        for i in range(d):
            m = mix64(x ^ seeds[i])
            j = I64(m >> shift)
            g = I64(1) if m & U64(1) else I64(-1)
            lv = add_signed(slots, mb, flags, i, s, max_level, j, g * v)
            if lv > rowlev[i]:
                rowlev[i] = lv
        if want_est:
            for i in range(d):
                m = mix64(x ^ seeds[i])
                j = I64(m >> shift)
                g = I64(1) if m & U64(1) else I64(-1)
                lv = locate_level(mb, i, j, max_level)
                off = j & ~((1 << lv) - 1)
                buf[i] = g * read_ctr_signed(slots, i, s, off, lv)
            ests[t] = _median_int64(buf, d)
    return 0


@njit(cache=True)
def query_many_cs(slots, mb, s, max_level, shift, seeds, items, out):
    d = seeds.shape[0]
    buf = np.empty(d, np.int64)
    for t in range(items.shape[0]):
        x = items[t]
        for i in range(d):
            m = mix64(x ^ seeds[i])
            j = I64(m >> shift)
            g = I64(1) if m & U64(1) else I64(-1)
            lv = locate_level(mb, i, j, max_level)
            off = j & ~((1 << lv) - 1)
            buf[i] = g * read_ctr_signed(slots, i, s, off, lv)
        out[t] = _median_int64(buf, d)
    return 0


@njit(cache=True)
def drive_cs_baseline(counters, magcap, shift, seeds, items, values, ests,
                      want_est):
    d = seeds.shape[0]
    n = items.shape[0]
    buf = np.empty(d, np.int64)
    for t in range(n):
        x = items[t]
        v = I64(values[t])
        for i in range(d):
            m = mix64(x ^ seeds[i])
            j = I64(m >> shift)
            g = I64(1) if m & U64(1) else I64(-1)
            c = counters[i, j] + g * v
            if c > magcap:
                c = magcap
            elif c < -magcap:
                c = -magcap
            counters[i, j] = c
        if want_est:
            for i in range(d):
                m = mix64(x ^ seeds[i])
                j = I64(m >> shift)
                g = I64(1) if m & U64(1) else I64(-1)
                buf[i] = g * counters[i, j]
            ests[t] = _median_int64(buf, d)
    return 0


@njit(cache=True)
def query_many_cs_baseline(counters, shift, seeds, items, out):
    d = seeds.shape[0]
    buf = np.empty(d, np.int64)
    for t in range(items.shape[0]):
        x = items[t]
        for i in range(d):
            m = mix64(x ^ seeds[i])
            j = I64(m >> shift)
            g = I64(1) if m & U64(1) else I64(-1)
            buf[i] = g * counters[i, j]
        out[t] = _median_int64(buf, d)
    return 0



# ---------------------------------------------------------------------------
# stream drivers
#
# All drivers share the hashing convention: row index is the top log2(w) bits
# of mix64(x ^ row_seed), the count-sketch sign is bit 0 of the same mix.
#
# For the default s=8 every counter is a naturally aligned 8/16/32/64-bit
# little-endian field of the 8-byte word that holds its aligned block, and
# (thanks to downward closure) its level is the bit-count of the three merge
# bits covering slot j, which all live in bitmap byte j>>3. The fast drivers
# below exploit both: locate plus read-modify-write run branchless on one
# word, and only overflows fall back to the generic byte-oriented path (which
# shares the same memory).

@njit(cache=True, inline="always")
def _field8(mb, row, j):
    """(level, offset, bit shift, value mask) of slot j's counter for s=8.

    Valid only when max_level == 3 (i.e. w >= 8): the pair/quad/oct merge
    bits of the blocks containing j sit in bitmap byte j>>3 at positions
    j&6, (j&4)|1, and 3, and downward closure makes the level their sum.
    """
    mbyte = mb[row, j >> 3]
    lev = (((mbyte >> (j & 6)) & 1) + ((mbyte >> ((j & 4) | 1)) & 1)
           + ((mbyte >> 3) & 1))
    off = j & ~((1 << lev) - 1)
    sh = U64((off & 7) << 3)
    cap = MASK64 >> U64(64 - (8 << lev))
    return lev, sh, cap


@njit(cache=True, inline="always")
def _min_l1_fast(v64, mb, max_level, shift, seeds, x):
    d = seeds.shape[0]
    e = MASK64
    for i in range(d):
        j = I64(mix64(x ^ seeds[i]) >> shift)
        lev, sh, cap = _field8(mb, i, j)
        c = (v64[i, j >> 3] >> sh) & cap
        if c < e:
            e = c
    return e


@njit(cache=True)
def drive_l1_fast(s8, v64, mb, flags, rowlev, max_level, shift, seeds, policy,
                  conservative, items, values, ests, want_est):
    """drive_l1 specialized to s=8: branchless field access on aligned words."""
    d = seeds.shape[0]
    n = items.shape[0]
    idx = np.empty(d, np.int64)
    curs = np.empty(d, np.uint64)
    caps = np.empty(d, np.uint64)
    shs = np.empty(d, np.uint64)
    for t in range(n):
        x = items[t]
        v = U64(values[t])
        for i in range(d):
            idx[i] = I64(mix64(x ^ seeds[i]) >> shift)
        if conservative:
            fhat = MASK64
            for i in range(d):
                j = idx[i]
                lev, sh, cap = _field8(mb, i, j)
                cur = (v64[i, j >> 3] >> sh) & cap
                curs[i] = cur
                caps[i] = cap
                shs[i] = sh
                if cur < fhat:
                    fhat = cur
            tgt = fhat + v
            if tgt < fhat:
                tgt = MASK64
            for i in range(d):
                if curs[i] >= tgt:
                    continue
                if tgt <= caps[i]:
                    wi = idx[i] >> 3
                    word = v64[i, wi]
                    sh = shs[i]
                    v64[i, wi] = (word & ~(caps[i] << sh)) | (tgt << sh)
                else:
                    lv = raise_to(s8, mb, flags, i, 8, max_level, idx[i], tgt,
                                  policy)
                    if lv > rowlev[i]:
                        rowlev[i] = lv
        else:
            for i in range(d):
                j = idx[i]
                lev, sh, cap = _field8(mb, i, j)
                wi = j >> 3
                word = v64[i, wi]
                cur = (word >> sh) & cap
                if v <= cap - cur:
                    v64[i, wi] = (word & ~(cap << sh)) | ((cur + v) << sh)
                else:
                    lv = add_unsigned(s8, mb, flags, i, 8, max_level, j, v,
                                      policy)
                    if lv > rowlev[i]:
                        rowlev[i] = lv
        if want_est:
            e = MASK64
            for i in range(d):
                j = idx[i]
                lev, sh, cap = _field8(mb, i, j)
                c = (v64[i, j >> 3] >> sh) & cap
                if c < e:
                    e = c
            ests[t] = e
    return 0


@njit(cache=True)
def drive_l1_fast_rowmajor(s8, v64, mb, flags, rowlev, max_level, shift,
                           seeds, policy, items, values):
    """Row-at-a-time variant of the plain (non-conservative, no estimates)
    update loop: rows are independent under plain adds, and one row's
    counters and bitmap stay cache-resident across the whole stream."""
    d = seeds.shape[0]
    n = items.shape[0]
    for i in range(d):
        seed = seeds[i]
        for t in range(n):
            v = U64(values[t])
            j = I64(mix64(items[t] ^ seed) >> shift)
            lev, sh, cap = _field8(mb, i, j)
            wi = j >> 3
            word = v64[i, wi]
            cur = (word >> sh) & cap
            if v <= cap - cur:
                v64[i, wi] = (word & ~(cap << sh)) | ((cur + v) << sh)
            else:
                lv = add_unsigned(s8, mb, flags, i, 8, max_level, j, v, policy)
                if lv > rowlev[i]:
                    rowlev[i] = lv
    return 0


@njit(cache=True)
def drive_l1_baseline_rowmajor(counters, capm1, shift, seeds, items, values):
    d = seeds.shape[0]
    n = items.shape[0]
    for i in range(d):
        seed = seeds[i]
        for t in range(n):
            v = U64(values[t])
            j = I64(mix64(items[t] ^ seed) >> shift)
            c = counters[i, j]
            if v <= capm1 - c:
                counters[i, j] = c + v
            else:
                counters[i, j] = capm1
    return 0


@njit(cache=True)
def drive_cs_fast(s8, v64, mb, flags, rowlev, max_level, shift, seeds, items,
                  values, ests, want_est):
    """drive_cs specialized to s=8: branchless sign-magnitude field access."""
    d = seeds.shape[0]
    n = items.shape[0]
    buf = np.empty(d, np.int64)
    for t in range(n):
        x = items[t]
        v = I64(values[t])
        for i in range(d):
            m = mix64(x ^ seeds[i])
            j = I64(m >> shift)
            g = I64(1) if m & U64(1) else I64(-1)
            dv = g * v
            lev, sh, cap = _field8(mb, i, j)
            wi = j >> 3
            word = v64[i, wi]
            raw = (word >> sh) & cap
            sbit = (cap >> U64(1)) + U64(1)
            mag = I64(raw & (sbit - U64(1)))
            neg = -I64((raw & sbit) != U64(0))   # -1 if negative else 0
            cur = (mag ^ neg) - neg
            nv = cur + dv
            a = nv >> 63                         # arithmetic: -1 if nv < 0
            absnv = (nv ^ a) - a
            if absnv <= I64(sbit - U64(1)):
                enc = U64(absnv) | (U64(a) & sbit)
                v64[i, wi] = (word & ~(cap << sh)) | (enc << sh)
            else:
                lv = add_signed(s8, mb, flags, i, 8, max_level, j, dv)
                if lv > rowlev[i]:
                    rowlev[i] = lv
        if want_est:
            for i in range(d):
                m = mix64(x ^ seeds[i])
                j = I64(m >> shift)
                g = I64(1) if m & U64(1) else I64(-1)
                lev, sh, cap = _field8(mb, i, j)
                raw = (v64[i, j >> 3] >> sh) & cap
                sbit = (cap >> U64(1)) + U64(1)
                mag = I64(raw & (sbit - U64(1)))
                neg = -I64((raw & sbit) != U64(0))
                buf[i] = g * ((mag ^ neg) - neg)
            ests[t] = _median_int64(buf, d)
    return 0


@njit(cache=True)
def running_truth(inv, values, counts, out):
    """out[t] = exact frequency of item inv[t] including update t."""
    for t in range(inv.shape[0]):
        counts[inv[t]] += values[t]
        out[t] = counts[inv[t]]
    return 0


# ---------------------------------------------------------------------------
# sampled-counter (estimator) driver

@njit(cache=True, inline="always")
def _uniform01(seed, pos):
    u = mix64(seed ^ U64(pos))
    return (u >> U64(11)) * 1.1102230246251565e-16  # 2**-53


@njit(cache=True)
def _aee_add_row(slots, mb, row, s, max_level, glev, j, v, policy):
    """Like add_unsigned, but stop for a policy decision when the counter is
    already at the sketch-global top level (or the structural cap).

    Returns (0, level) when the add landed, (1, level) when a decision is
    pending and nothing was written.
    """
    lev = locate_level(mb, row, j, max_level)
    off = j & ~((1 << lev) - 1)
    cur = read_ctr(slots, row, s, off, lev)
    while True:
        capm1 = cap_minus_1(s, lev)
        if v <= capm1 - cur:
            write_ctr(slots, row, s, off, lev, cur + v)
            return 0, lev
        if lev >= glev or lev == max_level:
            return 1, lev
        lev += 1
        off = j & ~((1 << lev) - 1)
        merge_block(slots, mb, row, s, max_level, off, lev, policy, False)
        cur = read_ctr(slots, row, s, off, lev)


@njit(cache=True)
def _aee_raise_row(slots, mb, row, s, max_level, glev, j, target, policy):
    """raise_to with the same decision interception as _aee_add_row."""
    lev = locate_level(mb, row, j, max_level)
    off = j & ~((1 << lev) - 1)
    cur = read_ctr(slots, row, s, off, lev)
    if cur >= target:
        return 0, lev
    while True:
        capm1 = cap_minus_1(s, lev)
        if target <= capm1:
            if cur < target:
                write_ctr(slots, row, s, off, lev, target)
            return 0, lev
        if lev >= glev or lev == max_level:
            return 1, lev
        lev += 1
        off = j & ~((1 << lev) - 1)
        merge_block(slots, mb, row, s, max_level, off, lev, policy, False)
        cur = read_ctr(slots, row, s, off, lev)
        if cur >= target:
            return 0, lev


@njit(cache=True)
def drive_aee(slots, mb, rowlev, s, max_level, shift, seeds, policy,
              conservative, w, delta, delta_est, deterministic_ds,
              split_enabled, aee_seed, state_f, state_i, items, values, ests,
              want_est):
    """Sampled update loop with the merge-vs-downsample budget rule.

    state_f: [p]
    state_i: [n_vol, overflow_events, forced_remaining, downsample_events, pos]
    Overflows below the global top level always merge. At the top level the
    error increase of downsampling (sqrt(2) * eps_est) is compared with the
    post-merge eps_cms; the cheaper action wins. The first `forced_remaining`
    overflow events downsample unconditionally.
    """
    d = seeds.shape[0]
    n = items.shape[0]
    idx = np.empty(d, np.int64)
    p = state_f[0]
    n_vol = state_i[0]
    oevents = state_i[1]
    forced = state_i[2]
    dsamples = state_i[3]
    pos = state_i[4]
    glev = 0
    for i in range(d):
        if rowlev[i] > glev:
            glev = rowlev[i]
    sqrt2 = np.sqrt(2.0)
    eps_cms_coef = delta ** (-1.0 / d)
    lnterm = np.log(2.0 / delta_est)

    for t in range(n):
        x = items[t]
        v = I64(values[t])
        n_vol += v
        pos += 1
        # sampled increment: deterministic part plus one Bernoulli unit
        if p >= 1.0:
            inc = U64(v)
        else:
            vp = v * p
            base = I64(vp)
            frac = vp - base
            inc = U64(base)
            if frac > 0.0 and _uniform01(aee_seed, pos) < frac:
                inc += U64(1)
        if inc > U64(0):
            for i in range(d):
                idx[i] = I64(mix64(x ^ seeds[i]) >> shift)
            if conservative:
                fhat = MASK64
                for i in range(d):
                    lv = locate_level(mb, i, idx[i], max_level)
                    off = idx[i] & ~((1 << lv) - 1)
                    c = read_ctr(slots, i, s, off, lv)
                    if c < fhat:
                        fhat = c
                tgt = fhat + inc
                if tgt < fhat:
                    tgt = MASK64
            else:
                tgt = U64(0)
            for i in range(d):
                while True:
                    if conservative:
                        status, lv = _aee_raise_row(
                            slots, mb, i, s, max_level, glev, idx[i], tgt,
                            policy)
                    else:
                        status, lv = _aee_add_row(
                            slots, mb, i, s, max_level, glev, idx[i], inc,
                            policy)
                    if status == 0:
                        if lv > rowlev[i]:
                            rowlev[i] = lv
                        if lv > glev:
                            glev = lv
                        break
                    # overflow at the global top level: merge or downsample
                    oevents += 1
                    merged = False
                    if forced > 0:
                        forced -= 1
                    elif lv < max_level:
                        post = lv + 1
                        eps_cms = eps_cms_coef * (2.0 ** post) / w
                        eps_est = np.sqrt(2.0 * lnterm / (p * n_vol))
                        if eps_cms <= sqrt2 * eps_est:
                            off = idx[i] & ~((1 << post) - 1)
                            merge_block(slots, mb, i, s, max_level, off, post,
                                        policy, False)
                            if post > rowlev[i]:
                                rowlev[i] = post
                            glev = post
                            merged = True
                    if not merged:
                        p *= 0.5
                        dsamples += 1
                        if not deterministic_ds:
                            np.random.seed(
                                I64(mix64(aee_seed + U64(dsamples))
                                    & U64(0x7FFFFFFF)))
                        for r in range(d):
                            scale_down_row(slots, mb, r, s, max_level, w,
                                           deterministic_ds)
                        if split_enabled and policy == POLICY_MAX:
                            for r in range(d):
                                split_pass(slots, mb, r, s, max_level, w)
                                rowlev[r] = row_max_level(mb, r, w, max_level)
                            glev = 0
                            for r in range(d):
                                if rowlev[r] > glev:
                                    glev = rowlev[r]
                        if conservative:
                            # the conservative target is stale after halving
                            fhat = MASK64
                            for r in range(d):
                                lv2 = locate_level(mb, r, idx[r], max_level)
                                off2 = idx[r] & ~((1 << lv2) - 1)
                                c2 = read_ctr(slots, r, s, off2, lv2)
                                if c2 < fhat:
                                    fhat = c2
                            tgt = fhat + inc
                            if tgt < fhat:
                                tgt = MASK64
        if want_est:
            ests[t] = _min_l1(slots, mb, s, max_level, shift, seeds, x) / p

    state_f[0] = p
    state_i[0] = n_vol
    state_i[1] = oevents
    state_i[2] = forced
    state_i[3] = dsamples
    state_i[4] = pos
    return 0
