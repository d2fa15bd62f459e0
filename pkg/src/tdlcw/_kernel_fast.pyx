# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled backend for the bulk window-group operations.

Same element encoding and function surface as ``tdlcw._kernel_pure``, with
the group arithmetic done on C integers.  Codes must fit in 64 bits; the
backend selector only routes descriptors satisfying that bound here.
"""

BACKEND_NAME = "fast"

ctypedef unsigned long long u64
ctypedef long long i64

DEF MAXN = 3


cdef inline void _decode(u64 code, int count, u64 base, u64 *out) noexcept:
    cdef int i
    for i in range(count):
        out[i] = code % base
        code //= base


cdef inline u64 _encode(u64 *digits, int count, u64 base) noexcept:
    cdef u64 code = 0
    cdef int i
    for i in range(count - 1, -1, -1):
        code = code * base + digits[i]
    return code


cdef u64 _inv_mod(u64 a, u64 m) except? 0:
    """Inverse of a modulo m by the extended Euclidean algorithm."""
    cdef i64 old_r = <i64> (a % m), r = <i64> m
    cdef i64 old_s = 1, s = 0
    cdef i64 q, tmp
    while r != 0:
        q = old_r // r
        tmp = old_r - q * r
        old_r = r
        r = tmp
        tmp = old_s - q * s
        old_s = s
        s = tmp
    if old_r != 1:
        raise ValueError("element not invertible")
    if old_s < 0:
        old_s += <i64> m
    return <u64> old_s


cdef u64 _mat_mul(u64 a, u64 b, int n, u64 m) noexcept:
    cdef u64 da[MAXN * MAXN]
    cdef u64 db[MAXN * MAXN]
    cdef u64 out[MAXN * MAXN]
    cdef int i, j, k
    cdef u64 s
    _decode(a, n * n, m, da)
    _decode(b, n * n, m, db)
    for i in range(n):
        for j in range(n):
            s = 0
            for k in range(n):
                s += da[i * n + k] * db[k * n + j] % m
            out[i * n + j] = s % m
    return _encode(out, n * n, m)


cdef u64 _vec_add(u64 a, u64 b, int length, u64 p) noexcept:
    cdef u64 da[64]
    cdef u64 db[64]
    cdef u64 out[64]
    cdef int i
    _decode(a, length, p, da)
    _decode(b, length, p, db)
    for i in range(length):
        out[i] = (da[i] + db[i]) % p
    return _encode(out, length, p)


cdef u64 _mat_inv(u64 a, int n, u64 m):
    cdef u64 e[MAXN * MAXN]
    cdef u64 out[MAXN * MAXN]
    cdef i64 adj[MAXN * MAXN]
    cdef i64 det, c00, c01, c02
    cdef u64 dinv
    cdef int i
    _decode(a, n * n, m, e)
    if n == 1:
        out[0] = _inv_mod(e[0], m)
        return _encode(out, 1, m)
    if n == 2:
        det = (<i64> (e[0] * e[3] % m)) - (<i64> (e[1] * e[2] % m))
        det %= <i64> m
        if det < 0:
            det += <i64> m
        dinv = _inv_mod(<u64> det, m)
        adj[0] = <i64> e[3]
        adj[1] = -(<i64> e[1])
        adj[2] = -(<i64> e[2])
        adj[3] = <i64> e[0]
        for i in range(4):
            adj[i] %= <i64> m
            if adj[i] < 0:
                adj[i] += <i64> m
            out[i] = (<u64> adj[i]) * dinv % m
        return _encode(out, 4, m)
    # n == 3
    c00 = (<i64> (e[4] * e[8] % m)) - (<i64> (e[5] * e[7] % m))
    c01 = (<i64> (e[5] * e[6] % m)) - (<i64> (e[3] * e[8] % m))
    c02 = (<i64> (e[3] * e[7] % m)) - (<i64> (e[4] * e[6] % m))
    det = ((<i64> e[0]) * c00 + (<i64> e[1]) * c01 + (<i64> e[2]) * c02) % <i64> m
    if det < 0:
        det += <i64> m
    dinv = _inv_mod(<u64> det, m)
    adj[0] = c00
    adj[1] = (<i64> (e[2] * e[7] % m)) - (<i64> (e[1] * e[8] % m))
    adj[2] = (<i64> (e[1] * e[5] % m)) - (<i64> (e[2] * e[4] % m))
    adj[3] = c01
    adj[4] = (<i64> (e[0] * e[8] % m)) - (<i64> (e[2] * e[6] % m))
    adj[5] = (<i64> (e[2] * e[3] % m)) - (<i64> (e[0] * e[5] % m))
    adj[6] = c02
    adj[7] = (<i64> (e[1] * e[6] % m)) - (<i64> (e[0] * e[7] % m))
    adj[8] = (<i64> (e[0] * e[4] % m)) - (<i64> (e[1] * e[3] % m))
    for i in range(9):
        adj[i] %= <i64> m
        if adj[i] < 0:
            adj[i] += <i64> m
        out[i] = (<u64> adj[i]) * dinv % m
    return _encode(out, 9, m)


cdef tuple _parse(desc):
    """(is_mat, n_or_length, base) from a window descriptor."""
    if desc[0] == "vec":
        return False, desc[2], desc[1]
    if desc[1] > MAXN:
        raise ValueError(f"unsupported matrix size n={desc[1]}")
    return True, desc[1], desc[3]


def mul(desc, a, b):
    is_mat, n, base = _parse(desc)
    if is_mat:
        return _mat_mul(a, b, n, base)
    return _vec_add(a, b, n, base)


def inv(desc, a):
    is_mat, n, base = _parse(desc)
    cdef u64 digits[64]
    cdef int i
    if is_mat:
        return _mat_inv(a, n, base)
    _decode(a, n, base, digits)
    for i in range(n):
        digits[i] = (base - digits[i]) % base
    return _encode(digits, n, base)


def identity(desc):
    is_mat, n, base = _parse(desc)
    cdef u64 digits[MAXN * MAXN]
    cdef int i
    if not is_mat:
        return 0
    for i in range(n * n):
        digits[i] = 1 if i % (n + 1) == 0 else 0
    return _encode(digits, n * n, base)


def closure(desc, gens, cap):
    """Smallest subgroup containing `gens`; ValueError past `cap` elements."""
    is_mat, n, base = _parse(desc)
    cdef u64 one = identity(desc)
    cdef u64 x, g, y
    cdef list nxt
    cdef list cgens = []
    cdef list frontier = [one]
    seen = {one}
    for g in set(gens):
        cgens.append(g)
        if is_mat:
            cgens.append(_mat_inv(g, n, base))
        else:
            cgens.append(inv(desc, g))
    cgens = sorted(set(cgens))
    while frontier:
        nxt = []
        for x in frontier:
            for g in cgens:
                y = _mat_mul(x, g, n, base) if is_mat else _vec_add(x, g, n, base)
                if y not in seen:
                    seen.add(y)
                    nxt.append(y)
        if len(seen) > cap:
            raise ValueError(f"closure exceeded cap {cap}")
        frontier = nxt
    return seen


def product_set(desc, codes_a, codes_b):
    """The set {a*b : a in A, b in B}."""
    is_mat, n, base = _parse(desc)
    cdef u64 a, b
    out = set()
    if is_mat:
        for a in codes_a:
            for b in codes_b:
                out.add(_mat_mul(a, b, n, base))
    else:
        for a in codes_a:
            for b in codes_b:
                out.add(_vec_add(a, b, n, base))
    return out
