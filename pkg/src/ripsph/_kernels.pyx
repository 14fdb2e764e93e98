# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled reduction core.

Same algorithm as ripsph.reduction, with the hot loops in C: columns are
reduced out of order by worker threads that publish their combinations and
claim pivots through an open-addressed compare-and-swap table.  The GIL is
released for the whole per-thread loop, so threads genuinely run in
parallel.  Barcodes are bitwise identical to the pure-Python backend's.
"""

import numpy as np

cimport numpy as cnp
from libc.stdlib cimport free, malloc, qsort, realloc
from libc.string cimport memcpy
from libc.stdint cimport int64_t, uint8_t, uint32_t, uint64_t

cnp.import_array()

cdef extern from *:
    """
    #include <stdint.h>

    static inline uint64_t rph_load_u64(volatile uint64_t* p) {
        return __atomic_load_n(p, __ATOMIC_SEQ_CST);
    }
    static inline void rph_store_u64(volatile uint64_t* p, uint64_t v) {
        __atomic_store_n(p, v, __ATOMIC_SEQ_CST);
    }
    static inline int rph_cas_u64(volatile uint64_t* p, uint64_t* expected,
                                  uint64_t desired) {
        return __atomic_compare_exchange_n(p, expected, desired, 0,
                                           __ATOMIC_SEQ_CST, __ATOMIC_SEQ_CST);
    }
    static inline uint64_t rph_faa_u64(volatile uint64_t* p, uint64_t v) {
        return __atomic_fetch_add(p, v, __ATOMIC_SEQ_CST);
    }
    static inline void* rph_load_ptr(void* volatile* p) {
        return __atomic_load_n(p, __ATOMIC_SEQ_CST);
    }
    static inline void rph_store_ptr(void* volatile* p, void* v) {
        __atomic_store_n(p, v, __ATOMIC_SEQ_CST);
    }
    """
    uint64_t rph_load_u64(uint64_t* p) noexcept nogil
    void rph_store_u64(uint64_t* p, uint64_t v) noexcept nogil
    int rph_cas_u64(uint64_t* p, uint64_t* expected, uint64_t desired) noexcept nogil
    uint64_t rph_faa_u64(uint64_t* p, uint64_t v) noexcept nogil
    void* rph_load_ptr(void** p) noexcept nogil
    void rph_store_ptr(void** p, void* v) noexcept nogil

cdef extern from "math.h":
    double INFINITY

DEF MAXV = 64

cdef uint64_t EMPTY = <uint64_t>0xFFFFFFFFFFFFFFFF

cdef enum:
    R_CLAIMED = 0
    R_LOSES = 1
    R_DISPLACES = 2


# --- small growable containers ---------------------------------------------

cdef struct HEntry:
    double diam
    uint64_t rank
    uint64_t coeff

cdef struct Heap:
    HEntry* a
    int64_t len
    int64_t cap

cdef struct VVec:
    uint64_t* rank
    double* diam
    uint64_t* coeff
    int64_t len
    int64_t cap

cdef struct Arena:
    void** blocks
    int64_t len
    int64_t cap

cdef struct U64Vec:
    uint64_t* a
    int64_t len
    int64_t cap

cdef struct F64Vec:
    double* a
    int64_t len
    int64_t cap


cdef inline int heap_reserve(Heap* h, int64_t need) noexcept nogil:
    cdef int64_t cap
    if h.cap >= need:
        return 0
    cap = h.cap * 2 if h.cap else 1024
    while cap < need:
        cap *= 2
    h.a = <HEntry*>realloc(h.a, cap * sizeof(HEntry))
    if h.a == NULL:
        return 1
    h.cap = cap
    return 0


cdef inline bint hentry_less(HEntry* x, HEntry* y) noexcept nogil:
    # earliest in filtration order first: diameter ascending, rank descending
    if x.diam != y.diam:
        return x.diam < y.diam
    return x.rank > y.rank


cdef inline int heap_push(Heap* h, double diam, uint64_t rank,
                          uint64_t coeff) noexcept nogil:
    cdef int64_t i, parent
    cdef HEntry tmp
    if heap_reserve(h, h.len + 1):
        return 1
    h.a[h.len].diam = diam
    h.a[h.len].rank = rank
    h.a[h.len].coeff = coeff
    i = h.len
    h.len += 1
    while i > 0:
        parent = (i - 1) >> 1
        if hentry_less(&h.a[i], &h.a[parent]):
            tmp = h.a[i]
            h.a[i] = h.a[parent]
            h.a[parent] = tmp
            i = parent
        else:
            break
    return 0


cdef inline void heap_pop_top(Heap* h) noexcept nogil:
    cdef int64_t i = 0, child
    cdef HEntry tmp
    h.len -= 1
    if h.len == 0:
        return
    h.a[0] = h.a[h.len]
    while True:
        child = 2 * i + 1
        if child >= h.len:
            break
        if child + 1 < h.len and hentry_less(&h.a[child + 1], &h.a[child]):
            child += 1
        if hentry_less(&h.a[child], &h.a[i]):
            tmp = h.a[i]
            h.a[i] = h.a[child]
            h.a[child] = tmp
            i = child
        else:
            break


cdef inline int vvec_push(VVec* v, uint64_t rank, double diam,
                          uint64_t coeff) noexcept nogil:
    cdef int64_t cap
    if v.len == v.cap:
        cap = v.cap * 2 if v.cap else 256
        v.rank = <uint64_t*>realloc(v.rank, cap * sizeof(uint64_t))
        v.diam = <double*>realloc(v.diam, cap * sizeof(double))
        v.coeff = <uint64_t*>realloc(v.coeff, cap * sizeof(uint64_t))
        if v.rank == NULL or v.diam == NULL or v.coeff == NULL:
            return 1
        v.cap = cap
    v.rank[v.len] = rank
    v.diam[v.len] = diam
    v.coeff[v.len] = coeff
    v.len += 1
    return 0


cdef inline int arena_push(Arena* a, void* block) noexcept nogil:
    cdef int64_t cap
    if a.len == a.cap:
        cap = a.cap * 2 if a.cap else 64
        a.blocks = <void**>realloc(a.blocks, cap * sizeof(void*))
        if a.blocks == NULL:
            return 1
        a.cap = cap
    a.blocks[a.len] = block
    a.len += 1
    return 0


cdef inline int u64vec_push(U64Vec* v, uint64_t x) noexcept nogil:
    cdef int64_t cap
    if v.len == v.cap:
        cap = v.cap * 2 if v.cap else 1024
        v.a = <uint64_t*>realloc(v.a, cap * sizeof(uint64_t))
        if v.a == NULL:
            return 1
        v.cap = cap
    v.a[v.len] = x
    v.len += 1
    return 0


cdef inline int f64vec_push(F64Vec* v, double x) noexcept nogil:
    cdef int64_t cap
    if v.len == v.cap:
        cap = v.cap * 2 if v.cap else 1024
        v.a = <double*>realloc(v.a, cap * sizeof(double))
        if v.a == NULL:
            return 1
        v.cap = cap
    v.a[v.len] = x
    v.len += 1
    return 0


# --- shared, GIL-free view of the filtration and the reduction state --------

cdef struct Shared:
    # filtration
    int64_t n
    double threshold
    uint64_t modulus
    uint64_t* inv
    uint64_t* binom
    int64_t binom_cols
    int is_dense
    double* dense
    double* births
    int64_t* nbr_ptr
    int64_t* nbr_idx
    double* nbr_wt
    # reduction
    int dim
    int64_t ncols
    uint64_t* cols_rank
    double* cols_diam
    uint64_t* keys
    uint64_t* vals
    double* kdiams
    uint64_t mask
    int shift
    void** published
    uint64_t* cursor
    uint64_t chunk
    uint64_t nchunks
    int reverse
    uint64_t* displaced
    uint8_t* essential
    int use_apparent
    int* error


cdef inline uint64_t binom_at(Shared* s, int64_t n, int64_t k) noexcept nogil:
    if k < 0 or k >= s.binom_cols or n < 0:
        return 0
    return s.binom[n * s.binom_cols + k]


cdef inline void unrank_c(Shared* s, uint64_t rank, int dim,
                          uint64_t* vs) noexcept nogil:
    cdef uint64_t rem = rank
    cdef int64_t top = s.n - 1
    cdef int64_t lo, hi, mid
    cdef int j
    for j in range(dim, -1, -1):
        lo = j
        hi = top
        while lo < hi:
            mid = (lo + hi + 1) >> 1
            if binom_at(s, mid, j + 1) <= rem:
                lo = mid
            else:
                hi = mid - 1
        vs[dim - j] = <uint64_t>lo
        rem -= binom_at(s, lo, j + 1)
        top = lo - 1


cdef inline double pair_weight(Shared* s, int64_t a, int64_t b) noexcept nogil:
    cdef int64_t lo, hi, mid
    if s.is_dense:
        return s.dense[a * s.n + b]
    lo = s.nbr_ptr[a]
    hi = s.nbr_ptr[a + 1] - 1
    while lo <= hi:
        mid = (lo + hi) >> 1
        if s.nbr_idx[mid] == b:
            return s.nbr_wt[mid]
        if s.nbr_idx[mid] < b:
            lo = mid + 1
        else:
            hi = mid - 1
    return INFINITY


cdef inline double simplex_diameter_c(Shared* s, uint64_t rank,
                                      int dim) noexcept nogil:
    cdef uint64_t vs[MAXV]
    cdef double best, w
    cdef int i, j
    unrank_c(s, rank, dim, vs)
    if dim == 0:
        return s.births[vs[0]]
    best = -INFINITY
    for i in range(dim + 1):
        for j in range(i + 1, dim + 1):
            w = pair_weight(s, <int64_t>vs[i], <int64_t>vs[j])
            if w > best:
                best = w
    return best


# --- cofacet iterator -------------------------------------------------------

cdef struct CofIter:
    uint64_t vs[MAXV]
    int dim
    int j
    int k
    uint64_t idx_below
    uint64_t idx_above
    double diam
    int above_only
    # dense cursor
    int64_t w
    int64_t w_stop
    # sparse cursors: index into nbr arrays per member
    int64_t pt[MAXV]


cdef inline void cof_init(Shared* s, uint64_t rank, double diam, int dim,
                          int above_only, CofIter* it) noexcept nogil:
    cdef int t
    unrank_c(s, rank, dim, it.vs)
    it.dim = dim
    it.j = 0
    it.k = dim + 1
    it.idx_below = rank
    it.idx_above = 0
    it.diam = diam
    it.above_only = above_only
    if s.is_dense:
        it.w = s.n - 1
        it.w_stop = <int64_t>it.vs[0] if above_only else -1
    else:
        for t in range(dim + 1):
            it.pt[t] = s.nbr_ptr[it.vs[t] + 1] - 1


cdef inline bint cof_next(Shared* s, CofIter* it, uint64_t* crank,
                          double* cdiam, uint64_t* sign) noexcept nogil:
    cdef int64_t w, t
    cdef double d, d2
    cdef bint common
    if s.is_dense:
        while it.w > it.w_stop:
            w = it.w
            it.w -= 1
            if it.j <= it.dim and <int64_t>it.vs[it.j] == w:
                it.idx_below -= binom_at(s, w, it.k)
                it.idx_above += binom_at(s, w, it.k + 1)
                it.k -= 1
                it.j += 1
                continue
            d = it.diam
            for t in range(it.dim + 1):
                d2 = s.dense[w * s.n + <int64_t>it.vs[t]]
                if d2 > d:
                    d = d2
            if d <= s.threshold:
                crank[0] = it.idx_above + binom_at(s, w, it.k + 1) + it.idx_below
                cdiam[0] = d
                sign[0] = 1 if (it.k & 1) == 0 else s.modulus - 1
                return True
        return False
    # sparse: descending intersection of the members' neighbour lists
    while True:
        if it.pt[0] < s.nbr_ptr[it.vs[0]]:
            return False
        w = s.nbr_idx[it.pt[0]]
        if it.above_only and w <= <int64_t>it.vs[0]:
            return False
        d = it.diam
        d2 = s.nbr_wt[it.pt[0]]
        if d2 > d:
            d = d2
        common = True
        for t in range(1, it.dim + 1):
            while (it.pt[t] >= s.nbr_ptr[it.vs[t]]
                   and s.nbr_idx[it.pt[t]] > w):
                it.pt[t] -= 1
            if it.pt[t] < s.nbr_ptr[it.vs[t]]:
                return False
            if s.nbr_idx[it.pt[t]] != w:
                common = False
                break
            d2 = s.nbr_wt[it.pt[t]]
            if d2 > d:
                d = d2
        it.pt[0] -= 1
        if not common:
            continue
        while it.j <= it.dim and <int64_t>it.vs[it.j] > w:
            it.idx_below -= binom_at(s, it.vs[it.j], it.k)
            it.idx_above += binom_at(s, it.vs[it.j], it.k + 1)
            it.k -= 1
            it.j += 1
        if d <= s.threshold:
            crank[0] = it.idx_above + binom_at(s, w, it.k + 1) + it.idx_below
            cdiam[0] = d
            sign[0] = 1 if (it.k & 1) == 0 else s.modulus - 1
            return True


cdef inline int push_cofacets(Shared* s, uint64_t rank, double diam, int dim,
                              uint64_t scale, Heap* h) noexcept nogil:
    cdef CofIter it
    cdef uint64_t crank, sign, c
    cdef double cdiam
    cof_init(s, rank, diam, dim, 0, &it)
    while cof_next(s, &it, &crank, &cdiam, &sign):
        c = (scale * sign) % s.modulus
        if c:
            if heap_push(h, cdiam, crank, c):
                return 1
    return 0


# --- apparent pairs ---------------------------------------------------------

cdef inline bint first_equal_cofacet(Shared* s, uint64_t rank, int dim,
                                     double diam, uint64_t* out,
                                     uint64_t* sign) noexcept nogil:
    cdef CofIter it
    cdef uint64_t crank, csign
    cdef double cdiam
    cof_init(s, rank, diam, dim, 0, &it)
    while cof_next(s, &it, &crank, &cdiam, &csign):
        if cdiam == diam:
            out[0] = crank
            sign[0] = csign
            return True
    return False


cdef inline bint first_equal_facet(Shared* s, uint64_t rank, int dim,
                                   double diam, uint64_t* out,
                                   uint64_t* sign) noexcept nogil:
    # facets in drop-largest-first order; diameters recomputed over the rest
    cdef uint64_t vs[MAXV]
    cdef double fdiam, w
    cdef uint64_t frank
    cdef int j, a, b, pos
    if dim == 0:
        return False
    unrank_c(s, rank, dim, vs)
    for j in range(dim + 1):
        if dim - 1 == 0:
            fdiam = s.births[vs[1 - j]]
        else:
            fdiam = -INFINITY
            for a in range(dim + 1):
                if a == j:
                    continue
                for b in range(a + 1, dim + 1):
                    if b == j:
                        continue
                    w = pair_weight(s, <int64_t>vs[a], <int64_t>vs[b])
                    if w > fdiam:
                        fdiam = w
        if fdiam == diam:
            frank = 0
            pos = dim - 1
            for a in range(dim + 1):
                if a == j:
                    continue
                frank += binom_at(s, vs[a], pos + 1)
                pos -= 1
            out[0] = frank
            # ascending position of the dropped vertex is dim - j
            sign[0] = 1 if ((dim - j) & 1) == 0 else s.modulus - 1
            return True
    return False


cdef inline bint zero_apparent_facet(Shared* s, uint64_t rank, int dim,
                                     double diam, uint64_t* frank,
                                     uint64_t* fsign) noexcept nogil:
    cdef uint64_t back, bsign
    if not first_equal_facet(s, rank, dim, diam, frank, fsign):
        return False
    if not first_equal_cofacet(s, frank[0], dim - 1, diam, &back, &bsign):
        return False
    return back == rank


cdef inline bint zero_apparent_cofacet(Shared* s, uint64_t rank, int dim,
                                       double diam, uint64_t* crank,
                                       uint64_t* csign) noexcept nogil:
    cdef uint64_t back, bsign
    if not first_equal_cofacet(s, rank, dim, diam, crank, csign):
        return False
    if not first_equal_facet(s, crank[0], dim + 1, diam, &back, &bsign):
        return False
    return back == rank


cdef inline bint in_zero_apparent_pair(Shared* s, uint64_t rank, int dim,
                                       double diam) noexcept nogil:
    cdef uint64_t r, sg
    if zero_apparent_cofacet(s, rank, dim, diam, &r, &sg):
        return True
    if dim >= 1 and zero_apparent_facet(s, rank, dim, diam, &r, &sg):
        return True
    return False


# --- pivot table ------------------------------------------------------------

cdef inline int64_t table_find_slot(Shared* s, uint64_t key,
                                    double kdiam) noexcept nogil:
    cdef uint64_t h = (key * <uint64_t>0x9E3779B97F4A7C15) >> s.shift
    cdef uint64_t k, expected
    while True:
        k = rph_load_u64(s.keys + h)
        if k == EMPTY:
            expected = EMPTY
            if rph_cas_u64(s.keys + h, &expected, key):
                s.kdiams[h] = kdiam
                return <int64_t>h
            k = expected
        if k == key:
            return <int64_t>h
        h = (h + 1) & s.mask


cdef inline uint64_t table_lookup(Shared* s, uint64_t key) noexcept nogil:
    cdef uint64_t h = (key * <uint64_t>0x9E3779B97F4A7C15) >> s.shift
    cdef uint64_t k
    while True:
        k = rph_load_u64(s.keys + h)
        if k == EMPTY:
            return EMPTY
        if k == key:
            return rph_load_u64(s.vals + h)
        h = (h + 1) & s.mask


cdef struct VEntry:
    uint64_t rank
    double diam
    uint64_t coeff


cdef int _cmp_ventry(const void* pa, const void* pb) noexcept nogil:
    cdef uint64_t a = (<VEntry*>pa).rank
    cdef uint64_t b = (<VEntry*>pb).rank
    if a < b:
        return -1
    if a > b:
        return 1
    return 0


cdef int publish(Shared* s, Arena* arena, uint64_t pos, VVec* V,
                 uint64_t pivot_coeff) noexcept nogil:
    """Merge, scale by 1/pivot_coeff, and atomically install this column's
    combination so other workers can add it."""
    cdef VEntry* tmp = <VEntry*>malloc(V.len * sizeof(VEntry))
    cdef int64_t i, out_len
    cdef uint64_t scale = s.inv[pivot_coeff]
    cdef uint64_t c
    cdef char* block
    cdef int64_t* head
    cdef uint64_t* ranks
    cdef double* diams
    cdef uint64_t* coeffs
    if tmp == NULL:
        return 1
    for i in range(V.len):
        tmp[i].rank = V.rank[i]
        tmp[i].diam = V.diam[i]
        tmp[i].coeff = V.coeff[i]
    qsort(tmp, V.len, sizeof(VEntry), _cmp_ventry)
    out_len = 0
    i = 0
    while i < V.len:
        c = tmp[i].coeff
        while i + 1 < V.len and tmp[i + 1].rank == tmp[i].rank:
            i += 1
            c += tmp[i].coeff
        c = (c % s.modulus) * scale % s.modulus
        if c:
            tmp[out_len].rank = tmp[i].rank
            tmp[out_len].diam = tmp[i].diam
            tmp[out_len].coeff = c
            out_len += 1
        i += 1
    block = <char*>malloc(sizeof(int64_t)
                          + out_len * (sizeof(uint64_t) * 2 + sizeof(double)))
    if block == NULL:
        free(tmp)
        return 1
    head = <int64_t*>block
    head[0] = out_len
    ranks = <uint64_t*>(block + sizeof(int64_t))
    diams = <double*>(block + sizeof(int64_t) + out_len * sizeof(uint64_t))
    coeffs = <uint64_t*>(block + sizeof(int64_t)
                         + out_len * (sizeof(uint64_t) + sizeof(double)))
    for i in range(out_len):
        ranks[i] = tmp[i].rank
        diams[i] = tmp[i].diam
        coeffs[i] = tmp[i].coeff
    free(tmp)
    if arena_push(arena, <void*>block):
        free(block)
        return 1
    rph_store_ptr(s.published + pos, <void*>block)
    return 0


cdef int table_claim(Shared* s, Arena* arena, uint64_t key, double kdiam,
                     uint64_t mypos, VVec* V, uint64_t pivot_coeff,
                     uint64_t* other) noexcept nogil:
    """Publish-and-learn: install (key -> mypos) unless an earlier column
    already holds the slot.  The column is published before any exchange
    that could make it visible."""
    cdef int64_t slot = table_find_slot(s, key, kdiam)
    cdef uint64_t v = rph_load_u64(s.vals + slot)
    if v != EMPTY and v < mypos:
        other[0] = v
        return R_LOSES
    if publish(s, arena, mypos, V, pivot_coeff):
        s.error[0] = 1
        return R_CLAIMED
    while True:
        if rph_cas_u64(s.vals + slot, &v, mypos):
            if v == EMPTY:
                return R_CLAIMED
            other[0] = v
            rph_faa_u64(s.displaced, 1)
            return R_DISPLACES
        if v != EMPTY and v < mypos:
            other[0] = v
            return R_LOSES


# --- column reduction -------------------------------------------------------

cdef inline bint pop_pivot(Heap* h, uint64_t p, double* pdiam, uint64_t* prank,
                           uint64_t* pcoeff) noexcept nogil:
    cdef uint64_t acc, rank
    cdef double diam
    while h.len:
        rank = h.a[0].rank
        diam = h.a[0].diam
        acc = 0
        while h.len and h.a[0].rank == rank:
            acc = (acc + h.a[0].coeff) % p
            heap_pop_top(h)
        if acc:
            pdiam[0] = diam
            prank[0] = rank
            pcoeff[0] = acc
            return True
    return False


cdef inline int add_published(Shared* s, uint64_t other, uint64_t lam,
                              Heap* heap, VVec* V) noexcept nogil:
    cdef char* block = <char*>rph_load_ptr(s.published + other)
    cdef int64_t length = (<int64_t*>block)[0]
    cdef uint64_t* ranks = <uint64_t*>(block + sizeof(int64_t))
    cdef double* diams = <double*>(block + sizeof(int64_t)
                                   + length * sizeof(uint64_t))
    cdef uint64_t* coeffs = <uint64_t*>(block + sizeof(int64_t)
                                        + length * (sizeof(uint64_t)
                                                    + sizeof(double)))
    cdef int64_t i
    cdef uint64_t c
    for i in range(length):
        c = (lam * coeffs[i]) % s.modulus
        if c == 0:
            continue
        if vvec_push(V, ranks[i], diams[i], c):
            return 1
        if push_cofacets(s, ranks[i], diams[i], s.dim, c, heap):
            return 1
    return 0


cdef void reduce_column(Shared* s, Arena* arena, uint64_t pos0, Heap* heap,
                        VVec* V) noexcept nogil:
    cdef uint64_t pos = pos0
    cdef uint64_t rank = s.cols_rank[pos]
    cdef double diam = s.cols_diam[pos]
    cdef uint64_t p = s.modulus
    cdef CofIter it
    cdef uint64_t crank, csign, prank, pcoeff, other, frank, fsign, lam
    cdef double cdiam, pdiam
    cdef bint emergent = False
    cdef int check_emergent = s.use_apparent
    cdef int res

    V.len = 0
    heap.len = 0
    if vvec_push(V, rank, diam, 1):
        s.error[0] = 1
        return

    cof_init(s, rank, diam, s.dim, 0, &it)
    while cof_next(s, &it, &crank, &cdiam, &csign):
        if heap_push(heap, cdiam, crank, csign):
            s.error[0] = 1
            return
        if check_emergent and cdiam == diam:
            if (table_lookup(s, crank) == EMPTY
                    and not zero_apparent_facet(s, crank, s.dim + 1, cdiam,
                                                &frank, &fsign)):
                emergent = True
                break
            check_emergent = 0

    if emergent:
        res = table_claim(s, arena, crank, cdiam, pos, V, csign, &other)
        if s.error[0]:
            return
        if res == R_CLAIMED:
            return
        if res == R_DISPLACES:
            if adopt(s, &pos, heap, V, other):
                s.error[0] = 1
                return
        else:
            # finish the interrupted enumeration and reduce normally
            heap.len = 0
            if push_cofacets(s, rank, diam, s.dim, 1, heap):
                s.error[0] = 1
                return

    while True:
        if not pop_pivot(heap, p, &pdiam, &prank, &pcoeff):
            s.essential[pos] = 1
            return
        if s.use_apparent:
            if zero_apparent_facet(s, prank, s.dim + 1, pdiam, &frank, &fsign):
                # virtual column: the pivot's apparent facet is already
                # reduced with this very pivot, add its coboundary
                lam = ((p - pcoeff) * s.inv[fsign]) % p
                if (heap_push(heap, pdiam, prank, pcoeff)
                        or push_cofacets(s, frank, pdiam, s.dim, lam, heap)
                        or vvec_push(V, frank, pdiam, lam)):
                    s.error[0] = 1
                    return
                continue
        res = table_claim(s, arena, prank, pdiam, pos, V, pcoeff, &other)
        if s.error[0]:
            return
        if res == R_CLAIMED:
            return
        if res == R_LOSES:
            lam = p - pcoeff  # the published column's pivot coefficient is 1
            if (heap_push(heap, pdiam, prank, pcoeff)
                    or add_published(s, other, lam, heap, V)):
                s.error[0] = 1
                return
            continue
        if adopt(s, &pos, heap, V, other):
            s.error[0] = 1
            return


cdef int adopt(Shared* s, uint64_t* pos, Heap* heap, VVec* V,
               uint64_t other) noexcept nogil:
    """Resume a displaced column from its published combination."""
    cdef char* block = <char*>rph_load_ptr(s.published + other)
    cdef int64_t length = (<int64_t*>block)[0]
    cdef uint64_t* ranks = <uint64_t*>(block + sizeof(int64_t))
    cdef double* diams = <double*>(block + sizeof(int64_t)
                                   + length * sizeof(uint64_t))
    cdef uint64_t* coeffs = <uint64_t*>(block + sizeof(int64_t)
                                        + length * (sizeof(uint64_t)
                                                    + sizeof(double)))
    cdef int64_t i
    pos[0] = other
    V.len = 0
    heap.len = 0
    for i in range(length):
        if vvec_push(V, ranks[i], diams[i], coeffs[i]):
            return 1
        if push_cofacets(s, ranks[i], diams[i], s.dim, coeffs[i], heap):
            return 1
    return 0


cdef void worker_loop(Shared* s, Arena* arena) noexcept nogil:
    cdef Heap heap
    cdef VVec V
    cdef uint64_t idx, start, end, pos
    heap.a = NULL
    heap.len = 0
    heap.cap = 0
    V.rank = NULL
    V.diam = NULL
    V.coeff = NULL
    V.len = 0
    V.cap = 0
    while not s.error[0]:
        idx = rph_faa_u64(s.cursor, 1)
        if idx >= s.nchunks:
            break
        if s.reverse:
            # debug schedule: dispense chunks from the end; the pairing must
            # not change (out-of-order reduction)
            idx = s.nchunks - 1 - idx
        start = idx * s.chunk
        end = start + s.chunk
        if end > <uint64_t>s.ncols:
            end = <uint64_t>s.ncols
        pos = start
        while pos < end:
            reduce_column(s, arena, pos, &heap, &V)
            if s.error[0]:
                break
            pos += 1
    free(heap.a)
    free(V.rank)
    free(V.diam)
    free(V.coeff)


# --- Python-visible context and entry points --------------------------------

cdef class Ctx:
    """Read-only filtration data shared by every kernel call."""

    cdef int64_t n
    cdef double threshold
    cdef uint64_t modulus
    cdef int is_dense
    cdef object keep  # owned numpy arrays
    cdef double* dense
    cdef double* births
    cdef uint64_t* binom
    cdef int64_t binom_cols
    cdef uint64_t* inv
    cdef int64_t* nbr_ptr
    cdef int64_t* nbr_idx
    cdef double* nbr_wt

    @staticmethod
    def from_dense(eff, births, binom, threshold, modulus, inv):
        cdef Ctx self = Ctx()
        eff = np.ascontiguousarray(eff, dtype=np.float64)
        births = np.ascontiguousarray(births, dtype=np.float64)
        binom = np.ascontiguousarray(binom, dtype=np.uint64)
        inv64 = np.ascontiguousarray(inv, dtype=np.uint64)
        self.keep = (eff, births, binom, inv64)
        self.n = eff.shape[0]
        self.threshold = threshold
        self.modulus = modulus
        self.is_dense = 1
        cdef double[:, ::1] effv = eff
        cdef double[::1] bv = births
        cdef uint64_t[:, ::1] binv = binom
        cdef uint64_t[::1] invv = inv64
        self.dense = &effv[0, 0]
        self.births = &bv[0]
        self.binom = &binv[0, 0]
        self.binom_cols = binom.shape[1]
        self.inv = &invv[0]
        if binom.shape[1] + 1 > MAXV:
            raise ValueError("max_dim too large for the compiled backend")
        return self

    @staticmethod
    def from_sparse(n, births, edges, binom, threshold, modulus, inv):
        cdef Ctx self = Ctx()
        births = np.ascontiguousarray(births, dtype=np.float64)
        binom = np.ascontiguousarray(binom, dtype=np.uint64)
        inv64 = np.ascontiguousarray(inv, dtype=np.uint64)
        if len(edges):
            e = np.asarray([(u, v, w) for u, v, w in edges], dtype=np.float64)
            us = e[:, 0].astype(np.int64)
            vs = e[:, 1].astype(np.int64)
            ws = e[:, 2]
        else:
            us = np.empty(0, dtype=np.int64)
            vs = np.empty(0, dtype=np.int64)
            ws = np.empty(0, dtype=np.float64)
        # symmetric CSR with neighbour lists sorted by id
        src = np.concatenate([us, vs])
        dst = np.concatenate([vs, us])
        wgt = np.concatenate([ws, ws])
        order = np.lexsort((dst, src))
        src, dst, wgt = src[order], dst[order], wgt[order]
        ptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(ptr, src + 1, 1)
        ptr = np.cumsum(ptr).astype(np.int64)
        idx = np.ascontiguousarray(dst, dtype=np.int64)
        wts = np.ascontiguousarray(wgt, dtype=np.float64)
        ptr = np.ascontiguousarray(ptr, dtype=np.int64)
        self.keep = (births, binom, inv64, ptr, idx, wts)
        self.n = n
        self.threshold = threshold
        self.modulus = modulus
        self.is_dense = 0
        cdef double[::1] bv = births
        cdef uint64_t[:, ::1] binv = binom
        cdef uint64_t[::1] invv = inv64
        cdef int64_t[::1] pv = ptr
        cdef int64_t[::1] iv = idx
        cdef double[::1] wv = wts
        self.births = &bv[0]
        self.binom = &binv[0, 0]
        self.binom_cols = binom.shape[1]
        self.inv = &invv[0]
        self.nbr_ptr = &pv[0]
        self.nbr_idx = &iv[0] if idx.shape[0] else NULL
        self.nbr_wt = &wv[0] if wts.shape[0] else NULL
        if binom.shape[1] + 1 > MAXV:
            raise ValueError("max_dim too large for the compiled backend")
        return self

    cdef void fill(self, Shared* s):
        s.n = self.n
        s.threshold = self.threshold
        s.modulus = self.modulus
        s.inv = self.inv
        s.binom = self.binom
        s.binom_cols = self.binom_cols
        s.is_dense = self.is_dense
        s.dense = self.dense
        s.births = self.births
        s.nbr_ptr = self.nbr_ptr
        s.nbr_idx = self.nbr_idx
        s.nbr_wt = self.nbr_wt


cdef class ReduceState:
    """Shared state of one dimension's reduction."""

    cdef Ctx ctx
    cdef object cols_rank_arr, cols_diam_arr, keys_arr, vals_arr, kdiams_arr
    cdef object essential_arr
    cdef uint64_t[::1] cols_rank
    cdef double[::1] cols_diam
    cdef uint64_t[::1] keys
    cdef uint64_t[::1] vals
    cdef double[::1] kdiams
    cdef uint8_t[::1] essential
    cdef void** published
    cdef Arena* arenas
    cdef int n_threads
    cdef int dim
    cdef int use_apparent
    cdef int64_t ncols
    cdef uint64_t capacity
    cdef int shift
    cdef uint64_t cursor
    cdef uint64_t chunk
    cdef uint64_t nchunks
    cdef int reverse
    cdef uint64_t displaced
    cdef int error

    def __cinit__(self, Ctx ctx, cols_rank, cols_diam, int dim, int n_threads,
                  bint use_apparent, bint reverse_chunks=False):
        self.ctx = ctx
        self.cols_rank_arr = np.ascontiguousarray(cols_rank, dtype=np.uint64)
        self.cols_diam_arr = np.ascontiguousarray(cols_diam, dtype=np.float64)
        self.cols_rank = self.cols_rank_arr
        self.cols_diam = self.cols_diam_arr
        self.ncols = self.cols_rank_arr.shape[0]
        self.dim = dim
        self.n_threads = n_threads
        self.use_apparent = 1 if use_apparent else 0
        cdef uint64_t cap = 16
        while cap < <uint64_t>(2 * self.ncols):
            cap *= 2
        self.capacity = cap
        self.shift = 64
        while (<uint64_t>1 << (64 - self.shift)) < cap:
            self.shift -= 1
        self.keys_arr = np.full(cap, EMPTY, dtype=np.uint64)
        self.vals_arr = np.full(cap, EMPTY, dtype=np.uint64)
        self.kdiams_arr = np.zeros(cap, dtype=np.float64)
        self.essential_arr = np.zeros(self.ncols, dtype=np.uint8)
        self.keys = self.keys_arr
        self.vals = self.vals_arr
        self.kdiams = self.kdiams_arr
        self.essential = self.essential_arr
        self.published = <void**>malloc(max(self.ncols, 1) * sizeof(void*))
        self.arenas = <Arena*>malloc(n_threads * sizeof(Arena))
        if self.published == NULL or self.arenas == NULL:
            raise MemoryError
        cdef int64_t i
        for i in range(self.ncols):
            self.published[i] = NULL
        for i in range(n_threads):
            self.arenas[i].blocks = NULL
            self.arenas[i].len = 0
            self.arenas[i].cap = 0
        self.cursor = 0
        self.chunk = max(1, self.ncols // (8 * n_threads))
        self.nchunks = (self.ncols + self.chunk - 1) // self.chunk
        self.reverse = 1 if reverse_chunks else 0
        self.displaced = 0
        self.error = 0

    def __dealloc__(self):
        cdef int t
        cdef int64_t i
        if self.arenas != NULL:
            for t in range(self.n_threads):
                for i in range(self.arenas[t].len):
                    free(self.arenas[t].blocks[i])
                free(self.arenas[t].blocks)
            free(self.arenas)
        free(self.published)

    cdef void fill(self, Shared* s):
        self.ctx.fill(s)
        s.dim = self.dim
        s.ncols = self.ncols
        s.cols_rank = &self.cols_rank[0] if self.ncols else NULL
        s.cols_diam = &self.cols_diam[0] if self.ncols else NULL
        s.keys = &self.keys[0]
        s.vals = &self.vals[0]
        s.kdiams = &self.kdiams[0]
        s.mask = self.capacity - 1
        s.shift = self.shift
        s.published = self.published
        s.cursor = &self.cursor
        s.chunk = self.chunk
        s.nchunks = self.nchunks
        s.reverse = self.reverse
        s.displaced = &self.displaced
        s.essential = &self.essential[0] if self.ncols else NULL
        s.use_apparent = self.use_apparent
        s.error = &self.error


def reduce_worker(ReduceState state, int tid):
    cdef Shared s
    state.fill(&s)
    cdef Arena* arena = &state.arenas[tid]
    with nogil:
        worker_loop(&s, arena)
    if state.error:
        raise MemoryError("reduction ran out of memory")


def apparent_mask_range(Ctx ctx, ranks, diams, int dim, out, int64_t lo,
                        int64_t hi):
    cdef uint64_t[::1] rv = ranks
    cdef double[::1] dv = diams
    cdef uint8_t[::1] ov = out
    cdef Shared s
    ctx.fill(&s)
    cdef int64_t i
    with nogil:
        for i in range(lo, hi):
            ov[i] = 1 if in_zero_apparent_pair(&s, rv[i], dim, dv[i]) else 0


def assemble_next(Ctx ctx, ranks, diams, int dim):
    """All (dim+1)-simplices within threshold from the dim-simplex list,
    generated once each (inserted vertex above the current maximum) and
    sorted in filtration order."""
    ranks = np.ascontiguousarray(ranks, dtype=np.uint64)
    diams = np.ascontiguousarray(diams, dtype=np.float64)
    cdef uint64_t[::1] rv = ranks
    cdef double[::1] dv = diams
    cdef Shared s
    ctx.fill(&s)
    cdef U64Vec out_r
    cdef F64Vec out_d
    out_r.a = NULL
    out_r.len = 0
    out_r.cap = 0
    out_d.a = NULL
    out_d.len = 0
    out_d.cap = 0
    cdef int64_t i, m = ranks.shape[0]
    cdef CofIter it
    cdef uint64_t crank, csign
    cdef double cdiam
    cdef int fail = 0
    with nogil:
        for i in range(m):
            cof_init(&s, rv[i], dv[i], dim, 1, &it)
            while cof_next(&s, &it, &crank, &cdiam, &csign):
                if u64vec_push(&out_r, crank) or f64vec_push(&out_d, cdiam):
                    fail = 1
                    break
            if fail:
                break
    if fail:
        free(out_r.a)
        free(out_d.a)
        raise MemoryError
    ranks2 = np.empty(out_r.len, dtype=np.uint64)
    diams2 = np.empty(out_d.len, dtype=np.float64)
    cdef uint64_t[::1] r2 = ranks2
    cdef double[::1] d2 = diams2
    if out_r.len:
        memcpy(&r2[0], out_r.a, out_r.len * sizeof(uint64_t))
        memcpy(&d2[0], out_d.a, out_d.len * sizeof(double))
    free(out_r.a)
    free(out_d.a)
    order = np.lexsort((np.bitwise_not(ranks2), diams2))
    return ranks2[order], diams2[order]


def reduce_dimension(Ctx ctx, int dim, ranks, diams, cleared, pool, opts):
    """Mirror of the pure-Python reduce_dimension, returning
    (pairs, essential, cleared_next, counters)."""
    use_clearing = opts.get("clearing", True)
    use_apparent = opts.get("apparent", True)
    ranks = np.ascontiguousarray(ranks, dtype=np.uint64)
    diams = np.ascontiguousarray(diams, dtype=np.float64)
    cleared = np.ascontiguousarray(cleared, dtype=np.uint64)

    counters = {"columns": 0, "cleared": 0, "apparent": 0}
    if cleared.shape[0] and ranks.shape[0]:
        pos = np.searchsorted(cleared, ranks)
        pos = np.minimum(pos, cleared.shape[0] - 1)
        is_cleared = cleared[pos] == ranks
    else:
        is_cleared = np.zeros(ranks.shape[0], dtype=bool)
    if use_clearing:
        counters["cleared"] = int(is_cleared.sum())
        keep_ranks = ranks[~is_cleared]
        keep_diams = diams[~is_cleared]
    else:
        keep_ranks, keep_diams = ranks, diams

    if use_apparent and keep_ranks.shape[0]:
        mask = np.zeros(keep_ranks.shape[0], dtype=np.uint8)
        pool.run_parallel(
            keep_ranks.shape[0],
            lambda lo, hi: apparent_mask_range(ctx, keep_ranks, keep_diams,
                                               dim, mask, lo, hi),
        )
        skip = mask.view(bool)
        counters["apparent"] = int(skip.sum())
        keep_ranks = keep_ranks[~skip]
        keep_diams = keep_diams[~skip]

    cols_rank = keep_ranks[::-1].copy()
    cols_diam = keep_diams[::-1].copy()
    counters["columns"] = int(cols_rank.shape[0])

    if cols_rank.shape[0] == 0:
        counters["zero_pairs"] = 0
        counters["bars"] = 0
        counters["essential"] = 0
        return [], [], np.empty(0, dtype=np.uint64), counters

    state = ReduceState(ctx, cols_rank, cols_diam, dim, pool.n_threads,
                        use_apparent, opts.get("reverse_chunks", False))
    pool.run_workers(lambda tid: reduce_worker(state, tid))

    keys = state.keys_arr
    vals = state.vals_arr
    kdiams = state.kdiams_arr
    sel = (keys != EMPTY) & (vals != EMPTY)
    pivot_ranks = keys[sel]
    positions = vals[sel].astype(np.int64)
    deaths = kdiams[sel]
    births = cols_diam[positions]
    real = deaths > births
    pairs = list(zip(births[real].tolist(), deaths[real].tolist(),
                     cols_rank[positions[real]].tolist(),
                     pivot_ranks[real].tolist()))
    counters["zero_pairs"] = int((~real).sum())
    counters["bars"] = len(pairs)

    ess_pos = np.nonzero(state.essential_arr)[0]
    if not use_clearing and cleared.shape[0] and ess_pos.shape[0]:
        ess_ranks = cols_rank[ess_pos]
        pos2 = np.searchsorted(cleared, ess_ranks)
        pos2 = np.minimum(pos2, cleared.shape[0] - 1)
        ess_pos = ess_pos[cleared[pos2] != ess_ranks]
    essential = [(float(cols_diam[i]), int(cols_rank[i])) for i in ess_pos]
    counters["essential"] = len(essential)
    counters["displacements"] = int(state.displaced)

    cleared_next = np.sort(pivot_ranks)
    return pairs, essential, cleared_next, counters
