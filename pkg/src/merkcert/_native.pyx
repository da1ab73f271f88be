# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: SHA-256 tree construction, proof extraction, folding.

Same array layout and semantics as ``merkcert._pykernel``; hashing goes
through libcrypto's low-level SHA256 context to avoid per-call provider
fetches. Only the default SHA-256 hasher is supported here — custom
hashers route to the Python kernel.
"""

import array as _array

from cpython cimport array
from cpython.bytes cimport PyBytes_AS_STRING, PyBytes_GET_SIZE, PyBytes_FromStringAndSize
from libc.string cimport memcpy

cdef extern from "openssl/sha.h":
    ctypedef struct SHA256_CTX:
        pass
    int SHA256_Init(SHA256_CTX *c) nogil
    int SHA256_Update(SHA256_CTX *c, const void *data, size_t length) nogil
    int SHA256_Final(unsigned char *md, SHA256_CTX *c) nogil

cdef enum:
    DIGEST_LEN = 32

cdef array.array _I_TEMPLATE = _array.array("i", [])
cdef array.array _Q_TEMPLATE = _array.array("q", [])


cdef inline void _sha256_one(const unsigned char *data, size_t n, unsigned char *out) nogil:
    cdef SHA256_CTX ctx
    SHA256_Init(&ctx)
    SHA256_Update(&ctx, data, n)
    SHA256_Final(out, &ctx)


cdef inline void _sha256_pair(const unsigned char *a, const unsigned char *b,
                              unsigned char *out) nogil:
    cdef SHA256_CTX ctx
    SHA256_Init(&ctx)
    SHA256_Update(&ctx, a, DIGEST_LEN)
    SHA256_Update(&ctx, b, DIGEST_LEN)
    SHA256_Final(out, &ctx)


def build(list items, bint prehashed):
    cdef Py_ssize_t n = len(items)
    if n == 0:
        raise ValueError("no data to certify")

    # count slots: leaves, plus per level an optional duplicate and the parents
    cdef Py_ssize_t total = n
    cdef Py_ssize_t level = n
    while level > 1:
        if level & 1:
            total += 1
            level += 1
        total += level // 2
        level //= 2

    values_obj = PyBytes_FromStringAndSize(NULL, total * DIGEST_LEN)
    cdef unsigned char *values = <unsigned char *> PyBytes_AS_STRING(values_obj)
    dups_obj = PyBytes_FromStringAndSize(NULL, total)
    cdef unsigned char *dups = <unsigned char *> PyBytes_AS_STRING(dups_obj)
    cdef array.array indexes = array.clone(_Q_TEMPLATE, total, zero=False)
    cdef array.array lefts = array.clone(_I_TEMPLATE, total, zero=False)
    cdef array.array rights = array.clone(_I_TEMPLATE, total, zero=False)
    cdef long long *idx = indexes.data.as_longlongs
    cdef int *lft = lefts.data.as_ints
    cdef int *rgt = rights.data.as_ints

    cdef array.array work = array.clone(_I_TEMPLATE, n + 1, zero=False)
    cdef int *cur = work.data.as_ints

    cdef Py_ssize_t pos = 0, i, item_len, last, left_pos, right_pos, next_len
    cdef long long hash_count = 0
    cdef int height = 0
    cdef object item
    cdef const unsigned char *src

    for i in range(n):
        item = items[i]
        if type(item) is not bytes:
            raise TypeError("items must be bytes")
        src = <const unsigned char *> PyBytes_AS_STRING(item)
        item_len = PyBytes_GET_SIZE(item)
        if prehashed:
            if item_len != DIGEST_LEN:
                raise ValueError(f"leaf digest must be {DIGEST_LEN} bytes")
            memcpy(values + pos * DIGEST_LEN, src, DIGEST_LEN)
        else:
            _sha256_one(src, item_len, values + pos * DIGEST_LEN)
            hash_count += 1
        idx[pos] = 2 * i + 1
        lft[pos] = -1
        rgt[pos] = -1
        dups[pos] = 0
        cur[i] = <int> pos
        pos += 1

    cdef Py_ssize_t level_len = n
    while level_len > 1:
        if level_len & 1:
            last = cur[level_len - 1]
            memcpy(values + pos * DIGEST_LEN, values + last * DIGEST_LEN, DIGEST_LEN)
            idx[pos] = idx[last]
            lft[pos] = -1
            rgt[pos] = -1
            dups[pos] = 1
            cur[level_len] = <int> pos
            pos += 1
            level_len += 1
        next_len = level_len // 2
        for i in range(next_len):
            left_pos = cur[2 * i]
            right_pos = cur[2 * i + 1]
            _sha256_pair(values + left_pos * DIGEST_LEN,
                         values + right_pos * DIGEST_LEN,
                         values + pos * DIGEST_LEN)
            hash_count += 1
            idx[pos] = idx[left_pos] + (<long long> 1 << height)
            lft[pos] = <int> left_pos
            rgt[pos] = <int> right_pos
            dups[pos] = 0
            cur[i] = <int> pos
            pos += 1
        level_len = next_len
        height += 1

    return values_obj, indexes, lefts, rights, dups_obj, height, hash_count


def extract(bytes values, array.array indexes, array.array lefts, array.array rights,
            Py_ssize_t root_pos, long long leaf_index, int height):
    cdef const unsigned char *vals = <const unsigned char *> PyBytes_AS_STRING(values)
    cdef long long *idx = indexes.data.as_longlongs
    cdef int *lft = lefts.data.as_ints
    cdef int *rgt = rights.data.as_ints

    sides_obj = PyBytes_FromStringAndSize(NULL, height)
    cdef unsigned char *sides = <unsigned char *> PyBytes_AS_STRING(sides_obj)
    cdef array.array sibs = array.clone(_I_TEMPLATE, height, zero=False)
    cdef int *sib = sibs.data.as_ints

    cdef Py_ssize_t node = root_pos
    cdef int visits = 1
    cdef int depth = 0
    cdef int slot
    while lft[node] != -1:
        slot = height - 1 - depth
        if leaf_index > idx[node]:
            sides[slot] = 0
            sib[slot] = lft[node]
            node = rgt[node]
        else:
            sides[slot] = 1
            sib[slot] = rgt[node]
            node = lft[node]
        depth += 1
        visits += 1
    if idx[node] != leaf_index or depth != height:
        raise KeyError("unknown leaf")
    return sides_obj, sibs, visits


def fold(bytes leaf_digest, bytes sides, bytes siblings):
    if PyBytes_GET_SIZE(leaf_digest) != DIGEST_LEN:
        raise ValueError(f"leaf digest must be {DIGEST_LEN} bytes")
    cdef Py_ssize_t steps = PyBytes_GET_SIZE(sides)
    if PyBytes_GET_SIZE(siblings) != steps * DIGEST_LEN:
        raise ValueError("siblings blob does not match step count")
    cdef const unsigned char *sd = <const unsigned char *> PyBytes_AS_STRING(sides)
    cdef const unsigned char *sb = <const unsigned char *> PyBytes_AS_STRING(siblings)

    cdef unsigned char running[DIGEST_LEN]
    memcpy(running, PyBytes_AS_STRING(leaf_digest), DIGEST_LEN)
    cdef Py_ssize_t t
    for t in range(steps):
        if sd[t] == 0:
            _sha256_pair(sb + t * DIGEST_LEN, running, running)
        else:
            _sha256_pair(running, sb + t * DIGEST_LEN, running)
    return PyBytes_FromStringAndSize(<char *> running, DIGEST_LEN)
