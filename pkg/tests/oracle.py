"""Naive reference barcode computation for the test suite.

Deliberately independent of the package internals: simplices are enumerated
with itertools.combinations, diameters recomputed from the raw matrix, and
the boundary matrix is reduced explicitly, column by column, over Z/pZ.
Slow and obviously correct; keep it that way.
"""

import itertools
import math

INF = math.inf


def _diameter(comb, m, births):
    best = max(births[c] for c in comb)
    for a, b in itertools.combinations(comb, 2):
        w = m[a][b]
        if w > best:
            best = w
    return best


def _colex_rank(comb):
    # comb is ascending; same combinatorial numbering the engine claims to use
    return sum(math.comb(v, i + 1) for i, v in enumerate(comb))


def oracle_barcode(matrix, max_dim, threshold=INF, modulus=2):
    """Barcode of the flag filtration of ``matrix`` (diagonal = births,
    +inf = absent pair), dimensions 0..max_dim, as sorted (birth, death)
    lists per dimension."""
    n = len(matrix)
    m = [[float(x) for x in row] for row in matrix]
    births = [m[i][i] for i in range(n)]

    simplices = []
    for k in range(1, max_dim + 3):
        for comb in itertools.combinations(range(n), k):
            d = _diameter(comb, m, births)
            if d <= threshold and math.isfinite(d):
                simplices.append((d, comb))
    simplices.sort(key=lambda t: (t[0], -_colex_rank(t[1])))
    position = {comb: i for i, (_, comb) in enumerate(simplices)}

    inv = [0] * modulus
    for a in range(1, modulus):
        inv[a] = pow(a, modulus - 2, modulus)

    reduced = []
    low_owner = {}
    death_of_row = {}
    dies = set()
    for j, (_, comb) in enumerate(simplices):
        col = {}
        if len(comb) > 1:
            for i in range(len(comb)):
                face = comb[:i] + comb[i + 1:]
                sign = 1 if i % 2 == 0 else modulus - 1
                col[position[face]] = sign
        while col:
            low = max(col)
            other = low_owner.get(low)
            if other is None:
                break
            factor = (-col[low] * inv[reduced[other][low]]) % modulus
            for row, c in reduced[other].items():
                val = (col.get(row, 0) + factor * c) % modulus
                if val:
                    col[row] = val
                elif row in col:
                    del col[row]
        reduced.append(col)
        if col:
            low = max(col)
            low_owner[low] = j
            death_of_row[low] = j
            dies.add(j)

    bars = [[] for _ in range(max_dim + 1)]
    for i, (diam, comb) in enumerate(simplices):
        dim = len(comb) - 1
        if dim > max_dim:
            continue
        if i in death_of_row:
            death = simplices[death_of_row[i]][0]
            if death > diam:
                bars[dim].append((diam, death))
        elif i not in dies:
            bars[dim].append((diam, INF))
    return [sorted(b) for b in bars]


def dense_to_matrix(values):
    return [list(map(float, row)) for row in values]


def sparse_to_matrix(n, edges, births):
    m = [[INF] * n for _ in range(n)]
    for i in range(n):
        m[i][i] = float(births[i])
    for u, v, w in edges:
        m[u][v] = m[v][u] = float(w)
    return m
