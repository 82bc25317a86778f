"""Compiled inner loops for sweeps, feedback extraction and color transport.

All kernels run on flat extended-grid arrays with candidate data precomputed
per (interior node, control): flat lower-corner index of the foot cell, local
cell coordinates and the step cost ``h * l`` (negative = inadmissible
control).  They release the GIL so worker threads can drive disjoint batches
concurrently.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_BIG = 1.0e300


@njit(cache=True, nogil=True)
def sweep_batch(u, order, start, stop, iflat, kind, base, locs, cost,
                coff, active, frozen, hard, value_reject, allowed,
                use_allowed, sentinel, dim):
    """One Gauss-Seidel pass over ``order[start:stop]``, in place.

    Node kinds: 0 free, 1 target (forced 0), 2 obstacle (forced sentinel).
    A candidate is rejected when a nonzero-weight corner of its foot cell
    is flagged in ``hard`` (ghost/obstacle nodes, plus whatever the caller
    blocks structurally, e.g. out-of-box nodes under a state constraint).
    Otherwise corners contribute whatever they hold -- live value if
    ``active`` at that node, else ``frozen`` -- with no sentinel cutoff:
    a candidate leaning on unreached nodes just evaluates huge and loses.
    That keeps value information flowing into regions where every foot
    retains some weight on its own not-yet-reached side (thin reachable
    bands under strongly anisotropic dynamics would otherwise freeze).

    ``value_reject`` flips that read for one-shot state-constrained
    solves: corners at or above half the sentinel also reject the
    candidate, so nodes the constraint cut off from the target pin their
    whole shadow at the sentinel instead of bleeding scaled sentinel mass
    into it.  Iterated solves must leave it off (the rejection fixed
    point can stall above the true one).

    Writes are monotone: a node keeps its current value unless the best
    surviving candidate beats it.  Besides making the all-rejected case
    well-defined, this is what lets subdomain sweeps compose: a box whose
    good feet are cut off by an internal interface would otherwise
    overwrite coupled-in values with its own worse estimates and re-poison
    downstream nodes within the pass.  Warm starts inherit the same rule
    (seeded values can only come down).

    Returns ``(max_change, relaxations, candidate_evals)``.
    """
    ncorner = 1 << dim
    nc = base.shape[1]
    maxch = 0.0
    nrelax = 0
    nevals = 0
    for oi in range(start, stop):
        s = order[oi]
        fi = iflat[s]
        nrelax += 1
        k = kind[s]
        if k == 1:
            u[fi] = 0.0
            continue
        if k == 2:
            u[fi] = sentinel
            continue
        old = u[fi]
        best = _BIG
        for c in range(nc):
            csc = cost[s, c]
            if csc < 0.0:
                continue
            if use_allowed and allowed[s, c] == 0:
                continue
            nevals += 1
            b = base[s, c]
            v = 0.0
            rejected = False
            for corner in range(ncorner):
                w = 1.0
                for ax in range(dim):
                    t = locs[s, c, ax]
                    if (corner >> ax) & 1:
                        w *= t
                    else:
                        w *= 1.0 - t
                if w == 0.0:
                    continue
                f2 = b + coff[corner]
                if hard[f2] != 0:
                    rejected = True
                    break
                cv = u[f2] if active[f2] != 0 else frozen[f2]
                v += w * cv
            if rejected:
                continue
            v += csc
            if v < best:
                best = v
        if best < old:
            u[fi] = best
            ch = old - best
            if ch > maxch:
                maxch = ch
    return maxch, nrelax, nevals


@njit(cache=True, nogil=True)
def feedback_batch(u, order, start, stop, iflat, kind, base, locs, cost,
                   coff, hard, allowed, use_allowed, sentinel, dim, out):
    """Argmin control index per node into ``out`` (-1 = none).

    Dirichlet-style reads: every non-``hard`` corner is readable from ``u``
    (sentinel values included; candidates leaning on them evaluate huge and
    lose to any grounded alternative).  Target/obstacle nodes and nodes
    whose own value is >= sentinel/2 get -1.  Ties take the lowest index.

    Returns the number of candidate evaluations.
    """
    half = 0.5 * sentinel
    ncorner = 1 << dim
    nc = base.shape[1]
    nevals = 0
    for oi in range(start, stop):
        s = order[oi]
        fi = iflat[s]
        out[s] = -1
        if kind[s] != 0:
            continue
        if u[fi] >= half:
            continue
        best = _BIG
        bc = -1
        for c in range(nc):
            csc = cost[s, c]
            if csc < 0.0:
                continue
            if use_allowed and allowed[s, c] == 0:
                continue
            nevals += 1
            b = base[s, c]
            v = 0.0
            rejected = False
            for corner in range(ncorner):
                w = 1.0
                for ax in range(dim):
                    t = locs[s, c, ax]
                    if (corner >> ax) & 1:
                        w *= t
                    else:
                        w *= 1.0 - t
                if w == 0.0:
                    continue
                f2 = b + coff[corner]
                if hard[f2] != 0:
                    rejected = True
                    break
                v += w * u[f2]
            if rejected:
                continue
            v += csc
            if v < best:
                best = v
                bc = c
        out[s] = bc
    return nevals


@njit(cache=True, nogil=True)
def transport_batch(phi, order, start, stop, iflat, tbase, tlocs, coff, dim):
    """One Gauss-Seidel transport pass: ``phi_i <- I[phi](foot_i)``.

    Plain multilinear reads (no saturation; ghost nodes hold 0).  ``order``
    must contain only nodes that actually move (not held, feedback known).

    Returns ``(max_change, updates)``.
    """
    ncorner = 1 << dim
    maxch = 0.0
    nupd = 0
    for oi in range(start, stop):
        s = order[oi]
        fi = iflat[s]
        nupd += 1
        b = tbase[s]
        v = 0.0
        for corner in range(ncorner):
            w = 1.0
            for ax in range(dim):
                t = tlocs[s, ax]
                if (corner >> ax) & 1:
                    w *= t
                else:
                    w *= 1.0 - t
            if w != 0.0:
                v += w * phi[b + coff[corner]]
        ch = phi[fi] - v
        if ch < 0.0:
            ch = -ch
        phi[fi] = v
        if ch > maxch:
            maxch = ch
    return maxch, nupd
