"""Exact orientation and circumsphere sign predicates (numba kernels).

Strategy: evaluate the determinant in ordinary floating point together with
a forward error bound; if the magnitude beats the bound the sign is certain,
otherwise fall back to an exact evaluation with floating-point expansion
arithmetic (multi-component nonoverlapping sums, Dekker/Shewchuk style).
The exact path uses the untranslated lifted determinant so every entry is a
single double and all products stay exact two-component expansions.

Sign conventions (differ from some classic codes, fixed by tests):

- ``orient3d_sign(a,b,c,d)`` > 0  iff  det[b-a; c-a; d-a] > 0, i.e. d lies on
  the side of plane(a,b,c) that makes (a,b,c,d) a positively oriented tet.
- ``insphere_sign(a,b,c,d,e)`` > 0 iff e lies strictly inside the circumsphere
  of a *positively oriented* (a,b,c,d); < 0 outside; 0 cospherical.
"""

import numpy as np
from numba import njit

EPS = 2.0 ** -53
SPLITTER = 2.0 ** 27 + 1.0

_RESULT_ERRBOUND = (3.0 + 8.0 * EPS) * EPS
_O3D_ERRBOUND_A = (7.0 + 56.0 * EPS) * EPS
_ISP_ERRBOUND_A = (16.0 + 224.0 * EPS) * EPS
# Headroom for a permanent grouped differently than the textbook derivation.
_SAFETY = 1.0 + 16.0 * EPS

JIT_OPTS = dict(cache=True, nogil=True, fastmath=False)


# ---------------------------------------------------------------------------
# expansion primitives
# ---------------------------------------------------------------------------


@njit(inline="always", **JIT_OPTS)
def _two_sum(a, b):
    x = a + b
    bvirt = x - a
    avirt = x - bvirt
    bround = b - bvirt
    around = a - avirt
    return x, around + bround


@njit(inline="always", **JIT_OPTS)
def _fast_two_sum(a, b):
    # requires |a| >= |b|
    x = a + b
    bvirt = x - a
    return x, b - bvirt


@njit(inline="always", **JIT_OPTS)
def _two_diff(a, b):
    x = a - b
    bvirt = a - x
    avirt = x + bvirt
    bround = bvirt - b
    around = a - avirt
    return x, around + bround


@njit(inline="always", **JIT_OPTS)
def _split(a):
    c = SPLITTER * a
    abig = c - a
    ahi = c - abig
    return ahi, a - ahi


@njit(inline="always", **JIT_OPTS)
def _two_product(a, b):
    x = a * b
    ahi, alo = _split(a)
    bhi, blo = _split(b)
    err1 = x - ahi * bhi
    err2 = err1 - alo * bhi
    err3 = err2 - ahi * blo
    return x, alo * blo - err3


@njit(inline="always", **JIT_OPTS)
def _two_product_presplit(a, b, bhi, blo):
    x = a * b
    ahi, alo = _split(a)
    err1 = x - ahi * bhi
    err2 = err1 - alo * bhi
    err3 = err2 - ahi * blo
    return x, alo * blo - err3


@njit(**JIT_OPTS)
def _two_two_diff(a1, a0, b1, b0, out):
    """(a1,a0) - (b1,b0) -> out[0..3], increasing magnitude order."""
    _i, x0 = _two_diff(a0, b0)
    _j, _0 = _two_sum(a1, _i)
    _i2, x1 = _two_diff(_0, b1)
    x3, x2 = _two_sum(_j, _i2)
    out[0] = x0
    out[1] = x1
    out[2] = x2
    out[3] = x3


@njit(**JIT_OPTS)
def _fast_expansion_sum_zeroelim(e, elen, f, flen, h):
    """h = e + f with zero elimination; returns the length of h."""
    enow = e[0]
    fnow = f[0]
    eindex = 0
    findex = 0
    if (fnow > enow) == (fnow > -enow):
        Q = enow
        eindex = 1
        if eindex < elen:
            enow = e[eindex]
    else:
        Q = fnow
        findex = 1
        if findex < flen:
            fnow = f[findex]
    hindex = 0
    if (eindex < elen) and (findex < flen):
        if (fnow > enow) == (fnow > -enow):
            Qnew, hh = _fast_two_sum(enow, Q)
            eindex += 1
            if eindex < elen:
                enow = e[eindex]
        else:
            Qnew, hh = _fast_two_sum(fnow, Q)
            findex += 1
            if findex < flen:
                fnow = f[findex]
        Q = Qnew
        if hh != 0.0:
            h[hindex] = hh
            hindex += 1
        while (eindex < elen) and (findex < flen):
            if (fnow > enow) == (fnow > -enow):
                Qnew, hh = _two_sum(Q, enow)
                eindex += 1
                if eindex < elen:
                    enow = e[eindex]
            else:
                Qnew, hh = _two_sum(Q, fnow)
                findex += 1
                if findex < flen:
                    fnow = f[findex]
            Q = Qnew
            if hh != 0.0:
                h[hindex] = hh
                hindex += 1
    while eindex < elen:
        Qnew, hh = _two_sum(Q, enow)
        eindex += 1
        if eindex < elen:
            enow = e[eindex]
        Q = Qnew
        if hh != 0.0:
            h[hindex] = hh
            hindex += 1
    while findex < flen:
        Qnew, hh = _two_sum(Q, fnow)
        findex += 1
        if findex < flen:
            fnow = f[findex]
        Q = Qnew
        if hh != 0.0:
            h[hindex] = hh
            hindex += 1
    if (Q != 0.0) or (hindex == 0):
        h[hindex] = Q
        hindex += 1
    return hindex


@njit(**JIT_OPTS)
def _scale_expansion_zeroelim(e, elen, b, h):
    """h = e * b with zero elimination; returns the length of h."""
    bhi, blo = _split(b)
    Q, hh = _two_product_presplit(e[0], b, bhi, blo)
    hindex = 0
    if hh != 0.0:
        h[hindex] = hh
        hindex += 1
    for eindex in range(1, elen):
        product1, product0 = _two_product_presplit(e[eindex], b, bhi, blo)
        sum_, hh = _two_sum(Q, product0)
        if hh != 0.0:
            h[hindex] = hh
            hindex += 1
        Q, hh = _fast_two_sum(product1, sum_)
        if hh != 0.0:
            h[hindex] = hh
            hindex += 1
    if (Q != 0.0) or (hindex == 0):
        h[hindex] = Q
        hindex += 1
    return hindex


@njit(**JIT_OPTS)
def _expansion_estimate(e, elen):
    Q = e[0]
    for i in range(1, elen):
        Q += e[i]
    return Q


@njit(inline="always", **JIT_OPTS)
def _sign_of(x):
    if x > 0.0:
        return 1
    if x < 0.0:
        return -1
    return 0


# ---------------------------------------------------------------------------
# exact lifted determinants
# ---------------------------------------------------------------------------
#
# Building blocks over 5 points p0..p4 (raw coordinates, 1-expansions):
#   pair minor  m(i,j)   = xi*yj - xj*yi                      (4 components)
#   triple det  T(i,j,k) = zi*m(j,k) - zj*m(i,k) + zk*m(i,j)  (<= 24)
#   quad det    N over rows (p,q,r,s) of the [x y z 1] matrix
#             = -T(q,r,s) + T(p,r,s) - T(p,q,s) + T(p,q,r)    (<= 96)


@njit(**JIT_OPTS)
def _pair_minor(xi, yi, xj, yj, out4):
    p1, p0 = _two_product(xi, yj)
    q1, q0 = _two_product(xj, yi)
    _two_two_diff(p1, p0, q1, q0, out4)


@njit(**JIT_OPTS)
def _triple_det(zi, zj, zk, m_jk, m_ik, m_ij, out24, t8a, t8b, t16):
    """T = zi*m_jk - zj*m_ik + zk*m_ij; returns length."""
    la = _scale_expansion_zeroelim(m_jk, 4, zi, t8a)
    lb = _scale_expansion_zeroelim(m_ik, 4, -zj, t8b)
    lab = _fast_expansion_sum_zeroelim(t8a, la, t8b, lb, t16)
    lc = _scale_expansion_zeroelim(m_ij, 4, zk, t8a)
    return _fast_expansion_sum_zeroelim(t16, lab, t8a, lc, out24)


@njit(**JIT_OPTS)
def _quad_det(tq, ltq, tp_r, ltp_r, tp_q, ltp_q, tp3, ltp3, neg, out96, t48a, t48b):
    """N = -tq + tp_r - tp_q + tp3 (each an expansion), optionally negated.

    Scaling by +-1 is exact, so negation is a componentwise flip.
    """
    # -tq + tp_r
    for i in range(ltq):
        t48a[i] = -tq[i]
    la = _fast_expansion_sum_zeroelim(t48a, ltq, tp_r, ltp_r, t48b)
    # -tp_q + tp3
    for i in range(ltp_q):
        t48a[i] = -tp_q[i]
    lb = _fast_expansion_sum_zeroelim(t48a, ltp_q, tp3, ltp3, out96)
    # combine
    for i in range(lb):
        t48a[i] = out96[i]
    ln = _fast_expansion_sum_zeroelim(t48b, la, t48a, lb, out96)
    if neg:
        for i in range(ln):
            out96[i] = -out96[i]
    return ln


@njit(**JIT_OPTS)
def _orient3d_exact(ax, ay, az, bx, by, bz, cx, cy, cz, dx, dy, dz):
    """Exact sign of det[b-a; c-a; d-a] via the 4x4 [x y z 1] determinant."""
    m_ab = np.empty(4)
    m_ac = np.empty(4)
    m_ad = np.empty(4)
    m_bc = np.empty(4)
    m_bd = np.empty(4)
    m_cd = np.empty(4)
    _pair_minor(ax, ay, bx, by, m_ab)
    _pair_minor(ax, ay, cx, cy, m_ac)
    _pair_minor(ax, ay, dx, dy, m_ad)
    _pair_minor(bx, by, cx, cy, m_bc)
    _pair_minor(bx, by, dx, dy, m_bd)
    _pair_minor(cx, cy, dx, dy, m_cd)

    t8a = np.empty(8)
    t8b = np.empty(8)
    t16 = np.empty(16)
    t_bcd = np.empty(24)
    t_acd = np.empty(24)
    t_abd = np.empty(24)
    t_abc = np.empty(24)
    l_bcd = _triple_det(bz, cz, dz, m_cd, m_bd, m_bc, t_bcd, t8a, t8b, t16)
    l_acd = _triple_det(az, cz, dz, m_cd, m_ad, m_ac, t_acd, t8a, t8b, t16)
    l_abd = _triple_det(az, bz, dz, m_bd, m_ad, m_ab, t_abd, t8a, t8b, t16)
    l_abc = _triple_det(az, bz, cz, m_bc, m_ac, m_ab, t_abc, t8a, t8b, t16)

    # det4[x y z 1 rows a,b,c,d] = -T(bcd) + T(acd) - T(abd) + T(abc);
    # our orientation sign is the negation of det4.
    t48a = np.empty(48)
    t48b = np.empty(48)
    out = np.empty(96)
    ln = _quad_det(
        t_bcd, l_bcd, t_acd, l_acd, t_abd, l_abd, t_abc, l_abc, True, out, t48a, t48b
    )
    return _sign_of(out[ln - 1])


@njit(**JIT_OPTS)
def _lift_expansion(x, y, z, out6, t4):
    """x*x + y*y + z*z as an expansion; returns length."""
    s1, s0 = _two_product(x, x)
    q1, q0 = _two_product(y, y)
    t4[0] = s0
    t4[1] = s1
    la = 2
    two = np.empty(2)
    two[0] = q0
    two[1] = q1
    t8 = np.empty(4)
    lab = _fast_expansion_sum_zeroelim(t4, la, two, 2, t8)
    r1, r0 = _two_product(z, z)
    two[0] = r0
    two[1] = r1
    return _fast_expansion_sum_zeroelim(t8, lab, two, 2, out6)


@njit(**JIT_OPTS)
def _scale_by_expansion(e, elen, f, flen, out, tmp_a, tmp_b):
    """out = e * f where f is a short expansion; returns length of out."""
    if flen == 0:
        out[0] = 0.0
        return 1
    lout = _scale_expansion_zeroelim(e, elen, f[0], out)
    for i in range(1, flen):
        la = _scale_expansion_zeroelim(e, elen, f[i], tmp_a)
        for j in range(lout):
            tmp_b[j] = out[j]
        lout = _fast_expansion_sum_zeroelim(tmp_b, lout, tmp_a, la, out)
    return lout


@njit(**JIT_OPTS)
def _insphere_exact(ax, ay, az, bx, by, bz, cx, cy, cz, dx, dy, dz, ex, ey, ez):
    """Exact sign for the circumsphere test, positively oriented (a,b,c,d).

    Computes the 5x5 [x y z lift 1] determinant over rows (a,b,c,d,e) by
    cofactors of the lift column; returns +1 strictly inside / -1 outside /
    0 cospherical.
    """
    # pairwise minors over (x, y) for all 10 point pairs
    m = np.empty((10, 4))
    _pair_minor(ax, ay, bx, by, m[0])  # ab
    _pair_minor(ax, ay, cx, cy, m[1])  # ac
    _pair_minor(ax, ay, dx, dy, m[2])  # ad
    _pair_minor(ax, ay, ex, ey, m[3])  # ae
    _pair_minor(bx, by, cx, cy, m[4])  # bc
    _pair_minor(bx, by, dx, dy, m[5])  # bd
    _pair_minor(bx, by, ex, ey, m[6])  # be
    _pair_minor(cx, cy, dx, dy, m[7])  # cd
    _pair_minor(cx, cy, ex, ey, m[8])  # ce
    _pair_minor(dx, dy, ex, ey, m[9])  # de

    t8a = np.empty(8)
    t8b = np.empty(8)
    t16 = np.empty(16)
    # the 10 triple determinants
    t = np.empty((10, 24))
    lt = np.empty(10, dtype=np.int64)
    # indices: abc abd abe acd ace ade bcd bce bde cde
    lt[0] = _triple_det(az, bz, cz, m[4], m[1], m[0], t[0], t8a, t8b, t16)  # abc
    lt[1] = _triple_det(az, bz, dz, m[5], m[2], m[0], t[1], t8a, t8b, t16)  # abd
    lt[2] = _triple_det(az, bz, ez, m[6], m[3], m[0], t[2], t8a, t8b, t16)  # abe
    lt[3] = _triple_det(az, cz, dz, m[7], m[2], m[1], t[3], t8a, t8b, t16)  # acd
    lt[4] = _triple_det(az, cz, ez, m[8], m[3], m[1], t[4], t8a, t8b, t16)  # ace
    lt[5] = _triple_det(az, dz, ez, m[9], m[3], m[2], t[5], t8a, t8b, t16)  # ade
    lt[6] = _triple_det(bz, cz, dz, m[7], m[5], m[4], t[6], t8a, t8b, t16)  # bcd
    lt[7] = _triple_det(bz, cz, ez, m[8], m[6], m[4], t[7], t8a, t8b, t16)  # bce
    lt[8] = _triple_det(bz, dz, ez, m[9], m[6], m[5], t[8], t8a, t8b, t16)  # bde
    lt[9] = _triple_det(cz, dz, ez, m[9], m[8], m[7], t[9], t8a, t8b, t16)  # cde

    t48a = np.empty(48)
    t48b = np.empty(48)
    # quad dets over [x y z 1]: rows with one of a..e removed, original order
    n1 = np.empty(96)  # rows (b,c,d,e)
    n2 = np.empty(96)  # rows (a,c,d,e)
    n3 = np.empty(96)  # rows (a,b,d,e)
    n4 = np.empty(96)  # rows (a,b,c,e)
    n5 = np.empty(96)  # rows (a,b,c,d)
    # N(p,q,r,s) = -T(q,r,s) + T(p,r,s) - T(p,q,s) + T(p,q,r)
    ln1 = _quad_det(t[9], lt[9], t[8], lt[8], t[7], lt[7], t[6], lt[6], False, n1, t48a, t48b)
    ln2 = _quad_det(t[9], lt[9], t[5], lt[5], t[4], lt[4], t[3], lt[3], False, n2, t48a, t48b)
    ln3 = _quad_det(t[8], lt[8], t[5], lt[5], t[2], lt[2], t[1], lt[1], False, n3, t48a, t48b)
    ln4 = _quad_det(t[7], lt[7], t[4], lt[4], t[2], lt[2], t[0], lt[0], False, n4, t48a, t48b)
    ln5 = _quad_det(t[6], lt[6], t[3], lt[3], t[1], lt[1], t[0], lt[0], False, n5, t48a, t48b)

    # lifts
    lift = np.empty((5, 6))
    ll = np.empty(5, dtype=np.int64)
    t4 = np.empty(4)
    ll[0] = _lift_expansion(ax, ay, az, lift[0], t4)
    ll[1] = _lift_expansion(bx, by, bz, lift[1], t4)
    ll[2] = _lift_expansion(cx, cy, cz, lift[2], t4)
    ll[3] = _lift_expansion(dx, dy, dz, lift[3], t4)
    ll[4] = _lift_expansion(ex, ey, ez, lift[4], t4)

    # det5 = -lift_a*N1 + lift_b*N2 - lift_c*N3 + lift_d*N4 - lift_e*N5
    big_a = np.empty(1152)
    big_tmp = np.empty(1152)
    big_b = np.empty(1152)
    acc = np.empty(5760)
    acc_tmp = np.empty(5760)

    la = _scale_by_expansion(n1, ln1, lift[0], ll[0], big_a, big_tmp, big_b)
    for i in range(la):
        acc[i] = -big_a[i]
    lacc = la

    lb = _scale_by_expansion(n2, ln2, lift[1], ll[1], big_a, big_tmp, big_b)
    for i in range(lacc):
        acc_tmp[i] = acc[i]
    lacc = _fast_expansion_sum_zeroelim(acc_tmp, lacc, big_a, lb, acc)

    lb = _scale_by_expansion(n3, ln3, lift[2], ll[2], big_a, big_tmp, big_b)
    for i in range(lb):
        big_a[i] = -big_a[i]
    for i in range(lacc):
        acc_tmp[i] = acc[i]
    lacc = _fast_expansion_sum_zeroelim(acc_tmp, lacc, big_a, lb, acc)

    lb = _scale_by_expansion(n4, ln4, lift[3], ll[3], big_a, big_tmp, big_b)
    for i in range(lacc):
        acc_tmp[i] = acc[i]
    lacc = _fast_expansion_sum_zeroelim(acc_tmp, lacc, big_a, lb, acc)

    lb = _scale_by_expansion(n5, ln5, lift[4], ll[4], big_a, big_tmp, big_b)
    for i in range(lb):
        big_a[i] = -big_a[i]
    for i in range(lacc):
        acc_tmp[i] = acc[i]
    lacc = _fast_expansion_sum_zeroelim(acc_tmp, lacc, big_a, lb, acc)

    # det5 > 0 <=> e outside for our positive orientation (verified by tests
    # against a rational-arithmetic oracle); flip to the inside-positive API.
    return -_sign_of(acc[lacc - 1])


# ---------------------------------------------------------------------------
# filtered public predicates
# ---------------------------------------------------------------------------


@njit(**JIT_OPTS)
def orient3d_sign(ax, ay, az, bx, by, bz, cx, cy, cz, dx, dy, dz):
    """Sign of det[b-a; c-a; d-a]: +1 positive, -1 negative, 0 coplanar."""
    ux = bx - ax
    uy = by - ay
    uz = bz - az
    vx = cx - ax
    vy = cy - ay
    vz = cz - az
    wx = dx - ax
    wy = dy - ay
    wz = dz - az

    vywz = vy * wz
    vzwy = vz * wy
    vzwx = vz * wx
    vxwz = vx * wz
    vxwy = vx * wy
    vywx = vy * wx

    det = ux * (vywz - vzwy) + uy * (vzwx - vxwz) + uz * (vxwy - vywx)
    permanent = (
        (abs(vywz) + abs(vzwy)) * abs(ux)
        + (abs(vzwx) + abs(vxwz)) * abs(uy)
        + (abs(vxwy) + abs(vywx)) * abs(uz)
    )
    errbound = _O3D_ERRBOUND_A * _SAFETY * permanent
    if det > errbound:
        return 1
    if -det > errbound:
        return -1
    return _orient3d_exact(ax, ay, az, bx, by, bz, cx, cy, cz, dx, dy, dz)


@njit(**JIT_OPTS)
def insphere_sign(ax, ay, az, bx, by, bz, cx, cy, cz, dx, dy, dz, ex, ey, ez):
    """Circumsphere test for positively oriented (a,b,c,d).

    Returns +1 if e is strictly inside, -1 strictly outside, 0 cospherical.
    """
    aex = ax - ex
    aey = ay - ey
    aez = az - ez
    bex = bx - ex
    bey = by - ey
    bez = bz - ez
    cex = cx - ex
    cey = cy - ey
    cez = cz - ez
    dex = dx - ex
    dey = dy - ey
    dez = dz - ez

    aexbey = aex * bey
    bexaey = bex * aey
    ab = aexbey - bexaey
    bexcey = bex * cey
    cexbey = cex * bey
    bc = bexcey - cexbey
    cexdey = cex * dey
    dexcey = dex * cey
    cd = cexdey - dexcey
    dexaey = dex * aey
    aexdey = aex * dey
    da = dexaey - aexdey
    aexcey = aex * cey
    cexaey = cex * aey
    ac = aexcey - cexaey
    bexdey = bex * dey
    dexbey = dex * bey
    bd = bexdey - dexbey

    abc = aez * bc - bez * ac + cez * ab
    bcd = bez * cd - cez * bd + dez * bc
    cda = cez * da + dez * ac + aez * cd
    dab = dez * ab + aez * bd + bez * da

    alift = aex * aex + aey * aey + aez * aez
    blift = bex * bex + bey * bey + bez * bez
    clift = cex * cex + cey * cey + cez * cez
    dlift = dex * dex + dey * dey + dez * dez

    det = (dlift * abc - clift * dab) + (blift * cda - alift * bcd)

    aezplus = abs(aez)
    bezplus = abs(bez)
    cezplus = abs(cez)
    dezplus = abs(dez)
    aexbeyplus = abs(aexbey)
    bexaeyplus = abs(bexaey)
    bexceyplus = abs(bexcey)
    cexbeyplus = abs(cexbey)
    cexdeyplus = abs(cexdey)
    dexceyplus = abs(dexcey)
    dexaeyplus = abs(dexaey)
    aexdeyplus = abs(aexdey)
    aexceyplus = abs(aexcey)
    cexaeyplus = abs(cexaey)
    bexdeyplus = abs(bexdey)
    dexbeyplus = abs(dexbey)
    permanent = (
        ((cexdeyplus + dexceyplus) * bezplus
         + (dexbeyplus + bexdeyplus) * cezplus
         + (bexceyplus + cexbeyplus) * dezplus) * alift
        + ((dexaeyplus + aexdeyplus) * cezplus
           + (aexceyplus + cexaeyplus) * dezplus
           + (cexdeyplus + dexceyplus) * aezplus) * blift
        + ((aexbeyplus + bexaeyplus) * dezplus
           + (bexdeyplus + dexbeyplus) * aezplus
           + (dexaeyplus + aexdeyplus) * bezplus) * clift
        + ((bexceyplus + cexbeyplus) * aezplus
           + (cexaeyplus + aexceyplus) * bezplus
           + (aexbeyplus + bexaeyplus) * cezplus) * dlift
    )
    errbound = _ISP_ERRBOUND_A * _SAFETY * permanent
    # det here follows the translated-matrix convention: negative means
    # inside when (a,b,c,d) is positively oriented in our convention.
    if det > errbound:
        return -1
    if -det > errbound:
        return 1
    return _insphere_exact(
        ax, ay, az, bx, by, bz, cx, cy, cz, dx, dy, dz, ex, ey, ez
    )
