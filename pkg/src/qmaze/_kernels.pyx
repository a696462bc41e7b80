# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled propagation kernels.

Semantics match qmaze._kernels_py.  Speed tricks: the adjacency-shaped
matrices are walked in CSR form (one right-hand side costs O(nnz*d + d^2)
instead of a dense d^3 product), the state lives on flat real/imag planes,
the Hermitian symmetry fills (a,b) and (b,a) in one visit, and the four RK4
stage/update sweeps are fused into the right-hand-side passes.
"""

import numpy as np

cimport numpy as cnp
from libc.string cimport memset

cnp.import_array()


# d rho = -i*coh*(H rho - (H rho)^dagger) - (decay_a+decay_b)/2 * rho + diagonal pump feed.
# On the real/imag planes, with hy = H rho:
#   re(k)[a,b] =  coh*(im(hy)[a,b] + im(hy)[b,a]) - dec[a,b]*re(rho)[a,b]
#   im(k)[a,b] =  coh*(re(hy)[b,a] - re(hy)[a,b]) - dec[a,b]*im(rho)[a,b]
# k is Hermitian whenever rho is, so both triangles are written in one visit.


cdef void _spmm(int d, double* xr, double* xi, double* hyr, double* hyi,
                int* hptr, int* hidx, double* hval) noexcept nogil:
    cdef int a, b, k, c, ad
    cdef double hv
    memset(hyr, 0, d * d * sizeof(double))
    memset(hyi, 0, d * d * sizeof(double))
    for a in range(d):
        ad = a * d
        for k in range(hptr[a], hptr[a + 1]):
            c = hidx[k] * d
            hv = hval[k]
            for b in range(d):
                hyr[ad + b] += hv * xr[c + b]
                hyi[ad + b] += hv * xi[c + b]


cdef void _pump_diag(int d, double* xr, double* xi, double* fr, double* fi,
                     int* pptr, int* pidx, double* pval) noexcept nogil:
    cdef int a, k, c
    cdef double accr, acci
    for a in range(d):
        accr = 0.0
        acci = 0.0
        for k in range(pptr[a], pptr[a + 1]):
            c = pidx[k]
            accr += pval[k] * xr[c * d + c]
            acci += pval[k] * xi[c * d + c]
        fr[a] = accr
        fi[a] = acci


# Stage pass: k = rhs(x); acc = k (first call) or acc += wk*k; s = y + cs*k.
cdef void _stage(int d, bint first, double wk, double cs,
                 double* xr, double* xi,
                 double* yr, double* yi,
                 double* sr, double* si,
                 double* accr, double* acci,
                 double* hyr, double* hyi,
                 double* fr, double* fi,
                 double coh, double* dec) noexcept nogil:
    cdef int a, b, ad, bd, aa
    cdef double sym, asym, dc, kr, ki
    for a in range(d):
        ad = a * d
        aa = ad + a
        sym = 2.0 * coh * hyi[aa]
        dc = dec[aa]
        kr = sym - dc * xr[aa] + fr[a]
        ki = -dc * xi[aa] + fi[a]
        if first:
            accr[aa] = kr
            acci[aa] = ki
        else:
            accr[aa] += wk * kr
            acci[aa] += wk * ki
        sr[aa] = yr[aa] + cs * kr
        si[aa] = yi[aa] + cs * ki
        for b in range(a + 1, d):
            bd = b * d
            sym = coh * (hyi[ad + b] + hyi[bd + a])
            asym = coh * (hyr[bd + a] - hyr[ad + b])
            dc = dec[ad + b]
            kr = sym - dc * xr[ad + b]
            ki = asym - dc * xi[ad + b]
            if first:
                accr[ad + b] = kr
                acci[ad + b] = ki
                accr[bd + a] = kr
                acci[bd + a] = -ki
            else:
                accr[ad + b] += wk * kr
                acci[ad + b] += wk * ki
                accr[bd + a] += wk * kr
                acci[bd + a] += wk * (-ki)
            sr[ad + b] = yr[ad + b] + cs * kr
            si[ad + b] = yi[ad + b] + cs * ki
            sr[bd + a] = yr[bd + a] + cs * kr
            si[bd + a] = yi[bd + a] + cs * (-ki)


# Final pass: y += h6 * (acc + rhs(x)).
cdef void _finish(int d, double h6,
                  double* xr, double* xi,
                  double* yr, double* yi,
                  double* accr, double* acci,
                  double* hyr, double* hyi,
                  double* fr, double* fi,
                  double coh, double* dec) noexcept nogil:
    cdef int a, b, ad, bd, aa
    cdef double sym, asym, dc, kr, ki
    for a in range(d):
        ad = a * d
        aa = ad + a
        sym = 2.0 * coh * hyi[aa]
        dc = dec[aa]
        kr = sym - dc * xr[aa] + fr[a]
        ki = -dc * xi[aa] + fi[a]
        yr[aa] += h6 * (accr[aa] + kr)
        yi[aa] += h6 * (acci[aa] + ki)
        for b in range(a + 1, d):
            bd = b * d
            sym = coh * (hyi[ad + b] + hyi[bd + a])
            asym = coh * (hyr[bd + a] - hyr[ad + b])
            dc = dec[ad + b]
            kr = sym - dc * xr[ad + b]
            ki = asym - dc * xi[ad + b]
            yr[ad + b] += h6 * (accr[ad + b] + kr)
            yi[ad + b] += h6 * (acci[ad + b] + ki)
            yr[bd + a] += h6 * (accr[bd + a] + kr)
            yi[bd + a] += h6 * (acci[bd + a] - ki)


cdef _to_csr(matrix):
    rows, cols = np.nonzero(matrix)
    order = np.lexsort((cols, rows))
    rows = rows[order]
    cols = cols[order]
    d = matrix.shape[0]
    ptr = np.zeros(d + 1, dtype=np.int32)
    np.add.at(ptr, rows + 1, 1)
    ptr = np.cumsum(ptr, dtype=np.int32)
    return (
        np.ascontiguousarray(ptr, dtype=np.int32),
        np.ascontiguousarray(cols, dtype=np.int32),
        np.ascontiguousarray(matrix[rows, cols], dtype=np.float64),
    )


def lindblad_rhs(rho, ham, double coh, pump, decay):
    """Single right-hand-side evaluation; used by apply_generator."""
    cdef int d = rho.shape[0]
    hptr, hidx, hval = _to_csr(ham)
    pptr, pidx, pval = _to_csr(pump)
    decay = np.asarray(decay, dtype=np.float64)
    decm = np.ascontiguousarray((0.5 * (decay[:, None] + decay[None, :])).reshape(-1))
    rho = np.ascontiguousarray(rho, dtype=np.complex128)
    yr = np.ascontiguousarray(rho.real).reshape(-1)
    yi = np.ascontiguousarray(rho.imag).reshape(-1)
    scratch = np.empty((6, d * d))
    feed = np.empty((2, d))
    cdef double[:, ::1] o = scratch, f = feed
    cdef double[::1] yr_v = yr, yi_v = yi, dec_v = decm
    cdef int[::1] hptr_v = hptr, hidx_v = hidx, pptr_v = pptr, pidx_v = pidx
    cdef double[::1] hval_v = hval, pval_v = pval
    cdef double zero = 0.0
    with nogil:
        _spmm(d, &yr_v[0], &yi_v[0], &o[2, 0], &o[3, 0],
              &hptr_v[0], &hidx_v[0], &hval_v[0])
        _pump_diag(d, &yr_v[0], &yi_v[0], &f[0, 0], &f[1, 0],
                   &pptr_v[0], &pidx_v[0], &pval_v[0])
        # acc = k; the s output (y + 0*k) goes to discarded scratch planes
        _stage(d, True, 1.0, zero, &yr_v[0], &yi_v[0], &yr_v[0], &yi_v[0],
               &o[4, 0], &o[5, 0], &o[0, 0], &o[1, 0], &o[2, 0], &o[3, 0],
               &f[0, 0], &f[1, 0], coh, &dec_v[0])
    return (scratch[0] + 1j * scratch[1]).reshape(d, d)


def rk4_evolve(rho, ham, double coh, pump, decay, long steps, double h):
    cdef int d = rho.shape[0]
    cdef int nd = d * d
    cdef int pitch = (nd + 7) & ~7  # keep planes 64-byte aligned
    hptr, hidx, hval = _to_csr(ham)
    pptr, pidx, pval = _to_csr(pump)
    decay = np.asarray(decay, dtype=np.float64)
    decm = np.ascontiguousarray((0.5 * (decay[:, None] + decay[None, :])).reshape(-1))

    rho = np.ascontiguousarray(rho, dtype=np.complex128)
    buf = np.zeros((10, pitch))
    buf[0, :nd] = rho.real.reshape(-1)
    buf[1, :nd] = rho.imag.reshape(-1)
    feed = np.empty((2, d))
    cdef double[:, ::1] b_v = buf, f = feed
    cdef double* y_r = &b_v[0, 0]
    cdef double* y_i = &b_v[1, 0]
    cdef double* sr = &b_v[2, 0]
    cdef double* si = &b_v[3, 0]
    cdef double* ur = &b_v[4, 0]
    cdef double* ui = &b_v[5, 0]
    cdef double* accr = &b_v[6, 0]
    cdef double* acci = &b_v[7, 0]
    cdef double* hyr = &b_v[8, 0]
    cdef double* hyi = &b_v[9, 0]
    cdef double* fr = &f[0, 0]
    cdef double* fi = &f[1, 0]
    cdef double[::1] dec_v = decm
    cdef double* dec = &dec_v[0]
    cdef int[::1] hptr_v = hptr, hidx_v = hidx, pptr_v = pptr, pidx_v = pidx
    cdef double[::1] hval_v = hval, pval_v = pval
    cdef int* hp = &hptr_v[0]
    cdef int* hx = &hidx_v[0]
    cdef double* hv = &hval_v[0]
    cdef int* pp = &pptr_v[0]
    cdef int* px = &pidx_v[0]
    cdef double* pv = &pval_v[0]

    cdef long s
    cdef double h6 = h / 6.0
    cdef double h2 = 0.5 * h
    with nogil:
        for s in range(steps):
            _spmm(d, y_r, y_i, hyr, hyi, hp, hx, hv)
            _pump_diag(d, y_r, y_i, fr, fi, pp, px, pv)
            _stage(d, True, 1.0, h2, y_r, y_i, y_r, y_i, sr, si,
                   accr, acci, hyr, hyi, fr, fi, coh, dec)
            _spmm(d, sr, si, hyr, hyi, hp, hx, hv)
            _pump_diag(d, sr, si, fr, fi, pp, px, pv)
            _stage(d, False, 2.0, h2, sr, si, y_r, y_i, ur, ui,
                   accr, acci, hyr, hyi, fr, fi, coh, dec)
            _spmm(d, ur, ui, hyr, hyi, hp, hx, hv)
            _pump_diag(d, ur, ui, fr, fi, pp, px, pv)
            _stage(d, False, 2.0, h, ur, ui, y_r, y_i, sr, si,
                   accr, acci, hyr, hyi, fr, fi, coh, dec)
            _spmm(d, sr, si, hyr, hyi, hp, hx, hv)
            _pump_diag(d, sr, si, fr, fi, pp, px, pv)
            _finish(d, h6, sr, si, y_r, y_i, accr, acci, hyr, hyi,
                    fr, fi, coh, dec)
    out = buf[0, :nd] + 1j * buf[1, :nd]
    return out.reshape(d, d)
