"""NumPy implementation of the resolvent sweep kernel (used when the extension is absent)."""

from __future__ import annotations

import numpy as np

_CHUNK = 512


def sweep_kernel(D, Diff, va, vb, omegas, num_threads=1):
    D = np.asarray(D, complex)
    Diff = np.asarray(Diff, complex)
    omegas = np.asarray(omegas, float)
    n = D.shape[0]
    V = np.stack([np.asarray(va, float), np.asarray(vb, float)], axis=1).astype(complex)
    eye = np.eye(n)
    out = np.zeros((omegas.size, 3), complex)
    status = np.zeros(omegas.size, dtype=np.intc)
    DT = D.T
    for start in range(0, omegas.size, _CHUNK):
        om = omegas[start:start + _CHUNK]
        Am = -1j * om[:, None, None] * eye - DT
        Ap = 1j * om[:, None, None] * eye - DT
        rhs = np.broadcast_to(V, (om.size, n, 2))
        try:
            U = np.linalg.solve(Am, rhs)
            W = np.linalg.solve(Ap, rhs)
        except np.linalg.LinAlgError:
            U = np.empty((om.size, n, 2), complex)
            W = np.empty((om.size, n, 2), complex)
            for k in range(om.size):
                try:
                    U[k] = np.linalg.solve(Am[k], V)
                    W[k] = np.linalg.solve(Ap[k], V)
                except np.linalg.LinAlgError:
                    U[k] = W[k] = np.nan
                    status[start + k] = 1
        T = Diff @ W
        out[start:start + om.size, 0] = np.einsum("ki,ki->k", U[:, :, 0], T[:, :, 0])
        out[start:start + om.size, 1] = np.einsum("ki,ki->k", U[:, :, 1], T[:, :, 1])
        out[start:start + om.size, 2] = np.einsum("ki,ki->k", U[:, :, 0], T[:, :, 1])
    bad = ~np.all(np.isfinite(out), axis=1)
    status[bad] = 1
    return out, status
