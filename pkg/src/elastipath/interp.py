"""Grid sampling helpers: bilinear / trilinear interpolation with periodic theta.

Volume fields throughout the package are laid out ``arr[i, j, k]`` with
``i`` the x column, ``j`` the y row and ``k`` the orientation slot; planar
fields are ``arr[i, j]``.
"""

from __future__ import annotations

import numpy as np

from .grid import GridSpec2, GridSpec3


def bilinear(field: np.ndarray, spec: GridSpec2, x, y):
    """Bilinear sample of a planar field at physical coordinates (clamped)."""
    h = spec.spacing
    fx = np.clip(np.asarray(x, dtype=float) / h, 0.0, spec.width - 1.0)
    fy = np.clip(np.asarray(y, dtype=float) / h, 0.0, spec.height - 1.0)
    i0 = np.clip(np.floor(fx).astype(int), 0, spec.width - 2)
    j0 = np.clip(np.floor(fy).astype(int), 0, spec.height - 2)
    tx = fx - i0
    ty = fy - j0
    f00 = field[i0, j0]
    f10 = field[i0 + 1, j0]
    f01 = field[i0, j0 + 1]
    f11 = field[i0 + 1, j0 + 1]
    return (
        f00 * (1 - tx) * (1 - ty)
        + f10 * tx * (1 - ty)
        + f01 * (1 - tx) * ty
        + f11 * tx * ty
    )


def trilinear(vol: np.ndarray, spec: GridSpec3, x, y, theta):
    """Trilinear sample of a lifted volume; theta axis wraps periodically.

    Works on scalar volumes (W, H, K) and on stacked volumes
    (W, H, K, C) where the trailing axes are interpolated jointly.
    """
    h = spec.spacing
    fx = np.clip(np.asarray(x, dtype=float) / h, 0.0, spec.width - 1.0)
    fy = np.clip(np.asarray(y, dtype=float) / h, 0.0, spec.height - 1.0)
    ft = np.asarray(theta, dtype=float) / spec.theta_step
    i0 = np.clip(np.floor(fx).astype(int), 0, spec.width - 2)
    j0 = np.clip(np.floor(fy).astype(int), 0, spec.height - 2)
    k0 = np.floor(ft).astype(int) % spec.n_theta
    k1 = (k0 + 1) % spec.n_theta
    tx = fx - i0
    ty = fy - j0
    tt = ft - np.floor(ft)

    def gather(ii, jj, kk):
        return vol[ii, jj, kk]

    if vol.ndim > 3:
        tx = tx[..., None] if np.ndim(tx) else tx
        ty = ty[..., None] if np.ndim(ty) else ty
        tt = tt[..., None] if np.ndim(tt) else tt

    out = 0.0
    for di, wx in ((0, 1 - tx), (1, tx)):
        for dj, wy in ((0, 1 - ty), (1, ty)):
            for kk, wt in ((k0, 1 - tt), (k1, tt)):
                out = out + gather(i0 + di, j0 + dj, kk) * wx * wy * wt
    return out
