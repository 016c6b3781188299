"""Periodic pseudo-spectral grids, operators, projections and snapshots.

Scalars have the grid shape, vectors carry a leading component axis.  On a
3D grid the last axis is vertical: the reflected slab [-1, 1] of length 2,
on which even/odd parity in x3 encodes the slip boundary conditions.  A 2D
grid (``nv=None``) is the horizontal torus.
"""
import json
import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

VALID_KINDS = ("grad", "div", "curl", "curl_h", "laplace", "laplace_h", "perp_grad_h")


def _pow2(n):
    return n >= 1 and (n & (n - 1)) == 0


class SpectralGrid:
    """N_h x N_h (x N_v) periodic grid; horizontal period 2 pi Lh, vertical length 2."""

    def __init__(self, nh, nv=None, Lh=1.0, workers=None):
        if not _pow2(nh) or (nv is not None and not _pow2(nv)):
            raise ValueError("grid dimensions must be powers of two")
        if Lh <= 0:
            raise ValueError("Lh must be positive")
        self.nh, self.nv, self.Lh = int(nh), (None if nv is None else int(nv)), float(Lh)
        self.workers = workers
        if nv is None:
            self.shape = (self.nh, self.nh)
            self.lengths = (2 * np.pi * Lh, 2 * np.pi * Lh)
        else:
            self.shape = (self.nh, self.nh, self.nv)
            self.lengths = (2 * np.pi * Lh, 2 * np.pi * Lh, 2.0)
        self.ndim = len(self.shape)
        self.axes = tuple(range(-self.ndim, 0))
        self.dx = tuple(L / n for L, n in zip(self.lengths, self.shape))
        self.dV = float(np.prod(self.dx))
        self.volume = float(np.prod(self.lengths))
        self._build_wavenumbers()

    # ------------------------------------------------------------------
    def _build_wavenumbers(self):
        ks, kd, idx = [], [], []
        nd = self.ndim
        for ax, (n, L) in enumerate(zip(self.shape, self.lengths)):
            last = ax == nd - 1
            ints = np.arange(n // 2 + 1) if last else np.fft.fftfreq(n, 1.0 / n)
            k = 2 * np.pi / L * ints
            kdiff = k.copy()
            if n % 2 == 0 and n > 1:
                # Nyquist mode has no odd derivative for real fields
                kdiff[np.abs(ints) == n // 2] = 0.0
            shp = [1] * nd
            shp[ax] = -1
            ks.append(k.reshape(shp))
            kd.append(kdiff.reshape(shp))
            idx.append(np.abs(ints).reshape(shp))
        self.k = ks           # physical wavenumbers (for even-order symbols)
        self.kd = kd          # wavenumbers used for odd derivatives
        self.kint = idx       # |integer index| per axis
        self.k2 = sum(k**2 for k in ks)
        self.k2h = ks[0] ** 2 + ks[1] ** 2
        self.spec_shape = tuple(np.broadcast(*ks).shape)
        mask = np.ones(self.spec_shape, dtype=bool)
        for n, i in zip(self.shape, idx):
            mask &= (3 * i < n) if n > 1 else (i == 0)
        self.dealias_mask = mask
        # Parseval weights for the half spectrum along the last axis
        n_last = self.shape[-1]
        w = np.full(n_last // 2 + 1, 2.0)
        w[0] = 1.0
        if n_last % 2 == 0:
            w[-1] = 1.0
        shp = [1] * nd
        shp[-1] = -1
        self.parseval_w = w.reshape(shp)

    def __repr__(self):
        return f"SpectralGrid(nh={self.nh}, nv={self.nv}, Lh={self.Lh})"

    def horizontal(self):
        return SpectralGrid(self.nh, None, self.Lh, self.workers)

    def coords(self):
        """Sample coordinates; x3 runs over [-1, 1) on 3D grids."""
        xs = []
        for ax, (n, L) in enumerate(zip(self.shape, self.lengths)):
            x = np.arange(n) * (L / n)
            if ax == 2:
                x = x - 1.0
            xs.append(x)
        return np.meshgrid(*xs, indexing="ij")

    # ------------------------------------------------------------------
    def fft(self, f):
        return sfft.rfftn(f, axes=self.axes, workers=self.workers)

    def ifft(self, fh):
        return sfft.irfftn(fh, s=self.shape, axes=self.axes, workers=self.workers)

    def _d(self, fh, ax):
        return 1j * self.kd[ax] * fh

    def grad(self, f):
        """Gradient; leading batch axes of f are kept after the component axis."""
        fh = self.fft(f)
        return self.ifft(np.stack([self._d(fh, a) for a in range(self.ndim)]))

    def div(self, v):
        vh = self.fft(v[: self.ndim])
        return self.ifft(sum(self._d(vh[a], a) for a in range(self.ndim)))

    def curl(self, v):
        if self.ndim != 3 or len(v) != 3:
            raise ValueError("curl needs a 3-component field on a 3D grid")
        vh = [self.fft(c) for c in v]
        d = self._d
        return np.stack([self.ifft(d(vh[2], 1) - d(vh[1], 2)),
                         self.ifft(d(vh[0], 2) - d(vh[2], 0)),
                         self.ifft(d(vh[1], 0) - d(vh[0], 1))])

    def curl_h(self, v):
        return self.ifft(self._d(self.fft(v[1]), 0) - self._d(self.fft(v[0]), 1))

    def laplace(self, f):
        return self.ifft(-self.k2 * self.fft(f))

    def laplace_h(self, f):
        return self.ifft(-self.k2h * self.fft(f))

    def perp_grad_h(self, f):
        fh = self.fft(f)
        return np.stack([self.ifft(-self._d(fh, 1)), self.ifft(self._d(fh, 0))])

    def inv_laplace(self, f, horizontal=False):
        """Inverse Laplacian with the zero-mode (mean) left untouched."""
        k2 = self.k2h if horizontal else self.k2
        fh = self.fft(f)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(k2 > 0, -fh / np.where(k2 > 0, k2, 1.0), fh)
        return self.ifft(out)

    # ------------------------------------------------------------------
    def dealias(self, f):
        return self.ifft(self.dealias_mask * self.fft(f))

    def product(self, f, g):
        """2/3-rule dealiased product."""
        return self.dealias(self.dealias(f) * self.dealias(g))

    def band_limit(self, f, kmax):
        """Keep integer modes with max |index| <= kmax."""
        mask = np.ones(self.spec_shape, dtype=bool)
        for i in self.kint:
            mask &= i <= kmax
        return self.ifft(mask * self.fft(f))

    # ------------------------------------------------------------------
    def mean(self, f):
        return np.mean(f, axis=self.axes)

    def integrate(self, f):
        return np.sum(f, axis=self.axes) * self.dV

    def inner(self, f, g):
        return float(np.sum(f * g) * self.dV)

    def norm(self, f):
        return float(np.sqrt(np.sum(np.abs(f) ** 2) * self.dV))

    def spectral_norm2(self, f):
        """||f||^2 from the Fourier coefficients (Parseval)."""
        fh = self.fft(f)
        n = np.prod(self.shape)
        s = np.sum(self.parseval_w * np.abs(fh) ** 2, axis=self.axes)
        return np.sum(s) * self.dV / n

    def h_minus1_norm(self, f):
        """Spectral norm with weight (1+|k|^2)^(-1/2)."""
        fh = self.fft(f)
        n = np.prod(self.shape)
        return float(np.sqrt(np.sum(self.parseval_w * np.abs(fh) ** 2 / (1.0 + self.k2))
                             * self.dV / n))


# ----------------------------------------------------------------------
# module-level operator interface

def apply_derivative(grid, f, kind):
    if kind not in VALID_KINDS:
        raise ValueError(f"unknown derivative kind {kind!r}")
    f = np.asarray(f)
    scalar = f.shape == grid.shape
    vector = f.ndim == grid.ndim + 1 and f.shape[1:] == grid.shape
    if kind in ("grad", "laplace", "laplace_h", "perp_grad_h") and not scalar:
        if kind.startswith("laplace") and vector:
            op = grid.laplace if kind == "laplace" else grid.laplace_h
            return np.stack([op(c) for c in f])
        raise ValueError(f"{kind} needs a scalar field")
    if kind in ("div", "curl", "curl_h") and not vector:
        raise ValueError(f"{kind} needs a vector field")
    if kind == "div" and f.shape[0] != grid.ndim:
        raise ValueError("div needs one component per grid dimension")
    if kind == "curl_h" and f.shape[0] < 2:
        raise ValueError("curl_h needs at least two components")
    return getattr(grid, kind)(f)


def vertical_decompose(grid, f):
    """Split f into its x3-average (a horizontal field) and the oscillating part."""
    if grid.ndim != 3:
        raise ValueError("vertical_decompose needs a 3D grid")
    f = np.asarray(f)
    mean = f.mean(axis=-1)
    return mean, f - mean[..., None]


def leray_project(grid, v, horizontal_only=False):
    """Remove the gradient part of v spectrally; the mean is untouched.

    With ``horizontal_only`` the first two components are projected with the
    horizontal wavevector only (the 2D projector acting on x^h dependence).
    """
    v = np.asarray(v, dtype=float)
    if horizontal_only:
        comps = [0, 1]
        k = [grid.kd[0], grid.kd[1]]
    else:
        if v.shape[0] != grid.ndim:
            raise ValueError("full projection needs one component per dimension")
        comps = list(range(grid.ndim))
        k = list(grid.kd)
    vh = [grid.fft(v[c]) for c in comps]
    kk = sum(ki**2 for ki in k)
    safe = np.where(kk > 0, kk, 1.0)
    kv = sum(ki * vi for ki, vi in zip(k, vh)) / safe
    out = v.copy()
    for c, ki, vi in zip(comps, k, vh):
        out[c] = grid.ifft(vi - ki * kv)
    return out


# ----------------------------------------------------------------------
# parity in x3

def reflect(grid, f):
    """f(x^h, -x3) on the grid (sample j maps to -j mod N_v)."""
    idx = (-np.arange(grid.shape[-1])) % grid.shape[-1]
    return np.take(f, idx, axis=-1)


def _sign(p):
    return {"even": 1.0, "odd": -1.0}[p]


def parity_error(grid, f, parity):
    """Max deviation from the declared parity (scalar tag or one tag per component)."""
    f = np.asarray(f)
    if parity is None or parity == "none":
        return 0.0
    if isinstance(parity, str):
        return float(np.max(np.abs(f - _sign(parity) * reflect(grid, f)), initial=0.0))
    return max(parity_error(grid, c, p) for c, p in zip(f, parity))


def enforce_parity(grid, f, parity):
    f = np.asarray(f, dtype=float)
    if parity is None or parity == "none":
        return f
    if isinstance(parity, str):
        return 0.5 * (f + _sign(parity) * reflect(grid, f))
    return np.stack([enforce_parity(grid, c, p) for c, p in zip(f, parity)])


def flip(p):
    return {"even": "odd", "odd": "even"}[p]


def derivative_parity(kind, parity):
    """Parity algebra for derivatives; d/dx3 flips, horizontal derivatives keep parity."""
    if kind == "grad":
        return (parity, parity, flip(parity))
    if kind in ("laplace", "laplace_h"):
        return parity
    if kind == "perp_grad_h":
        return (parity, parity)
    p = tuple(parity)
    if kind == "div":
        out = {p[0], p[1], flip(p[2])}
        if len(out) != 1:
            raise ValueError("mixed parity divergence")
        return out.pop()
    if kind == "curl":
        return _curl_parity(p)
    if kind == "curl_h":
        if p[0] != p[1]:
            raise ValueError("mixed parity horizontal curl")
        return p[0]
    raise ValueError(kind)


def _curl_parity(p):
    c1 = {p[2], flip(p[1])}
    c2 = {flip(p[0]), p[2]}
    c3 = {p[1], p[0]}
    if any(len(c) != 1 for c in (c1, c2, c3)):
        raise ValueError("mixed parity curl")
    return (c1.pop(), c2.pop(), c3.pop())


VELOCITY_PARITY = ("even", "even", "odd")


# ----------------------------------------------------------------------
# fields and snapshots

@dataclass
class Field:
    grid: SpectralGrid
    data: np.ndarray
    parity: object = None
    time: float = 0.0
    name: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def hat(self):
        if self.data.shape == self.grid.shape:
            return self.grid.fft(self.data)
        return np.stack([self.grid.fft(c) for c in self.data])

    def parity_error(self):
        return parity_error(self.grid, self.data, self.parity)


SNAPSHOT_MAGIC = b"NSFSNAP1"


def write_snapshot(path, fld):
    """Write a field as: 8-byte magic, little-endian uint64 header length,
    UTF-8 JSON header, then float64 little-endian samples in C order."""
    data = np.ascontiguousarray(fld.data, dtype="<f8")
    g = fld.grid
    header = {"grid": {"nh": g.nh, "nv": g.nv, "Lh": g.Lh}, "shape": list(data.shape),
              "period": list(g.lengths), "parity": fld.parity, "time": fld.time,
              "name": fld.name, "dtype": "<f8", "order": "C", "meta": fld.meta}
    hb = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<Q", len(hb)))
        fh.write(hb)
        fh.write(data.tobytes(order="C"))


def read_snapshot(path):
    with open(path, "rb") as fh:
        if fh.read(8) != SNAPSHOT_MAGIC:
            raise ValueError("not a snapshot file")
        (n,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(n).decode("utf-8"))
        data = np.frombuffer(fh.read(), dtype="<f8").reshape(header["shape"]).copy()
    g = header["grid"]
    grid = SpectralGrid(g["nh"], g["nv"], g["Lh"])
    parity = header["parity"]
    if isinstance(parity, list):
        parity = tuple(parity)
    return Field(grid, data, parity, header["time"], header.get("name", ""), header.get("meta", {}))
