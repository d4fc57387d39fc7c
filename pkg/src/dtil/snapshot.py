"""Binary field snapshots with a bit-exact round-trip contract.

A snapshot file is a fixed 24-byte header followed by raw little-endian
float64 payload.  Header, in order: magic b"DTIL", format version (u32),
n_per_axis (u32), spacing (f64), field flags (u32).  The payload holds the
flagged blocks back to back, each in site-major order (sites in C order of
their integer coordinates):

* connection block: per site 6 matrices of 8 reals each, the 2x2 complex
  entries row-major with real part before imaginary part;
* higgs block: per site one matrix of 8 reals, same convention;
* density block: per site one real.

A field state carries both connection and higgs blocks, always, so that the
read state reproduces the written one bit for bit (including signed zeros).
Density snapshots carry the scalar block alone; they exist so detector input
sequences do not need full field payloads.  Any other flag combination, any
version other than 1, and any payload whose length disagrees with the header
are hard parse errors, never reinterpreted.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .fields import FieldState
from .lattice import LatticeSpec

MAGIC = b"DTIL"
VERSION = 1

FLAG_CONNECTION = 1
FLAG_HIGGS = 2
FLAG_DENSITY = 4

_HEADER = struct.Struct("<4sIIdI")
_STATE_FLAGS = FLAG_CONNECTION | FLAG_HIGGS


@dataclass(frozen=True)
class Snapshot:
    """One persisted lattice object: a field state or a density scan."""

    spec: LatticeSpec
    A: np.ndarray | None = None
    phi: np.ndarray | None = None
    density: np.ndarray | None = None

    def __post_init__(self):
        state_kind = self.A is not None and self.phi is not None and self.density is None
        dens_kind = self.density is not None and self.A is None and self.phi is None
        if not (state_kind or dens_kind):
            raise ValueError("snapshot carries either A and phi together, or density alone")
        if state_kind:
            want = (6,) + self.spec.shape + (2, 2)
            if self.A.shape != want:
                raise ValueError(f"connection shape {self.A.shape}, expected {want}")
            if self.phi.shape != self.spec.shape + (2, 2):
                raise ValueError(
                    f"higgs shape {self.phi.shape}, expected {self.spec.shape + (2, 2)}"
                )
        elif self.density.shape != self.spec.shape:
            raise ValueError(f"density shape {self.density.shape}, expected {self.spec.shape}")

    @property
    def flags(self) -> int:
        return FLAG_DENSITY if self.density is not None else _STATE_FLAGS

    @property
    def entry(self):
        """The payload as a detector-sequence entry: a FieldState or a density array."""
        if self.density is not None:
            return self.density
        return self.state()

    def state(self) -> FieldState:
        if self.density is not None:
            raise ValueError("density snapshot carries no field state")
        return FieldState(self.spec, self.A, self.phi)

    @classmethod
    def from_state(cls, state: FieldState) -> "Snapshot":
        return cls(state.spec, A=state.A, phi=state.phi)

    @classmethod
    def from_density(cls, spec: LatticeSpec, values: np.ndarray) -> "Snapshot":
        return cls(spec, density=np.asarray(values, dtype=np.float64))


def _block_bytes(flag: int, spec: LatticeSpec) -> int:
    per_site = {FLAG_CONNECTION: 48, FLAG_HIGGS: 8, FLAG_DENSITY: 1}[flag]
    return spec.site_count * per_site * 8


def write_snapshot(path, snap: Snapshot | FieldState) -> None:
    if isinstance(snap, FieldState):
        snap = Snapshot.from_state(snap)
    spec = snap.spec
    header = _HEADER.pack(MAGIC, VERSION, spec.n_per_axis, spec.spacing, snap.flags)
    with open(path, "wb") as f:
        f.write(header)
        if snap.density is not None:
            f.write(np.ascontiguousarray(snap.density, dtype="<f8").tobytes())
        else:
            # little-endian complex128 is itself the row-major re/im-interleaved
            # layout, so serialization is a pure memory copy (bit-exact: signed
            # zeros, denormals, and NaN payloads all survive)
            f.write(np.ascontiguousarray(np.moveaxis(snap.A, 0, -3), dtype="<c16").tobytes())
            f.write(np.ascontiguousarray(snap.phi, dtype="<c16").tobytes())


def read_snapshot(path) -> Snapshot:
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: truncated header ({len(data)} of {_HEADER.size} bytes)")
    magic, version, n_per_axis, spacing, flags = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}, not a DTIL snapshot")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported snapshot version {version} (expected {VERSION})")
    if flags not in (_STATE_FLAGS, FLAG_DENSITY):
        raise ValueError(f"{path}: unsupported field flags {flags:#x}")
    try:
        spec = LatticeSpec(n_per_axis, spacing)
    except ValueError as exc:
        raise ValueError(f"{path}: invalid header: {exc}") from None

    payload = data[_HEADER.size :]
    if flags == FLAG_DENSITY:
        expected = _block_bytes(FLAG_DENSITY, spec)
        if len(payload) != expected:
            raise ValueError(f"{path}: payload is {len(payload)} bytes, header implies {expected}")
        dens = np.frombuffer(payload, dtype="<f8").reshape(spec.shape)
        return Snapshot(spec, density=dens.astype(np.float64))

    expected = _block_bytes(FLAG_CONNECTION, spec) + _block_bytes(FLAG_HIGGS, spec)
    if len(payload) != expected:
        raise ValueError(f"{path}: payload is {len(payload)} bytes, header implies {expected}")
    split = _block_bytes(FLAG_CONNECTION, spec)
    a = np.frombuffer(payload, dtype="<c16", count=split // 16)
    a = a.reshape(spec.shape + (6, 2, 2))
    a = np.ascontiguousarray(np.moveaxis(a, -3, 0), dtype=np.complex128)
    phi = np.frombuffer(payload, dtype="<c16", offset=split)
    phi = phi.reshape(spec.shape + (2, 2)).astype(np.complex128)
    return Snapshot(spec, A=a, phi=phi)
