"""Quantum channels in Kraus form, with Choi/Stinespring conversions and builders.

The Kraus list is the canonical representation. The Choi matrix uses the
ordering ``X = sum_jk |j><k| (x) Phi(|j><k|)`` (input factor first).
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from . import linalg
from .errors import BadName, BadPOVM, DimMismatch, NotCP, NotTP

TOL_TP = 1e-9
TOL_CP = 1e-10

PAULI_Z = np.diag([1.0, -1.0]).astype(complex)


@dataclass(frozen=True, eq=False)
class Channel:
    d_in: int
    d_out: int
    kraus: tuple
    name: str = ""
    ebt: bool = False

    def __post_init__(self):
        ks = tuple(np.asarray(k, dtype=complex) for k in self.kraus)
        if not ks:
            raise DimMismatch("a channel needs at least one Kraus operator")
        for k in ks:
            if k.shape != (self.d_out, self.d_in):
                raise DimMismatch(
                    f"Kraus operator shape {k.shape} != (d_out, d_in) = {(self.d_out, self.d_in)}"
                )
        object.__setattr__(self, "kraus", ks)

    @cached_property
    def kraus_array(self) -> np.ndarray:
        """Kraus operators stacked as an ``(r, d_out, d_in)`` array."""
        return np.stack(self.kraus)

    @property
    def tp_residual(self) -> float:
        s = sum(k.conj().T @ k for k in self.kraus)
        return float(np.linalg.norm(s - np.eye(self.d_in)))

    @property
    def is_tp(self) -> bool:
        return self.tp_residual <= TOL_TP

    @cached_property
    def choi(self) -> "ChoiMatrix":
        return choi_from_kraus(self)

    def __call__(self, rho) -> np.ndarray:
        return apply(self, rho)

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"<Channel{label} {self.d_in}->{self.d_out}, {len(self.kraus)} Kraus>"


@dataclass(frozen=True)
class ChoiMatrix:
    matrix: np.ndarray
    split: tuple[int, int]  # (d_in, d_out)

    def eigenvalues(self) -> np.ndarray:
        return linalg.herm_eig(self.matrix).eigenvalues


@dataclass(frozen=True)
class EbtSpec:
    states: Sequence[np.ndarray]
    povm: Sequence[np.ndarray]


@dataclass(frozen=True)
class StinespringIsometry:
    V: np.ndarray  # (d_out * d_env) x d_in, output factor first
    d_out: int
    d_env: int


def choi_from_kraus(phi: Channel) -> ChoiMatrix:
    # column r of the stacked vectors is vec(K_r^T), indexed (input, output)
    vecs = phi.kraus_array.transpose(0, 2, 1).reshape(len(phi.kraus), -1)
    x = vecs.T @ vecs.conj()
    return ChoiMatrix(0.5 * (x + x.conj().T), (phi.d_in, phi.d_out))


def _kraus_from_choi_matrix(x: np.ndarray, d_in: int, d_out: int) -> list[np.ndarray]:
    x = linalg.as_matrix(x)
    if x.shape != (d_in * d_out, d_in * d_out):
        raise DimMismatch(f"Choi matrix shape {x.shape} does not match {d_in}x{d_out}")
    spec = linalg.herm_eig(x)
    w, v = spec.eigenvalues, spec.eigenvectors
    scale = max(np.linalg.norm(x), 1e-300)
    if w[-1] < -TOL_CP * scale:
        raise NotCP(f"Choi matrix has negative eigenvalue {w[-1]:.6g}; the map is not CP")
    w = linalg.clip_eigenvalues(w)
    keep = w > 0
    kraus = []
    for lam, vec in zip(w[keep], v[:, keep].T):
        kraus.append((math.sqrt(lam) * vec).reshape(d_in, d_out).T)
    if not kraus:
        kraus.append(np.zeros((d_out, d_in), dtype=complex))
    return kraus


def kraus_from_choi(x: ChoiMatrix, name: str = "", ebt: bool = False) -> Channel:
    d_in, d_out = x.split
    return Channel(d_in, d_out, tuple(_kraus_from_choi_matrix(x.matrix, d_in, d_out)), name, ebt)


def apply(phi: Channel, rho) -> np.ndarray:
    rho = linalg.as_matrix(rho)
    if rho.shape != (phi.d_in, phi.d_in):
        raise DimMismatch(f"input shape {rho.shape} != ({phi.d_in}, {phi.d_in})")
    k = phi.kraus_array
    return np.einsum("rij,jk,rlk->il", k, rho, k.conj())


def apply_extended(phi: Channel, q, dims: Sequence[int]) -> np.ndarray:
    """``(I_d (x) Phi)(Q)`` for Q on C^d (x) C^{d_in}; ``dims = (d, d_in)``."""
    q = linalg.as_matrix(q)
    dims = tuple(int(x) for x in dims)
    if len(dims) != 2 or dims[1] != phi.d_in or q.shape != (dims[0] * dims[1],) * 2:
        raise DimMismatch(f"extended input needs split (d, {phi.d_in}) and matching shape")
    d = dims[0]
    t = q.reshape(d, phi.d_in, d, phi.d_in)
    k = phi.kraus_array
    out = np.einsum("rab,ibjc,rdc->iajd", k, t, k.conj())
    n = d * phi.d_out
    return out.reshape(n, n)


# builders -------------------------------------------------------------------


def identity(d: int) -> Channel:
    return Channel(d, d, (np.eye(d, dtype=complex),), f"identity:d={d}")


def completely_noisy(d: int) -> Channel:
    """rho -> Tr(rho) I/d."""
    ks = []
    for i in range(d):
        for j in range(d):
            k = np.zeros((d, d), dtype=complex)
            k[i, j] = 1 / math.sqrt(d)
            ks.append(k)
    return Channel(d, d, tuple(ks), f"noisy:d={d}", ebt=True)


def _omega_projector(d: int) -> np.ndarray:
    omega = np.eye(d, dtype=complex).reshape(-1)
    return np.outer(omega, omega)


def depolarizing(d: int, mu: float) -> Channel:
    """rho -> mu rho + (1 - mu) Tr(rho) I/d, valid for -1/(d^2-1) <= mu <= 1.

    Tagged entanglement-breaking for mu <= 1/(d+1).
    """
    x = mu * _omega_projector(d) + (1 - mu) * np.eye(d * d) / d
    ebt = mu <= 1 / (d + 1) + 1e-12
    return kraus_from_choi(ChoiMatrix(x, (d, d)), f"depolarizing:d={d},mu={mu:g}", ebt)


def werner_holevo(d: int) -> Channel:
    """rho -> (Tr(rho) I - rho^T)/(d - 1), transpose in the canonical basis."""
    if d < 2:
        raise DimMismatch("Werner-Holevo channel needs d >= 2")
    swap = np.eye(d * d).reshape(d, d, d, d).transpose(0, 1, 3, 2).reshape(d * d, d * d)
    x = (np.eye(d * d) - swap) / (d - 1)
    return kraus_from_choi(ChoiMatrix(x.astype(complex), (d, d)), f"werner-holevo:d={d}")


def nonunital_qubit(lam: float, tau: float) -> Channel:
    """rho -> lam rho + ((1 - lam)/2 I + tau/2 sigma_z) Tr(rho).

    Complete positivity is checked through the Choi matrix.
    """
    shift = (1 - lam) / 2 * np.eye(2) + tau / 2 * PAULI_Z
    x = lam * _omega_projector(2) + np.kron(np.eye(2), shift)
    return kraus_from_choi(ChoiMatrix(x, (2, 2)), f"nonunital:lambda={lam:g},tau={tau:g}")


def ebt_channel(spec: EbtSpec) -> Channel:
    """Measure-and-prepare channel rho -> sum_k R_k Tr(rho E_k)."""
    states = [linalg.as_matrix(r) for r in spec.states]
    povm = [linalg.as_matrix(e) for e in spec.povm]
    if len(states) != len(povm) or not states:
        raise BadPOVM("need one prepared state per POVM element")
    d_in, d_out = povm[0].shape[0], states[0].shape[0]
    total = sum(povm)
    if np.linalg.norm(total - np.eye(d_in)) > TOL_TP:
        raise BadPOVM(f"POVM elements sum to I only up to {np.linalg.norm(total - np.eye(d_in)):.3e}")
    for e in povm:
        if linalg.herm_eig(e).eigenvalues[-1] < -TOL_CP:
            raise BadPOVM("POVM element is not PSD")
    for r in states:
        if abs(np.trace(r) - 1) > TOL_TP or linalg.herm_eig(r).eigenvalues[-1] < -TOL_CP:
            raise BadPOVM("prepared states must be density matrices")
    x = sum(np.kron(e.T, r) for e, r in zip(povm, states))
    return kraus_from_choi(ChoiMatrix(x, (d_in, d_out)), "ebt", ebt=True)


def qubit_sic_ebt() -> EbtSpec:
    """Tetrahedral measure-and-prepare form; reproduces depolarizing(2, 1/3)."""
    paulis = [
        np.array([[0, 1], [1, 0]], dtype=complex),
        np.array([[0, -1j], [1j, 0]], dtype=complex),
        PAULI_Z,
    ]
    bloch = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]]) / math.sqrt(3)
    projs = [(np.eye(2) + sum(n[i] * paulis[i] for i in range(3))) / 2 for n in bloch]
    return EbtSpec(states=projs, povm=[p / 2 for p in projs])


def random_ebt(d_in: int, d_out: int, n_outcomes: int, rng: np.random.Generator) -> Channel:
    """Random entanglement-breaking channel from a Ginibre POVM and random states."""
    g = rng.standard_normal((n_outcomes * d_in, d_in)) + 1j * rng.standard_normal((n_outcomes * d_in, d_in))
    s = g.conj().T @ g
    w, v = np.linalg.eigh(s)
    g = g @ (v * w ** -0.5) @ v.conj().T  # now an isometry
    blocks = g.reshape(n_outcomes, d_in, d_in)
    povm = [b.conj().T @ b for b in blocks]
    # the isometry makes the sum exact up to rounding; re-symmetrize
    povm = [0.5 * (e + e.conj().T) for e in povm]
    states = [linalg.random_density(d_out, rng) for _ in range(n_outcomes)]
    return ebt_channel(EbtSpec(states, povm))


def random_isometry(n_rows: int, n_cols: int, seed) -> np.ndarray:
    """Isometry from the QR factor of a seeded complex Gaussian matrix.

    Stream layout: ``2 * n_rows * n_cols`` standard normals from
    ``numpy.random.default_rng(seed)``; the first half fills the real part,
    the second half the imaginary part, each column-major. The Q factor is
    phase-fixed so that R has a positive diagonal.
    """
    rng = np.random.default_rng(seed)
    draws = rng.standard_normal(2 * n_rows * n_cols)
    half = n_rows * n_cols
    g = draws[:half].reshape((n_rows, n_cols), order="F") + 1j * draws[half:].reshape(
        (n_rows, n_cols), order="F"
    )
    q, r = np.linalg.qr(g)
    phases = np.diag(r) / np.abs(np.diag(r))
    return q * phases


def random_cpt(d_in: int, d_out: int, d_env: int, seed) -> Channel:
    if d_out * d_env < d_in:
        raise DimMismatch(f"need d_out*d_env >= d_in, got {d_out}*{d_env} < {d_in}")
    v = random_isometry(d_out * d_env, d_in, seed)
    t = v.reshape(d_out, d_env, d_in)
    ks = tuple(t[:, e, :] for e in range(d_env))
    return Channel(d_in, d_out, ks, f"random:d_in={d_in},d_out={d_out},d_env={d_env},seed={seed}")


def tensor(phi_a: Channel, phi_b: Channel) -> Channel:
    ks = tuple(np.kron(ka, kb) for ka in phi_a.kraus for kb in phi_b.kraus)
    name = f"({phi_a.name or 'A'})x({phi_b.name or 'B'})"
    return Channel(
        phi_a.d_in * phi_b.d_in, phi_a.d_out * phi_b.d_out, ks, name, phi_a.ebt and phi_b.ebt
    )


def stinespring(phi: Channel) -> StinespringIsometry:
    """V|x> = sum_j K_j|x> (x) |j>_E, output factor first."""
    if not phi.is_tp:
        raise NotTP(f"channel is not trace preserving (residual {phi.tp_residual:.3e})")
    k = phi.kraus_array  # (r, d_out, d_in)
    v = k.transpose(1, 0, 2).reshape(phi.d_out * len(phi.kraus), phi.d_in)
    return StinespringIsometry(v, phi.d_out, len(phi.kraus))


def complementary(phi: Channel) -> Channel:
    """Channel to the environment: rho -> Tr_out V rho V^dag."""
    iso = stinespring(phi)
    k = phi.kraus_array
    ks = tuple(k[:, a, :] for a in range(phi.d_out))  # each (d_env, d_in)
    return Channel(phi.d_in, iso.d_env, ks, f"complement({phi.name})")


# serialization ----------------------------------------------------------------


def channel_to_dict(phi: Channel) -> dict:
    return {
        "d_in": phi.d_in,
        "d_out": phi.d_out,
        "kraus": [[[[float(z.real), float(z.imag)] for z in row] for row in k] for k in phi.kraus],
    }


def channel_from_dict(data: dict, name: str = "") -> Channel:
    try:
        d_in, d_out = int(data["d_in"]), int(data["d_out"])
        ks = [np.array([[complex(re, im) for re, im in row] for row in k]) for k in data["kraus"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise DimMismatch(f"malformed channel spec: {exc}") from exc
    return Channel(d_in, d_out, tuple(ks), name or "json")


def channel_to_json(phi: Channel) -> str:
    return json.dumps(channel_to_dict(phi))


_BUILTINS = {
    "identity": (identity, {"d": int}),
    "noisy": (completely_noisy, {"d": int}),
    "depolarizing": (depolarizing, {"d": int, "mu": float}),
    "werner-holevo": (werner_holevo, {"d": int}),
    "nonunital": (nonunital_qubit, {"lambda": float, "tau": float}),
    "random": (random_cpt, {"d_in": int, "d_out": int, "d_env": int, "seed": int}),
}
_ALIASES = {"lambda": "lam"}


def from_name(spec: str) -> Channel:
    """Build a channel from ``name:key=val,key=val`` (e.g. ``depolarizing:d=2,mu=0.5``)."""
    m = re.fullmatch(r"\s*([\w-]+)\s*(?::(.*))?", spec)
    if not m or m.group(1) not in _BUILTINS:
        raise BadName(f"unknown channel {spec!r}; builtins: {', '.join(sorted(_BUILTINS))}")
    builder, params = _BUILTINS[m.group(1)]
    kwargs = {}
    for part in filter(None, (m.group(2) or "").split(",")):
        key, _, val = part.partition("=")
        key = key.strip()
        if key not in params:
            raise BadName(f"{m.group(1)} does not take parameter {key!r}")
        kwargs[_ALIASES.get(key, key)] = params[key](val)
    missing = {_ALIASES.get(k, k) for k in params} - set(kwargs)
    if missing:
        raise BadName(f"{m.group(1)} is missing parameters {sorted(missing)}")
    return builder(**kwargs)
