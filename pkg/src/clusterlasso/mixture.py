"""Clustered Gaussian design model: centers, active clusters, column draws.

A design is built in three steps: draw an active subset of clusters
uniformly, assign each of the p columns a cluster label i.i.d. from the
(restricted, renormalized) mixture weights, then add isotropic Gaussian
spread to the cluster center and normalize each column to unit l2 norm.
Every draw comes from a counter-based Philox stream keyed by explicit
integers, so any instance is reproducible from its seed tuple alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .linalg import DegenerateColumnError
from .serialize import SCHEMA_VERSION, decode_array, encode_array

__all__ = [
    "MixtureSpec",
    "CenterMatrix",
    "DesignInstance",
    "rng_from_key",
    "draw_active_set",
    "sample_design",
    "gaussian_centers",
    "orthonormal_centers",
]

UNIT_NORM_TOL = 1e-10


def rng_from_key(*key: int) -> np.random.Generator:
    """Philox generator keyed by a tuple of integers (order matters)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(list(key))))


@dataclass(frozen=True)
class MixtureSpec:
    """Dimensions and mixture parameters of the design model.

    n, p        ambient dimension and number of columns
    n_clusters  total number of cluster centers available
    n_active    size of the active cluster subset actually generating columns
    spread      standard deviation of the Gaussian deviation around a center
    weights     mixture weights over all clusters (default uniform); the
                weights restricted to the active set are renormalized before
                label sampling
    """

    n: int
    p: int
    n_clusters: int
    n_active: int
    spread: float
    weights: np.ndarray | None = None

    def __post_init__(self):
        if not (1 <= self.n_active <= self.n_clusters <= self.p):
            raise ValueError(
                "need 1 <= n_active <= n_clusters <= p, got "
                f"n_active={self.n_active} n_clusters={self.n_clusters} p={self.p}"
            )
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.spread < 0:
            raise ValueError("spread must be nonnegative")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=np.float64)
            if w.shape != (self.n_clusters,):
                raise ValueError("weights must have one entry per cluster")
            if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
                raise ValueError("weights must be nonnegative and sum to 1")
            object.__setattr__(self, "weights", w)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "p": self.p,
            "n_clusters": self.n_clusters,
            "n_active": self.n_active,
            "spread": self.spread,
            "weights": None if self.weights is None else self.weights.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MixtureSpec":
        w = d.get("weights")
        return cls(
            n=int(d["n"]),
            p=int(d["p"]),
            n_clusters=int(d["n_clusters"]),
            n_active=int(d["n_active"]),
            spread=float(d["spread"]),
            weights=None if w is None else np.asarray(w, dtype=np.float64),
        )


@dataclass(frozen=True)
class CenterMatrix:
    """Unit-norm cluster centers with cached coherence and operator norm."""

    centers: np.ndarray
    coherence_mu: float
    op_norm: float

    @classmethod
    def from_array(cls, centers) -> "CenterMatrix":
        c = linalg.as_matrix(centers, "centers")
        norms = np.linalg.norm(c, axis=0)
        worst = int(np.argmax(np.abs(norms - 1.0)))
        if abs(norms[worst] - 1.0) > UNIT_NORM_TOL:
            raise ValueError(
                f"center column {worst} has norm {norms[worst]:.12g}, "
                "expected unit norm"
            )
        mu = linalg.coherence(c) if c.shape[1] >= 2 else 0.0
        return cls(
            centers=c, coherence_mu=mu, op_norm=linalg.spectral_norm(c).operator_norm
        )

    @property
    def n(self) -> int:
        return self.centers.shape[0]

    @property
    def n_clusters(self) -> int:
        return self.centers.shape[1]


@dataclass(frozen=True)
class DesignInstance:
    """One draw of the clustered design.

    raw       n x p matrix of center-plus-deviation columns (before scaling)
    design    n x p column-normalized design matrix
    deviations n x p matrix of Gaussian deviations from the assigned centers
    labels    per-column cluster index (values inside active_set)
    active_set sorted active cluster indices
    seed_key  integer tuple that keyed the generator (empty if hand-built)
    """

    raw: np.ndarray
    design: np.ndarray
    deviations: np.ndarray
    labels: np.ndarray
    active_set: np.ndarray
    seed_key: tuple[int, ...] = field(default=())

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def p(self) -> int:
        return self.design.shape[1]

    def cluster_members(self, k: int) -> np.ndarray:
        """Column indices drawn from cluster k (possibly empty)."""
        return np.flatnonzero(self.labels == k)

    @property
    def clusters(self) -> dict[int, np.ndarray]:
        """Partition of {0..p-1} by cluster label, active clusters only."""
        return {int(k): self.cluster_members(int(k)) for k in self.active_set}

    @property
    def counts(self) -> dict[int, int]:
        return {k: members.size for k, members in self.clusters.items()}

    def to_dict(self, spec: MixtureSpec, embed: bool = True) -> dict:
        """JSON-ready record; with ``embed`` the deviations travel inline,
        otherwise the instance is reconstructed from the seed key."""
        doc = {
            "schema_version": SCHEMA_VERSION,
            "kind": "design",
            "spec": spec.to_dict(),
            "seed_key": list(self.seed_key),
            "active_set": self.active_set.tolist(),
            "labels": self.labels.tolist(),
        }
        if embed:
            doc["deviations_b64"] = encode_array(self.deviations)
        return doc

    @classmethod
    def from_dict(cls, doc: dict, centers: CenterMatrix) -> "DesignInstance":
        spec = MixtureSpec.from_dict(doc["spec"])
        if "deviations_b64" in doc:
            labels = np.asarray(doc["labels"], dtype=np.int64)
            dev = decode_array(doc["deviations_b64"], (spec.n, spec.p))
            return assemble_design(
                centers,
                np.asarray(doc["active_set"], dtype=np.int64),
                labels,
                dev,
                seed_key=tuple(doc["seed_key"]),
            )
        if not doc["seed_key"]:
            raise ValueError("record has neither embedded deviations nor a seed key")
        key = tuple(doc["seed_key"])
        return sample_design(spec, centers, rng_from_key(*key), seed_key=key)


def draw_active_set(n_clusters: int, n_active: int, rng: np.random.Generator):
    """Uniformly random n_active-subset of {0..n_clusters-1}, sorted."""
    if not 1 <= n_active <= n_clusters:
        raise ValueError(
            f"n_active={n_active} must lie in [1, n_clusters={n_clusters}]"
        )
    return np.sort(rng.choice(n_clusters, size=n_active, replace=False))


def assemble_design(
    centers: CenterMatrix,
    active_set: np.ndarray,
    labels: np.ndarray,
    deviations: np.ndarray,
    seed_key: tuple[int, ...] = (),
    floor: float = linalg.NORM_FLOOR,
) -> DesignInstance:
    """Build an instance from explicit parts (also the test entry point)."""
    raw = centers.centers[:, labels] + deviations
    norms = np.linalg.norm(raw, axis=0)
    bad = np.flatnonzero(norms <= floor)
    if bad.size:
        raise DegenerateColumnError(int(bad[0]), float(norms[bad[0]]))
    return DesignInstance(
        raw=raw,
        design=raw / norms,
        deviations=deviations,
        labels=np.asarray(labels, dtype=np.int64),
        active_set=np.asarray(active_set, dtype=np.int64),
        seed_key=seed_key,
    )


def sample_design(
    spec: MixtureSpec,
    centers: CenterMatrix,
    rng: np.random.Generator,
    seed_key: tuple[int, ...] = (),
) -> DesignInstance:
    """Draw one design instance.

    Draw order (fixed, documented for reproducibility): active set, then all
    p labels, then the n x p deviation block. A column whose raw norm falls
    below the floor is resampled once from the same stream; a second failure
    raises :class:`DegenerateColumnError` carrying the seed key.
    """
    if centers.n_clusters != spec.n_clusters:
        raise ValueError(
            f"centers have {centers.n_clusters} columns, spec says "
            f"{spec.n_clusters}"
        )
    if centers.n != spec.n:
        raise ValueError("centers dimension does not match spec.n")

    active = draw_active_set(spec.n_clusters, spec.n_active, rng)
    if spec.weights is None:
        probs = np.full(spec.n_active, 1.0 / spec.n_active)
    else:
        w = spec.weights[active]
        total = w.sum()
        if total <= 0:
            raise ValueError("active set has zero total mixture weight")
        probs = w / total
    labels = active[rng.choice(spec.n_active, size=spec.p, p=probs)]
    dev = spec.spread * rng.standard_normal((spec.n, spec.p))

    raw = centers.centers[:, labels] + dev
    norms = np.linalg.norm(raw, axis=0)
    bad = np.flatnonzero(norms <= linalg.NORM_FLOOR)
    for j in bad:
        dev[:, j] = spec.spread * rng.standard_normal(spec.n)
        raw[:, j] = centers.centers[:, labels[j]] + dev[:, j]
        if np.linalg.norm(raw[:, j]) <= linalg.NORM_FLOOR:
            raise DegenerateColumnError(
                int(j),
                float(np.linalg.norm(raw[:, j])),
                detail=f"after one resample, seed_key={seed_key}",
            )
    if bad.size:
        norms = np.linalg.norm(raw, axis=0)

    return DesignInstance(
        raw=raw,
        design=raw / norms,
        deviations=dev,
        labels=labels.astype(np.int64),
        active_set=active.astype(np.int64),
        seed_key=seed_key,
    )


def gaussian_centers(n: int, n_clusters: int, rng: np.random.Generator) -> CenterMatrix:
    """Normalized i.i.d. N(0, 1/n) centers; utility generator for experiments."""
    if n < 2 or n_clusters < 2:
        raise ValueError("need n >= 2 and n_clusters >= 2")
    raw = rng.standard_normal((n, n_clusters)) / np.sqrt(n)
    return CenterMatrix.from_array(linalg.normalize_columns(raw))


def orthonormal_centers(
    n: int, n_clusters: int, rng: np.random.Generator
) -> CenterMatrix:
    """Exactly orthonormal centers (QR of a Gaussian draw); zero coherence."""
    if n_clusters > n:
        raise ValueError("orthonormal centers need n_clusters <= n")
    q, _ = np.linalg.qr(rng.standard_normal((n, n_clusters)))
    return CenterMatrix.from_array(q)
