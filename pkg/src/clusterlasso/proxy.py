"""Sparse proxy construction: cluster representatives and aggregated weights.

The proxy replaces the true coefficient vector by one supported on a single
representative column per active cluster (the column closest to its center),
with each representative carrying the summed true coefficients of its
cluster. By construction the center-weighted combinations of truth and proxy
coincide, so the prediction gap between them is driven purely by the
column-level deviations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mixture import CenterMatrix, DesignInstance
from .serialize import SCHEMA_VERSION, decode_array, encode_array

__all__ = [
    "GroundTruth",
    "ProxyVector",
    "TruthRule",
    "EmptyClusterError",
    "best_representatives",
    "build_beta_star",
    "proxy_discrepancy",
    "sample_ground_truth",
]


class EmptyClusterError(ValueError):
    """An active cluster received no columns, so it has no representative."""

    def __init__(self, cluster: int):
        self.cluster = cluster
        super().__init__(f"active cluster {cluster} has no columns")


@dataclass(frozen=True)
class GroundTruth:
    """True coefficients, noise and response for one trial.

    beta is length p and zero off ``support``; y = X beta + z exactly as
    constructed (bitwise). ``random_signs`` records whether the sign pattern
    was drawn uniformly from {-1,+1}, ``one_per_cluster`` whether the support
    placed at most one coefficient per cluster.
    """

    beta: np.ndarray
    support: np.ndarray
    sigma: float
    noise: np.ndarray
    response: np.ndarray
    random_signs: bool = True
    one_per_cluster: bool = True

    def __post_init__(self):
        off = np.delete(self.beta, self.support)
        if off.size and np.any(off != 0.0):
            raise ValueError("beta has mass off its declared support")
        if self.support.size < 1:
            raise ValueError("support must be nonempty")

    @property
    def s(self) -> int:
        return int(self.support.size)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "truth",
            "support": self.support.tolist(),
            "values": self.beta[self.support].tolist(),
            "sigma": self.sigma,
            "random_signs": self.random_signs,
            "one_per_cluster": self.one_per_cluster,
            "noise_b64": encode_array(self.noise),
        }

    @classmethod
    def from_dict(cls, doc: dict, instance: DesignInstance) -> "GroundTruth":
        support = np.asarray(doc["support"], dtype=np.int64)
        beta = np.zeros(instance.p)
        beta[support] = np.asarray(doc["values"], dtype=np.float64)
        noise = decode_array(doc["noise_b64"], (instance.n,))
        return cls(
            beta=beta,
            support=support,
            sigma=float(doc["sigma"]),
            noise=noise,
            response=instance.design @ beta + noise,
            random_signs=bool(doc["random_signs"]),
            one_per_cluster=bool(doc["one_per_cluster"]),
        )


@dataclass(frozen=True)
class ProxyVector:
    """Aggregated coefficients on the cluster representatives.

    ``support`` lists one representative per active cluster (including
    clusters whose summed true coefficient is zero; those entries simply
    carry weight zero). ``representative_of`` maps cluster index to its
    representative column.
    """

    support: np.ndarray
    beta_star: np.ndarray
    representative_of: dict[int, int] = field(repr=False)

    @property
    def s_star(self) -> int:
        return int(self.support.size)


@dataclass(frozen=True)
class TruthRule:
    """Configuration of the ground-truth sampler.

    support_rule  "one_per_cluster" picks one column per chosen active
                  cluster (signs then agree within clusters trivially);
                  "uniform" picks s columns uniformly among all p, with the
                  sign drawn per cluster so that cluster-level cancellation
                  cannot occur by construction.
    magnitude     "constant" (every |beta_j| = value) or "uniform"
                  (|beta_j| ~ U[low, high])
    """

    support_rule: str = "one_per_cluster"
    magnitude: str = "constant"
    value: float = 1.0
    low: float = 0.5
    high: float = 1.5

    def __post_init__(self):
        if self.support_rule not in ("one_per_cluster", "uniform"):
            raise ValueError(f"unknown support rule {self.support_rule!r}")
        if self.magnitude not in ("constant", "uniform"):
            raise ValueError(f"unknown magnitude rule {self.magnitude!r}")

    def to_dict(self) -> dict:
        return {
            "support_rule": self.support_rule,
            "magnitude": self.magnitude,
            "value": self.value,
            "low": self.low,
            "high": self.high,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TruthRule":
        return cls(**d)


def best_representatives(
    instance: DesignInstance, centers: CenterMatrix
) -> dict[int, int]:
    """Representative column per active cluster: the normalized column
    closest in l2 to the cluster center, ties broken by smallest index."""
    reps: dict[int, int] = {}
    for k in instance.active_set:
        members = instance.cluster_members(int(k))
        if members.size == 0:
            raise EmptyClusterError(int(k))
        diffs = instance.design[:, members] - centers.centers[:, [int(k)]]
        dist = np.einsum("ij,ij->j", diffs, diffs)
        reps[int(k)] = int(members[np.argmin(dist)])
    return reps


def build_beta_star(
    truth: GroundTruth, instance: DesignInstance, reps: dict[int, int]
) -> ProxyVector:
    """Aggregate true coefficients cluster by cluster onto representatives."""
    truth_clusters = set(int(instance.labels[j]) for j in truth.support)
    missing = truth_clusters.difference(reps)
    if missing:
        raise ValueError(f"no representative for clusters {sorted(missing)}")
    beta_star = np.zeros(instance.p)
    for k, j_star in reps.items():
        members = instance.cluster_members(k)
        beta_star[j_star] = truth.beta[members].sum()
    support = np.sort(np.fromiter(reps.values(), dtype=np.int64))
    return ProxyVector(
        support=support, beta_star=beta_star, representative_of=dict(reps)
    )


def proxy_discrepancy(design, beta, beta_star) -> float:
    """l2 distance between the design images of truth and proxy."""
    x = np.asarray(design, dtype=np.float64)
    return float(np.linalg.norm(x @ np.asarray(beta) - x @ np.asarray(beta_star)))


def sample_ground_truth(
    instance: DesignInstance,
    s: int,
    rule: TruthRule,
    sigma: float,
    rng: np.random.Generator,
) -> GroundTruth:
    """Draw coefficients, signs and noise for one trial.

    Draw order (fixed): support clusters / columns, per-cluster signs in
    sorted cluster order, magnitudes in sorted support order, then the noise
    vector. Signs are uniform on {-1,+1} per cluster.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if rule.support_rule == "one_per_cluster":
        if s > instance.active_set.size:
            raise ValueError(
                f"s={s} exceeds the {instance.active_set.size} active clusters "
                "available under the one-per-cluster rule"
            )
        chosen = np.sort(
            rng.choice(instance.active_set, size=s, replace=False)
        )
        support = []
        for k in chosen:
            members = instance.cluster_members(int(k))
            if members.size == 0:
                raise EmptyClusterError(int(k))
            support.append(int(rng.choice(members)))
        support = np.sort(np.asarray(support, dtype=np.int64))
        one_per_cluster = True
    else:
        if s > instance.p:
            raise ValueError(f"s={s} exceeds p={instance.p}")
        support = np.sort(rng.choice(instance.p, size=s, replace=False))
        one_per_cluster = bool(
            np.unique(instance.labels[support]).size == support.size
        )

    sign_clusters = np.unique(instance.labels[support])
    cluster_sign = dict(
        zip(sign_clusters.tolist(), rng.choice([-1.0, 1.0], size=sign_clusters.size))
    )
    if rule.magnitude == "constant":
        mags = np.full(support.size, float(rule.value))
    else:
        mags = rng.uniform(rule.low, rule.high, size=support.size)

    beta = np.zeros(instance.p)
    beta[support] = mags * np.array(
        [cluster_sign[int(instance.labels[j])] for j in support]
    )
    noise = sigma * rng.standard_normal(instance.n)
    return GroundTruth(
        beta=beta,
        support=support,
        sigma=float(sigma),
        noise=noise,
        response=instance.design @ beta + noise,
        random_signs=True,
        one_per_cluster=one_per_cluster,
    )
