"""Maps cleaned texts to discrete category ids: hash-embed, project, density-cluster."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .corpus import CleanText
from .errors import ConfigurationError, TransportClientError

DEFAULT_EMBED_DIM = 4096
DEFAULT_REDUCED_DIM = 64
PROJECTION_DENSITY = 1.0 / 16.0


@dataclass(frozen=True)
class EmbeddingVector:
    """Dense text representation; unit L2 norm unless the text had no tokens."""

    values: np.ndarray
    dim: int

    @property
    def is_degenerate(self) -> bool:
        return not np.any(self.values)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, EmbeddingVector)
            and self.dim == other.dim
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self):
        return hash((self.dim, self.values.tobytes()))


@dataclass(frozen=True)
class EmbedderConfig:
    """How observation/solution texts become vectors.

    mode "hashed_tf" is the deterministic built-in; mode "remote" calls an
    external embedding service with the same contract.
    """

    dim: int = DEFAULT_EMBED_DIM
    mode: str = "hashed_tf"
    url: str | None = None

    def __post_init__(self):
        if self.dim < 8:
            raise ConfigurationError(f"embedding dim must be >= 8, got {self.dim}")
        if self.mode not in ("hashed_tf", "remote"):
            raise ConfigurationError(f"unknown embedder mode {self.mode!r}")
        if self.mode == "remote" and not self.url:
            raise ConfigurationError("remote embedder requires a url")


def _token_hash(token: str) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def embed(text: CleanText, config: EmbedderConfig = EmbedderConfig()) -> EmbeddingVector:
    """Signed feature-hashed term frequencies, L2-normalized.

    A zero-token text maps to the zero vector (degenerate).
    """
    values = np.zeros(config.dim, dtype=np.float64)
    for token in text.tokens:
        h = _token_hash(token)
        bucket = h % config.dim
        sign = 1.0 if (h >> 63) & 1 else -1.0
        values[bucket] += sign
    norm = np.linalg.norm(values)
    if norm > 0:
        values /= norm
    return EmbeddingVector(values=values, dim=config.dim)


class RemoteEmbedder:
    """Client for an external embedding endpoint with the built-in's contract.

    POST {"texts": [...]} -> {"vectors": [[...]]}.
    """

    def __init__(self, url: str, timeout: float = 10.0, session=None):
        if session is None:
            import requests

            session = requests.Session()
        self.url = url
        self.timeout = timeout
        self._session = session

    def embed_batch(self, texts: list[str]) -> list[np.ndarray]:
        try:
            response = self._session.post(self.url, json={"texts": texts}, timeout=self.timeout)
            response.raise_for_status()
            payload = response.json()
        except Exception as exc:
            raise TransportClientError(self.url, str(exc)) from exc
        vectors = payload.get("vectors")
        if not isinstance(vectors, list) or len(vectors) != len(texts):
            raise TransportClientError(self.url, "malformed embedding response")
        return [np.asarray(v, dtype=np.float64) for v in vectors]


def embed_text(
    text: CleanText, config: EmbedderConfig, remote_client: RemoteEmbedder | None = None
) -> EmbeddingVector:
    """Dispatch to the built-in hash embedder or the configured endpoint.

    Remote vectors are renormalized to the built-in's unit-norm contract.
    """
    if config.mode == "hashed_tf":
        return embed(text, config)
    client = remote_client or RemoteEmbedder(config.url)
    values = client.embed_batch([text.joined])[0]
    if values.size != config.dim:
        raise TransportClientError(config.url or "", "embedding dim mismatch")
    norm = np.linalg.norm(values)
    if norm > 0:
        values = values / norm
    return EmbeddingVector(values=values, dim=config.dim)


@dataclass(frozen=True)
class ReducerSpec:
    """Seeded sparse random projection, regenerable from (seed, dims)."""

    seed: int
    input_dim: int
    output_dim: int
    density: float = PROJECTION_DENSITY
    identity: bool = False

    def matrix(self) -> np.ndarray:
        cached = _PROJECTION_CACHE.get(self)
        if cached is None:
            if self.identity:
                cached = np.eye(self.input_dim, self.output_dim)
            else:
                rng = np.random.default_rng(self.seed)
                u = rng.random((self.input_dim, self.output_dim))
                scale = np.sqrt(1.0 / (self.density * self.output_dim))
                half = self.density / 2.0
                cached = np.where(u < half, scale, np.where(u >= 1.0 - half, -scale, 0.0))
            _PROJECTION_CACHE[self] = cached
        return cached

    def apply(self, vector: np.ndarray) -> np.ndarray:
        out = vector @ self.matrix()
        norm = np.linalg.norm(out)
        if norm > 0:
            out = out / norm
        return out


_PROJECTION_CACHE: dict[ReducerSpec, np.ndarray] = {}


def reduce(
    vectors: list[EmbeddingVector], target_dim: int, seed: int
) -> tuple[list[EmbeddingVector], ReducerSpec]:
    """Project embeddings to target_dim and renormalize; zero stays zero."""
    if not vectors:
        raise ConfigurationError("reduce requires at least one vector")
    input_dim = vectors[0].dim
    if any(v.dim != input_dim for v in vectors):
        raise ConfigurationError("all vectors must share one dimensionality")
    if not 0 < target_dim < input_dim:
        raise ConfigurationError(
            f"target_dim must be in (0, {input_dim}), got {target_dim}"
        )
    spec = ReducerSpec(seed=seed, input_dim=input_dim, output_dim=target_dim)
    stacked = np.stack([v.values for v in vectors]) @ spec.matrix()
    norms = np.linalg.norm(stacked, axis=1)
    nonzero = norms > 0
    stacked[nonzero] /= norms[nonzero, None]
    reduced = [EmbeddingVector(values=row, dim=target_dim) for row in stacked]
    return reduced, spec


def _cosine_distance_matrix(block: np.ndarray, others: np.ndarray) -> np.ndarray:
    # Rows are unit vectors or zero; zero rows are distance 1 from everything.
    sims = block @ others.T
    dists = 1.0 - sims
    zero_block = ~np.any(block, axis=1)
    zero_other = ~np.any(others, axis=1)
    dists[zero_block, :] = 1.0
    dists[:, zero_other] = 1.0
    return dists


@dataclass(frozen=True)
class Category:
    category_id: int
    centroid: np.ndarray
    member_count: int

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Category)
            and self.category_id == other.category_id
            and self.member_count == other.member_count
            and np.array_equal(self.centroid, other.centroid)
        )

    def __hash__(self):
        return hash((self.category_id, self.member_count))


@dataclass(frozen=True)
class ClusterParams:
    min_cluster_size: int = 5
    distance_threshold: float = 0.35


@dataclass
class Codebook:
    """Learned quantizer state: category centroids in reduced space."""

    categories: list[Category]
    reducer: ReducerSpec
    distance: str = "cosine"

    @property
    def n_categories(self) -> int:
        return len(self.categories)

    def largest_category_id(self) -> int:
        best = max(self.categories, key=lambda c: (c.member_count, -c.category_id))
        return best.category_id

    def to_dict(self) -> dict:
        return {
            "distance": self.distance,
            "reducer": {
                "seed": self.reducer.seed,
                "input_dim": self.reducer.input_dim,
                "output_dim": self.reducer.output_dim,
                "density": self.reducer.density,
                "identity": self.reducer.identity,
            },
            "categories": [
                {
                    "category_id": c.category_id,
                    "member_count": c.member_count,
                    "centroid": [float(x) for x in c.centroid],
                }
                for c in self.categories
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Codebook":
        reducer = ReducerSpec(
            seed=data["reducer"]["seed"],
            input_dim=data["reducer"]["input_dim"],
            output_dim=data["reducer"]["output_dim"],
            density=data["reducer"]["density"],
            identity=data["reducer"].get("identity", False),
        )
        categories = [
            Category(
                category_id=c["category_id"],
                centroid=np.asarray(c["centroid"], dtype=np.float64),
                member_count=c["member_count"],
            )
            for c in data["categories"]
        ]
        return cls(categories=categories, reducer=reducer, distance=data["distance"])


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i: int, j: int) -> None:
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            # deterministic: smaller root wins
            if ri < rj:
                self.parent[rj] = ri
            else:
                self.parent[ri] = rj


def fit_codebook_detailed(
    reduced: list[EmbeddingVector],
    params: ClusterParams = ClusterParams(),
    reducer: ReducerSpec | None = None,
) -> tuple[Codebook, np.ndarray, np.ndarray]:
    """Density clustering; returns (codebook, per-vector labels, noise mask).

    Points with at least min_cluster_size neighbors (duplicates included)
    within the cosine threshold seed clusters; core points within the
    threshold of each other merge (single linkage); remaining border points
    join their nearest core. Leftover noise is adopted by the nearest
    centroid after centroids are frozen on the density members.
    """
    n = len(reduced)
    if n < params.min_cluster_size:
        raise ConfigurationError(
            f"need at least min_cluster_size={params.min_cluster_size} vectors, got {n}"
        )
    if reducer is None:
        dim = reduced[0].dim
        reducer = ReducerSpec(seed=0, input_dim=dim, output_dim=dim, identity=True)

    all_vecs = np.stack([v.values for v in reduced])
    unique_vecs, inverse = np.unique(all_vecs, axis=0, return_inverse=True)
    n_unique = unique_vecs.shape[0]
    multiplicity = np.bincount(inverse, minlength=n_unique)
    is_zero = ~np.any(unique_vecs, axis=1)

    block_size = 1024
    neighbor_counts = np.zeros(n_unique, dtype=np.int64)
    neighbor_lists: list[np.ndarray] = []
    for start in range(0, n_unique, block_size):
        stop = min(start + block_size, n_unique)
        dists = _cosine_distance_matrix(unique_vecs[start:stop], unique_vecs)
        # a point is always its own neighbor, even at threshold 0
        for local in range(stop - start):
            dists[local, start + local] = 0.0
        within = dists <= params.distance_threshold
        within[:, is_zero] = False
        within[is_zero[start:stop], :] = False
        for local in range(stop - start):
            within[local, start + local] = True
        neighbor_counts[start:stop] = within @ multiplicity
        neighbor_lists.extend(np.flatnonzero(row) for row in within)

    core = (neighbor_counts >= params.min_cluster_size) & ~is_zero

    labels_unique = np.full(n_unique, -1, dtype=np.int64)
    if np.any(core):
        uf = _UnionFind(n_unique)
        for i in np.flatnonzero(core):
            for j in neighbor_lists[i]:
                if j > i and core[j]:
                    uf.union(i, int(j))
        roots: dict[int, int] = {}
        for i in np.flatnonzero(core):
            root = uf.find(i)
            if root not in roots:
                roots[root] = len(roots)
            labels_unique[i] = roots[root]
        # border points: nearest core neighbor's cluster
        for i in range(n_unique):
            if core[i] or is_zero[i]:
                continue
            candidates = [int(j) for j in neighbor_lists[i] if core[j]]
            if candidates:
                cand_d = _cosine_distance_matrix(
                    unique_vecs[i : i + 1], unique_vecs[candidates]
                )[0]
                labels_unique[i] = labels_unique[candidates[int(np.argmin(cand_d))]]
        n_clusters = len(roots)
    else:
        # no density structure at all: one catch-all category
        labels_unique[:] = 0
        n_clusters = 1

    centroids = np.zeros((n_clusters, unique_vecs.shape[1]), dtype=np.float64)
    member_counts = np.zeros(n_clusters, dtype=np.int64)
    for cat in range(n_clusters):
        members = labels_unique == cat
        weights = multiplicity[members].astype(np.float64)
        mean = weights @ unique_vecs[members] / weights.sum()
        norm = np.linalg.norm(mean)
        centroids[cat] = mean / norm if norm > 0 else mean
        member_counts[cat] = multiplicity[members].sum()

    noise_unique = labels_unique == -1
    if np.any(noise_unique):
        largest = int(np.argmax(member_counts))
        for i in np.flatnonzero(noise_unique):
            if is_zero[i]:
                labels_unique[i] = largest
            else:
                d = _cosine_distance_matrix(unique_vecs[i : i + 1], centroids)[0]
                labels_unique[i] = int(np.argmin(d))
            member_counts[labels_unique[i]] += multiplicity[i]

    labels = labels_unique[inverse]
    noise_mask = noise_unique[inverse]
    categories = [
        Category(category_id=cat, centroid=centroids[cat], member_count=int(member_counts[cat]))
        for cat in range(n_clusters)
    ]
    return Codebook(categories=categories, reducer=reducer), labels, noise_mask


def fit_codebook(
    reduced: list[EmbeddingVector],
    params: ClusterParams = ClusterParams(),
    reducer: ReducerSpec | None = None,
) -> Codebook:
    codebook, _, _ = fit_codebook_detailed(reduced, params, reducer)
    return codebook


@dataclass
class Quantizer:
    """Fitted text-to-category mapper for one record field."""

    field_name: str
    embedder: EmbedderConfig
    codebook: Codebook
    # transport client for mode "remote"; never serialized
    remote_client: RemoteEmbedder | None = field(default=None, compare=False, repr=False)

    def assign(self, text: CleanText) -> int:
        """Nearest centroid by cosine distance; ties break toward the
        smallest category id; degenerate vectors take the largest category."""
        return self.assign_with_distance(text)[0]

    def assign_with_distance(self, text: CleanText) -> tuple[int, float]:
        vector = embed_text(text, self.embedder, self.remote_client)
        reduced = self.codebook.reducer.apply(vector.values)
        centroids = np.stack([c.centroid for c in self.codebook.categories])
        if not np.any(reduced):
            cat = self.codebook.largest_category_id()
            return cat, 1.0
        dists = _cosine_distance_matrix(reduced[None, :], centroids)[0]
        cat = int(np.argmin(dists))
        return cat, float(dists[cat])

    def to_dict(self) -> dict:
        return {
            "field_name": self.field_name,
            "embedder": {"dim": self.embedder.dim, "mode": self.embedder.mode, "url": self.embedder.url},
            "codebook": self.codebook.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Quantizer":
        return cls(
            field_name=data["field_name"],
            embedder=EmbedderConfig(
                dim=data["embedder"]["dim"],
                mode=data["embedder"]["mode"],
                url=data["embedder"]["url"],
            ),
            codebook=Codebook.from_dict(data["codebook"]),
        )


@dataclass(frozen=True)
class QuantizerParams:
    """Everything needed to fit one field's quantizer deterministically."""

    embed_dim: int = DEFAULT_EMBED_DIM
    reduced_dim: int = DEFAULT_REDUCED_DIM
    seed: int = 0
    cluster: ClusterParams = field(default_factory=ClusterParams)


def fit_quantizer(
    field_name: str,
    texts: list[CleanText],
    params: QuantizerParams = QuantizerParams(),
    embedder: EmbedderConfig | None = None,
    remote_client: RemoteEmbedder | None = None,
) -> Quantizer:
    """Embed, reduce and cluster one field's cleaned training texts."""
    config = embedder or EmbedderConfig(dim=params.embed_dim)
    if config.mode == "remote":
        client = remote_client or RemoteEmbedder(config.url)
        raw = client.embed_batch([t.joined for t in texts])
        embedded = []
        for values in raw:
            norm = np.linalg.norm(values)
            embedded.append(
                EmbeddingVector(values=values / norm if norm > 0 else values, dim=config.dim)
            )
    else:
        client = None
        embedded = [embed(t, config) for t in texts]
    reduced, spec = reduce(embedded, params.reduced_dim, params.seed)
    codebook = fit_codebook(reduced, params.cluster, reducer=spec)
    return Quantizer(
        field_name=field_name, embedder=config, codebook=codebook, remote_client=client
    )
