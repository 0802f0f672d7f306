"""Joint training loop: initialization, graph construction, and the
three-block alternation (projection/basis, coefficients, dictionary).

Per outer iteration the loop improves P and M with the coefficient
matrix and dictionary fixed, re-solves the coefficients, then updates
the dictionary, tracking a per-term objective breakdown.  Coefficient
graphs are built once up front from a short preliminary run without the
coefficient-graph term; projection graphs come from the raw features
with the correlation metric.  Everything is deterministic given the
seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .coding import (
    CoderParams,
    CodingMatrix,
    code_l2_batch,
    coefficient_graph_term,
    update_training_coeffs,
)
from .datasets import LabeledDataset
from .dictionary import (
    Dictionary,
    ranges_from_counts,
    reconstruction_terms,
    update_dictionary,
)
from .errors import ValidationError
from .graphs import (
    DiscriminativeGraph,
    GraphParams,
    build_intrinsic_graph,
    build_penalty_graph,
)
from .projection import (
    ProjectionModel,
    ProjectionParams,
    projection_graph_term,
    random_unit_columns,
    update_projection,
)


@dataclass
class Hyperparams:
    """Flat bundle of every training knob (the CLI config mirrors this).

    lambda2=None resolves to 0.001 * N / 700 at training time;
    atoms_per_class=None gives each class half its training samples
    (at least one); q=None splits the projection rows at s_p // 2.
    """

    s_p: int | None = None
    q: int | None = None
    alpha1: float = 1.0
    alpha2: float = 1.0
    alpha3: float = 0.05
    beta: float = 0.7
    lambda1: float = 5e-6
    lambda2: float | None = None
    sigma: float = 0.05
    k1: int = 5
    k2: int = 30
    k2_proj: int = 20
    T: int = 30
    T_pre: int = 3
    tol: float = 1e-5
    seed: int = 0
    atoms_per_class: int | list[int] | None = None
    learn_projection: bool = True
    # solver knobs
    coder_max_iters: int = 100
    coder_max_sweeps: int = 10
    coder_tol: float = 1e-6
    prox_tau: float = 0.1
    trust_radius: float = 1.0
    proj_iters: int = 10
    epsilon_div: float = 1e-12

    def __post_init__(self):
        if self.T < 1 or self.T_pre < 0:
            raise ValidationError("iteration counts must be positive")
        if self.tol <= 0:
            raise ValidationError("tol must be positive")
        for name in ("alpha1", "alpha2", "alpha3", "beta", "lambda1", "sigma"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be non-negative")
        if self.k1 < 1 or self.k2 < 1 or self.k2_proj < 1:
            raise ValidationError("neighbor counts must be positive")


@dataclass
class GraphSet:
    """The four fixed training graphs (coefficient side may be absent
    while the preliminary run bootstraps them)."""

    coef_intrinsic: DiscriminativeGraph | None
    coef_penalty: DiscriminativeGraph | None
    proj_intrinsic: DiscriminativeGraph
    proj_penalty: DiscriminativeGraph


@dataclass
class ObjectiveBreakdown:
    """Weighted objective terms; total is their exact sum."""

    r: float
    gp: float
    gc: float
    l1: float
    total: float = field(init=False)

    def __post_init__(self):
        self.total = self.r + self.gp + self.gc + self.l1


@dataclass
class TrainedModel:
    projection: ProjectionModel
    dictionary: Dictionary
    coding: CodingMatrix
    objective_trace: list[ObjectiveBreakdown]
    hyperparams: Hyperparams | None


def resolve_lambda2(lambda2: float | None, n_samples: int) -> float:
    return 0.001 * n_samples / 700.0 if lambda2 is None else lambda2


def resolve_atom_counts(atoms_per_class, class_sizes) -> list[int]:
    if atoms_per_class is None:
        return [max(1, size // 2) for size in class_sizes]
    if isinstance(atoms_per_class, int):
        counts = [atoms_per_class] * len(class_sizes)
    else:
        counts = [int(c) for c in atoms_per_class]
        if len(counts) != len(class_sizes):
            raise ValidationError(
                f"atoms_per_class has {len(counts)} entries for {len(class_sizes)} classes"
            )
    if any(c < 1 for c in counts):
        raise ValidationError("every class needs at least one atom")
    return counts


def coder_params(hyper: Hyperparams, n_samples: int) -> CoderParams:
    return CoderParams(
        alpha2=hyper.alpha2,
        alpha3=hyper.alpha3,
        lambda1=hyper.lambda1,
        lambda2=resolve_lambda2(hyper.lambda2, n_samples),
        prox_tau=hyper.prox_tau,
        trust_radius=hyper.trust_radius,
        max_iters=hyper.coder_max_iters,
        max_sweeps=hyper.coder_max_sweeps,
        tol=hyper.coder_tol,
    )


def projection_params(hyper: Hyperparams) -> ProjectionParams:
    return ProjectionParams(
        alpha1=hyper.alpha1,
        beta=hyper.beta,
        epsilon_div=hyper.epsilon_div,
        max_iters=hyper.proj_iters,
    )


def eval_objective(projection: ProjectionModel, dictionary: Dictionary,
                   coding: CodingMatrix, dataset: LabeledDataset,
                   graphs: GraphSet, hyper: Hyperparams) -> ObjectiveBreakdown:
    """Per-term breakdown of the full joint objective (each weighted)."""
    projected = projection.P @ dataset.features
    r = sum(reconstruction_terms(dictionary, projected, coding))
    gp = hyper.alpha1 * projection_graph_term(
        projection, dataset.features, (graphs.proj_intrinsic, graphs.proj_penalty), hyper.beta
    )
    if graphs.coef_intrinsic is not None and graphs.coef_penalty is not None:
        gc = hyper.alpha2 * coefficient_graph_term(
            coding.coeffs, graphs.coef_intrinsic.laplacian, graphs.coef_penalty.laplacian
        )
    else:
        gc = 0.0
    l1 = hyper.alpha3 * float(np.abs(coding.coeffs).sum())
    return ObjectiveBreakdown(r=r, gp=gp, gc=gc, l1=l1)


def _resolve_split(hyper: Hyperparams) -> tuple[int, int]:
    if hyper.s_p is None:
        raise ValidationError("s_p (projected dimension) must be set for training")
    s_p = hyper.s_p
    if s_p < 2:
        raise ValidationError("s_p must be at least 2 so the row split is non-trivial")
    q = s_p // 2 if hyper.q is None else hyper.q
    if not (1 <= q < s_p):
        raise ValidationError(f"q={q} must satisfy 1 <= q < s_p={s_p}")
    return s_p, q


def _cold_start(dataset: LabeledDataset, hyper: Hyperparams):
    s_p, q = _resolve_split(hyper)
    counts = resolve_atom_counts(hyper.atoms_per_class, dataset.class_sizes)
    rng = np.random.default_rng(hyper.seed)
    dictionary = Dictionary(random_unit_columns(rng, s_p, sum(counts)),
                            ranges_from_counts(counts))
    M = random_unit_columns(rng, dataset.dim, s_p)
    projection = ProjectionModel(M.T.copy(), M, q)
    lam2 = resolve_lambda2(hyper.lambda2, dataset.n_samples)
    coeffs = code_l2_batch(projection.P @ dataset.features, dictionary, lam2)
    coding = CodingMatrix(coeffs, list(dictionary.class_ranges), list(dataset.class_slices))
    return projection, dictionary, coding


def _alternate(dataset, projection, dictionary, coding, graphs: GraphSet,
               hyper: Hyperparams, iters: int):
    """Run the three-block alternation, returning the updated blocks and
    the objective trace (initial state plus one entry per iteration)."""
    cp = coder_params(hyper, dataset.n_samples)
    pp = projection_params(hyper)
    if graphs.coef_intrinsic is not None and graphs.coef_penalty is not None and hyper.alpha2 != 0:
        coef_graphs = (graphs.coef_intrinsic, graphs.coef_penalty)
    else:
        coef_graphs = None
    proj_graphs = (graphs.proj_intrinsic, graphs.proj_penalty)

    trace = [eval_objective(projection, dictionary, coding, dataset, graphs, hyper)]
    for _ in range(iters):
        if hyper.learn_projection:
            projection = update_projection(
                projection, dataset, dictionary, coding, proj_graphs, pp
            )
        projected = projection.P @ dataset.features
        coding = update_training_coeffs(projected, dictionary, coef_graphs, coding, cp)
        dictionary = update_dictionary(dictionary, projected, coding)
        trace.append(eval_objective(projection, dictionary, coding, dataset, graphs, hyper))
        prev, cur = trace[-2].total, trace[-1].total
        if abs(prev - cur) <= hyper.tol * max(abs(prev), 1e-12):
            break
    return projection, dictionary, coding, trace


def initialize(dataset: LabeledDataset, hyper: Hyperparams):
    """Cold-start blocks plus the four fixed graphs.

    Projection graphs use the correlation metric on raw features; the
    coefficient graphs are built (Euclidean) from the coefficients of a
    short preliminary run with the coefficient-graph term switched off.
    """
    if dataset.n_classes < 2:
        raise ValidationError("training requires at least two classes")
    if min(dataset.class_sizes) < 1:
        raise ValidationError("every class needs at least one sample")
    projection, dictionary, coding = _cold_start(dataset, hyper)

    proj_params = GraphParams(k_intrinsic=hyper.k1, k_penalty=hyper.k2_proj,
                              metric="correlation")
    proj_intrinsic = build_intrinsic_graph(dataset.features, dataset.labels, proj_params)
    proj_penalty = build_penalty_graph(dataset.features, dataset.labels, proj_params)
    graphs = GraphSet(None, None, proj_intrinsic, proj_penalty)

    if hyper.T_pre > 0:
        pre_hyper = replace(hyper, alpha2=0.0)
        _, _, pre_coding, _ = _alternate(
            dataset, projection, dictionary, coding, graphs, pre_hyper, hyper.T_pre
        )
        coef_features = pre_coding.coeffs
    else:
        coef_features = coding.coeffs
    coef_params = GraphParams(k_intrinsic=hyper.k1, k_penalty=hyper.k2, metric="euclidean")
    graphs.coef_intrinsic = build_intrinsic_graph(coef_features, dataset.labels, coef_params)
    graphs.coef_penalty = build_penalty_graph(coef_features, dataset.labels, coef_params)

    projection, dictionary, coding = _cold_start(dataset, hyper)  # fresh, same seed
    return projection, dictionary, coding, graphs


def train(dataset: LabeledDataset, hyper: Hyperparams) -> TrainedModel:
    """Full training: initialize, alternate until the relative change of
    the total objective drops below tol or T iterations pass."""
    projection, dictionary, coding, graphs = initialize(dataset, hyper)
    projection, dictionary, coding, trace = _alternate(
        dataset, projection, dictionary, coding, graphs, hyper, hyper.T
    )
    return TrainedModel(projection, dictionary, coding, trace, hyper)
